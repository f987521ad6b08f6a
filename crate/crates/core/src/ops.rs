//! Differential operators and truncated ℏ-series over a chart.
//!
//! [`HSeries`] is a polynomial in ℏ of chart functions, truncated above a
//! cap; it represents both functions on the thickened chart (entries may
//! carry `t`) and induced objects on the leaf (t-free entries).
//!
//! [`DiffOp`] is a finite-order linear differential operator
//! `f ↦ Σ_α c_α(x,t) · D^α f` with exact composition via the Leibniz rule;
//! [`OpJet`] is an ℏ-series of such operators acting on [`HSeries`] modulo
//! the cap. Operators here are tangential by construction: there is no
//! transverse-derivative slot.

use std::collections::BTreeMap;

use num::traits::{One, Zero};

use crate::base::{BaseFunction, Chart};
use crate::error::{KernelError, Result};
use crate::rat::{binomial, Rat};

/// Multi-index of chart derivatives.
pub type Multi = Vec<u32>;

pub fn multi_zero(dim: usize) -> Multi {
    vec![0; dim]
}

pub fn multi_total(m: &Multi) -> u32 {
    m.iter().sum()
}

pub fn multi_add(a: &Multi, b: &Multi) -> Multi {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Product of componentwise binomial coefficients `Π_i C(a_i, b_i)`.
pub fn multi_binom(a: &Multi, b: &Multi) -> Rat {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| binomial(x, y))
        .fold(Rat::one(), |acc, c| acc * c)
}

/// All multi-indices `γ ≤ α` componentwise (including 0 and α).
pub fn submultis(alpha: &Multi) -> Vec<Multi> {
    let mut out: Vec<Multi> = vec![Vec::with_capacity(alpha.len())];
    for &a in alpha {
        let mut grown = Vec::with_capacity(out.len() * (a as usize + 1));
        for prefix in &out {
            for g in 0..=a {
                let mut p = prefix.clone();
                p.push(g);
                grown.push(p);
            }
        }
        out = grown;
    }
    out
}

/// All multi-indices in `dim` variables with total degree ≤ `max`, sorted.
pub fn multis_up_to(dim: usize, max: u32) -> Vec<Multi> {
    let mut out = vec![multi_zero(dim)];
    for _ in 0..max {
        let mut grown = Vec::new();
        for m in &out {
            for i in 0..dim {
                let mut m2 = m.clone();
                m2[i] += 1;
                grown.push(m2);
            }
        }
        out.extend(grown);
    }
    out.sort();
    out.dedup();
    out
}

/// Truncated polynomial in ℏ with chart-function coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HSeries {
    chart: Chart,
    cap: u32,
    orders: Vec<BaseFunction>,
}

impl HSeries {
    pub fn zero(chart: Chart, cap: u32) -> Self {
        HSeries {
            chart,
            cap,
            orders: vec![BaseFunction::zero(chart); cap as usize + 1],
        }
    }

    /// Embed a plain function at ℏ-order 0.
    pub fn from_fn(f: &BaseFunction, cap: u32) -> Self {
        let mut s = HSeries::zero(f.chart(), cap);
        s.orders[0] = f.clone();
        s
    }

    pub fn one(chart: Chart, cap: u32) -> Self {
        HSeries::from_fn(&BaseFunction::one(chart), cap)
    }

    pub fn from_orders(chart: Chart, cap: u32, orders: Vec<BaseFunction>) -> Self {
        assert_eq!(orders.len(), cap as usize + 1, "order list length != cap+1");
        for f in &orders {
            f.chart().assert_compat(&chart, "HSeries::from_orders");
        }
        HSeries { chart, cap, orders }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn order(&self, m: u32) -> &BaseFunction {
        &self.orders[m as usize]
    }

    pub fn set_order(&mut self, m: u32, f: BaseFunction) {
        f.chart().assert_compat(&self.chart, "HSeries::set_order");
        self.orders[m as usize] = f;
    }

    pub fn is_zero(&self) -> bool {
        self.orders.iter().all(BaseFunction::is_zero)
    }

    fn assert_compat(&self, other: &Self, ctx: &str) {
        self.chart.assert_compat(&other.chart, ctx);
        assert_eq!(self.cap, other.cap, "{ctx}: ℏ-cap mismatch");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_compat(other, "HSeries::add");
        HSeries {
            chart: self.chart,
            cap: self.cap,
            orders: self
                .orders
                .iter()
                .zip(&other.orders)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map(BaseFunction::neg)
    }

    pub fn scale(&self, r: &Rat) -> Self {
        self.map(|f| f.scale(r))
    }

    pub fn map(&self, f: impl Fn(&BaseFunction) -> BaseFunction) -> Self {
        HSeries {
            chart: self.chart,
            cap: self.cap,
            orders: self.orders.iter().map(f).collect(),
        }
    }

    /// Cauchy product truncated above the ℏ-cap.
    pub fn mul(&self, other: &Self) -> Self {
        self.assert_compat(other, "HSeries::mul");
        let mut out = HSeries::zero(self.chart, self.cap);
        for (i, a) in self.orders.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.orders.iter().enumerate() {
                if i + j > self.cap as usize {
                    break;
                }
                if b.is_zero() {
                    continue;
                }
                out.orders[i + j] = out.orders[i + j].add(&a.mul(b));
            }
        }
        out
    }

    /// Multiply by `ℏ^k` (shifting orders up, truncating).
    pub fn hbar_mul(&self, k: u32) -> Self {
        let mut out = HSeries::zero(self.chart, self.cap);
        for (i, a) in self.orders.iter().enumerate() {
            let j = i + k as usize;
            if j <= self.cap as usize {
                out.orders[j] = a.clone();
            }
        }
        out
    }

    pub fn dx(&self, i: usize) -> Self {
        self.map(|f| f.dx(i))
    }

    /// Reinterpret with a lower (or equal) cap.
    pub fn truncate(&self, cap: u32) -> Self {
        assert!(cap <= self.cap, "truncate cannot raise the cap");
        HSeries {
            chart: self.chart,
            cap,
            orders: self.orders[..=cap as usize].to_vec(),
        }
    }
}

/// Finite-order differential operator `Σ_α c_α D^α` on chart functions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffOp {
    chart: Chart,
    terms: BTreeMap<Multi, BaseFunction>,
}

impl DiffOp {
    pub fn zero(chart: Chart) -> Self {
        DiffOp { chart, terms: BTreeMap::new() }
    }

    pub fn identity(chart: Chart) -> Self {
        DiffOp::mult_by(&BaseFunction::one(chart))
    }

    /// Multiplication operator `f ↦ g·f`.
    pub fn mult_by(g: &BaseFunction) -> Self {
        let mut op = DiffOp::zero(g.chart());
        op.add_term(multi_zero(g.chart().dim), g.clone());
        op
    }

    /// The coordinate derivative `∂/∂x^i`.
    pub fn deriv(chart: Chart, i: usize) -> Self {
        assert!(i < chart.dim, "derivative index out of range");
        let mut m = multi_zero(chart.dim);
        m[i] = 1;
        let mut op = DiffOp::zero(chart);
        op.add_term(m, BaseFunction::one(chart));
        op
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Multi, &BaseFunction)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, alpha: &Multi) -> BaseFunction {
        self.terms
            .get(alpha)
            .cloned()
            .unwrap_or_else(|| BaseFunction::zero(self.chart))
    }

    /// Highest total derivative order present.
    pub fn order(&self) -> u32 {
        self.terms.keys().map(multi_total).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, alpha: Multi, c: BaseFunction) {
        if c.is_zero() {
            return;
        }
        assert_eq!(alpha.len(), self.chart.dim, "multi-index length");
        c.chart().assert_compat(&self.chart, "DiffOp::add_term");
        match self.terms.entry(alpha) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().add(&c);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.chart.assert_compat(&other.chart, "DiffOp::add");
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(a.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map(BaseFunction::neg)
    }

    pub fn scale(&self, r: &Rat) -> Self {
        if r.is_zero() {
            return DiffOp::zero(self.chart);
        }
        self.map(|c| c.scale(r))
    }

    /// Left-multiply every coefficient by `g` (the operator `g·A`).
    pub fn scale_fn(&self, g: &BaseFunction) -> Self {
        self.map(|c| c.mul(g))
    }

    pub fn map(&self, f: impl Fn(&BaseFunction) -> BaseFunction) -> Self {
        let mut out = DiffOp::zero(self.chart);
        for (a, c) in &self.terms {
            out.add_term(a.clone(), f(c));
        }
        out
    }

    pub fn apply(&self, f: &BaseFunction) -> BaseFunction {
        f.chart().assert_compat(&self.chart, "DiffOp::apply");
        let mut out = BaseFunction::zero(self.chart);
        for (alpha, c) in &self.terms {
            out = out.add(&c.mul(&f.dx_multi(alpha)));
        }
        out
    }

    pub fn apply_hseries(&self, f: &HSeries) -> HSeries {
        f.map(|g| self.apply(g))
    }

    /// Exact composition `(self ∘ other)(f) = self(other(f))` by the
    /// Leibniz rule:
    /// `a_α D^α (b_β D^β f) = Σ_{γ≤α} C(α,γ) a_α (D^γ b_β) D^{α−γ+β} f`.
    pub fn compose(&self, other: &Self) -> Self {
        self.chart.assert_compat(&other.chart, "DiffOp::compose");
        let mut out = DiffOp::zero(self.chart);
        for (alpha, a) in &self.terms {
            for (beta, b) in &other.terms {
                for gamma in submultis(alpha) {
                    let db = b.dx_multi(&gamma);
                    if db.is_zero() {
                        continue;
                    }
                    let coeff = a.mul(&db).scale(&multi_binom(alpha, &gamma));
                    let rest: Multi = alpha
                        .iter()
                        .zip(&gamma)
                        .map(|(x, g)| x - g)
                        .collect();
                    out.add_term(multi_add(&rest, beta), coeff);
                }
            }
        }
        out
    }
}

/// ℏ-series of differential operators `T = Σ_m ℏ^m T_m`, truncated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpJet {
    chart: Chart,
    cap: u32,
    orders: Vec<DiffOp>,
}

impl OpJet {
    pub fn zero(chart: Chart, cap: u32) -> Self {
        OpJet {
            chart,
            cap,
            orders: vec![DiffOp::zero(chart); cap as usize + 1],
        }
    }

    pub fn identity(chart: Chart, cap: u32) -> Self {
        let mut j = OpJet::zero(chart, cap);
        j.orders[0] = DiffOp::identity(chart);
        j
    }

    pub fn from_orders(chart: Chart, cap: u32, orders: Vec<DiffOp>) -> Self {
        assert_eq!(orders.len(), cap as usize + 1, "order list length != cap+1");
        for op in &orders {
            op.chart().assert_compat(&chart, "OpJet::from_orders");
        }
        OpJet { chart, cap, orders }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn order(&self, m: u32) -> &DiffOp {
        &self.orders[m as usize]
    }

    pub fn set_order(&mut self, m: u32, op: DiffOp) {
        op.chart().assert_compat(&self.chart, "OpJet::set_order");
        self.orders[m as usize] = op;
    }

    pub fn leading_is_identity(&self) -> bool {
        self.orders[0] == DiffOp::identity(self.chart)
    }

    pub fn apply(&self, f: &HSeries) -> HSeries {
        f.chart().assert_compat(&self.chart, "OpJet::apply");
        assert_eq!(f.cap(), self.cap, "OpJet::apply: ℏ-cap mismatch");
        let mut out = HSeries::zero(self.chart, self.cap);
        for (m, op) in self.orders.iter().enumerate() {
            if op.is_zero() {
                continue;
            }
            out = out.add(&op.apply_hseries(f).hbar_mul(m as u32));
        }
        out
    }

    /// Composition mod ℏ^{cap+1}.
    pub fn compose(&self, other: &Self) -> Self {
        self.chart.assert_compat(&other.chart, "OpJet::compose");
        assert_eq!(self.cap, other.cap, "OpJet::compose: ℏ-cap mismatch");
        let mut out = OpJet::zero(self.chart, self.cap);
        for (i, a) in self.orders.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.orders.iter().enumerate() {
                if i + j > self.cap as usize {
                    break;
                }
                if b.is_zero() {
                    continue;
                }
                out.orders[i + j] = out.orders[i + j].add(&a.compose(b));
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.chart.assert_compat(&other.chart, "OpJet::add");
        assert_eq!(self.cap, other.cap, "OpJet::add: ℏ-cap mismatch");
        OpJet {
            chart: self.chart,
            cap: self.cap,
            orders: self
                .orders
                .iter()
                .zip(&other.orders)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&OpJet {
            chart: other.chart,
            cap: other.cap,
            orders: other.orders.iter().map(DiffOp::neg).collect(),
        })
    }

    /// Neumann inverse of a jet with identity leading term:
    /// `T⁻¹ = Σ_k (Id − T)^k` mod ℏ^{cap+1} (finite since `Id − T = O(ℏ)`).
    pub fn invert(&self) -> Result<OpJet> {
        if !self.leading_is_identity() {
            return Err(KernelError::Precondition(
                "operator jet inversion requires an identity leading term".into(),
            ));
        }
        let id = OpJet::identity(self.chart, self.cap);
        let n = id.sub(self); // O(ℏ)
        let mut acc = id.clone();
        let mut pow = n.clone();
        for _ in 0..self.cap {
            if pow.orders.iter().all(DiffOp::is_zero) {
                break;
            }
            acc = acc.add(&pow);
            pow = n.compose(&pow);
        }
        Ok(acc)
    }
}
