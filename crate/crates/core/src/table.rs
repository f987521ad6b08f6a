//! Star products as explicit tables of bidifferential operators.
//!
//! A [`StarTable`] stores, per ℏ-order `i`, a bidifferential operator
//! `C_i(f,g) = Σ c_i^{αβ} · D^α f · D^β g` with exact coefficients. Order 0
//! must be the pointwise product and `C_i` may differentiate each slot at
//! most `2i` times — both enforced by [`StarTable::validate`].
//!
//! [`StarTable::moyal`] builds the closed-form constant-fiber table
//! `C_r = (1/r!)(1/2)^r Λ^{i₁j₁}…Λ^{i_rj_r} ∂_{i…}f ∂_{j…}g` used as the
//! flat-data oracle; the bivector may carry `t` and `x` dependence (the
//! formula stays a well-defined table; it is the *flat* star product only
//! when Λ is constant).
//!
//! [`separating_family`] supplies the deterministic function family used to
//! compare and extract tables: trigonometric waves on a torus, monomials on
//! an affine chart.

use std::collections::BTreeMap;

use crate::base::{BaseFunction, Chart, ChartKind};
use crate::error::{KernelError, Result};
use crate::form::FormMatrix;
use crate::ops::{
    multi_add, multi_binom, multi_total, multi_zero, multis_up_to, submultis, DiffOp, HSeries,
    Multi,
};
use crate::rat::{factorial, rat, Rat};

/// One bidifferential operator `Σ c^{αβ} D^α ⊗ D^β`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiDiffOp {
    chart: Chart,
    terms: BTreeMap<(Multi, Multi), BaseFunction>,
}

impl BiDiffOp {
    pub fn zero(chart: Chart) -> Self {
        BiDiffOp { chart, terms: BTreeMap::new() }
    }

    /// The pointwise product `(f,g) ↦ fg`.
    pub fn pointwise(chart: Chart) -> Self {
        let mut op = BiDiffOp::zero(chart);
        op.add_term(
            multi_zero(chart.dim),
            multi_zero(chart.dim),
            BaseFunction::one(chart),
        );
        op
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(Multi, Multi), &BaseFunction)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, alpha: &Multi, beta: &Multi) -> BaseFunction {
        self.terms
            .get(&(alpha.clone(), beta.clone()))
            .cloned()
            .unwrap_or_else(|| BaseFunction::zero(self.chart))
    }

    pub fn add_term(&mut self, alpha: Multi, beta: Multi, c: BaseFunction) {
        if c.is_zero() {
            return;
        }
        assert_eq!(alpha.len(), self.chart.dim, "left multi-index length");
        assert_eq!(beta.len(), self.chart.dim, "right multi-index length");
        c.chart().assert_compat(&self.chart, "BiDiffOp::add_term");
        match self.terms.entry((alpha, beta)) {
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
        self.chart.assert_compat(&other.chart, "BiDiffOp::add");
        let mut out = self.clone();
        for ((a, b), c) in &other.terms {
            out.add_term(a.clone(), b.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.map(BaseFunction::neg))
    }

    pub fn scale(&self, r: &Rat) -> Self {
        if num::traits::Zero::is_zero(r) {
            return BiDiffOp::zero(self.chart);
        }
        self.map(|c| c.scale(r))
    }

    pub fn map(&self, f: impl Fn(&BaseFunction) -> BaseFunction) -> Self {
        let mut out = BiDiffOp::zero(self.chart);
        for ((a, b), c) in &self.terms {
            out.add_term(a.clone(), b.clone(), f(c));
        }
        out
    }

    /// Swap the two slots: `C^T(f,g) = C(g,f)`.
    pub fn transpose(&self) -> Self {
        let mut out = BiDiffOp::zero(self.chart);
        for ((a, b), c) in &self.terms {
            out.add_term(b.clone(), a.clone(), c.clone());
        }
        out
    }

    /// The operator `(f, g) ↦ C(op·f, g)`, expanded by the Leibniz rule.
    pub fn precompose_left(&self, op: &DiffOp) -> Self {
        op.chart().assert_compat(&self.chart, "BiDiffOp::precompose_left");
        let mut out = BiDiffOp::zero(self.chart);
        for ((alpha, beta), c) in &self.terms {
            for (gamma, e) in op.terms() {
                // ∂^α(e · ∂^γ f) = Σ_{μ ≤ α} binom(α,μ) ∂^{α−μ}e · ∂^{μ+γ}f
                for mu in submultis(alpha) {
                    let rest: Multi = alpha.iter().zip(&mu).map(|(a, m)| a - m).collect();
                    let coeff = c.mul(&e.dx_multi(&rest)).scale(&multi_binom(alpha, &mu));
                    out.add_term(multi_add(&mu, gamma), beta.clone(), coeff);
                }
            }
        }
        out
    }

    /// The operator `(f, g) ↦ C(f, op·g)`, expanded by the Leibniz rule.
    pub fn precompose_right(&self, op: &DiffOp) -> Self {
        self.transpose().precompose_left(op).transpose()
    }

    /// The operator `(f, g) ↦ op(C(f, g))`, expanded by the Leibniz rule.
    pub fn postcompose(&self, op: &DiffOp) -> Self {
        op.chart().assert_compat(&self.chart, "BiDiffOp::postcompose");
        let mut out = BiDiffOp::zero(self.chart);
        for (mu, e) in op.terms() {
            for ((alpha, beta), c) in &self.terms {
                // ∂^μ(c·F·G) = Σ binom(μ,μ₁)·binom(μ−μ₁,μ₂) ∂^{μ₁}c·∂^{μ₂}F·∂^{μ₃}G
                for mu1 in submultis(mu) {
                    let r1: Multi = mu.iter().zip(&mu1).map(|(a, b)| a - b).collect();
                    let b1 = multi_binom(mu, &mu1);
                    let dc = e.mul(&c.dx_multi(&mu1));
                    for mu2 in submultis(&r1) {
                        let mu3: Multi = r1.iter().zip(&mu2).map(|(a, b)| a - b).collect();
                        let coeff = dc.scale(&(b1.clone() * multi_binom(&r1, &mu2)));
                        out.add_term(multi_add(alpha, &mu2), multi_add(beta, &mu3), coeff);
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, f: &BaseFunction, g: &BaseFunction) -> BaseFunction {
        f.chart().assert_compat(&self.chart, "BiDiffOp::apply (left)");
        g.chart().assert_compat(&self.chart, "BiDiffOp::apply (right)");
        let mut out = BaseFunction::zero(self.chart);
        for ((alpha, beta), c) in &self.terms {
            let df = f.dx_multi(alpha);
            if df.is_zero() {
                continue;
            }
            let dg = g.dx_multi(beta);
            if dg.is_zero() {
                continue;
            }
            out = out.add(&c.mul(&df).mul(&dg));
        }
        out
    }

    /// Largest per-slot derivative order `max(|α|, |β|)`.
    pub fn slot_order(&self) -> u32 {
        self.terms
            .keys()
            .map(|(a, b)| multi_total(a).max(multi_total(b)))
            .max()
            .unwrap_or(0)
    }

    /// The bivector matrix of the first-order⊗first-order part,
    /// antisymmetrized: `M^{ij} = ½(c^{e_i e_j} − c^{e_j e_i})`.
    pub fn antisym_first_order(&self) -> FormMatrix {
        let d = self.chart.dim;
        let mut m = FormMatrix::zero(self.chart);
        for i in 0..d {
            for j in 0..d {
                let mut ei = multi_zero(d);
                ei[i] = 1;
                let mut ej = multi_zero(d);
                ej[j] = 1;
                let c = self
                    .coefficient(&ei, &ej)
                    .sub(&self.coefficient(&ej, &ei))
                    .scale(&rat(1, 2));
                m.set(i, j, c);
            }
        }
        m
    }
}

/// A star product, stored as one bidifferential operator per ℏ-order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarTable {
    chart: Chart,
    cap: u32,
    orders: Vec<BiDiffOp>,
}

impl StarTable {
    pub fn zero(chart: Chart, cap: u32) -> Self {
        StarTable {
            chart,
            cap,
            orders: vec![BiDiffOp::zero(chart); cap as usize + 1],
        }
    }

    /// The trivial table: pointwise product, nothing above order 0.
    pub fn pointwise(chart: Chart, cap: u32) -> Self {
        let mut t = StarTable::zero(chart, cap);
        t.orders[0] = BiDiffOp::pointwise(chart);
        t
    }

    /// The constant-fiber (Moyal-type) table of a bivector:
    /// `C_r = (1/r!)(1/2)^r Σ Λ^{i₁j₁}…Λ^{i_rj_r} ∂_{i₁…i_r} ⊗ ∂_{j₁…j_r}`.
    pub fn moyal(lam: &FormMatrix, cap: u32) -> Self {
        let chart = lam.chart();
        let d = chart.dim;
        let mut t = StarTable::zero(chart, cap);
        // r-fold contraction accumulator: (α, β) → Σ Λ-products
        let mut acc: BTreeMap<(Multi, Multi), BaseFunction> = BTreeMap::new();
        acc.insert(
            (multi_zero(d), multi_zero(d)),
            BaseFunction::one(chart),
        );
        for r in 0..=cap {
            let norm = rat(1, 1i64 << r.min(62)) / factorial(r);
            for ((a, b), c) in &acc {
                t.orders[r as usize].add_term(a.clone(), b.clone(), c.scale(&norm));
            }
            if r == cap {
                break;
            }
            let mut next: BTreeMap<(Multi, Multi), BaseFunction> = BTreeMap::new();
            for ((a, b), c) in &acc {
                for i in 0..d {
                    for j in 0..d {
                        let l = lam.get(i, j);
                        if l.is_zero() {
                            continue;
                        }
                        let mut a2 = a.clone();
                        a2[i] += 1;
                        let mut b2 = b.clone();
                        b2[j] += 1;
                        let v = c.mul(l);
                        match next.entry((a2, b2)) {
                            std::collections::btree_map::Entry::Vacant(e) => {
                                e.insert(v);
                            }
                            std::collections::btree_map::Entry::Occupied(mut e) => {
                                let s = e.get().add(&v);
                                *e.get_mut() = s;
                            }
                        }
                    }
                }
            }
            acc = next;
        }
        t
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn order(&self, i: u32) -> &BiDiffOp {
        &self.orders[i as usize]
    }

    pub fn set_order(&mut self, i: u32, op: BiDiffOp) {
        op.chart().assert_compat(&self.chart, "StarTable::set_order");
        self.orders[i as usize] = op;
    }

    /// Full bilinear application on ℏ-series, truncated at the table cap.
    pub fn apply(&self, f: &HSeries, g: &HSeries) -> HSeries {
        f.chart().assert_compat(&self.chart, "StarTable::apply (left)");
        g.chart().assert_compat(&self.chart, "StarTable::apply (right)");
        assert_eq!(f.cap(), self.cap, "left ℏ-cap mismatch");
        assert_eq!(g.cap(), self.cap, "right ℏ-cap mismatch");
        let mut out = HSeries::zero(self.chart, self.cap);
        for (i, op) in self.orders.iter().enumerate() {
            if op.is_zero() {
                continue;
            }
            for a in 0..=(self.cap as usize - i) {
                if f.order(a as u32).is_zero() {
                    continue;
                }
                for b in 0..=(self.cap as usize - i - a) {
                    let v = op.apply(f.order(a as u32), g.order(b as u32));
                    if v.is_zero() {
                        continue;
                    }
                    let m = (i + a + b) as u32;
                    let cur = out.order(m).add(&v);
                    out.set_order(m, cur);
                }
            }
        }
        out
    }

    /// Star product of two plain functions as an ℏ-series.
    pub fn apply_fn(&self, f: &BaseFunction, g: &BaseFunction) -> HSeries {
        self.apply(
            &HSeries::from_fn(f, self.cap),
            &HSeries::from_fn(g, self.cap),
        )
    }

    /// Structural validity: order 0 is the pointwise product and each `C_i`
    /// differentiates each slot at most `2i` times.
    pub fn validate(&self) -> Result<()> {
        if self.orders[0] != BiDiffOp::pointwise(self.chart) {
            return Err(KernelError::Precondition(
                "star table order 0 is not the pointwise product".into(),
            ));
        }
        for (i, op) in self.orders.iter().enumerate() {
            if op.slot_order() > 2 * i as u32 {
                return Err(KernelError::Precondition(format!(
                    "star table order {i} differentiates a slot more than {} times",
                    2 * i
                )));
            }
        }
        Ok(())
    }

    /// Check `(f⋆g)⋆h = f⋆(g⋆h)` mod ℏ^{cap+1} on all triples from `family`.
    pub fn check_associative(&self, family: &[BaseFunction]) -> Result<()> {
        let lift: Vec<HSeries> = family
            .iter()
            .map(|f| HSeries::from_fn(f, self.cap))
            .collect();
        for f in &lift {
            for g in &lift {
                let fg = self.apply(f, g);
                for h in &lift {
                    let lhs = self.apply(&fg, h);
                    let rhs = self.apply(f, &self.apply(g, h));
                    if lhs != rhs {
                        return Err(KernelError::Postcondition(
                            "star table failed the associativity check".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Check `f ⋆ 1 = 1 ⋆ f = f` on the family.
    pub fn check_unital(&self, family: &[BaseFunction]) -> Result<()> {
        let one = HSeries::one(self.chart, self.cap);
        for f in family {
            let fs = HSeries::from_fn(f, self.cap);
            if self.apply(&fs, &one) != fs || self.apply(&one, &fs) != fs {
                return Err(KernelError::Postcondition(
                    "star table failed the unit check".into(),
                ));
            }
        }
        Ok(())
    }

    /// Antisymmetrized first-order part of `C₁` as a bivector matrix.
    pub fn antisym_c1(&self) -> FormMatrix {
        self.orders[1].antisym_first_order()
    }

    /// True when the two tables agree at every order `≤ k`.
    pub fn agrees_through(&self, other: &Self, k: u32) -> bool {
        self.chart
            .assert_compat(&other.chart, "StarTable::agrees_through");
        (0..=k).all(|i| self.orders[i as usize] == other.orders[i as usize])
    }

    /// Pointwise difference of two tables at one ℏ-order.
    pub fn order_difference(&self, other: &Self, i: u32) -> BiDiffOp {
        self.orders[i as usize].sub(&other.orders[i as usize])
    }

    /// Reinterpret with a lower (or equal) cap.
    pub fn truncate(&self, cap: u32) -> Self {
        assert!(cap <= self.cap, "truncate cannot raise the cap");
        StarTable {
            chart: self.chart,
            cap,
            orders: self.orders[..=cap as usize].to_vec(),
        }
    }
}

/// Deterministic separating family of test functions on the chart: the
/// constant 1 plus all canonical waves with `|k_i| ≤ bound` (torus), or all
/// monomials of total degree ≤ `bound` (affine).
pub fn separating_family(chart: Chart, bound: u32) -> Vec<BaseFunction> {
    match chart.kind {
        ChartKind::Torus => {
            let mut out = vec![BaseFunction::one(chart)];
            let b = bound as i32;
            let mut waves: Vec<Vec<i32>> = vec![vec![]];
            for _ in 0..chart.dim {
                let mut grown = Vec::new();
                for w in &waves {
                    for k in -b..=b {
                        let mut w2 = w.clone();
                        w2.push(k);
                        grown.push(w2);
                    }
                }
                waves = grown;
            }
            for w in waves {
                // keep canonical representatives only (first nonzero > 0)
                match w.iter().find(|&&c| c != 0) {
                    Some(&c) if c > 0 => {
                        out.push(BaseFunction::cos_wave(chart, w.clone()));
                        out.push(BaseFunction::sin_wave(chart, w));
                    }
                    _ => {}
                }
            }
            out
        }
        ChartKind::Affine => multis_up_to(chart.dim, bound)
            .into_iter()
            .map(|m| {
                if m.iter().all(|&e| e == 0) {
                    BaseFunction::one(chart)
                } else {
                    BaseFunction::monomial(chart, m)
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat_int;

    fn t2() -> Chart {
        Chart::torus(2, 0)
    }

    fn lam_std(chart: Chart) -> FormMatrix {
        FormMatrix::from_rat_entries(
            chart,
            &[rat_int(0), rat_int(-1), rat_int(1), rat_int(0)],
        )
    }

    #[test]
    fn moyal_table_first_orders() {
        let chart = t2();
        let t = StarTable::moyal(&lam_std(chart), 3);
        t.validate().unwrap();
        // C₀ = pointwise
        assert_eq!(*t.order(0), BiDiffOp::pointwise(chart));
        // antisym C₁ = ½·2·½Λ = ½Λ? — the antisymmetrized first-order part
        // of C₁ = ½Λ^{ij}∂_i⊗∂_j is ½Λ itself.
        assert_eq!(t.antisym_c1(), lam_std(chart).scale(&rat(1, 2)));
        // frozen value: C₁(cos x¹, sin x²) = ½ sin(x¹)cos(x²)
        let f = BaseFunction::cos_wave(chart, vec![1, 0]);
        let g = BaseFunction::sin_wave(chart, vec![0, 1]);
        let c1 = t.order(1).apply(&f, &g);
        let expect = BaseFunction::sin_wave(chart, vec![1, 0])
            .mul(&BaseFunction::cos_wave(chart, vec![0, 1]))
            .scale(&rat(1, 2));
        assert_eq!(c1, expect);
    }

    #[test]
    fn moyal_table_is_associative_and_unital() {
        let chart = t2();
        let t = StarTable::moyal(&lam_std(chart), 3);
        let family = vec![
            BaseFunction::one(chart),
            BaseFunction::cos_wave(chart, vec![1, 0]),
            BaseFunction::sin_wave(chart, vec![0, 1]),
            BaseFunction::cos_wave(chart, vec![1, 1]),
        ];
        t.check_associative(&family).unwrap();
        t.check_unital(&family).unwrap();
    }

    #[test]
    fn validation_rejects_bad_tables() {
        let chart = t2();
        let mut t = StarTable::pointwise(chart, 1);
        // C₁ with a third-order slot violates the ≤ 2i bound
        let mut bad = BiDiffOp::zero(chart);
        bad.add_term(vec![3, 0], vec![0, 0], BaseFunction::one(chart));
        t.set_order(1, bad);
        assert!(t.validate().is_err());

        let mut t2 = StarTable::zero(chart, 0);
        t2.set_order(0, BiDiffOp::zero(chart));
        assert!(t2.validate().is_err());
    }

    #[test]
    fn apply_distributes_hbar_orders() {
        let chart = t2();
        let t = StarTable::moyal(&lam_std(chart), 2);
        let f = BaseFunction::cos_wave(chart, vec![1, 0]);
        let g = BaseFunction::sin_wave(chart, vec![0, 1]);
        // (ℏf) ⋆ g = ℏ(f ⋆ g) mod ℏ³
        let hf = HSeries::from_fn(&f, 2).hbar_mul(1);
        let gs = HSeries::from_fn(&g, 2);
        let lhs = t.apply(&hf, &gs);
        let rhs = t.apply_fn(&f, &g).hbar_mul(1);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn separating_families_are_deterministic() {
        let fam = separating_family(t2(), 1);
        // 1 + (cos,sin) for canonical waves (0,1),(1,-1),(1,0),(1,1)
        assert_eq!(fam.len(), 9);
        assert_eq!(fam, separating_family(t2(), 1));
        let aff = separating_family(Chart::affine(2, 0), 2);
        assert_eq!(aff.len(), 6);
    }

    #[test]
    fn composition_helpers_expand_the_leibniz_rule() {
        let chart = t2();
        // C = second ℏ-order of a Moyal table: a genuinely second-order
        // bidifferential operator with several terms.
        let c = StarTable::moyal(&lam_std(chart), 2).order(2).clone();
        // op = cos(x¹)·∂₂² + sin(x¹+x²)·∂₁ + multiplication by sin(x²)
        let mut op = DiffOp::zero(chart);
        op.add_term(vec![0, 2], BaseFunction::cos_wave(chart, vec![1, 0]));
        op.add_term(vec![1, 0], BaseFunction::sin_wave(chart, vec![1, 1]));
        op.add_term(vec![0, 0], BaseFunction::sin_wave(chart, vec![0, 1]));
        let f = BaseFunction::cos_wave(chart, vec![1, -1]);
        let g = BaseFunction::sin_wave(chart, vec![0, 1]).add(&BaseFunction::one(chart));

        let left = c.precompose_left(&op);
        assert_eq!(left.apply(&f, &g), c.apply(&op.apply(&f), &g));
        let right = c.precompose_right(&op);
        assert_eq!(right.apply(&f, &g), c.apply(&f, &op.apply(&g)));
        let post = c.postcompose(&op);
        assert_eq!(post.apply(&f, &g), op.apply(&c.apply(&f, &g)));
    }
}
