//! Scalar functions on a chart crossed with a formal transverse variable `t`.
//!
//! A [`BaseFunction`] is a finite sum of terms `c · t^k · b(x)` where `c` is
//! an exact rational, `k ≤ t_cap`, and `b` ranges over the chart's function
//! basis: monomials `x^α` on an affine chart, `cos(k·x)` / `sin(k·x)` with
//! integer wave vectors on a torus chart. Products auto-truncate above
//! `t_cap`; equality is structural on the canonical form.
//!
//! Invariants maintained by every constructor and operation:
//! - no stored coefficient is zero;
//! - every stored t-power is `≤ t_cap`;
//! - trigonometric wave vectors are canonical: non-zero with positive first
//!   non-zero component (`cos(-k·x) = cos(k·x)`, `sin(-k·x) = -sin(k·x)`,
//!   `sin(0) ≡ 0`, `cos(0) ≡ 1` stored as the explicit unit basis element);
//! - term keys are basis-compatible with the chart kind.
//!
//! Operations on operands with different chart kind, dimension, or `t_cap`
//! are programmer errors and panic.

use std::collections::BTreeMap;
use std::fmt;

use num::traits::{One, Zero};

use crate::error::{KernelError, Result};
use crate::rat::{rat_int, Rat};

/// Kind of coordinate chart carried by all symbolic objects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChartKind {
    /// Polynomial functions of global affine coordinates.
    Affine,
    /// Trigonometric polynomials on a torus.
    Torus,
}

/// Chart geometry plus the formal truncation order in `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Chart {
    pub kind: ChartKind,
    pub dim: usize,
    /// Highest retained power of `t` (inclusive).
    pub t_cap: u32,
}

impl Chart {
    pub fn new(kind: ChartKind, dim: usize, t_cap: u32) -> Self {
        assert!(dim >= 1 && dim <= 16, "chart dimension out of range: {dim}");
        Chart { kind, dim, t_cap }
    }

    pub fn torus(dim: usize, t_cap: u32) -> Self {
        Chart::new(ChartKind::Torus, dim, t_cap)
    }

    pub fn affine(dim: usize, t_cap: u32) -> Self {
        Chart::new(ChartKind::Affine, dim, t_cap)
    }

    /// Same chart with a different truncation order.
    pub fn with_t_cap(self, t_cap: u32) -> Self {
        Chart { t_cap, ..self }
    }

    pub fn assert_compat(&self, other: &Chart, ctx: &str) {
        assert_eq!(
            self, other,
            "{ctx}: incompatible charts (kind/dim/t_cap must all agree)"
        );
    }
}

/// One element of the chart's function basis.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum XBasis {
    /// The constant function 1 (either chart kind).
    One,
    /// Affine monomial `x^α` with `α ≠ 0`.
    Mono(Vec<u32>),
    /// `cos(k·x)` with canonical `k ≠ 0`.
    Cos(Vec<i32>),
    /// `sin(k·x)` with canonical `k ≠ 0`.
    Sin(Vec<i32>),
}

impl XBasis {
    fn check_chart(&self, chart: &Chart) {
        match self {
            XBasis::One => {}
            XBasis::Mono(a) => {
                assert_eq!(chart.kind, ChartKind::Affine, "monomial basis on a torus chart");
                assert_eq!(a.len(), chart.dim, "monomial exponent length != chart dim");
                assert!(a.iter().any(|&e| e > 0), "zero monomial must be XBasis::One");
            }
            XBasis::Cos(k) | XBasis::Sin(k) => {
                assert_eq!(chart.kind, ChartKind::Torus, "trig basis on an affine chart");
                assert_eq!(k.len(), chart.dim, "wave vector length != chart dim");
                let first = k.iter().find(|&&c| c != 0);
                assert!(
                    matches!(first, Some(&c) if c > 0),
                    "non-canonical wave vector {k:?}"
                );
            }
        }
    }

    /// Text label used by the scenario/table interchange format.
    pub fn label(&self) -> String {
        fn join_i32(v: &[i32]) -> String {
            v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        }
        match self {
            XBasis::One => "const".to_string(),
            XBasis::Mono(a) => format!(
                "mono:{}",
                a.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
            ),
            XBasis::Cos(k) => format!("cos:{}", join_i32(k)),
            XBasis::Sin(k) => format!("sin:{}", join_i32(k)),
        }
    }

    /// Parse the [`label`](Self::label) grammar.
    pub fn parse_label(s: &str) -> Result<XBasis> {
        let bad = || KernelError::Schema(format!("malformed basis label {s:?}"));
        if s == "const" {
            return Ok(XBasis::One);
        }
        let (head, rest) = s.split_once(':').ok_or_else(bad)?;
        let ints = |rest: &str| -> Result<Vec<i64>> {
            rest.split(',')
                .map(|p| p.trim().parse::<i64>().map_err(|_| bad()))
                .collect()
        };
        match head {
            "mono" => {
                let v = ints(rest)?;
                if v.iter().any(|&e| e < 0) {
                    return Err(bad());
                }
                Ok(XBasis::Mono(v.into_iter().map(|e| e as u32).collect()))
            }
            "cos" => Ok(XBasis::Cos(ints(rest)?.into_iter().map(|e| e as i32).collect())),
            "sin" => Ok(XBasis::Sin(ints(rest)?.into_iter().map(|e| e as i32).collect())),
            _ => Err(bad()),
        }
    }
}

/// Canonicalize a wave vector: returns `None` when `k = 0`, otherwise the
/// representative with positive leading entry and the sign picked up by
/// `sin` under the flip (`cos` is insensitive to it).
fn canon_wave(k: Vec<i32>) -> Option<(Vec<i32>, i32)> {
    match k.iter().find(|&&c| c != 0) {
        None => None,
        Some(&c) if c > 0 => Some((k, 1)),
        Some(_) => Some((k.iter().map(|&c| -c).collect(), -1)),
    }
}

/// Sparse exact function of `(x, t)` on a chart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseFunction {
    chart: Chart,
    terms: BTreeMap<(u32, XBasis), Rat>,
}

impl BaseFunction {
    /// The zero function.
    pub fn zero(chart: Chart) -> Self {
        BaseFunction { chart, terms: BTreeMap::new() }
    }

    /// The constant function `c`.
    pub fn constant(chart: Chart, c: Rat) -> Self {
        let mut f = BaseFunction::zero(chart);
        f.add_term(0, XBasis::One, c);
        f
    }

    /// The constant function 1.
    pub fn one(chart: Chart) -> Self {
        BaseFunction::constant(chart, rat_int(1))
    }

    /// A single term `c · t^k · b(x)`; non-canonical trig data is normalized.
    pub fn term(chart: Chart, tpow: u32, basis: XBasis, c: Rat) -> Self {
        let mut f = BaseFunction::zero(chart);
        match basis {
            XBasis::Cos(k) => match canon_wave(k) {
                None => f.add_term(tpow, XBasis::One, c),
                Some((k, _)) => f.add_term(tpow, XBasis::Cos(k), c),
            },
            XBasis::Sin(k) => match canon_wave(k) {
                None => {}
                Some((k, s)) => f.add_term(tpow, XBasis::Sin(k), c * rat_int(s as i64)),
            },
            XBasis::Mono(a) if a.iter().all(|&e| e == 0) => f.add_term(tpow, XBasis::One, c),
            b => f.add_term(tpow, b, c),
        }
        f
    }

    /// `cos(k·x)` (torus chart).
    pub fn cos_wave(chart: Chart, k: Vec<i32>) -> Self {
        BaseFunction::term(chart, 0, XBasis::Cos(k), rat_int(1))
    }

    /// `sin(k·x)` (torus chart).
    pub fn sin_wave(chart: Chart, k: Vec<i32>) -> Self {
        BaseFunction::term(chart, 0, XBasis::Sin(k), rat_int(1))
    }

    /// `x^α` (affine chart).
    pub fn monomial(chart: Chart, alpha: Vec<u32>) -> Self {
        BaseFunction::term(chart, 0, XBasis::Mono(alpha), rat_int(1))
    }

    /// A canonical non-constant function of the `i`-th coordinate, valid on
    /// either chart kind: `cos(x^{i+1})` on a torus, `x^{i+1}` on an affine
    /// chart. Used to exercise x-dependence in identity checks.
    pub fn cos_wave_or_linear(chart: Chart, i: usize) -> Self {
        assert!(i < chart.dim, "coordinate index out of range");
        match chart.kind {
            ChartKind::Torus => {
                let mut k = vec![0i32; chart.dim];
                k[i] = 1;
                BaseFunction::cos_wave(chart, k)
            }
            ChartKind::Affine => {
                let mut a = vec![0u32; chart.dim];
                a[i] = 1;
                BaseFunction::monomial(chart, a)
            }
        }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterate terms in canonical (deterministic) order.
    pub fn terms(&self) -> impl Iterator<Item = (&(u32, XBasis), &Rat)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Add `c · t^k · b` in place, keeping the canonical form. The basis
    /// element must already be canonical (internal helper).
    fn add_term(&mut self, tpow: u32, basis: XBasis, c: Rat) {
        if c.is_zero() || tpow > self.chart.t_cap {
            return;
        }
        basis.check_chart(&self.chart);
        match self.terms.entry((tpow, basis)) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.chart.assert_compat(&other.chart, "BaseFunction::add");
        let mut out = self.clone();
        for ((k, b), c) in &other.terms {
            out.add_term(*k, b.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -c.clone();
        }
        out
    }

    pub fn scale(&self, r: &Rat) -> Self {
        if r.is_zero() {
            return BaseFunction::zero(self.chart);
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= r.clone();
        }
        out
    }

    /// Pointwise product, truncated above `t_cap`.
    pub fn mul(&self, other: &Self) -> Self {
        self.chart.assert_compat(&other.chart, "BaseFunction::mul");
        let mut out = BaseFunction::zero(self.chart);
        for ((k1, b1), c1) in &self.terms {
            for ((k2, b2), c2) in &other.terms {
                let tpow = k1 + k2;
                if tpow > self.chart.t_cap {
                    continue;
                }
                let c = c1.clone() * c2.clone();
                mul_basis(&mut out, tpow, b1, b2, c);
            }
        }
        out
    }

    /// Partial derivative in the chart coordinate `x^i`.
    pub fn dx(&self, i: usize) -> Self {
        assert!(i < self.chart.dim, "coordinate index out of range");
        let mut out = BaseFunction::zero(self.chart);
        for ((k, b), c) in &self.terms {
            match b {
                XBasis::One => {}
                XBasis::Mono(a) => {
                    if a[i] > 0 {
                        let mut a2 = a.clone();
                        a2[i] -= 1;
                        let factor = rat_int(a[i] as i64);
                        let basis = if a2.iter().all(|&e| e == 0) {
                            XBasis::One
                        } else {
                            XBasis::Mono(a2)
                        };
                        out.add_term(*k, basis, c.clone() * factor);
                    }
                }
                XBasis::Cos(w) => {
                    // d/dx_i cos(k·x) = -k_i sin(k·x)
                    if w[i] != 0 {
                        out.add_term(*k, XBasis::Sin(w.clone()), c.clone() * rat_int(-(w[i] as i64)));
                    }
                }
                XBasis::Sin(w) => {
                    // d/dx_i sin(k·x) = k_i cos(k·x)
                    if w[i] != 0 {
                        out.add_term(*k, XBasis::Cos(w.clone()), c.clone() * rat_int(w[i] as i64));
                    }
                }
            }
        }
        out
    }

    /// Iterated derivative `D^ν`.
    pub fn dx_multi(&self, nu: &[u32]) -> Self {
        assert_eq!(nu.len(), self.chart.dim, "derivative multi-index length");
        let mut out = self.clone();
        for (i, &n) in nu.iter().enumerate() {
            for _ in 0..n {
                out = out.dx(i);
            }
        }
        out
    }

    /// Multiply by `t^k` (truncating).
    pub fn t_mul(&self, k: u32) -> Self {
        let mut out = BaseFunction::zero(self.chart);
        for ((k0, b), c) in &self.terms {
            out.add_term(k0 + k, b.clone(), c.clone());
        }
        out
    }

    /// Coefficient of `t^k` as a t-free function on the same chart.
    pub fn t_slice(&self, k: u32) -> Self {
        let mut out = BaseFunction::zero(self.chart);
        for ((k0, b), c) in &self.terms {
            if *k0 == k {
                out.add_term(0, b.clone(), c.clone());
            }
        }
        out
    }

    /// Drop all terms with t-power above `cap`.
    pub fn t_truncate(&self, cap: u32) -> Self {
        let mut out = self.clone();
        out.terms.retain(|(k, _), _| *k <= cap);
        out
    }

    /// Lowest t-power present, if any.
    pub fn t_order(&self) -> Option<u32> {
        self.terms.keys().map(|(k, _)| *k).min()
    }

    /// True when the function is constant in `x` (may still depend on `t`).
    pub fn is_x_constant(&self) -> bool {
        self.terms.keys().all(|(_, b)| *b == XBasis::One)
    }

    /// Value of the x-constant, t-free part.
    pub fn constant_part(&self) -> Rat {
        self.terms
            .get(&(0, XBasis::One))
            .cloned()
            .unwrap_or_else(Rat::zero)
    }

    /// Reinterpret on a chart with identical kind/dim but different `t_cap`;
    /// truncates when shrinking.
    pub fn with_t_cap(&self, t_cap: u32) -> Self {
        let mut out = BaseFunction::zero(self.chart.with_t_cap(t_cap));
        for ((k, b), c) in &self.terms {
            out.add_term(*k, b.clone(), c.clone());
        }
        out
    }

    /// Exact upper bound for `sup_{x ∈ T^d, |t| ≤ 1} |D^ν ∂_t^l self|`,
    /// summing `|c| · k!/(k-l)! · Π_i |k_i|^{ν_i}` over terms (torus charts
    /// only). The `|t| ≤ 1` domain matches every evaluation the asymptotic
    /// realization performs, since its cutoff scales always exceed 1.
    pub fn coeff_sup_bound(&self, nu: &[u32], l: u32) -> Result<Rat> {
        if self.chart.kind != ChartKind::Torus {
            return Err(KernelError::Precondition(
                "coeff_sup_bound requires a torus chart".into(),
            ));
        }
        assert_eq!(nu.len(), self.chart.dim, "derivative multi-index length");
        let mut acc = Rat::zero();
        for ((k, b), c) in &self.terms {
            if *k < l {
                continue;
            }
            // k!/(k-l)! = falling factorial
            let mut factor = Rat::one();
            for j in 0..l {
                factor *= rat_int((*k - j) as i64);
            }
            let wave: &[i32] = match b {
                XBasis::One => &[],
                XBasis::Cos(w) | XBasis::Sin(w) => w,
                XBasis::Mono(_) => unreachable!("torus chart holds no monomials"),
            };
            let mut mode = Rat::one();
            for (i, &n) in nu.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let ki = wave.get(i).copied().unwrap_or(0).unsigned_abs() as i64;
                if ki == 0 {
                    mode = Rat::zero();
                    break;
                }
                for _ in 0..n {
                    mode *= rat_int(ki);
                }
            }
            acc += crate::rat::rat_abs(c) * factor * mode;
        }
        Ok(acc)
    }

    /// Evaluate at a numeric point (`x` chart coordinates, real `t`).
    pub fn eval_f64(&self, x: &[f64], t: f64) -> f64 {
        assert_eq!(x.len(), self.chart.dim, "evaluation point length");
        let mut acc = 0.0;
        for ((k, b), c) in &self.terms {
            let tv = t.powi(*k as i32);
            let bv = match b {
                XBasis::One => 1.0,
                XBasis::Mono(a) => a
                    .iter()
                    .enumerate()
                    .map(|(i, &e)| x[i].powi(e as i32))
                    .product(),
                XBasis::Cos(w) => phase(w, x).cos(),
                XBasis::Sin(w) => phase(w, x).sin(),
            };
            acc += crate::rat::rat_to_f64(c) * tv * bv;
        }
        acc
    }

    /// Substitute `t ↦ ℏ` for jets: returns the list of t-slices
    /// `[f_0, ..., f_n]` as t-free functions, erroring when `n > t_cap`.
    pub fn t_slices(&self, n: u32) -> Result<Vec<BaseFunction>> {
        if n > self.chart.t_cap {
            return Err(KernelError::Precondition(format!(
                "jet order {n} exceeds t_cap {}",
                self.chart.t_cap
            )));
        }
        let flat = self.chart.with_t_cap(0);
        Ok((0..=n)
            .map(|k| {
                let mut out = BaseFunction::zero(flat);
                for ((k0, b), c) in &self.terms {
                    if *k0 == k {
                        out.add_term(0, b.clone(), c.clone());
                    }
                }
                out
            })
            .collect())
    }
}

fn phase(w: &[i32], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum()
}

/// Accumulate the canonical product of two basis elements into `out`.
fn mul_basis(out: &mut BaseFunction, tpow: u32, b1: &XBasis, b2: &XBasis, c: Rat) {
    use XBasis::*;
    match (b1, b2) {
        (One, One) => out.add_term(tpow, One, c),
        (One, b) | (b, One) => out.add_term(tpow, b.clone(), c),
        (Mono(a), Mono(b)) => {
            let sum: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            out.add_term(tpow, Mono(sum), c);
        }
        // Product-to-sum identities; each half carries coefficient c/2.
        (Cos(a), Cos(b)) => {
            let half = c / rat_int(2);
            add_cos(out, tpow, wave_sub(a, b), half.clone());
            add_cos(out, tpow, wave_add(a, b), half);
        }
        (Sin(a), Sin(b)) => {
            let half = c / rat_int(2);
            add_cos(out, tpow, wave_sub(a, b), half.clone());
            add_cos(out, tpow, wave_add(a, b), -half);
        }
        (Sin(a), Cos(b)) => {
            let half = c / rat_int(2);
            add_sin(out, tpow, wave_add(a, b), half.clone());
            add_sin(out, tpow, wave_sub(a, b), half);
        }
        (Cos(a), Sin(b)) => {
            let half = c / rat_int(2);
            add_sin(out, tpow, wave_add(a, b), half.clone());
            add_sin(out, tpow, wave_sub(a, b), -half);
        }
        (Mono(_), _) | (_, Mono(_)) => unreachable!("mixed chart bases cannot occur"),
    }
}

fn wave_add(a: &[i32], b: &[i32]) -> Vec<i32> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn wave_sub(a: &[i32], b: &[i32]) -> Vec<i32> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn add_cos(out: &mut BaseFunction, tpow: u32, k: Vec<i32>, c: Rat) {
    match canon_wave(k) {
        None => out.add_term(tpow, XBasis::One, c),
        Some((k, _)) => out.add_term(tpow, XBasis::Cos(k), c),
    }
}

fn add_sin(out: &mut BaseFunction, tpow: u32, k: Vec<i32>, c: Rat) {
    match canon_wave(k) {
        None => {}
        Some((k, s)) => out.add_term(tpow, XBasis::Sin(k), c * rat_int(s as i64)),
    }
}

impl fmt::Display for BaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((k, b), c) in &self.terms {
            let neg = c < &Rat::zero();
            let mag = crate::rat::rat_abs(c);
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut pieces: Vec<String> = Vec::new();
            if !mag.is_one() || (*k == 0 && *b == XBasis::One) {
                pieces.push(crate::rat::fmt_rat(&mag));
            }
            if *k > 0 {
                pieces.push(if *k == 1 { "t".into() } else { format!("t^{k}") });
            }
            match b {
                XBasis::One => {}
                XBasis::Mono(a) => {
                    for (i, &e) in a.iter().enumerate() {
                        if e == 1 {
                            pieces.push(format!("x{}", i + 1));
                        } else if e > 1 {
                            pieces.push(format!("x{}^{}", i + 1, e));
                        }
                    }
                }
                XBasis::Cos(w) => pieces.push(format!("cos({})", fmt_wave(w))),
                XBasis::Sin(w) => pieces.push(format!("sin({})", fmt_wave(w))),
            }
            write!(f, "{}", pieces.join("*"))?;
        }
        Ok(())
    }
}

fn fmt_wave(w: &[i32]) -> String {
    let mut out = String::new();
    for (i, &k) in w.iter().enumerate() {
        if k == 0 {
            continue;
        }
        if !out.is_empty() {
            out.push_str(if k > 0 { "+" } else { "-" });
        } else if k < 0 {
            out.push('-');
        }
        let a = k.unsigned_abs();
        if a != 1 {
            out.push_str(&a.to_string());
        }
        out.push_str(&format!("x{}", i + 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    fn t2() -> Chart {
        Chart::torus(2, 4)
    }

    #[test]
    fn cos_squared_halves() {
        // cos(x1) · cos(x1) = 1/2 + 1/2 cos(2 x1)
        let c = BaseFunction::cos_wave(t2(), vec![1, 0]);
        let p = c.mul(&c);
        let mut expect = BaseFunction::constant(t2(), rat(1, 2));
        expect = expect.add(&BaseFunction::term(t2(), 0, XBasis::Cos(vec![2, 0]), rat(1, 2)));
        assert_eq!(p, expect);
    }

    #[test]
    fn derivative_of_t_times_sin() {
        // ∂_1 (t sin(x1)) = t cos(x1)
        let f = BaseFunction::term(t2(), 1, XBasis::Sin(vec![1, 0]), rat_int(1));
        let expect = BaseFunction::term(t2(), 1, XBasis::Cos(vec![1, 0]), rat_int(1));
        assert_eq!(f.dx(0), expect);
    }

    #[test]
    fn t_truncation_annihilates_high_powers() {
        // t^2 · t^3 = 0 when t_cap = 4
        let a = BaseFunction::term(t2(), 2, XBasis::One, rat_int(1));
        let b = BaseFunction::term(t2(), 3, XBasis::One, rat_int(1));
        assert!(a.mul(&b).is_zero());
    }

    #[test]
    fn sine_canonicalization_flips_sign() {
        // sin(-x1 + 0·x2) = -sin(x1)
        let f = BaseFunction::term(t2(), 0, XBasis::Sin(vec![-1, 0]), rat_int(1));
        let expect = BaseFunction::term(t2(), 0, XBasis::Sin(vec![1, 0]), rat_int(-1));
        assert_eq!(f, expect);
    }

    #[test]
    fn product_to_sum_with_zero_difference() {
        // sin(x1)·cos(x1) = 1/2 sin(2x1); the sin(0) half drops.
        let s = BaseFunction::sin_wave(t2(), vec![1, 0]);
        let c = BaseFunction::cos_wave(t2(), vec![1, 0]);
        let expect = BaseFunction::term(t2(), 0, XBasis::Sin(vec![2, 0]), rat(1, 2));
        assert_eq!(s.mul(&c), expect);
    }

    #[test]
    fn sup_bound_examples() {
        // |∂_1 (3 cos(2x1))| ≤ 3·2 = 6
        let f = BaseFunction::term(t2(), 0, XBasis::Cos(vec![2, 0]), rat_int(3));
        assert_eq!(f.coeff_sup_bound(&[1, 0], 0).unwrap(), rat_int(6));
        // constants die under any x-derivative
        let c = BaseFunction::constant(t2(), rat_int(5));
        assert_eq!(c.coeff_sup_bound(&[1, 0], 0).unwrap(), rat_int(0));
        // |cos x1 + sin x2| ≤ 2 with no derivatives
        let g = BaseFunction::cos_wave(t2(), vec![1, 0])
            .add(&BaseFunction::sin_wave(t2(), vec![0, 1]));
        assert_eq!(g.coeff_sup_bound(&[0, 0], 0).unwrap(), rat_int(2));
    }

    #[test]
    fn affine_monomial_arithmetic() {
        let a2 = Chart::affine(2, 2);
        let x = BaseFunction::monomial(a2, vec![1, 0]);
        let y = BaseFunction::monomial(a2, vec![0, 1]);
        let p = x.mul(&y).add(&x.mul(&x));
        // ∂_1 (xy + x^2) = y + 2x
        let expect = y.add(&x.scale(&rat_int(2)));
        assert_eq!(p.dx(0), expect);
    }

    #[test]
    fn labels_round_trip() {
        for b in [
            XBasis::One,
            XBasis::Mono(vec![2, 1]),
            XBasis::Cos(vec![2, 0]),
            XBasis::Sin(vec![1, -3]),
        ] {
            assert_eq!(XBasis::parse_label(&b.label()).unwrap(), b);
        }
    }

    #[test]
    fn eval_matches_structure() {
        let f = BaseFunction::term(t2(), 1, XBasis::Cos(vec![2, 0]), rat(1, 2));
        let x = [0.3, 0.9];
        let v = f.eval_f64(&x, 0.5);
        assert!((v - 0.5 * 0.5 * (2.0 * 0.3f64).cos()).abs() < 1e-15);
    }
}
