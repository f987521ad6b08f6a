//! Numerical realization of a Borel-type lemma for finite sequences of
//! differential forms: given `α₀, …, α_N`, build the smooth sum
//! `f(t) = Σ_n (α_n/n!) tⁿ φ(λ_n t)` whose t-derivatives at `0` are exactly
//! the `α_n`, with certified cutoff scales
//! `λ_n = max{1, 2ⁿ K_n M_n Σ_{p=0}^{n−1} C(n−1,p)/(n−p)!}`.
//!
//! `K_n` bounds `Σ_{|ν| ≤ n} sup‖D^ν α_n‖` by exact rational arithmetic on
//! the trigonometric coefficients (torus charts only — affine polynomial
//! coefficients are unbounded); `M_n = Σ_{j ≤ n} sup|φ^{(j)}|` is estimated
//! by dense-grid maxima of the analytically differentiated bump (Taylor-mode
//! differentiation of the defining formula, so no finite differencing), with
//! a recorded safety factor.  The choice forces the per-term certificates
//! `sup ‖D^ν ∂_t^l f_n‖ ≤ 2^{−n}` for `l + |ν| ≤ n − 1`, which stand in for
//! the convergence argument of the infinite construction.
//!
//! Everything upstream of evaluation stays exact: the sequences carry
//! rational coefficients, and the d-relation preconditions of
//! [`realize_triple`] are checked symbolically before any float appears.

use crate::base::{BaseFunction, Chart, ChartKind};
use crate::error::{KernelError, Result};
use crate::form::QForm;
use crate::ops::{multi_total, multis_up_to};
use crate::rat::{binomial, factorial, rat_to_f64, Rat};
use num::Zero;
use std::collections::BTreeMap;

/// Below this argument `ψ(u) = exp(−1/u)` is treated as identically zero:
/// `exp(−1000) ≈ 10^{−435}` stays negligible against every polynomial factor
/// the truncated Taylor arithmetic can produce at the orders we use.
const PSI_CUTOFF: f64 = 1e-3;

/// Smooth plateau function: `1` on `|t| ≤ ½`, `0` on `|t| ≥ 1`, strictly
/// between in the transition band, built from `ψ(u) = exp(−1/u)` (for
/// `u > 0`, else `0`) as `φ(t) = ψ(2(1−|t|)) / (ψ(2(1−|t|)) + ψ(2|t|−1))`.
/// The plateau values are exact: one summand vanishes identically there.
pub fn bump(t: f64) -> f64 {
    fn psi(u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            (-1.0 / u).exp()
        }
    }
    let a = psi(2.0 * (1.0 - t.abs()));
    if a == 0.0 {
        return 0.0;
    }
    let b = psi(2.0 * t.abs() - 1.0);
    a / (a + b)
}

/// Truncated Taylor series in `t − t₀` with `f64` coefficients; the
/// arithmetic below (Cauchy product, reciprocal, exponential recurrence)
/// differentiates the bump analytically to any order.
#[derive(Clone, Debug)]
struct Jet1 {
    c: Vec<f64>,
}

impl Jet1 {
    fn constant(v: f64, len: usize) -> Self {
        let mut c = vec![0.0; len];
        c[0] = v;
        Jet1 { c }
    }

    fn linear(v0: f64, v1: f64, len: usize) -> Self {
        let mut c = vec![0.0; len];
        c[0] = v0;
        if len > 1 {
            c[1] = v1;
        }
        Jet1 { c }
    }

    fn add(&self, other: &Self) -> Self {
        Jet1 {
            c: self
                .c
                .iter()
                .zip(&other.c)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    fn neg(&self) -> Self {
        Jet1 {
            c: self.c.iter().map(|a| -a).collect(),
        }
    }

    fn mul(&self, other: &Self) -> Self {
        let len = self.c.len();
        let mut c = vec![0.0; len];
        for (i, a) in self.c.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.c.iter().take(len - i).enumerate() {
                c[i + j] += a * b;
            }
        }
        Jet1 { c }
    }

    /// `1/self`, requiring a nonzero constant term.
    fn recip(&self) -> Self {
        let len = self.c.len();
        let mut r = vec![0.0; len];
        r[0] = 1.0 / self.c[0];
        for k in 1..len {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += self.c[j] * r[k - j];
            }
            r[k] = -acc / self.c[0];
        }
        Jet1 { c: r }
    }

    /// `exp(self)` via the standard recurrence `e_k = (1/k) Σ j·u_j·e_{k−j}`.
    fn exp(&self) -> Self {
        let len = self.c.len();
        let mut e = vec![0.0; len];
        e[0] = self.c[0].exp();
        for k in 1..len {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += (j as f64) * self.c[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Jet1 { c: e }
    }

    fn div(&self, other: &Self) -> Self {
        self.mul(&other.recip())
    }
}

/// `ψ(u(t)) = exp(−1/u(t))` as a jet; identically zero at nonpositive (or
/// negligibly small) arguments.
fn psi_jet(u: &Jet1) -> Jet1 {
    if u.c[0] <= PSI_CUTOFF {
        Jet1::constant(0.0, u.c.len())
    } else {
        u.recip().neg().exp()
    }
}

/// Taylor jet of the bump at `t₀`; exact plateau jets outside the
/// transition band, analytic differentiation inside it.
fn bump_jet(t0: f64, len: usize) -> Jet1 {
    if t0.abs() < 0.5 {
        return Jet1::constant(1.0, len);
    }
    if t0.abs() >= 1.0 {
        return Jet1::constant(0.0, len);
    }
    let s = if t0 >= 0.0 { 1.0 } else { -1.0 };
    let a = Jet1::linear(2.0 - 2.0 * t0.abs(), -2.0 * s, len);
    let b = Jet1::linear(2.0 * t0.abs() - 1.0, 2.0 * s, len);
    let pa = psi_jet(&a);
    let pb = psi_jet(&b);
    pa.div(&pa.add(&pb))
}

/// `[φ(t), φ'(t), …, φ^{(j_max)}(t)]`, exact on the plateau and beyond the
/// support (where every derivative vanishes identically).
pub fn bump_derivatives_at(t: f64, j_max: u32) -> Vec<f64> {
    let len = j_max as usize + 1;
    let jet = bump_jet(t, len);
    (0..len)
        .map(|j| jet.c[j] * rat_to_f64(&factorial(j as u32)))
        .collect()
}

/// Grid estimates of `sup_t |φ^{(j)}|` for `j = 0..=n_max`.  `j = 0` is the
/// exact value `1`; for `j ≥ 1` the sup lives in the transition band
/// `½ ≤ |t| ≤ 1` (the bump is even), sampled at `grid` midpoints and
/// inflated by the recorded `safety` factor.
pub fn bump_derivative_sups(n_max: u32, grid: usize, safety: f64) -> Vec<f64> {
    assert!(grid > 0, "bump derivative grid must be nonempty");
    assert!(safety >= 1.0, "safety factor must be at least 1");
    let mut sups = vec![0.0f64; n_max as usize + 1];
    sups[0] = 1.0;
    if n_max == 0 {
        return sups;
    }
    for i in 0..grid {
        let t = 0.5 + (i as f64 + 0.5) / grid as f64 * 0.5;
        let derivs = bump_derivatives_at(t, n_max);
        for (j, v) in derivs.iter().enumerate().skip(1) {
            sups[j] = sups[j].max(v.abs());
        }
    }
    for s in sups.iter_mut().skip(1) {
        *s *= safety;
    }
    sups
}

/// A finite sequence of q-forms `α₀, …, α_N` with exact rational
/// coefficients on a common base chart, the input data of the realization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormSequence {
    chart: Chart,
    degree: usize,
    forms: Vec<QForm>,
}

impl FormSequence {
    pub fn new(forms: Vec<QForm>) -> Result<Self> {
        let first = forms.first().ok_or_else(|| {
            KernelError::Precondition("a form sequence needs at least one term".into())
        })?;
        let chart = first.chart();
        let degree = first.degree();
        if chart.t_cap != 0 {
            return Err(KernelError::Precondition(
                "form sequences live on the base manifold (t_cap = 0)".into(),
            ));
        }
        for f in &forms {
            f.chart().assert_compat(&chart, "FormSequence");
            if f.degree() != degree {
                return Err(KernelError::Precondition(format!(
                    "form sequence mixes degrees {} and {}",
                    degree,
                    f.degree()
                )));
            }
        }
        Ok(FormSequence { chart, degree, forms })
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of terms `N + 1`.
    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        false // enforced nonempty at construction
    }

    pub fn form(&self, n: usize) -> &QForm {
        &self.forms[n]
    }

    pub fn forms(&self) -> &[QForm] {
        &self.forms
    }

    /// Componentwise exterior derivative of every term.
    pub fn exterior_d(&self) -> Result<FormSequence> {
        FormSequence::new(self.forms.iter().map(QForm::exterior_d).collect())
    }
}

/// Grid size and safety factor for the bump-derivative sup estimates.
#[derive(Clone, Copy, Debug)]
pub struct BorelConfig {
    pub grid: usize,
    pub safety: f64,
}

impl Default for BorelConfig {
    fn default() -> Self {
        BorelConfig { grid: 10_000, safety: 2.0 }
    }
}

/// The realized sum `f(t) = Σ_n (α_n/n!) tⁿ φ(λ_n t)` with its certified
/// scales and the recorded data (`K_n`, `M_n`, bump sups, grid, safety)
/// they were derived from.  Evaluators are immutable and pointwise.
#[derive(Clone, Debug)]
pub struct BorelRealization {
    seq: FormSequence,
    lambdas: Vec<f64>,
    k_bounds: Vec<f64>,
    m_bounds: Vec<f64>,
    bump_sups: Vec<f64>,
    grid: usize,
    safety: f64,
}

/// `K_n = Σ_{|ν| ≤ n} Σ_components sup|D^ν component|` as an exact rational
/// (an upper bound for the Euclidean norm since `‖v‖₂ ≤ Σ|v_i|`).
fn derivative_sum_bound(form: &QForm, n: u32) -> Result<Rat> {
    let mut acc = Rat::zero();
    for nu in multis_up_to(form.chart().dim, n) {
        for (_, comp) in form.components() {
            acc += comp.coeff_sup_bound(&nu, 0)?;
        }
    }
    Ok(acc)
}

/// Compute the certified scales for a sequence: `λ_n` is the appendix-style
/// bound `max{1, 2ⁿ K_n M_n Σ_{p=0}^{n−1} C(n−1,p)/(n−p)!}` with `K_n` from
/// exact coefficient bounds and `M_n` from the recorded bump-derivative
/// sups.  Fails on affine charts, whose polynomial coefficients have no
/// finite sup.
pub fn choose_lambda(seq: &FormSequence, config: &BorelConfig) -> Result<BorelRealization> {
    if seq.chart().kind != ChartKind::Torus {
        return Err(KernelError::Precondition(
            "choose_lambda needs bounded derivatives: use a torus chart".into(),
        ));
    }
    let n_max = (seq.len() - 1) as u32;
    let bump_sups = bump_derivative_sups(n_max, config.grid, config.safety);
    let mut lambdas = Vec::with_capacity(seq.len());
    let mut k_bounds = Vec::with_capacity(seq.len());
    let mut m_bounds = Vec::with_capacity(seq.len());
    for n in 0..=n_max {
        let k_n = rat_to_f64(&derivative_sum_bound(seq.form(n as usize), n)?);
        let m_n: f64 = bump_sups[..=n as usize].iter().sum();
        let mut tail = Rat::zero();
        for p in 0..n {
            tail += binomial(n - 1, p) / factorial(n - p);
        }
        let lam = (2f64.powi(n as i32) * k_n * m_n * rat_to_f64(&tail)).max(1.0);
        k_bounds.push(k_n);
        m_bounds.push(m_n);
        lambdas.push(lam);
    }
    Ok(BorelRealization {
        seq: seq.clone(),
        lambdas,
        k_bounds,
        m_bounds,
        bump_sups,
        grid: config.grid,
        safety: config.safety,
    })
}

/// Realize three sequences with a shared scale `μ_n = max{λ¹_n, λ²_n, λ_n}`
/// after checking the exact d-relation `α²_n − α¹_n = dν_n` symbolically.
/// Sharing the scales makes `f²(t) − f¹(t) = d(f(t))` hold pointwise, not
/// just asymptotically: the three sums then use literally the same bumps.
pub fn realize_triple(
    seq1: &FormSequence,
    seq2: &FormSequence,
    nu_seq: &FormSequence,
    config: &BorelConfig,
) -> Result<(BorelRealization, BorelRealization, BorelRealization)> {
    seq1.chart().assert_compat(&seq2.chart(), "realize_triple");
    seq1.chart().assert_compat(&nu_seq.chart(), "realize_triple");
    if seq1.len() != seq2.len() || seq1.len() != nu_seq.len() {
        return Err(KernelError::Precondition(
            "realize_triple needs sequences of equal length".into(),
        ));
    }
    if seq1.degree() != seq2.degree() || nu_seq.degree() + 1 != seq1.degree() {
        return Err(KernelError::Precondition(
            "realize_triple: degrees must satisfy deg α¹ = deg α² = deg ν + 1".into(),
        ));
    }
    for n in 0..seq1.len() {
        let residue = seq2
            .form(n)
            .sub(seq1.form(n))
            .sub(&nu_seq.form(n).exterior_d());
        if !residue.is_zero() {
            return Err(KernelError::Precondition(format!(
                "realize_triple: α²_{n} − α¹_{n} ≠ dν_{n} (exact check failed)"
            )));
        }
    }
    let r1 = choose_lambda(seq1, config)?;
    let r2 = choose_lambda(seq2, config)?;
    let rn = choose_lambda(nu_seq, config)?;
    let mu: Vec<f64> = (0..seq1.len())
        .map(|n| r1.lambdas[n].max(r2.lambdas[n]).max(rn.lambdas[n]))
        .collect();
    Ok((
        r1.with_lambdas(mu.clone()),
        r2.with_lambdas(mu.clone()),
        rn.with_lambdas(mu),
    ))
}

impl BorelRealization {
    /// Replace the scales by (pointwise larger) ones; every bound `λ_n ≥ …`
    /// keeps holding, so the certificates survive.
    fn with_lambdas(mut self, lambdas: Vec<f64>) -> Self {
        assert_eq!(lambdas.len(), self.lambdas.len());
        for (new, old) in lambdas.iter().zip(&self.lambdas) {
            assert!(new >= old, "scales may only grow");
        }
        self.lambdas = lambdas;
        self
    }

    pub fn sequence(&self) -> &FormSequence {
        &self.seq
    }

    pub fn lambda(&self, n: usize) -> f64 {
        self.lambdas[n]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn k_bound(&self, n: usize) -> f64 {
        self.k_bounds[n]
    }

    pub fn m_bound(&self, n: usize) -> f64 {
        self.m_bounds[n]
    }

    pub fn bump_sups(&self) -> &[f64] {
        &self.bump_sups
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn safety(&self) -> f64 {
        self.safety
    }

    /// Radius of the common plateau: all bumps equal `1` on
    /// `|t| ≤ 1/(2·max λ_n)`, where the sum is exactly its Taylor polynomial.
    pub fn plateau_radius(&self) -> f64 {
        0.5 / self.lambdas.iter().cloned().fold(1.0f64, f64::max)
    }

    /// The sum vanishes identically for `|t| ≥ 1/min λ_n`.
    pub fn support_radius(&self) -> f64 {
        1.0 / self.lambdas.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Pointwise value of `f(x, t)`, one float per form component.
    pub fn eval(&self, x: &[f64], t: f64) -> BTreeMap<Vec<usize>, f64> {
        let mut out = BTreeMap::new();
        for (n, form) in self.seq.forms().iter().enumerate() {
            let scale = t.powi(n as i32) / rat_to_f64(&factorial(n as u32))
                * bump(self.lambdas[n] * t);
            for (idx, v) in form.eval_f64(x, 0.0) {
                *out.entry(idx).or_insert(0.0) += scale * v;
            }
        }
        out
    }

    /// The degree-`N` Taylor polynomial `Σ α_n tⁿ/n!` without the bumps,
    /// evaluated the same way (for plateau comparisons).
    pub fn taylor_eval(&self, x: &[f64], t: f64) -> BTreeMap<Vec<usize>, f64> {
        let mut out = BTreeMap::new();
        for (n, form) in self.seq.forms().iter().enumerate() {
            let scale = t.powi(n as i32) / rat_to_f64(&factorial(n as u32));
            for (idx, v) in form.eval_f64(x, 0.0) {
                *out.entry(idx).or_insert(0.0) += scale * v;
            }
        }
        out
    }

    /// The scalar t-part of `∂_t^l` applied to the `n`-th term:
    /// `(1/n!) ∂_t^l [tⁿ φ(λ_n t)] = Σ_{p ≤ min(l,n)} C(l,p)/(n−p)! ·
    /// t^{n−p} λ^{l−p} φ^{(l−p)}(λ t)` with exact rational prefactors.
    fn term_scalar(&self, n: usize, t: f64, l: u32) -> f64 {
        let lambda = self.lambdas[n];
        let derivs = bump_derivatives_at(lambda * t, l);
        let mut acc = 0.0;
        for p in 0..=l.min(n as u32) {
            let pref = rat_to_f64(&(binomial(l, p) / factorial(n as u32 - p)));
            acc += pref
                * t.powi((n as u32 - p) as i32)
                * lambda.powi((l - p) as i32)
                * derivs[(l - p) as usize];
        }
        acc
    }

    /// Pointwise `D^ν ∂_t^l f(x, t)`: x-derivatives are taken symbolically
    /// on the exact coefficients, t-derivatives through the analytic bump
    /// jets.  At `t = 0` this returns exactly `α_l` for `ν = 0` (plateau
    /// jets and rational prefactors leave no roundoff).
    pub fn eval_derivative(
        &self,
        x: &[f64],
        t: f64,
        nu: &[u32],
        l: u32,
    ) -> BTreeMap<Vec<usize>, f64> {
        let mut out = BTreeMap::new();
        for (n, form) in self.seq.forms().iter().enumerate() {
            let s = self.term_scalar(n, t, l);
            for (idx, comp) in form.components() {
                let dv = comp.dx_multi(nu).eval_f64(x, 0.0);
                *out.entry(idx.clone()).or_insert(0.0) += s * dv;
            }
        }
        out
    }

    /// Grid sup of `‖D^ν ∂_t^l f_n‖` over all `l + |ν| ≤ n − 1`, `x` on an
    /// equispaced torus grid, and `t` spanning the term's support.  The
    /// appendix-style certificate asserts this is `≤ 2^{−n}`; the value
    /// factorizes as `max_t |s_{n,l}(t)| · max_x ‖D^ν α_n(x)‖` because the
    /// t-scalar multiplies every component.
    pub fn certificate_sup(&self, n: u32, x_samples: usize, t_samples: usize) -> f64 {
        assert!((n as usize) < self.seq.len(), "certificate index in range");
        assert!(x_samples > 0 && t_samples > 1, "certificate grids nonempty");
        if n == 0 {
            return 0.0;
        }
        let d = self.seq.chart().dim;
        let lambda = self.lambdas[n as usize];
        let xs = torus_grid(d, x_samples);
        let form = self.seq.form(n as usize);
        let mut best = 0.0f64;
        for nu in multis_up_to(d, n - 1) {
            let dcomps: Vec<BaseFunction> = form
                .components()
                .map(|(_, c)| c.dx_multi(&nu))
                .collect();
            let mut x_max = 0.0f64;
            for x in &xs {
                let norm2: f64 = dcomps
                    .iter()
                    .map(|c| {
                        let v = c.eval_f64(x, 0.0);
                        v * v
                    })
                    .sum();
                x_max = x_max.max(norm2.sqrt());
            }
            for l in 0..=(n - 1 - multi_total(&nu)) {
                let mut t_max = 0.0f64;
                for ti in 0..t_samples {
                    let t = -1.0 / lambda
                        + 2.0 / lambda * ti as f64 / (t_samples as f64 - 1.0);
                    t_max = t_max.max(self.term_scalar(n as usize, t, l).abs());
                }
                best = best.max(t_max * x_max);
            }
        }
        best
    }

    /// Realize the exterior derivative of the sequence with the *same*
    /// scales: since `d` acts on the exact coefficients and the bumps are
    /// scalar, `(df)(t) = d(f(t))` pointwise.  Recorded `K_n` are
    /// recomputed for the differentiated forms.
    pub fn exterior_d(&self) -> Result<BorelRealization> {
        let seq = self.seq.exterior_d()?;
        let mut k_bounds = Vec::with_capacity(seq.len());
        for n in 0..seq.len() {
            k_bounds.push(rat_to_f64(&derivative_sum_bound(seq.form(n), n as u32)?));
        }
        Ok(BorelRealization {
            seq,
            lambdas: self.lambdas.clone(),
            k_bounds,
            m_bounds: self.m_bounds.clone(),
            bump_sups: self.bump_sups.clone(),
            grid: self.grid,
            safety: self.safety,
        })
    }
}

/// Equispaced points of `[0, 2π)^dim`, `samples` per axis.
fn torus_grid(dim: usize, samples: usize) -> Vec<Vec<f64>> {
    let step = std::f64::consts::TAU / samples as f64;
    let mut pts: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..dim {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                (0..samples).map(move |i| {
                    let mut q = p.clone();
                    q.push(i as f64 * step);
                    q
                })
            })
            .collect();
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat, rat_int};

    fn chart() -> Chart {
        Chart::torus(2, 0)
    }

    /// `c·cos(x¹) dx¹∧dx²` as a 2-form.
    fn wave_two_form(c: Rat) -> QForm {
        let mut q = QForm::zero(chart(), 2);
        q.add_comp(
            vec![0, 1],
            BaseFunction::cos_wave(chart(), vec![1, 0]).scale(&c),
        );
        q
    }

    fn constant_two_form(c: Rat) -> QForm {
        let mut q = QForm::zero(chart(), 2);
        q.add_comp(vec![0, 1], BaseFunction::constant(chart(), c));
        q
    }

    #[test]
    fn the_bump_is_an_exact_plateau_with_a_monotone_shoulder() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(0.3), 1.0);
        assert_eq!(bump(-0.5), 1.0);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(1.5), 0.0);
        assert_eq!(bump(-2.0), 0.0);
        let mid = bump(0.75);
        assert!(mid > 0.0 && mid < 1.0);
        // symmetric, and monotone decreasing across the shoulder
        assert_eq!(bump(0.75), bump(-0.75));
        let mut prev = 1.0;
        for i in 0..1000 {
            let t = 0.5 + (i as f64 + 1.0) / 1000.0 * 0.5;
            let v = bump(t);
            assert!(v <= prev + 1e-15, "bump not monotone at t = {t}");
            prev = v;
        }
    }

    #[test]
    fn analytic_bump_derivatives_match_finite_differences() {
        let h = 1e-5;
        for &t in &[0.6, 0.75, 0.9] {
            let d = bump_derivatives_at(t, 2);
            assert_eq!(d[0], bump(t));
            let fd1 = (bump(t + h) - bump(t - h)) / (2.0 * h);
            assert!((d[1] - fd1).abs() < 1e-5, "φ' mismatch at {t}: {} vs {fd1}", d[1]);
            let fd2 = (bump(t + h) - 2.0 * bump(t) + bump(t - h)) / (h * h);
            assert!((d[2] - fd2).abs() < 1e-3, "φ'' mismatch at {t}: {} vs {fd2}", d[2]);
        }
        // plateau and exterior jets are exactly flat
        assert_eq!(bump_derivatives_at(0.2, 3), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(bump_derivatives_at(-1.4, 3), vec![0.0; 4]);
    }

    #[test]
    fn derivative_sups_dominate_the_shoulder_slope() {
        let sups = bump_derivative_sups(3, 1000, 2.0);
        assert_eq!(sups[0], 1.0);
        // φ falls from 1 to 0 over a width-½ band, so sup|φ'| ≥ 2; with the
        // safety factor the recorded value is at least 4.
        assert!(sups[1] >= 4.0);
        assert!(sups[2] > sups[1]);
        let plain = bump_derivative_sups(3, 1000, 1.0);
        for j in 1..=3 {
            assert!((sups[j] - 2.0 * plain[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn a_single_term_realization_is_a_scaled_bump() {
        let seq = FormSequence::new(vec![wave_two_form(rat_int(3))]).unwrap();
        let r = choose_lambda(&seq, &BorelConfig::default()).unwrap();
        // N = 0: the certificate sum is empty, so λ₀ = 1.
        assert_eq!(r.lambda(0), 1.0);
        let x: [f64; 2] = [0.4, 1.1];
        let expected = 3.0 * x[0].cos();
        let on_plateau = r.eval(&x, 0.3);
        assert_eq!(on_plateau[&vec![0, 1]], expected);
        let outside = r.eval(&x, 2.0);
        assert_eq!(outside[&vec![0, 1]], 0.0);
    }

    #[test]
    fn constant_sequences_have_coefficient_bounds_from_the_mean_alone() {
        let seq = FormSequence::new(vec![
            constant_two_form(rat_int(1)),
            constant_two_form(rat_int(2)),
        ])
        .unwrap();
        let r = choose_lambda(&seq, &BorelConfig::default()).unwrap();
        // all x-derivatives vanish: K_n is the plain sup of the constant
        assert_eq!(r.k_bound(0), 1.0);
        assert_eq!(r.k_bound(1), 2.0);
        // λ₁ = max{1, 2·K₁·M₁·(C(0,0)/1!)} = 2·2·M₁
        let expected = 4.0 * r.m_bound(1);
        assert!((r.lambda(1) - expected).abs() < 1e-12);
    }

    #[test]
    fn the_plateau_identity_reproduces_the_taylor_polynomial() {
        let beta = wave_two_form(rat(5, 7));
        let two_beta = wave_two_form(rat(10, 7));
        let seq = FormSequence::new(vec![beta, two_beta]).unwrap();
        let r = choose_lambda(&seq, &BorelConfig::default()).unwrap();
        let radius = r.plateau_radius();
        assert!(radius > 0.0);
        for i in 0..5 {
            let t = radius * (i as f64 + 1.0) / 5.0;
            for x0 in [0.0, 0.9, 2.5] {
                let x = [x0, 0.3];
                let f = r.eval(&x, t);
                let taylor = r.taylor_eval(&x, t);
                let expected = (1.0 + 2.0 * t) * (5.0 / 7.0) * x0.cos();
                let got = f[&vec![0, 1]];
                assert_eq!(got, taylor[&vec![0, 1]], "bumps must be exactly 1 on the plateau");
                let rel = (got - expected).abs() / expected.abs().max(1e-300);
                assert!(rel <= 1e-12, "plateau identity off by {rel} at t = {t}");
            }
        }
        // beyond every bump support the sum vanishes identically
        let far = r.support_radius() * 1.01;
        let v = r.eval(&[0.9, 0.3], far);
        assert_eq!(v[&vec![0, 1]], 0.0);
    }

    #[test]
    fn t_derivatives_at_zero_return_the_sequence_exactly() {
        let seq = FormSequence::new(vec![
            wave_two_form(rat_int(2)),
            constant_two_form(rat(1, 3)),
            wave_two_form(rat(-4, 5)),
        ])
        .unwrap();
        let r = choose_lambda(&seq, &BorelConfig::default()).unwrap();
        let x = [1.3, 0.2];
        for k in 0..seq.len() {
            let got = r.eval_derivative(&x, 0.0, &[0, 0], k as u32);
            let want = seq.form(k).eval_f64(&x, 0.0);
            for (idx, v) in want {
                assert_eq!(got[&idx], v, "jet order {k} not exact");
            }
        }
    }

    #[test]
    fn per_term_derivative_certificates_hold_on_the_grid() {
        let seq = FormSequence::new(vec![
            wave_two_form(rat_int(1)),
            wave_two_form(rat_int(3)),
            constant_two_form(rat(7, 2)),
            wave_two_form(rat(-2, 3)),
        ])
        .unwrap();
        let r = choose_lambda(&seq, &BorelConfig::default()).unwrap();
        for n in 1..seq.len() as u32 {
            let sup = r.certificate_sup(n, 9, 41);
            let bound = 0.5f64.powi(n as i32);
            assert!(
                sup <= bound,
                "certificate violated at n = {n}: {sup} > {bound}"
            );
        }
    }

    #[test]
    fn shared_scales_make_the_d_relation_exact_pointwise() {
        let c = chart();
        let one_form = |comp0: BaseFunction, comp1: BaseFunction| {
            let mut q = QForm::zero(c, 1);
            q.add_comp(vec![0], comp0);
            q.add_comp(vec![1], comp1);
            q
        };
        let nu0 = one_form(
            BaseFunction::zero(c),
            BaseFunction::sin_wave(c, vec![1, 0]),
        );
        let nu1 = one_form(
            BaseFunction::cos_wave(c, vec![1, 1]),
            BaseFunction::zero(c),
        );
        let nu_seq = FormSequence::new(vec![nu0.clone(), nu1.clone()]).unwrap();
        let alpha1 = FormSequence::new(vec![
            wave_two_form(rat_int(1)),
            constant_two_form(rat(1, 2)),
        ])
        .unwrap();
        let alpha2 = FormSequence::new(vec![
            alpha1.form(0).add(&nu0.exterior_d()),
            alpha1.form(1).add(&nu1.exterior_d()),
        ])
        .unwrap();
        let (r1, r2, rn) =
            realize_triple(&alpha1, &alpha2, &nu_seq, &BorelConfig::default()).unwrap();
        assert_eq!(r1.lambdas(), r2.lambdas());
        assert_eq!(r1.lambdas(), rn.lambdas());
        let d_of_f = rn.exterior_d().unwrap();
        assert_eq!(d_of_f.lambdas(), rn.lambdas());
        let support = r1.support_radius();
        for ti in 0..9 {
            let t = -support + 2.0 * support * ti as f64 / 8.0;
            for x in torus_grid(2, 5) {
                let f1 = r1.eval(&x, t);
                let f2 = r2.eval(&x, t);
                let df = d_of_f.eval(&x, t);
                for (idx, v2) in &f2 {
                    let resid = v2 - f1[idx] - df[idx];
                    assert!(
                        resid.abs() <= 1e-12,
                        "d-relation residue {resid} at t = {t}, x = {x:?}"
                    );
                }
            }
        }
        // a broken d-relation is rejected symbolically before evaluation
        let bad = FormSequence::new(vec![
            alpha1.form(0).add(&nu0.exterior_d()),
            alpha1.form(1).clone(),
        ])
        .unwrap();
        let err = realize_triple(&alpha1, &bad, &nu_seq, &BorelConfig::default()).unwrap_err();
        assert!(matches!(err, KernelError::Precondition(_)));
    }

    #[test]
    fn affine_charts_are_rejected() {
        let affine = Chart::affine(2, 0);
        let mut q = QForm::zero(affine, 2);
        q.add_comp(vec![0, 1], BaseFunction::monomial(affine, vec![1, 0]));
        let seq = FormSequence::new(vec![q]).unwrap();
        let err = choose_lambda(&seq, &BorelConfig::default()).unwrap_err();
        assert!(matches!(err, KernelError::Precondition(_)));
    }
}
