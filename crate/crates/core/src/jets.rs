//! Jet maps along the deformation direction and the star products they
//! induce on the base manifold.
//!
//! Objects on the deformation cylinder carry a formal parameter `t` (chart
//! `t_cap > 0`) alongside the quantization parameter `ℏ`.  The order-`n` jet
//! map replaces each `t^k ℏ^l` datum with `ℏ^{k+l}`, discarding everything
//! above total order `n`.  Applied to the ℏ-order slices of a star-product
//! table on the cylinder, it yields a table of t-free bidifferential
//! operators on the base chart (`t_cap = 0`); [`induce_star`] re-verifies
//! that the result is an associative, unital star product before handing it
//! back.
//!
//! The second half of the module treats formal series of closed 2-forms
//! `Ω^ℏ = Σ ℏ^k ω^k` with symplectic leading term: [`star_for_class`] runs
//! the full pipeline (polynomial representative on the cylinder → Fedosov
//! flattening → cochain extraction → jet), while [`find_primitive`] and
//! [`classes_equal`] decide exactness of closed 2-forms order by order.  On
//! torus charts exactness is obstructed precisely by the constant Fourier
//! mode; on affine charts the polynomial Poincaré homotopy always succeeds,
//! so every class is trivial there.

use crate::base::{BaseFunction, Chart, ChartKind, XBasis};
use crate::error::{KernelError, Result};
use crate::fedosov::{ChartPoisson, FedosovData, FoliatedConnection};
use crate::form::{invert_rat_matrix, FormMatrix, OneForm};
use crate::ops::{DiffOp, HSeries, OpJet};
use crate::rat::{rat_int, Rat};
use crate::table::{separating_family, BiDiffOp, StarTable};
use num::Zero;
use std::collections::BTreeMap;

/// Check that an order-`n` jet is determined by the data: the chart must
/// resolve t-degrees up to `n` and the series must store ℏ-orders up to `n`.
fn check_jet_order(chart: Chart, stored_cap: u32, n: u32, what: &str) -> Result<()> {
    if chart.t_cap < n {
        return Err(KernelError::Precondition(format!(
            "order-{n} jet of a {what} is not determined: the chart resolves \
             t-degrees only up to {}",
            chart.t_cap
        )));
    }
    if stored_cap < n {
        return Err(KernelError::Precondition(format!(
            "order-{n} jet of a {what} is not determined: ℏ-orders are stored \
             only up to {stored_cap}"
        )));
    }
    Ok(())
}

/// Order-`n` jet of a scalar series on the deformation cylinder: each term
/// `t^k ℏ^l a(x)` becomes `ℏ^{k+l} a(x)`, and total orders above `n` are
/// discarded.  The result lives on the base chart (`t_cap = 0`).
///
/// Errors with `Precondition` when the chart's t-degree cap or the stored
/// ℏ-order cap is below `n`.
pub fn jet_scalar(a: &HSeries, n: u32) -> Result<HSeries> {
    check_jet_order(a.chart(), a.cap(), n, "scalar series")?;
    let base = a.chart().with_t_cap(0);
    let mut out = HSeries::zero(base, n);
    for m in 0..=n {
        let mut om = BaseFunction::zero(base);
        for l in 0..=m {
            om = om.add(&a.order(l).t_slice(m - l).with_t_cap(0));
        }
        out.set_order(m, om);
    }
    Ok(out)
}

/// Order-`n` jet of a series of tangential differential operators on the
/// cylinder, applied coefficientwise: the `t^k ℏ^l c_α(x) ∂^α` term becomes
/// `ℏ^{k+l} c_α(x) ∂^α`.  Operators of this type differentiate along the
/// leaves only, so the jet map is a homomorphism for composition.
pub fn jet_operator(phi: &OpJet, n: u32) -> Result<OpJet> {
    check_jet_order(phi.chart(), phi.cap(), n, "operator series")?;
    let base = phi.chart().with_t_cap(0);
    let mut out = OpJet::zero(base, n);
    for m in 0..=n {
        let mut op = DiffOp::zero(base);
        for l in 0..=m {
            for (alpha, c) in phi.order(l).terms() {
                op.add_term(alpha.clone(), c.t_slice(m - l).with_t_cap(0));
            }
        }
        out.set_order(m, op);
    }
    Ok(out)
}

/// Order-`n` jet of a bidifferential-operator table on the cylinder,
/// applied coefficientwise.  This is the raw coefficient transform; use
/// [`induce_star`] when the input is a star-product table and the output
/// should be re-verified as one.
pub fn jet_bidifferential(table: &StarTable, n: u32) -> Result<StarTable> {
    check_jet_order(table.chart(), table.cap(), n, "bidifferential table")?;
    let base = table.chart().with_t_cap(0);
    let mut out = StarTable::zero(base, n);
    for m in 0..=n {
        let mut op = BiDiffOp::zero(base);
        for l in 0..=m {
            for ((alpha, beta), c) in table.order(l).terms() {
                op.add_term(alpha.clone(), beta.clone(), c.t_slice(m - l).with_t_cap(0));
            }
        }
        out.set_order(m, op);
    }
    Ok(out)
}

/// Star product induced on the base chart by a star-product table on the
/// deformation cylinder: the order-`n` jet of the table, re-verified to be
/// a well-formed, unital star product, associative modulo `ℏ^{n+1}` on a
/// separating family of functions.
pub fn induce_star(table: &StarTable, n: u32) -> Result<StarTable> {
    let induced = jet_bidifferential(table, n)?;
    induced.validate()?;
    let family = separating_family(induced.chart(), 1);
    induced.check_unital(&family)?;
    induced.check_associative(&family)?;
    Ok(induced)
}

/// A formal series `Ω^ℏ = Σ_k ℏ^k ω^k` of 2-forms on a base chart: every
/// coefficient is closed and antisymmetric, and the leading term `ω⁰` is a
/// constant invertible (symplectic) matrix.  Higher coefficients need not
/// be exact; their classes are what [`classes_equal`] compares.
#[derive(Clone, Debug)]
pub struct ClosedFormSeries {
    chart: Chart,
    forms: Vec<FormMatrix>,
}

impl ClosedFormSeries {
    /// Validate and wrap a coefficient list `[ω⁰, ω¹, …]`.  All forms must
    /// live on the given base chart (`t_cap = 0`).
    pub fn new(chart: Chart, forms: Vec<FormMatrix>) -> Result<Self> {
        if chart.t_cap != 0 {
            return Err(KernelError::Precondition(
                "a closed-form series lives on a base chart with t_cap = 0".into(),
            ));
        }
        if forms.is_empty() {
            return Err(KernelError::Precondition(
                "a closed-form series needs at least its symplectic leading term".into(),
            ));
        }
        for (k, w) in forms.iter().enumerate() {
            w.chart().assert_compat(&chart, "ClosedFormSeries coefficient");
            w.check_antisymmetric(&format!("closed-form series coefficient {k}"))?;
            w.check_closed(&format!("closed-form series coefficient {k}"))?;
        }
        let lead = &forms[0];
        let d = chart.dim;
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let e = lead.get(i, j);
                if !e.is_x_constant() {
                    return Err(KernelError::Precondition(
                        "the leading 2-form of a closed-form series must be constant".into(),
                    ));
                }
                entries.push(e.constant_part());
            }
        }
        if invert_rat_matrix(&entries, d).is_none() {
            return Err(KernelError::Precondition(
                "the leading 2-form of a closed-form series must be invertible".into(),
            ));
        }
        Ok(ClosedFormSeries { chart, forms })
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// Number of stored coefficients (`ω⁰ … ω^{len-1}`).
    pub fn order_count(&self) -> usize {
        self.forms.len()
    }

    /// Highest stored ℏ-order.
    pub fn hbar_cap(&self) -> u32 {
        (self.forms.len() - 1) as u32
    }

    pub fn form(&self, k: usize) -> &FormMatrix {
        &self.forms[k]
    }

    /// The deformation-cylinder chart used when quantizing this series to
    /// order `n`.
    pub fn ambient_chart(&self, n: u32) -> Chart {
        self.chart.with_t_cap(n)
    }

    /// The polynomial 2-form `Ω(t) = Σ_{k ≤ n} t^k ω^k` on the cylinder
    /// chart with t-degree cap `n`.  Coefficients above `t^n` cannot affect
    /// an order-`n` jet and are dropped.
    pub fn polynomial_representative(&self, n: u32) -> FormMatrix {
        let hat = self.ambient_chart(n);
        let d = self.chart.dim;
        let mut entries = vec![BaseFunction::zero(hat); d * d];
        for (k, w) in self.forms.iter().enumerate().take(n as usize + 1) {
            for i in 0..d {
                for j in 0..d {
                    entries[i * d + j] =
                        entries[i * d + j].add(&w.get(i, j).with_t_cap(n).t_mul(k as u32));
                }
            }
        }
        FormMatrix::from_entries(hat, entries)
    }
}

/// Star product attached to a closed-form series: quantize the polynomial
/// representative `Ω(t)` on the deformation cylinder with the Fedosov
/// construction (starting from `start`, or the zero connection when absent)
/// and push the cochain table down with the order-`n` jet.
pub fn star_for_class(
    series: &ClosedFormSeries,
    start: Option<&FoliatedConnection>,
    n: u32,
) -> Result<StarTable> {
    let omega_t = series.polynomial_representative(n);
    let poisson = ChartPoisson::new(series.ambient_chart(n), n, omega_t)?;
    let start_conn = match start {
        Some(c) => {
            c.chart()
                .assert_compat(&poisson.chart(), "star_for_class start connection");
            c.clone()
        }
        None => FoliatedConnection::zero(poisson.chart()),
    };
    let data = FedosovData::build(&poisson, &start_conn)?;
    let hat_table = data.cochains()?;
    induce_star(&hat_table, n)
}

/// Exact primitive of a closed 2-form, when one exists.
///
/// * Affine charts: the polynomial Poincaré homotopy
///   `ν_j = Σ_i x^i ∫₀¹ s β_{ij}(sx) ds` always produces a primitive, so the
///   result is always `Some`.
/// * Torus charts: a closed form is exact iff its constant Fourier mode
///   vanishes; the primitive is assembled mode by mode.  A nonzero constant
///   mode yields `Ok(None)`.
///
/// The formal parameter `t` rides along unchanged in the coefficients.  The
/// returned primitive always satisfies `dν = β` exactly (verified before
/// returning).
pub fn find_primitive(beta: &FormMatrix) -> Result<Option<OneForm>> {
    beta.check_antisymmetric("find_primitive input")?;
    beta.check_closed("find_primitive input")?;
    let chart = beta.chart();
    let d = chart.dim;
    let mut nu = OneForm::zero(chart);
    match chart.kind {
        ChartKind::Affine => {
            for j in 0..d {
                let mut comp = BaseFunction::zero(chart);
                for i in 0..d {
                    for ((tp, b), c) in beta.get(i, j).terms() {
                        let alpha = match b {
                            XBasis::One => vec![0u32; d],
                            XBasis::Mono(a) => a.clone(),
                            _ => unreachable!("affine charts store only monomials"),
                        };
                        let total: u32 = alpha.iter().sum();
                        let mut raised = alpha;
                        raised[i] += 1;
                        comp = comp.add(&BaseFunction::term(
                            chart,
                            *tp,
                            XBasis::Mono(raised),
                            c.clone() / rat_int(i64::from(total) + 2),
                        ));
                    }
                }
                nu.set(j, comp);
            }
        }
        ChartKind::Torus => {
            // Bucket the coefficient matrix by (t-power, wave vector); a
            // nonzero constant mode anywhere obstructs exactness.
            type Mode = (u32, Vec<i32>);
            let zero_mat = || vec![vec![Rat::zero(); d]; d];
            let mut cos_modes: BTreeMap<Mode, Vec<Vec<Rat>>> = BTreeMap::new();
            let mut sin_modes: BTreeMap<Mode, Vec<Vec<Rat>>> = BTreeMap::new();
            for i in 0..d {
                for j in 0..d {
                    for ((tp, b), c) in beta.get(i, j).terms() {
                        match b {
                            XBasis::One => return Ok(None),
                            XBasis::Cos(k) => {
                                cos_modes.entry((*tp, k.clone())).or_insert_with(zero_mat)
                                    [i][j] = c.clone();
                            }
                            XBasis::Sin(k) => {
                                sin_modes.entry((*tp, k.clone())).or_insert_with(zero_mat)
                                    [i][j] = c.clone();
                            }
                            XBasis::Mono(_) => {
                                unreachable!("torus charts store only waves")
                            }
                        }
                    }
                }
            }
            // For the mode cos(k·x)·B with k_p ≠ 0, closedness gives
            // k_p B_{mj} = k_m B_{pj} − k_j B_{pm}, so
            // ν = sin(k·x) · (row p of B)/k_p is a primitive; the sine mode
            // analogously gets −cos(k·x) · (row p of B)/k_p.
            let mut comps = vec![BaseFunction::zero(chart); d];
            for ((tp, k), mat) in &cos_modes {
                let p = k.iter().position(|e| *e != 0).expect("canonical wave");
                let kp = rat_int(i64::from(k[p]));
                for (j, comp) in comps.iter_mut().enumerate() {
                    *comp = comp.add(&BaseFunction::term(
                        chart,
                        *tp,
                        XBasis::Sin(k.clone()),
                        mat[p][j].clone() / kp.clone(),
                    ));
                }
            }
            for ((tp, k), mat) in &sin_modes {
                let p = k.iter().position(|e| *e != 0).expect("canonical wave");
                let kp = rat_int(i64::from(k[p]));
                for (j, comp) in comps.iter_mut().enumerate() {
                    *comp = comp.add(&BaseFunction::term(
                        chart,
                        *tp,
                        XBasis::Cos(k.clone()),
                        -mat[p][j].clone() / kp.clone(),
                    ));
                }
            }
            nu = OneForm::from_components(chart, comps);
        }
    }
    let d_nu = nu.to_qform().exterior_d().to_form_matrix();
    if !d_nu.sub(beta).is_zero() {
        return Err(KernelError::Postcondition(
            "primitive candidate fails dν = β".into(),
        ));
    }
    Ok(Some(nu))
}

/// Outcome of comparing two closed-form series order by order.
#[derive(Clone, Debug)]
pub enum ClassComparison {
    /// Every coefficient difference `ω₁^k − ω₂^k` is exact; `primitives[k]`
    /// is a 1-form with `d(primitives[k]) = ω₁^k − ω₂^k`.
    Equal { primitives: Vec<OneForm> },
    /// The classes differ, first at the given ℏ-order.
    Differ { order: u32 },
}

impl ClassComparison {
    pub fn is_equal(&self) -> bool {
        matches!(self, ClassComparison::Equal { .. })
    }
}

/// Compare the coefficient classes of two closed-form series: for each
/// ℏ-order `k` decide whether `ω₁^k − ω₂^k` is exact, producing either the
/// full list of witness primitives or the first order at which the classes
/// differ.  Series of different lengths are padded with zero forms.  On
/// affine charts every closed form is exact, so the comparison always
/// reports equality there.
pub fn classes_equal(a: &ClosedFormSeries, b: &ClosedFormSeries) -> Result<ClassComparison> {
    a.chart().assert_compat(&b.chart(), "classes_equal");
    let zero = FormMatrix::zero(a.chart());
    let count = a.order_count().max(b.order_count());
    let mut primitives = Vec::with_capacity(count);
    for k in 0..count {
        let wa = if k < a.order_count() { a.form(k) } else { &zero };
        let wb = if k < b.order_count() { b.form(k) } else { &zero };
        match find_primitive(&wa.sub(wb))? {
            Some(nu) => primitives.push(nu),
            None => return Ok(ClassComparison::Differ { order: k as u32 }),
        }
    }
    Ok(ClassComparison::Equal { primitives })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::multi_zero;

    fn darboux(chart: Chart) -> FormMatrix {
        FormMatrix::from_rat_entries(chart, &[rat_int(0), rat_int(1), rat_int(-1), rat_int(0)])
    }

    /// cos(x¹) dx¹∧dx² — a closed, exact, x-dependent 2-form on T².
    fn wave_form(chart: Chart) -> FormMatrix {
        let c = BaseFunction::cos_wave(chart, vec![1, 0]);
        let mut w = FormMatrix::zero(chart);
        w.set(0, 1, c.clone());
        w.set(1, 0, c.neg());
        w
    }

    /// The bivector operator `m^{ij} ∂_i ⊗ ∂_j` with matrix entries from a
    /// constant-coefficient form matrix.
    fn bivector_op(m: &FormMatrix) -> BiDiffOp {
        let chart = m.chart();
        let d = chart.dim;
        let mut op = BiDiffOp::zero(chart);
        for i in 0..d {
            for j in 0..d {
                let mut a = multi_zero(d);
                a[i] += 1;
                let mut b = multi_zero(d);
                b[j] += 1;
                op.add_term(a, b, m.get(i, j).clone());
            }
        }
        op
    }

    #[test]
    fn jet_scalar_merges_t_and_hbar_orders() {
        let hat = Chart::torus(2, 3);
        let g = BaseFunction::cos_wave(hat, vec![1, 0]);
        let h = BaseFunction::sin_wave(hat, vec![0, 1]);
        // a = t²·g  +  ℏ·(t·h)
        let mut a = HSeries::zero(hat, 3);
        a.set_order(0, g.t_mul(2));
        a.set_order(1, h.t_mul(1));
        let jet = jet_scalar(&a, 3).unwrap();
        assert_eq!(jet.chart().t_cap, 0);
        assert!(jet.order(0).is_zero());
        assert!(jet.order(1).is_zero());
        assert_eq!(*jet.order(2), g.with_t_cap(0).add(&h.with_t_cap(0)));
        assert!(jet.order(3).is_zero());

        // a t-free function passes through unchanged
        let f = HSeries::from_fn(&g, 3);
        let jf = jet_scalar(&f, 3).unwrap();
        for m in 0..=3u32 {
            let expect = if m == 0 { g.with_t_cap(0) } else { BaseFunction::zero(jf.chart()) };
            assert_eq!(*jf.order(m), expect);
        }
    }

    #[test]
    fn jet_scalar_requires_enough_resolution() {
        let hat = Chart::torus(2, 1);
        let a = HSeries::from_fn(&BaseFunction::cos_wave(hat, vec![1, 0]), 2);
        assert!(matches!(
            jet_scalar(&a, 2),
            Err(KernelError::Precondition(_))
        ));
        let hat2 = Chart::torus(2, 2);
        let b = HSeries::from_fn(&BaseFunction::cos_wave(hat2, vec![1, 0]), 1);
        assert!(matches!(
            jet_scalar(&b, 2),
            Err(KernelError::Precondition(_))
        ));
    }

    #[test]
    fn jet_scalar_is_a_ring_homomorphism() {
        let n = 3u32;
        let hat = Chart::torus(2, n);
        let g = BaseFunction::cos_wave(hat, vec![1, 0]);
        let h = BaseFunction::sin_wave(hat, vec![1, 1]);
        let mut a = HSeries::zero(hat, n);
        a.set_order(0, g.add(&h.t_mul(1)));
        a.set_order(2, g.t_mul(1));
        let mut b = HSeries::zero(hat, n);
        b.set_order(0, h.clone());
        b.set_order(1, g.t_mul(2).sub(&h));
        let lhs = jet_scalar(&a.mul(&b), n).unwrap();
        let rhs = jet_scalar(&a, n).unwrap().mul(&jet_scalar(&b, n).unwrap());
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn jet_scalar_factors_through_t_truncation() {
        let n = 2u32;
        let hat = Chart::torus(2, 4);
        let g = BaseFunction::cos_wave(hat, vec![1, 0]);
        let mut a = HSeries::zero(hat, n);
        a.set_order(0, g.t_mul(1).add(&g.t_mul(4)));
        a.set_order(1, g.t_mul(3));
        let truncated = a.map(|f| f.t_truncate(n));
        assert_eq!(jet_scalar(&a, n).unwrap(), jet_scalar(&truncated, n).unwrap());
    }

    #[test]
    fn jet_operator_turns_multiplication_by_t_into_hbar() {
        let hat = Chart::torus(2, 1);
        let t = BaseFunction::term(hat, 1, XBasis::One, rat_int(1));
        let mut phi = OpJet::zero(hat, 1);
        phi.set_order(0, DiffOp::mult_by(&t));
        let jet = jet_operator(&phi, 1).unwrap();
        let base = hat.with_t_cap(0);
        assert!(jet.order(0).is_zero());
        assert_eq!(*jet.order(1), DiffOp::identity(base));
    }

    #[test]
    fn jet_operator_respects_composition_and_application() {
        let n = 2u32;
        let hat = Chart::torus(2, n);
        let g = BaseFunction::cos_wave(hat, vec![1, 0]);
        let mut phi = OpJet::identity(hat, n);
        let mut d1 = DiffOp::zero(hat);
        d1.add_term(vec![1, 0], g.t_mul(1));
        phi.set_order(1, d1);
        let mut psi = OpJet::zero(hat, n);
        psi.set_order(0, DiffOp::mult_by(&g.t_mul(1).add(&BaseFunction::term(
            hat,
            0,
            XBasis::One,
            rat_int(1),
        ))));
        let mut d2 = DiffOp::zero(hat);
        d2.add_term(vec![0, 1], BaseFunction::sin_wave(hat, vec![0, 1]));
        psi.set_order(2, d2);

        let lhs = jet_operator(&phi.compose(&psi), n).unwrap();
        let rhs = jet_operator(&phi, n)
            .unwrap()
            .compose(&jet_operator(&psi, n).unwrap());
        assert_eq!(lhs, rhs);

        // application is compatible with the scalar jet
        let a = HSeries::from_fn(&BaseFunction::sin_wave(hat, vec![1, 1]).t_mul(1), n);
        let applied = jet_scalar(&phi.apply(&a), n).unwrap();
        let jet_applied = jet_operator(&phi, n).unwrap().apply(&jet_scalar(&a, n).unwrap());
        assert_eq!(applied, jet_applied);
    }

    #[test]
    fn inducing_a_t_free_moyal_table_reproduces_it() {
        let n = 3u32;
        let hat = Chart::torus(2, n);
        let base = hat.with_t_cap(0);
        let lam_hat = darboux(hat).invert().unwrap();
        let table = StarTable::moyal(&lam_hat, n);
        let induced = induce_star(&table, n).unwrap();
        let expected = StarTable::moyal(&darboux(base).invert().unwrap(), n);
        assert_eq!(induced, expected);
    }

    #[test]
    fn inducing_a_neumann_family_shifts_the_second_cochain() {
        // Λ(t) = (ω⁰ + t·ω⁰)⁻¹ = Λ⁰·(1 − t + t² − …): the induced table
        // differs from the constant Moyal table first at ℏ², by the
        // bivector −½·(Λ⁰ ω⁰ Λ⁰) ∂_i ⊗ ∂_j = −½·Λ⁰ ∂_i ⊗ ∂_j.
        let n = 2u32;
        let hat = Chart::torus(2, n);
        let base = hat.with_t_cap(0);
        let omega_t = {
            let w = darboux(hat);
            w.add(&w.map(|f| f.t_mul(1)))
        };
        let induced = induce_star(&StarTable::moyal(&omega_t.invert().unwrap(), n), n).unwrap();
        let constant = StarTable::moyal(&darboux(base).invert().unwrap(), n);
        assert!(induced.agrees_through(&constant, 1));
        let lam0 = darboux(base).invert().unwrap();
        let expected_shift = bivector_op(&lam0.scale(&crate::rat::rat(-1, 2)));
        assert_eq!(induced.order_difference(&constant, 2), expected_shift);
    }

    #[test]
    fn star_for_class_on_the_flat_torus_is_moyal() {
        let base = Chart::torus(2, 0);
        let series = ClosedFormSeries::new(base, vec![darboux(base)]).unwrap();
        let star = star_for_class(&series, None, 3).unwrap();
        let moyal = StarTable::moyal(&darboux(base).invert().unwrap(), 3);
        assert_eq!(star, moyal);
    }

    #[test]
    fn star_for_class_orders_are_compatible() {
        let base = Chart::torus(2, 0);
        let series =
            ClosedFormSeries::new(base, vec![darboux(base), wave_form(base)]).unwrap();
        let star2 = star_for_class(&series, None, 2).unwrap();
        let star3 = star_for_class(&series, None, 3).unwrap();
        assert!(star3.agrees_through(&star2, 2));
    }

    #[test]
    fn perturbing_the_class_at_order_k_shifts_cochain_k_plus_one() {
        // Ω′ = Ω + ℏ^k·α: the star products agree through ℏ^k and differ at
        // ℏ^{k+1} exactly by the bivector with matrix −½·Λ⁰ α Λ⁰.
        let base = Chart::torus(2, 0);
        let lam0 = darboux(base).invert().unwrap();
        for k in 1..=2u32 {
            for alpha in [darboux(base), wave_form(base)] {
                let n = k + 1;
                let plain = ClosedFormSeries::new(base, vec![darboux(base)]).unwrap();
                let mut forms = vec![darboux(base)];
                for _ in 1..k {
                    forms.push(FormMatrix::zero(base));
                }
                forms.push(alpha.clone());
                let bumped = ClosedFormSeries::new(base, forms).unwrap();

                let c = star_for_class(&plain, None, n).unwrap();
                let c_bumped = star_for_class(&bumped, None, n).unwrap();
                assert!(c_bumped.agrees_through(&c, k), "k={k}");
                let shift = lam0.mat_mul(&alpha).mat_mul(&lam0);
                let expected = bivector_op(&shift.scale(&crate::rat::rat(-1, 2)));
                assert_eq!(
                    c_bumped.order_difference(&c, n),
                    expected,
                    "k={k}, alpha constant={}",
                    alpha.get(0, 1).is_x_constant()
                );
            }
        }
    }

    #[test]
    fn find_primitive_on_the_torus() {
        let base = Chart::torus(2, 0);
        // frozen: cos(x¹) dx¹∧dx² has primitive sin(x¹) dx²
        let nu = find_primitive(&wave_form(base)).unwrap().unwrap();
        let mut expected = OneForm::zero(base);
        expected.set(1, BaseFunction::sin_wave(base, vec![1, 0]));
        assert_eq!(nu, expected);

        // the standard area form has a constant mode and no primitive
        assert!(find_primitive(&darboux(base)).unwrap().is_none());

        // mixed: exact part plus constant obstruction is still obstructed
        assert!(find_primitive(&darboux(base).add(&wave_form(base)))
            .unwrap()
            .is_none());

        // sine modes and t-coefficients ride along
        let hat = Chart::torus(2, 2);
        let s = BaseFunction::sin_wave(hat, vec![1, -1]).t_mul(2);
        let mut beta = FormMatrix::zero(hat);
        beta.set(0, 1, s.clone());
        beta.set(1, 0, s.neg());
        let nu2 = find_primitive(&beta).unwrap().unwrap();
        assert_eq!(
            nu2.to_qform().exterior_d().to_form_matrix(),
            beta
        );
    }

    #[test]
    fn find_primitive_on_affine_charts_always_succeeds() {
        let base = Chart::affine(2, 0);
        let area = FormMatrix::from_rat_entries(
            base,
            &[rat_int(0), rat_int(1), rat_int(-1), rat_int(0)],
        );
        let nu = find_primitive(&area).unwrap().unwrap();
        // frozen: ½(x¹ dx² − x² dx¹)
        let mut expected = OneForm::zero(base);
        expected.set(0, BaseFunction::monomial(base, vec![0, 1]).scale(&crate::rat::rat(-1, 2)));
        expected.set(1, BaseFunction::monomial(base, vec![1, 0]).scale(&crate::rat::rat(1, 2)));
        assert_eq!(nu, expected);

        // a polynomial closed form: d(x¹x² dx¹) = .. use β = x¹ dx¹∧dx²
        let mut beta = area.clone();
        beta.set(0, 1, BaseFunction::monomial(base, vec![1, 0]));
        beta.set(1, 0, BaseFunction::monomial(base, vec![1, 0]).neg());
        let nu2 = find_primitive(&beta).unwrap().unwrap();
        assert_eq!(nu2.to_qform().exterior_d().to_form_matrix(), beta);
    }

    #[test]
    fn classes_equal_reports_witnesses_and_first_failure() {
        let base = Chart::torus(2, 0);
        let w0 = darboux(base);
        let a = ClosedFormSeries::new(base, vec![w0.clone()]).unwrap();
        let b = ClosedFormSeries::new(base, vec![w0.clone(), wave_form(base)]).unwrap();
        match classes_equal(&a, &b).unwrap() {
            ClassComparison::Equal { primitives } => {
                assert_eq!(primitives.len(), 2);
                assert!(primitives[0].is_zero());
                let d1 = primitives[1].to_qform().exterior_d().to_form_matrix();
                assert_eq!(d1, wave_form(base).neg());
            }
            other => panic!("expected equal classes, got {other:?}"),
        }

        let c = ClosedFormSeries::new(base, vec![w0.clone(), w0.clone()]).unwrap();
        match classes_equal(&a, &c).unwrap() {
            ClassComparison::Differ { order } => assert_eq!(order, 1),
            other => panic!("expected differing classes, got {other:?}"),
        }

        // affine charts: all classes trivial
        let aff = Chart::affine(2, 0);
        let waff = FormMatrix::from_rat_entries(
            aff,
            &[rat_int(0), rat_int(1), rat_int(-1), rat_int(0)],
        );
        let pa = ClosedFormSeries::new(aff, vec![waff.clone()]).unwrap();
        let pb = ClosedFormSeries::new(aff, vec![waff.clone(), waff.clone()]).unwrap();
        assert!(classes_equal(&pa, &pb).unwrap().is_equal());
    }

    #[test]
    fn closed_form_series_validates_its_input() {
        let base = Chart::torus(2, 0);
        // non-invertible leading form
        assert!(matches!(
            ClosedFormSeries::new(base, vec![FormMatrix::zero(base)]),
            Err(KernelError::Precondition(_))
        ));
        // non-constant leading form
        assert!(matches!(
            ClosedFormSeries::new(base, vec![wave_form(base)]),
            Err(KernelError::Precondition(_))
        ));
        // non-closed higher coefficient: sin(x²) dx¹∧dx² is closed on T²
        // (top degree), so build a non-antisymmetric matrix instead
        let mut bad = FormMatrix::zero(base);
        bad.set(0, 1, BaseFunction::cos_wave(base, vec![1, 0]));
        assert!(matches!(
            ClosedFormSeries::new(base, vec![darboux(base), bad]),
            Err(KernelError::Precondition(_)) | Err(KernelError::Schema(_))
        ));
        // polynomial representative reproduces the coefficients as t-slices
        let series =
            ClosedFormSeries::new(base, vec![darboux(base), wave_form(base)]).unwrap();
        let omega_t = series.polynomial_representative(3);
        for k in 0..=1usize {
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(
                        omega_t.get(i, j).t_slice(k as u32).with_t_cap(0),
                        *series.form(k).get(i, j)
                    );
                }
            }
        }
    }
}
