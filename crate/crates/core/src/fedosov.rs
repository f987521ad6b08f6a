//! Chart-level Fedosov machinery: symplectic connections, the covariant
//! derivative on the formal Weyl bundle, its curvature, the flatness
//! recursion, flat sections, and star-product tables.
//!
//! Conventions (all verified by executable identities, not taken on faith):
//!
//! * covariant derivative `∂a = Σ_i dx^i ∧ (∂_{x^i}a − Γ^k_{ij} y^j ∂_{y^k}a)`;
//! * curvature element `R̄ = ½ ω_{pl} R^l_{mij} y^p y^m dx^i∧dx^j` with
//!   `R^l_{mij} = ∂_iΓ^l_{jm} − ∂_jΓ^l_{im} + Γ^k_{jm}Γ^l_{ik} − Γ^k_{im}Γ^l_{jk}`,
//!   normalized so that `2ℏ ∂² = ad(R̄)` — checked on a spanning set at
//!   construction, and the build aborts if it fails;
//! * the connection 1-form is stored as `r = 2ℏγ` (the element `γ` itself
//!   has an `ℏ^{-1}`-coefficient and does not live in the algebra), with
//!   gauge `δ⁻¹r = 0`, solving `R̄ + ∂r − δr + (1/2ℏ) r∘r = 0`;
//! * the flat derivation is `D = ∂ − δ + (1/2ℏ) ad(r)`, and flat sections
//!   are reconstructed from their scalar part by `τ = f + δ⁻¹(∂τ + (1/2ℏ)ad(r)τ)`.
//!
//! Every division by ℏ here is exact: `ad(r)(·)` and `r∘r` have no
//! zero-contraction part (coefficients commute there), so each term carries
//! at least one power of ℏ. Identities that pass through such a division
//! are compared below the caps boundary (see `truncate_weight`), where the
//! computed values provably agree with the untruncated ones.

use crate::base::{BaseFunction, Chart};
use crate::error::{KernelError, Result};
use crate::extract::JetPoly;
use crate::form::FormMatrix;
use crate::ops::HSeries;
use crate::rat::{rat, rat_int};
use crate::table::{BiDiffOp, StarTable};
use crate::weyl::{spanning_keys, Caps, Coeff, TermKey, Weyl, WeylAlgebra};

/// A chart with a closed, fiberwise-invertible 2-form and the ℏ-order cap.
///
/// The inverse bivector is computed once at construction; both validation
/// failures (non-closed, non-invertible leading block) surface as errors.
#[derive(Clone, Debug)]
pub struct ChartPoisson {
    chart: Chart,
    n: u32,
    omega: FormMatrix,
    lambda: FormMatrix,
}

impl ChartPoisson {
    pub fn new(chart: Chart, n: u32, omega: FormMatrix) -> Result<Self> {
        omega.chart().assert_compat(&chart, "ChartPoisson::new");
        omega.check_antisymmetric("ChartPoisson 2-form")?;
        omega.check_closed("ChartPoisson 2-form")?;
        let lambda = omega.invert()?;
        Ok(ChartPoisson { chart, n, omega, lambda })
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// The ℏ-order through which star products are requested.
    pub fn order_cap(&self) -> u32 {
        self.n
    }

    pub fn omega(&self) -> &FormMatrix {
        &self.omega
    }

    pub fn lambda(&self) -> &FormMatrix {
        &self.lambda
    }

    /// The Weyl algebra sized for this chart's ℏ-order.
    pub fn algebra(&self) -> WeylAlgebra {
        WeylAlgebra::new(self.chart, Caps::for_order(self.n))
    }
}

/// Christoffel symbols `Γ^k_{ij}` of a connection in the leaf directions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoliatedConnection {
    chart: Chart,
    gamma: Vec<BaseFunction>,
}

impl FoliatedConnection {
    pub fn zero(chart: Chart) -> Self {
        let d = chart.dim;
        FoliatedConnection {
            chart,
            gamma: vec![BaseFunction::zero(chart); d * d * d],
        }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    fn idx(&self, k: usize, i: usize, j: usize) -> usize {
        let d = self.chart.dim;
        assert!(k < d && i < d && j < d, "Christoffel index out of range");
        (k * d + i) * d + j
    }

    /// `Γ^k_{ij}`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> &BaseFunction {
        &self.gamma[self.idx(k, i, j)]
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, f: BaseFunction) {
        f.chart().assert_compat(&self.chart, "FoliatedConnection::set");
        let ix = self.idx(k, i, j);
        self.gamma[ix] = f;
    }

    pub fn is_zero(&self) -> bool {
        self.gamma.iter().all(BaseFunction::is_zero)
    }

    pub fn is_torsion_free(&self) -> bool {
        let d = self.chart.dim;
        (0..d).all(|k| {
            (0..d).all(|i| (i..d).all(|j| self.get(k, i, j) == self.get(k, j, i)))
        })
    }

    /// The torsion-free part: `½(Γ^k_{ij} + Γ^k_{ji})`.
    pub fn symmetrized(&self) -> Self {
        let d = self.chart.dim;
        let mut out = FoliatedConnection::zero(self.chart);
        let half = rat(1, 2);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    out.set(
                        k,
                        i,
                        j,
                        self.get(k, i, j).add(self.get(k, j, i)).scale(&half),
                    );
                }
            }
        }
        out
    }

    /// `(∇_i ω)_{jk} = ∂_i ω_{jk} − Γ^l_{ij} ω_{lk} − Γ^l_{ik} ω_{jl}`.
    pub fn nabla_omega(&self, omega: &FormMatrix, i: usize, j: usize, k: usize) -> BaseFunction {
        let d = self.chart.dim;
        let mut a = omega.get(j, k).dx(i);
        for l in 0..d {
            a = a
                .sub(&self.get(l, i, j).mul(omega.get(l, k)))
                .sub(&self.get(l, i, k).mul(omega.get(j, l)));
        }
        a
    }

    /// Check `∇ω = 0` termwise.
    pub fn check_parallel(&self, omega: &FormMatrix) -> Result<()> {
        let d = self.chart.dim;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    if !self.nabla_omega(omega, i, j, k).is_zero() {
                        return Err(KernelError::Postcondition(format!(
                            "connection does not preserve the 2-form: (∇_{i} ω)_{{{j}{k}}} ≠ 0"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Produce a torsion-free connection preserving the chart's 2-form, from an
/// arbitrary starting connection: first symmetrize, then correct by the
/// tensor `S` with `ω(S(u,v),w) = ⅓((∇¹_u ω)(v,w) + (∇¹_v ω)(u,w))`.
/// Both properties are re-checked termwise before returning.
pub fn symplectize_connection(
    start: &FoliatedConnection,
    p: &ChartPoisson,
) -> Result<FoliatedConnection> {
    start
        .chart()
        .assert_compat(&p.chart, "symplectize_connection");
    let d = p.chart.dim;
    let g1 = start.symmetrized();
    let third = rat(1, 3);
    let mut out = g1.clone();
    for i in 0..d {
        for j in 0..d {
            // T_{ijk} = ⅓((∇¹_i ω)_{jk} + (∇¹_j ω)_{ik}), then S^n_{ij} = T_{ijk} Λ^{kn}
            let t: Vec<BaseFunction> = (0..d)
                .map(|k| {
                    g1.nabla_omega(&p.omega, i, j, k)
                        .add(&g1.nabla_omega(&p.omega, j, i, k))
                        .scale(&third)
                })
                .collect();
            for n in 0..d {
                let mut s = BaseFunction::zero(p.chart);
                for (k, tk) in t.iter().enumerate() {
                    s = s.add(&tk.mul(p.lambda.get(k, n)));
                }
                let new = out.get(n, i, j).add(&s);
                out.set(n, i, j, new);
            }
        }
    }
    assert!(out.is_torsion_free(), "symmetrization lost torsion-freeness");
    out.check_parallel(&p.omega)?;
    Ok(out)
}

/// Covariant exterior derivative on the Weyl bundle:
/// `∂a = Σ_i dx^i ∧ (∂_{x^i} a − Γ^k_{ij} y^j ∂_{y^k} a)`.
pub fn covariant_derivative<C: Coeff>(conn: &FoliatedConnection, a: &Weyl<C>) -> Weyl<C> {
    let d = conn.chart.dim;
    conn.chart
        .assert_compat(&a.algebra().chart, "covariant_derivative");
    let mut out = Weyl::zero(a.algebra());
    for i in 0..d {
        let mut di = a.x_deriv(i);
        for k in 0..d {
            let dyk = a.y_deriv(k);
            if dyk.is_zero() {
                continue;
            }
            for j in 0..d {
                let g = conn.get(k, i, j);
                if g.is_zero() {
                    continue;
                }
                di = di.sub(&dyk.y_mul(j).scale_base(g));
            }
        }
        out = out.add(&di.dx_wedge_left(i));
    }
    out
}

/// The curvature element `R̄` of a symplectic connection, normalized by the
/// defining identity `2ℏ ∂²a = ad(R̄)(a)` — verified on a spanning set of
/// fiber monomials (with constant and wave coefficients) before returning.
pub fn curvature(conn: &FoliatedConnection, p: &ChartPoisson) -> Result<Weyl<BaseFunction>> {
    conn.chart.assert_compat(&p.chart, "curvature");
    let d = p.chart.dim;
    let alg = p.algebra();
    let half = rat(1, 2);

    // R^l_{mij} = ∂_iΓ^l_{jm} − ∂_jΓ^l_{im} + Γ^k_{jm}Γ^l_{ik} − Γ^k_{im}Γ^l_{jk}
    let riemann = |l: usize, m: usize, i: usize, j: usize| -> BaseFunction {
        let mut r = conn.get(l, j, m).dx(i).sub(&conn.get(l, i, m).dx(j));
        for k in 0..d {
            r = r
                .add(&conn.get(k, j, m).mul(conn.get(l, i, k)))
                .sub(&conn.get(k, i, m).mul(conn.get(l, j, k)));
        }
        r
    };

    let mut rbar = Weyl::zero(alg);
    for pi in 0..d {
        for m in 0..d {
            for i in 0..d {
                for j in (i + 1)..d {
                    // antisymmetrized in (i,j) explicitly; the ½ from the
                    // all-indices sum cancels against the (i,j)/(j,i) fold
                    let mut c = BaseFunction::zero(p.chart);
                    for l in 0..d {
                        c = c.add(
                            &p.omega
                                .get(pi, l)
                                .mul(&riemann(l, m, i, j).sub(&riemann(l, m, j, i)))
                                .scale(&half),
                        );
                    }
                    if c.is_zero() {
                        continue;
                    }
                    let mut y = vec![0u32; d];
                    y[pi] += 1;
                    y[m] += 1;
                    let key = TermKey {
                        hbar: 0,
                        y,
                        dx: (1u16 << i) | (1u16 << j),
                    };
                    rbar.add_term(key, c);
                }
            }
        }
    }

    // Defining identity on a spanning set: 2ℏ ∂²a = ad(R̄)(a).
    for key in spanning_keys(&alg, 3, 1, 0) {
        for coeff in [
            BaseFunction::one(p.chart),
            BaseFunction::cos_wave_or_linear(p.chart, 0),
        ] {
            let mut a = Weyl::zero(alg);
            a.add_term(key.clone(), coeff);
            let lhs = covariant_derivative(conn, &covariant_derivative(conn, &a))
                .hbar_mul(1)
                .scale(&rat_int(2));
            let rhs = rbar.ad(&a, &p.lambda);
            if lhs != rhs {
                return Err(KernelError::Postcondition(
                    "curvature identity 2ℏ∂² = ad(R̄) failed on the spanning set; \
                     connection and curvature conventions are inconsistent"
                        .into(),
                ));
            }
        }
    }
    Ok(rbar)
}

/// Flat-bundle data for one chart: symplectized connection, curvature
/// element, and the solved connection 1-form `r = 2ℏγ`.
#[derive(Clone, Debug)]
pub struct FedosovData {
    poisson: ChartPoisson,
    conn: FoliatedConnection,
    rbar: Weyl<BaseFunction>,
    r: Weyl<BaseFunction>,
}

impl FedosovData {
    /// Full pipeline: symplectize the starting connection, build and verify
    /// the curvature element, then solve the flatness recursion.
    pub fn build(p: &ChartPoisson, start: &FoliatedConnection) -> Result<Self> {
        let conn = symplectize_connection(start, p)?;
        let rbar = curvature(&conn, p)?;
        Self::from_parts(p, conn, rbar)
    }

    /// Solve `R̄ + ∂r − δr + (1/2ℏ) r∘r = 0` with gauge `δ⁻¹r = 0` by the
    /// degree-raising fixed point `r ← δ⁻¹(R̄ + ∂r + (1/2ℏ) r∘r)`, then
    /// verify the gauge, the scalar-part normalization, and the defining
    /// equation below the caps boundary.
    pub fn from_parts(
        p: &ChartPoisson,
        conn: FoliatedConnection,
        rbar: Weyl<BaseFunction>,
    ) -> Result<Self> {
        let alg = p.algebra();
        let lam = &p.lambda;
        let half = rat(1, 2);
        let max_iter = alg.caps.degree + 2;
        let mut r: Weyl<BaseFunction> = Weyl::zero(alg);
        let mut converged = false;
        for _ in 0..=max_iter {
            let quad = r.moyal(&r, lam).hbar_div(1)?.scale(&half);
            let rhs = rbar.add(&covariant_derivative(&conn, &r)).add(&quad);
            let next = rhs.delta_inv();
            if next == r {
                converged = true;
                break;
            }
            r = next;
        }
        if !converged {
            return Err(KernelError::CapsExceeded(format!(
                "flatness recursion did not stabilize within {max_iter} iterations \
                 at fiber-degree cap {}; enlarge the caps",
                alg.caps.degree
            )));
        }

        if !r.delta_inv().is_zero() {
            return Err(KernelError::Postcondition(
                "solved connection form violates the gauge δ⁻¹r = 0".into(),
            ));
        }
        if !r.pr0().is_zero() {
            return Err(KernelError::Postcondition(
                "solved connection form has a scalar part".into(),
            ));
        }
        let quad = r.moyal(&r, lam).hbar_div(1)?.scale(&half);
        let eq = rbar
            .add(&covariant_derivative(&conn, &r))
            .sub(&r.delta())
            .add(&quad);
        let check_w = alg.caps.degree.saturating_sub(2);
        if !eq.truncate_weight(check_w).is_zero() {
            return Err(KernelError::Postcondition(format!(
                "flatness equation fails below the caps boundary (weight ≤ {check_w})"
            )));
        }

        Ok(FedosovData { poisson: p.clone(), conn, rbar, r })
    }

    pub fn poisson(&self) -> &ChartPoisson {
        &self.poisson
    }

    pub fn connection(&self) -> &FoliatedConnection {
        &self.conn
    }

    pub fn curvature_element(&self) -> &Weyl<BaseFunction> {
        &self.rbar
    }

    /// The solved connection 1-form `r = 2ℏγ`.
    pub fn connection_form(&self) -> &Weyl<BaseFunction> {
        &self.r
    }

    pub fn algebra(&self) -> WeylAlgebra {
        self.poisson.algebra()
    }

    /// The flat derivation `D a = ∂a − δa + (1/2ℏ)[r, a]`.
    pub fn d_operator<C: Coeff>(&self, a: &Weyl<C>) -> Result<Weyl<C>> {
        let r_l: Weyl<C> = self.r.lift_into(|b| C::from_base(b.clone()));
        let ad = r_l
            .ad(a, &self.poisson.lambda)
            .hbar_div(1)?
            .scale(&rat(1, 2));
        Ok(covariant_derivative(&self.conn, a)
            .sub(&a.delta())
            .add(&ad))
    }

    /// Check `D∘D = 0` on a spanning set, below the caps boundary.
    pub fn verify_flatness(&self) -> Result<()> {
        let alg = self.algebra();
        let check_w = alg.caps.degree.saturating_sub(3);
        for key in spanning_keys(&alg, 3, 1, 0) {
            for coeff in [
                BaseFunction::one(self.poisson.chart),
                BaseFunction::cos_wave_or_linear(self.poisson.chart, 0),
            ] {
                let mut a = Weyl::zero(alg);
                a.add_term(key.clone(), coeff);
                let dda = self.d_operator(&self.d_operator(&a)?)?;
                if !dda.truncate_weight(check_w).is_zero() {
                    return Err(KernelError::Postcondition(format!(
                        "D² ≠ 0 below the caps boundary (weight ≤ {check_w})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The unique flat section with prescribed scalar part: solves
    /// `Dτ = 0`, `pr₀τ = f` by `τ ← f + δ⁻¹(∂τ + (1/2ℏ)[r, τ])`.
    pub fn quantize<C: Coeff>(&self, f: &Weyl<C>) -> Result<Weyl<C>> {
        if !f.is_scalar() {
            return Err(KernelError::Precondition(
                "quantize expects a scalar element (no fiber or form part)".into(),
            ));
        }
        let alg = self.algebra();
        f.algebra().assert_compat(&alg, "quantize");
        let r_l: Weyl<C> = self.r.lift_into(|b| C::from_base(b.clone()));
        let lam = &self.poisson.lambda;
        let half = rat(1, 2);
        let max_iter = alg.caps.degree + 2;
        let mut tau = f.clone();
        for _ in 0..=max_iter {
            let ad = r_l.ad(&tau, lam).hbar_div(1)?.scale(&half);
            let rhs = covariant_derivative(&self.conn, &tau).add(&ad);
            let next = f.add(&rhs.delta_inv());
            if next == tau {
                if &tau.pr0() != f {
                    return Err(KernelError::Postcondition(
                        "flat section does not project back onto its scalar part".into(),
                    ));
                }
                return Ok(tau);
            }
            tau = next;
        }
        Err(KernelError::CapsExceeded(format!(
            "flat-section recursion did not stabilize within {max_iter} iterations"
        )))
    }

    /// Star product of two ℏ-series of functions:
    /// `f ⋆ g = pr₀(τ(f) ∘ τ(g))`, truncated at the chart's ℏ-order.
    pub fn star(&self, f: &HSeries, g: &HSeries) -> Result<HSeries> {
        let n = self.poisson.n;
        if f.cap() != n || g.cap() != n {
            return Err(KernelError::Precondition(format!(
                "star expects ℏ-series capped at the chart order {n}"
            )));
        }
        let alg = self.algebra();
        let tf = self.quantize::<BaseFunction>(&weyl_from_series(alg, f))?;
        let tg = self.quantize::<BaseFunction>(&weyl_from_series(alg, g))?;
        let prod = tf.moyal(&tg, &self.poisson.lambda).pr0();
        Ok(series_from_scalar(&prod, n))
    }

    /// The star-product table through the chart's ℏ-order, extracted in one
    /// pass by quantizing indeterminate jet symbols: run the pipeline on
    /// `F₀`, `G₀` and read off every coefficient of `F_α G_β`.
    pub fn cochains(&self) -> Result<StarTable> {
        let chart = self.poisson.chart;
        let n = self.poisson.n;
        let alg = self.algebra();
        let f = Weyl::from_coeff(alg, JetPoly::f_symbol(chart));
        let g = Weyl::from_coeff(alg, JetPoly::g_symbol(chart));
        let tf = self.quantize(&f)?;
        let tg = self.quantize(&g)?;
        let prod = tf.moyal(&tg, &self.poisson.lambda).pr0();

        let mut table = StarTable::zero(chart, n);
        for m in 0..=n {
            let jp: JetPoly = prod.scalar_coeff(m);
            let mut op = BiDiffOp::zero(chart);
            for ((fa, gb), c) in jp.terms() {
                match (fa, gb) {
                    (Some(a), Some(b)) => op.add_term(a.clone(), b.clone(), c.clone()),
                    _ => {
                        return Err(KernelError::Postcondition(
                            "extracted cochain has a term not bilinear in (f,g)".into(),
                        ))
                    }
                }
            }
            table.set_order(m, op);
        }
        table.validate()?;
        Ok(table)
    }
}

/// Embed an ℏ-series of functions as a scalar element of the Weyl algebra.
pub fn weyl_from_series(alg: WeylAlgebra, h: &HSeries) -> Weyl<BaseFunction> {
    h.chart().assert_compat(&alg.chart, "weyl_from_series");
    let mut w = Weyl::zero(alg);
    for m in 0..=h.cap() {
        let mut key = TermKey::scalar(alg.chart.dim);
        key.hbar = m;
        w.add_term(key, h.order(m).clone());
    }
    w
}

/// Read a scalar Weyl element back as an ℏ-series capped at `cap`.
/// Non-scalar input is a programmer error.
pub fn series_from_scalar(w: &Weyl<BaseFunction>, cap: u32) -> HSeries {
    assert!(w.is_scalar(), "series_from_scalar expects a scalar element");
    let chart = w.algebra().chart;
    let orders: Vec<BaseFunction> = (0..=cap).map(|m| w.scalar_coeff(m)).collect();
    HSeries::from_orders(chart, cap, orders)
}
