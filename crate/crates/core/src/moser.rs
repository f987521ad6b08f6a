//! Formal Moser isotopies between t-families of symplectic forms, their
//! pullback operators, and star-product equivalence machinery.
//!
//! Everything here is formal in the deformation parameter `t` (computed on a
//! chart with `t_cap = n_t` and exact through `t^{n_t}`): a Moser family is
//! not a numerical flow but the jet of one at `t = 0`.  The generating field
//! `Z_s = Λ_s ν` (with `ω_s = Ω₂ + s·dν` and `Λ_s` its t-truncated inverse,
//! normalized so that `ι_{Z_s} ω_s = −ν`) has coefficients of t-order ≥ 1
//! and polynomial dependence on the auxiliary flow parameter `s ∈ [0,1]`,
//! so the flow equations integrate exactly: the displacement `D(x)` with
//! `φ(x) = x + D(x)` solves `dD_s/ds = Z_s(x + D_s)` order by order in `s`
//! with polynomial antiderivatives, evaluated at `s = 1`.
//!
//! Pullbacks are Taylor expansions through the displacement:
//! `(P f)(x) = f(x + D(x)) = Σ_α D^α/α! · ∂^α f`, a differential operator of
//! the triangular form `Id + O(t)`, hence invertible by a t-Neumann series.
//! Forms pull back through the Jacobian `A = Id + ∂D` and the same Taylor
//! operator.  [`conjugate_star`] rewrites `(f,g) ↦ P⁻¹(Pf ⋆ Pg)` as an
//! explicit bidifferential table, and [`equivalence_search`] looks for an
//! operator `T = Id + ℏT₁ + …` intertwining two star products by solving
//! bounded linear systems order by order in `ℏ` — an intentionally
//! incomplete procedure whose honest failure mode is `Inconclusive`, never
//! a false "not equivalent".

use crate::base::{BaseFunction, Chart, XBasis};
use crate::error::{KernelError, Result};
use crate::form::{FormMatrix, OneForm};
use crate::jets::{find_primitive, jet_operator};
use crate::linalg::solve_particular;
use crate::ops::{multi_total, multi_zero, multis_up_to, DiffOp, HSeries, Multi, OpJet};
use crate::rat::{factorial, rat_int, Rat};
use crate::table::{separating_family, StarTable};
use num::Zero;
use std::collections::BTreeMap;

/// An s-polynomial with function coefficients (`v[p]` = coefficient of `s^p`).
type SPoly = Vec<BaseFunction>;

fn spoly_coeff(v: &SPoly, p: usize, chart: Chart) -> BaseFunction {
    v.get(p).cloned().unwrap_or_else(|| BaseFunction::zero(chart))
}

fn spoly_mul(a: &SPoly, b: &SPoly, chart: Chart) -> SPoly {
    let mut out = vec![BaseFunction::zero(chart); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            out[i + j] = out[i + j].add(&ai.mul(bj));
        }
    }
    out
}

/// A formal family of foliation-preserving diffeomorphisms `φ_t` with
/// `φ₀ = id`, represented by its generating field and the induced pullback
/// operator `P = Id + Σ_{j≥1} t^j P_j` (one differential operator whose
/// coefficients carry the t-grading).
#[derive(Clone, Debug)]
pub struct FormalDiffeoFamily {
    chart: Chart,
    /// Generator components: `generator[p][i]` is the `s^p` coefficient of
    /// `Z_s^i`; every entry has t-order ≥ 1.
    generator: Vec<Vec<BaseFunction>>,
    /// Displacement `D` with `φ(x) = x + D(x)`, evaluated at `s = 1`.
    displacement: Vec<BaseFunction>,
    pullback: DiffOp,
    inverse: DiffOp,
}

impl FormalDiffeoFamily {
    /// The identity family.
    pub fn identity(chart: Chart) -> Self {
        FormalDiffeoFamily {
            chart,
            generator: Vec::new(),
            displacement: vec![BaseFunction::zero(chart); chart.dim],
            pullback: DiffOp::identity(chart),
            inverse: DiffOp::identity(chart),
        }
    }

    /// Integrate the flow of an s-polynomial generating field whose
    /// components all have t-order ≥ 1 (`generator[p][i]` = `s^p`
    /// coefficient of `Z_s^i`).
    pub fn from_generator(chart: Chart, generator: Vec<Vec<BaseFunction>>) -> Self {
        let d = chart.dim;
        for row in &generator {
            assert_eq!(row.len(), d, "generator component count");
            for z in row {
                assert!(
                    z.is_zero() || z.t_order().unwrap_or(0) >= 1,
                    "Moser generator components must vanish at t = 0"
                );
            }
        }
        // dD_s/ds = Z_s(x + D_s): expand the right side as the Taylor sum
        // Σ_α D_s^α/α! · ∂^α Z_s and match s-coefficients; the s^{p+1}
        // coefficient of D is the exact antiderivative of the s^p
        // coefficient of the right side.  Every term of D carries t-order
        // ≥ 1, so chains longer than t_cap vanish and the recursion stops.
        let s_deg_z = generator.len();
        let p_max = (chart.t_cap as usize + 1) * (s_deg_z + 2);
        let mut disp: Vec<Vec<BaseFunction>> =
            vec![vec![BaseFunction::zero(chart); d]; p_max + 2];
        let alphas = multis_up_to(d, chart.t_cap);
        for p in 0..=p_max {
            // s^p coefficient of Z_s(x + D_s), component by component
            let mut rhs = vec![BaseFunction::zero(chart); d];
            for alpha in &alphas {
                // D_s^α as an s-polynomial (uses only s-degrees ≤ p)
                let mut pow: SPoly = vec![BaseFunction::one(chart)];
                for (i, &a) in alpha.iter().enumerate() {
                    for _ in 0..a {
                        let comp: SPoly =
                            (0..=p).map(|q| disp[q][i].clone()).collect();
                        pow = spoly_mul(&pow, &comp, chart);
                    }
                }
                let inv_fact = factorial(1)
                    / alpha.iter().map(|&a| factorial(a)).product::<Rat>();
                for (i, r) in rhs.iter_mut().enumerate() {
                    for (q, row) in generator.iter().enumerate() {
                        if q > p {
                            break;
                        }
                        let dz = row[i].dx_multi(alpha);
                        if dz.is_zero() {
                            continue;
                        }
                        *r = r.add(
                            &spoly_coeff(&pow, p - q, chart)
                                .mul(&dz)
                                .scale(&inv_fact),
                        );
                    }
                }
            }
            for i in 0..d {
                disp[p + 1][i] = rhs[i].scale(&(rat_int(1) / rat_int(p as i64 + 1)));
            }
        }
        for row in disp.iter().skip(p_max + 1) {
            for c in row {
                assert!(c.is_zero(), "displacement flow failed to terminate");
            }
        }
        // evaluate at s = 1
        let mut displacement = vec![BaseFunction::zero(chart); d];
        for row in &disp {
            for (i, c) in row.iter().enumerate() {
                displacement[i] = displacement[i].add(c);
            }
        }
        let pullback = taylor_operator(chart, &displacement);
        let inverse = invert_unitriangular(&pullback);
        FormalDiffeoFamily { chart, generator, displacement, pullback, inverse }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn is_identity(&self) -> bool {
        self.displacement.iter().all(BaseFunction::is_zero)
    }

    /// `s^p` coefficient of the generating field (components indexed by
    /// chart coordinate); zero when `p` exceeds the stored s-degree.
    pub fn generator_coefficient(&self, p: usize) -> Vec<BaseFunction> {
        self.generator
            .get(p)
            .cloned()
            .unwrap_or_else(|| vec![BaseFunction::zero(self.chart); self.chart.dim])
    }

    /// Displacement components `D^i` with `φ(x) = x + D(x)` (at `s = 1`).
    pub fn displacement(&self) -> &[BaseFunction] {
        &self.displacement
    }

    /// The pullback operator `P = Id + O(t)` with `P f = f ∘ φ`.
    pub fn pullback_operator(&self) -> &DiffOp {
        &self.pullback
    }

    /// Exact inverse of the pullback operator modulo `t^{t_cap+1}`.
    pub fn inverse_operator(&self) -> &DiffOp {
        &self.inverse
    }

    /// Pull back a function: `f ↦ f ∘ φ`.
    pub fn pullback_function(&self, f: &BaseFunction) -> BaseFunction {
        self.pullback.apply(f)
    }

    /// Pull back a 1-form: `(φ*ν)_j = Σ_k (δ_j^k + ∂_j D^k) · P(ν_k)`.
    pub fn pullback_oneform(&self, nu: &OneForm) -> OneForm {
        nu.chart().assert_compat(&self.chart, "pullback_oneform");
        let d = self.chart.dim;
        let mut out = OneForm::zero(self.chart);
        for j in 0..d {
            let mut comp = BaseFunction::zero(self.chart);
            for k in 0..d {
                let jac = self.jacobian_entry(k, j);
                comp = comp.add(&jac.mul(&self.pullback.apply(nu.get(k))));
            }
            out.set(j, comp);
        }
        out
    }

    /// Pull back a 2-form given by its coefficient matrix:
    /// `(φ*β)_{ij} = Σ_{kl} A^k_i A^l_j · P(β_{kl})` with `A = Id + ∂D`.
    pub fn pullback_form(&self, beta: &FormMatrix) -> FormMatrix {
        beta.chart().assert_compat(&self.chart, "pullback_form");
        let d = self.chart.dim;
        let mut out = FormMatrix::zero(self.chart);
        for i in 0..d {
            for j in 0..d {
                let mut entry = BaseFunction::zero(self.chart);
                for k in 0..d {
                    let aki = self.jacobian_entry(k, i);
                    if aki.is_zero() {
                        continue;
                    }
                    for l in 0..d {
                        let alj = self.jacobian_entry(l, j);
                        if alj.is_zero() {
                            continue;
                        }
                        entry = entry
                            .add(&aki.mul(&alj).mul(&self.pullback.apply(beta.get(k, l))));
                    }
                }
                out.set(i, j, entry);
            }
        }
        out
    }

    /// Jacobian entry `A^k_j = δ^k_j + ∂_j D^k`.
    fn jacobian_entry(&self, k: usize, j: usize) -> BaseFunction {
        let mut e = self.displacement[k].dx(j);
        if k == j {
            e = e.add(&BaseFunction::one(self.chart));
        }
        e
    }

    /// The ℏ-jet `ρ_n` of the pullback: an operator series with identity
    /// leading term, obtained by reading the t-grading of `P` as ℏ-grading.
    pub fn rho_jet(&self, n: u32) -> Result<OpJet> {
        let mut lifted = OpJet::zero(self.chart, n);
        lifted.set_order(0, self.pullback.clone());
        let rho = jet_operator(&lifted, n)?;
        assert_eq!(
            *rho.order(0),
            DiffOp::identity(self.chart.with_t_cap(0)),
            "pullback jets must start at the identity"
        );
        Ok(rho)
    }
}

/// The Taylor operator `f ↦ f(x + D(x)) = Σ_α D^α/α! ∂^α f` of a
/// displacement with t-order ≥ 1 components.
fn taylor_operator(chart: Chart, displacement: &[BaseFunction]) -> DiffOp {
    let mut op = DiffOp::zero(chart);
    for alpha in multis_up_to(chart.dim, chart.t_cap) {
        let mut c = BaseFunction::one(chart);
        for (i, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                c = c.mul(&displacement[i]);
            }
        }
        let fact: Rat = alpha.iter().map(|&a| factorial(a)).product();
        op.add_term(alpha, c.scale(&(rat_int(1) / fact)));
    }
    op
}

/// Invert `P = Id + Q` with `Q` of t-order ≥ 1 by the Neumann series
/// `Σ_{m ≤ t_cap} (−Q)^m` (exact in the t-truncated ring).
fn invert_unitriangular(p: &DiffOp) -> DiffOp {
    let chart = p.chart();
    let q = p.sub(&DiffOp::identity(chart));
    for (_, c) in q.terms() {
        assert!(
            c.t_order().unwrap_or(1) >= 1,
            "operator is not Id + O(t)"
        );
    }
    let mut inv = DiffOp::identity(chart);
    let mut power = DiffOp::identity(chart);
    for _ in 0..chart.t_cap {
        power = power.compose(&q).scale(&-rat_int(1));
        if power.is_zero() {
            break;
        }
        inv = inv.add(&power);
    }
    inv
}

fn check_symplectic_leading(omega: &FormMatrix, ctx: &str) -> Result<Vec<Rat>> {
    let chart = omega.chart();
    let d = chart.dim;
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let lead = omega.get(i, j).t_slice(0);
            if !lead.is_x_constant() {
                return Err(KernelError::Precondition(format!(
                    "{ctx}: the t = 0 part of the family must be a constant form"
                )));
            }
            entries.push(lead.constant_part());
        }
    }
    match crate::form::invert_rat_matrix(&entries, d) {
        Some(inv) => Ok(inv),
        None => Err(KernelError::Precondition(format!(
            "{ctx}: the t = 0 part of the family must be invertible"
        ))),
    }
}

/// Solve the formal Moser problem: find a family `φ_t` with `φ₀ = id` and
/// `φ_t^*(Ω₁(t)) = Ω₂(t)` modulo `t^{n_t+1}`, using [`find_primitive`] for
/// the required primitive of `Ω₁ − Ω₂`.
///
/// Preconditions: both families are closed and antisymmetric on the same
/// chart with `t_cap ≥ n_t`, share a constant invertible form at `t = 0`,
/// and differ by an exact form (otherwise `Precondition` reports the
/// cohomological obstruction).  The postcondition `P(Ω₁) = Ω₂ mod
/// t^{n_t+1}` is re-verified exactly before returning.
pub fn solve_moser(
    omega1: &FormMatrix,
    omega2: &FormMatrix,
    n_t: u32,
) -> Result<FormalDiffeoFamily> {
    omega1
        .chart()
        .assert_compat(&omega2.chart(), "solve_moser");
    if omega1.chart().t_cap < n_t {
        return Err(KernelError::Precondition(format!(
            "solve_moser to t-order {n_t} needs a chart with t_cap ≥ {n_t}"
        )));
    }
    let chart = omega1.chart().with_t_cap(n_t);
    let o1 = omega1.with_t_cap(n_t);
    let o2 = omega2.with_t_cap(n_t);
    o1.check_antisymmetric("solve_moser Ω₁")?;
    o1.check_closed("solve_moser Ω₁")?;
    o2.check_antisymmetric("solve_moser Ω₂")?;
    o2.check_closed("solve_moser Ω₂")?;
    let diff = o1.sub(&o2);
    for i in 0..chart.dim {
        for j in 0..chart.dim {
            if !diff.get(i, j).t_slice(0).is_zero() {
                return Err(KernelError::Precondition(
                    "solve_moser requires Ω₁(0) = Ω₂(0)".into(),
                ));
            }
        }
    }
    check_symplectic_leading(&o2, "solve_moser")?;
    let nu = match find_primitive(&diff)? {
        Some(nu) => nu,
        None => {
            return Err(KernelError::Precondition(
                "solve_moser: Ω₁ − Ω₂ is not exact (the families are not cohomologous)"
                    .into(),
            ))
        }
    };
    solve_moser_with_primitive(&o1, &o2, &nu, n_t)
}

/// [`solve_moser`] with a caller-supplied primitive `ν` of `Ω₁ − Ω₂`
/// (verified exactly before use).
pub fn solve_moser_with_primitive(
    omega1: &FormMatrix,
    omega2: &FormMatrix,
    nu: &OneForm,
    n_t: u32,
) -> Result<FormalDiffeoFamily> {
    omega1
        .chart()
        .assert_compat(&omega2.chart(), "solve_moser");
    if omega1.chart().t_cap < n_t {
        return Err(KernelError::Precondition(format!(
            "solve_moser to t-order {n_t} needs a chart with t_cap ≥ {n_t}"
        )));
    }
    let chart = omega1.chart().with_t_cap(n_t);
    let d = chart.dim;
    let o1 = omega1.with_t_cap(n_t);
    let o2 = omega2.with_t_cap(n_t);
    let nu = OneForm::from_components(
        chart,
        nu.components().iter().map(|c| c.with_t_cap(n_t)).collect(),
    );
    let d_nu = nu.to_qform().exterior_d().to_form_matrix();
    if !d_nu.sub(&o1.sub(&o2)).is_zero() {
        return Err(KernelError::Precondition(
            "solve_moser: the supplied 1-form is not a primitive of Ω₁ − Ω₂".into(),
        ));
    }
    let lam0 = check_symplectic_leading(&o2, "solve_moser")?;

    // ω_s = Ω₂ + s·dν as an s-graded matrix pair; invert by the t-Neumann
    // series around the constant block, with s-grading carried along.
    let lam0_mat = FormMatrix::from_rat_entries(chart, &lam0);
    let w0_const = {
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                entries.push(o2.get(i, j).t_slice(0).constant_part());
            }
        }
        FormMatrix::from_rat_entries(chart, &entries)
    };
    // E_s = (Ω₂ − ω⁰) + s·dν, all entries of t-order ≥ 1.
    let e_s: Vec<FormMatrix> = vec![o2.sub(&w0_const), d_nu.clone()];
    // Λ_s = Σ_{m ≤ t_cap} (−Λ⁰ E_s)^m Λ⁰, s-graded.
    let s_cap = (chart.t_cap as usize + 1) * 2;
    let mut lam_s: Vec<FormMatrix> = vec![FormMatrix::zero(chart); s_cap + 1];
    lam_s[0] = lam0_mat.clone();
    let mut power: Vec<FormMatrix> = vec![lam0_mat.clone()];
    for _ in 0..chart.t_cap {
        // power ← (−Λ⁰ E_s) ∘ power  (s-convolution)
        let mut next = vec![FormMatrix::zero(chart); power.len() + e_s.len() - 1];
        for (a, ea) in e_s.iter().enumerate() {
            let factor = lam0_mat.mat_mul(ea).neg();
            for (b, pb) in power.iter().enumerate() {
                next[a + b] = next[a + b].add(&factor.mat_mul(pb));
            }
        }
        if next.iter().all(FormMatrix::is_zero) {
            break;
        }
        for (p, m) in next.iter().enumerate().take(s_cap + 1) {
            lam_s[p] = lam_s[p].add(m);
        }
        power = next;
    }

    // Z_s = Λ_s ν, normalized so that ι_{Z_s} ω_s = −ν.
    let mut generator: Vec<Vec<BaseFunction>> = Vec::new();
    for lam_p in &lam_s {
        let mut row = Vec::with_capacity(d);
        for i in 0..d {
            let mut comp = BaseFunction::zero(chart);
            for j in 0..d {
                comp = comp.add(&lam_p.get(i, j).mul(nu.get(j)));
            }
            row.push(comp);
        }
        generator.push(row);
    }
    while generator.len() > 1
        && generator
            .last()
            .is_some_and(|row| row.iter().all(BaseFunction::is_zero))
    {
        generator.pop();
    }
    let family = FormalDiffeoFamily::from_generator(chart, generator);
    let pulled = family.pullback_form(&o1);
    if !pulled.sub(&o2).is_zero() {
        return Err(KernelError::Postcondition(
            "solve_moser: pullback of Ω₁ does not reproduce Ω₂".into(),
        ));
    }
    Ok(family)
}

/// Conjugate a star-product table by a diffeomorphism family:
/// `(f, g) ↦ P(P⁻¹f ⋆ P⁻¹g)` as an explicit table, where `P` is the
/// family's pullback operator.  This transports a product adapted to `Ω₁`
/// into one adapted to `Ω₂ = φ*Ω₁`: the result is validated, unital,
/// associative on the separating family, and its antisymmetric first-order
/// part is half the pulled-back Poisson bivector `(φ*ω)⁻¹`.
pub fn conjugate_star(table: &StarTable, family: &FormalDiffeoFamily) -> Result<StarTable> {
    table
        .chart()
        .assert_compat(&family.chart(), "conjugate_star");
    let p = family.pullback_operator();
    let p_inv = family.inverse_operator();
    let mut out = StarTable::zero(table.chart(), table.cap());
    for m in 0..=table.cap() {
        let conj = table
            .order(m)
            .precompose_left(p_inv)
            .precompose_right(p_inv)
            .postcompose(p);
        out.set_order(m, conj);
    }
    out.validate()?;
    let fam = separating_family(out.chart(), 1);
    out.check_unital(&fam)?;
    out.check_associative(&fam)?;
    // antisym C₁ must be half the pulled-back Poisson bivector:
    // (φ*Λ) = (φ*ω)⁻¹ for ω = Λ⁻¹.
    let lam_in = table.antisym_c1().scale(&rat_int(2));
    let omega_in = lam_in.invert()?;
    let lam_pulled = family.pullback_form(&omega_in).invert()?;
    if !out
        .antisym_c1()
        .sub(&lam_pulled.scale(&crate::rat::rat(1, 2)))
        .is_zero()
    {
        return Err(KernelError::Postcondition(
            "conjugate_star: antisymmetric first-order part is not the pulled-back bivector"
                .into(),
        ));
    }
    Ok(out)
}

/// Shared state for the order-by-order equivalence solve.
///
/// The unknown at ℏ-order `m` is `T_m = Σ c_{α,w} · w·∂^α` over multi-indices
/// `1 ≤ |α| ≤ order_bound` and coefficient functions `w` from a separating
/// family.  Imposing `T(f ⋆₁ g) = Tf ⋆₂ Tg` at order `m` on test pairs gives
/// the linear system `δT_m = K_m` with
/// `δT(f,g) = T(fg) − (Tf)g − f(Tg)` and
/// `K_m = Σ_{a+b+c=m, b,c<m} C²_a(T_b f, T_c g) − Σ_{a<m} T_a(C¹_{m−a}(f,g))`.
/// The columns `w·E_α(f,g)` with `E_α(f,g) = ∂^α(fg) − ∂^αf·g − f·∂^αg`
/// depend only on the bounds, so they are assembled once and reused.
struct SearchContext<'a> {
    chart: Chart,
    star1: &'a StarTable,
    star2: &'a StarTable,
    family: &'a [BaseFunction],
    pairs: &'a [(usize, usize)],
    coeff_basis: &'a [BaseFunction],
    alphas: &'a [Multi],
    columns: Vec<BTreeMap<(usize, (u32, XBasis)), Rat>>,
    col_ids: Vec<(usize, usize)>,
}

impl<'a> SearchContext<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        chart: Chart,
        star1: &'a StarTable,
        star2: &'a StarTable,
        family: &'a [BaseFunction],
        pairs: &'a [(usize, usize)],
        coeff_basis: &'a [BaseFunction],
        alphas: &'a [Multi],
    ) -> Self {
        let mut columns = Vec::new();
        let mut col_ids = Vec::new();
        for (ai, alpha) in alphas.iter().enumerate() {
            let e_per_pair: Vec<BaseFunction> = pairs
                .iter()
                .map(|&(i, j)| {
                    let f = &family[i];
                    let g = &family[j];
                    f.mul(g)
                        .dx_multi(alpha)
                        .sub(&f.dx_multi(alpha).mul(g))
                        .sub(&f.mul(&g.dx_multi(alpha)))
                })
                .collect();
            for (wi, w) in coeff_basis.iter().enumerate() {
                let mut col = BTreeMap::new();
                for (pi, e) in e_per_pair.iter().enumerate() {
                    if e.is_zero() {
                        continue;
                    }
                    for (key, c) in w.mul(e).terms() {
                        col.insert((pi, key.clone()), c.clone());
                    }
                }
                // |α| = 1 gives E_α ≡ 0 (the Leibniz rule): no column at all.
                if col.is_empty() {
                    continue;
                }
                columns.push(col);
                col_ids.push((ai, wi));
            }
        }
        SearchContext {
            chart,
            star1,
            star2,
            family,
            pairs,
            coeff_basis,
            alphas,
            columns,
            col_ids,
        }
    }

    /// `K_m(f,g)` for every ordered pair, given the transform solved so far.
    fn known_part(&self, transform: &OpJet, m: u32) -> Vec<BaseFunction> {
        self.pairs
            .iter()
            .map(|&(i, j)| {
                let f = &self.family[i];
                let g = &self.family[j];
                let mut k_fn = BaseFunction::zero(self.chart);
                for a in 0..=m {
                    for b in 0..=(m - a) {
                        let c = m - a - b;
                        if b == m || c == m {
                            continue;
                        }
                        let tbf = transform.order(b).apply(f);
                        let tcg = transform.order(c).apply(g);
                        k_fn = k_fn.add(&self.star2.order(a).apply(&tbf, &tcg));
                    }
                }
                for a in 0..m {
                    let c1 = self.star1.order(m - a).apply(f, g);
                    k_fn = k_fn.add(&transform.order(a).apply(&c1).neg());
                }
                k_fn
            })
            .collect()
    }

    /// Exact elimination for one ℏ-order; free unknowns are gauged to zero.
    fn solve_order(&self, known: &[BaseFunction]) -> Option<DiffOp> {
        let mut keys: BTreeMap<(usize, (u32, XBasis)), usize> = BTreeMap::new();
        for col in &self.columns {
            for rk in col.keys() {
                let next = keys.len();
                keys.entry(rk.clone()).or_insert(next);
            }
        }
        for (pi, k_fn) in known.iter().enumerate() {
            for (key, _) in k_fn.terms() {
                let next = keys.len();
                keys.entry((pi, key.clone())).or_insert(next);
            }
        }
        let rows = keys.len();
        let mut matrix = vec![vec![Rat::zero(); self.columns.len()]; rows];
        let mut rhs = vec![Rat::zero(); rows];
        for (ci, col) in self.columns.iter().enumerate() {
            for (rk, v) in col {
                matrix[keys[rk]][ci] = v.clone();
            }
        }
        for (pi, k_fn) in known.iter().enumerate() {
            for (key, c) in k_fn.terms() {
                rhs[keys[&(pi, key.clone())]] = c.clone();
            }
        }
        match solve_particular(&matrix, &rhs, &Rat::zero()) {
            Ok((solution, _free)) => {
                let mut t_m = DiffOp::zero(self.chart);
                for (ci, &(ai, wi)) in self.col_ids.iter().enumerate() {
                    if solution[ci].is_zero() {
                        continue;
                    }
                    t_m.add_term(
                        self.alphas[ai].clone(),
                        self.coeff_basis[wi].scale(&solution[ci]),
                    );
                }
                Some(t_m)
            }
            Err(_row) => None,
        }
    }

    /// Linear-in-`X` change of `K_m` when `T_{m−1}` is corrected by a vector
    /// field `X` (derivative terms with fixed current `T₁`):
    /// `ΔK = C²₁(Xf,g) + C²₀(Xf,T₁g) + C²₁(f,Xg) + C²₀(T₁f,Xg) − X(C¹₁(f,g))`.
    fn delta_k_lin(
        &self,
        t1: &DiffOp,
        x: &DiffOp,
        f: &BaseFunction,
        g: &BaseFunction,
    ) -> BaseFunction {
        let xf = x.apply(f);
        let xg = x.apply(g);
        let t1f = t1.apply(f);
        let t1g = t1.apply(g);
        self.star2
            .order(1)
            .apply(&xf, g)
            .add(&self.star2.order(0).apply(&xf, &t1g))
            .add(&self.star2.order(1).apply(f, &xg))
            .add(&self.star2.order(0).apply(&t1f, &xg))
            .sub(&x.apply(&self.star1.order(1).apply(f, g)))
    }

    /// When the plain order-`m` solve is inconsistent, look for a vector
    /// field `X` whose addition to `T_{m−1}` cancels the antisymmetric part
    /// of `K_m`.  Vector fields are Hochschild cocycles (`δX = 0`), so the
    /// correction does not disturb the already-satisfied lower orders, and
    /// on the antisymmetrized equations the quadratic `X×X` contribution
    /// cancels, leaving an exactly linear system.
    fn antisym_vector_fix(&self, transform: &OpJet, known: &[BaseFunction]) -> Option<DiffOp> {
        let d = self.chart.dim as usize;
        let t1 = transform.order(1);
        let mut cands: Vec<DiffOp> = Vec::new();
        let mut cand_ids: Vec<(usize, usize)> = Vec::new();
        for i in 0..d {
            for (wi, w) in self.coeff_basis.iter().enumerate() {
                let mut e = multi_zero(self.chart.dim);
                e[i] += 1;
                let mut x = DiffOp::zero(self.chart);
                x.add_term(e, w.clone());
                cands.push(x);
                cand_ids.push((i, wi));
            }
        }
        let nf = self.family.len();
        let mut row_pairs: Vec<(usize, usize)> = Vec::new();
        for i in 0..nf {
            for j in (i + 1)..nf {
                row_pairs.push((i, j));
            }
        }
        // Equation per unordered pair: ΔK(f,g) − ΔK(g,f) = K(g,f) − K(f,g).
        let mut cols: Vec<BTreeMap<(usize, (u32, XBasis)), Rat>> =
            vec![BTreeMap::new(); cands.len()];
        let mut rhs_fns: Vec<BaseFunction> = Vec::new();
        for (ri, &(i, j)) in row_pairs.iter().enumerate() {
            let f = &self.family[i];
            let g = &self.family[j];
            for (ci, x) in cands.iter().enumerate() {
                let diff = self
                    .delta_k_lin(t1, x, f, g)
                    .sub(&self.delta_k_lin(t1, x, g, f));
                for (key, c) in diff.terms() {
                    cols[ci].insert((ri, key.clone()), c.clone());
                }
            }
            rhs_fns.push(known[j * nf + i].sub(&known[i * nf + j]));
        }
        let mut keys: BTreeMap<(usize, (u32, XBasis)), usize> = BTreeMap::new();
        for col in &cols {
            for rk in col.keys() {
                let next = keys.len();
                keys.entry(rk.clone()).or_insert(next);
            }
        }
        for (ri, r) in rhs_fns.iter().enumerate() {
            for (key, _) in r.terms() {
                let next = keys.len();
                keys.entry((ri, key.clone())).or_insert(next);
            }
        }
        let rows = keys.len();
        let mut matrix = vec![vec![Rat::zero(); cands.len()]; rows];
        let mut rhs = vec![Rat::zero(); rows];
        for (ci, col) in cols.iter().enumerate() {
            for (rk, v) in col {
                matrix[keys[rk]][ci] = v.clone();
            }
        }
        for (ri, r) in rhs_fns.iter().enumerate() {
            for (key, c) in r.terms() {
                rhs[keys[&(ri, key.clone())]] = c.clone();
            }
        }
        match solve_particular(&matrix, &rhs, &Rat::zero()) {
            Ok((solution, _free)) => {
                let mut x = DiffOp::zero(self.chart);
                for (ci, &(i, wi)) in cand_ids.iter().enumerate() {
                    if solution[ci].is_zero() {
                        continue;
                    }
                    let mut e = multi_zero(self.chart.dim);
                    e[i] += 1;
                    x.add_term(e, self.coeff_basis[wi].scale(&solution[ci]));
                }
                Some(x)
            }
            Err(_row) => None,
        }
    }
}

/// Outcome of [`equivalence_search`].
#[derive(Clone, Debug)]
pub struct EquivalenceCandidate {
    /// `T = Id + ℏT₁ + … + ℏ^nT_n` (orders above the last solved one are
    /// zero when the search stopped early).
    pub transform: OpJet,
    pub status: EquivalenceStatus,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EquivalenceStatus {
    /// `T(f ⋆₁ g) = Tf ⋆₂ Tg mod ℏ^{n+1}` verified on the separating family.
    Verified,
    /// The bounded linear system failed (or verification failed) at this
    /// ℏ-order.  This is *not* a proof of inequivalence.
    Inconclusive { order: u32 },
}

/// Search for an equivalence `T = Id + Σ ℏ^m T_m` between two star products
/// on the same base chart, with each `T_m` a differential operator of
/// derivative order ≤ `order_bound` and coefficients drawn from the span of
/// the chart's separating family with frequency/degree bound `basis_bound`.
///
/// The intertwining condition is imposed exactly, order by order in ℏ, on
/// all pairs from the separating family, and solved by exact elimination
/// with free unknowns gauged to zero.  A full verification pass decides
/// `Verified`; any failure yields `Inconclusive` (never a false negative).
pub fn equivalence_search(
    star1: &StarTable,
    star2: &StarTable,
    n: u32,
    order_bound: u32,
    basis_bound: u32,
) -> Result<EquivalenceCandidate> {
    star1
        .chart()
        .assert_compat(&star2.chart(), "equivalence_search");
    let chart = star1.chart();
    if chart.t_cap != 0 {
        return Err(KernelError::Precondition(
            "equivalence_search operates on base-manifold tables (t_cap = 0)".into(),
        ));
    }
    if star1.cap() < n || star2.cap() < n {
        return Err(KernelError::Precondition(format!(
            "equivalence_search to ℏ-order {n} needs tables with caps ≥ {n}"
        )));
    }
    star1.validate()?;
    star2.validate()?;
    if star1.order(0) != star2.order(0) {
        return Err(KernelError::Precondition(
            "equivalence_search: the tables have different order-0 products".into(),
        ));
    }
    if !star1.antisym_c1().sub(&star2.antisym_c1()).is_zero() {
        return Err(KernelError::Precondition(
            "equivalence_search: the tables have different leading Poisson structures"
                .into(),
        ));
    }

    let coeff_basis = separating_family(chart, basis_bound);
    let alphas: Vec<Multi> = multis_up_to(chart.dim, order_bound)
        .into_iter()
        .filter(|a| multi_total(a) >= 1)
        .collect();
    let family = separating_family(chart, 1);
    let pairs: Vec<(usize, usize)> = (0..family.len())
        .flat_map(|i| (0..family.len()).map(move |j| (i, j)))
        .collect();
    let ctx = SearchContext::new(chart, star1, star2, &family, &pairs, &coeff_basis, &alphas);

    let mut transform = OpJet::identity(chart, n);
    for m in 1..=n {
        let known = ctx.known_part(&transform, m);
        match ctx.solve_order(&known) {
            Some(t_m) => transform.set_order(m, t_m),
            None if m >= 2 => {
                // The coboundary δT_m is always a symmetric bidifferential
                // operator, so an antisymmetric residue in K_m is fatal for
                // the plain solve — but a vector-field correction X to
                // T_{m−1} (pure gauge at order m−1, since δX = 0) shifts
                // the antisymmetric part of K_m linearly.  Solve for X on
                // the antisymmetrized equations (where the quadratic X×X
                // terms cancel), fold it in, and retry.
                match ctx.antisym_vector_fix(&transform, &known) {
                    Some(x) => {
                        let corrected = transform.order(m - 1).add(&x);
                        transform.set_order(m - 1, corrected);
                        let known = ctx.known_part(&transform, m);
                        match ctx.solve_order(&known) {
                            Some(t_m) => transform.set_order(m, t_m),
                            None => {
                                return Ok(EquivalenceCandidate {
                                    transform,
                                    status: EquivalenceStatus::Inconclusive { order: m },
                                })
                            }
                        }
                    }
                    None => {
                        return Ok(EquivalenceCandidate {
                            transform,
                            status: EquivalenceStatus::Inconclusive { order: m },
                        })
                    }
                }
            }
            None => {
                return Ok(EquivalenceCandidate {
                    transform,
                    status: EquivalenceStatus::Inconclusive { order: m },
                })
            }
        }
    }
    // Full verification on the separating family.
    for f in &family {
        for g in &family {
            let lhs = transform.apply(&star1.apply_fn(f, g).truncate(n));
            let rhs = star2.apply(
                &transform.apply(&HSeries::from_fn(f, n)),
                &transform.apply(&HSeries::from_fn(g, n)),
            );
            for m in 0..=n {
                if lhs.order(m) != rhs.order(m) {
                    return Ok(EquivalenceCandidate {
                        transform,
                        status: EquivalenceStatus::Inconclusive { order: m },
                    });
                }
            }
        }
    }
    Ok(EquivalenceCandidate {
        transform,
        status: EquivalenceStatus::Verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{star_for_class, ClosedFormSeries};

    fn darboux(chart: Chart) -> FormMatrix {
        FormMatrix::from_rat_entries(
            chart,
            &[rat_int(0), rat_int(1), rat_int(-1), rat_int(0)],
        )
    }

    /// `cos(x¹) dx¹∧dx²` as a coefficient matrix.
    fn wave_form(chart: Chart) -> FormMatrix {
        let c = BaseFunction::cos_wave(chart, vec![1, 0]);
        let mut m = FormMatrix::zero(chart);
        m.set(0, 1, c.clone());
        m.set(1, 0, c.neg());
        m
    }

    /// The standard wave-perturbation Moser problem on the torus:
    /// `Ω₁ = ω⁰ + t·cos(x¹) dx¹∧dx²` against `Ω₂ = ω⁰`.
    fn wave_family(t_cap: u32) -> (Chart, FormMatrix, FormMatrix) {
        let chart = Chart::torus(2, t_cap);
        let o2 = darboux(chart);
        let o1 = o2.add(&wave_form(chart).map(|f| f.t_mul(1)));
        (chart, o1, o2)
    }

    #[test]
    fn solving_moser_between_equal_families_yields_the_identity() {
        let chart = Chart::torus(2, 2);
        let omega = darboux(chart);
        let fam = solve_moser(&omega, &omega, 2).unwrap();
        assert!(fam.is_identity());
        assert_eq!(*fam.pullback_operator(), DiffOp::identity(fam.chart()));
        let beta = wave_form(fam.chart());
        assert!(fam.pullback_form(&beta).sub(&beta).is_zero());
    }

    #[test]
    fn the_torus_wave_family_retracts_onto_the_constant_form() {
        let (_, o1, o2) = wave_family(3);
        // The pullback identity φ*Ω₁ = Ω₂ mod t⁴ is re-verified inside.
        let fam = solve_moser(&o1, &o2, 3).unwrap();
        assert!(!fam.is_identity());
        // ι_Z ω_s = −ν with ν = t·sin(x¹)dx² forces the s⁰ generating field
        // (−t·sin(x¹), 0).
        let z0 = fam.generator_coefficient(0);
        let expected = BaseFunction::sin_wave(fam.chart(), vec![1, 0])
            .t_mul(1)
            .neg();
        assert_eq!(z0[0], expected);
        assert!(z0[1].is_zero());
        // φ₀ = id: the displacement vanishes at t = 0.
        for c in fam.displacement() {
            assert!(c.t_slice(0).is_zero());
        }
    }

    #[test]
    fn pullbacks_are_ring_maps_and_commute_with_the_differential() {
        let (chart, o1, o2) = wave_family(2);
        let fam = solve_moser(&o1, &o2, 2).unwrap();
        let f = BaseFunction::cos_wave(chart, vec![1, 1]);
        let g = BaseFunction::sin_wave(chart, vec![0, 1]).add(&BaseFunction::one(chart));
        let pf = fam.pullback_function(&f);
        let pg = fam.pullback_function(&g);
        assert_eq!(fam.pullback_function(&f.mul(&g)), pf.mul(&pg));
        assert_eq!(
            fam.pullback_function(&BaseFunction::one(chart)),
            BaseFunction::one(chart)
        );
        // d(Pf) = φ*(df) component by component.
        let df = OneForm::from_components(chart, vec![f.dx(0), f.dx(1)]);
        let pulled = fam.pullback_oneform(&df);
        let d_pf = OneForm::from_components(chart, vec![pf.dx(0), pf.dx(1)]);
        assert!(d_pf.add(&pulled.neg()).is_zero());
        // The inverse operator undoes the pullback through the t-cap.
        assert_eq!(fam.inverse_operator().apply(&pf), f);
    }

    #[test]
    fn pullback_jets_start_at_the_identity_and_expose_the_generating_field() {
        let (chart, o1, o2) = wave_family(2);
        let fam = solve_moser(&o1, &o2, 2).unwrap();
        let rho = fam.rho_jet(2).unwrap();
        let base = chart.with_t_cap(0);
        assert_eq!(*rho.order(0), DiffOp::identity(base));
        let mut expected = DiffOp::zero(base);
        expected.add_term(
            vec![1, 0],
            BaseFunction::sin_wave(base, vec![1, 0]).neg(),
        );
        assert_eq!(*rho.order(1), expected);

        let id_rho = FormalDiffeoFamily::identity(chart).rho_jet(2).unwrap();
        assert_eq!(id_rho, OpJet::identity(base, 2));
    }

    #[test]
    fn conjugating_by_the_identity_preserves_the_table() {
        let chart = Chart::torus(2, 2);
        let lam = darboux(chart).invert().unwrap();
        let table = StarTable::moyal(&lam, 2);
        let fam = FormalDiffeoFamily::identity(chart);
        assert_eq!(conjugate_star(&table, &fam).unwrap(), table);
    }

    #[test]
    fn conjugating_moyal_along_a_moser_family_adapts_the_poisson_structure() {
        let (_, o1, o2) = wave_family(2);
        let fam = solve_moser(&o1, &o2, 2).unwrap();
        let lam0 = o2.invert().unwrap();
        let table = StarTable::moyal(&lam0, 2);
        // Associativity, unitality, and the pulled-back-bivector identity
        // for the first-order antisymmetric part are all verified inside.
        let conj = conjugate_star(&table, &fam).unwrap();
        assert!(conj.agrees_through(&table, 0));
        assert!(!conj.order_difference(&table, 1).is_zero());
    }

    #[test]
    fn moser_handles_stacked_exact_perturbations_at_several_orders() {
        let chart = Chart::torus(2, 3);
        let o2 = darboux(chart).add(&wave_form(chart).map(|f| f.t_mul(2)));
        let nu = OneForm::from_components(
            chart,
            vec![
                BaseFunction::cos_wave(chart, vec![1, 1]).t_mul(3),
                BaseFunction::sin_wave(chart, vec![1, 0]).t_mul(1),
            ],
        );
        let o1 = o2.add(&nu.to_qform().exterior_d().to_form_matrix());
        let fam = solve_moser(&o1, &o2, 3).unwrap();
        assert!(!fam.is_identity());
        assert!(fam.pullback_form(&o1).sub(&o2).is_zero());
    }

    #[test]
    fn moser_rejects_incompatible_families() {
        let chart = Chart::torus(2, 2);
        let o2 = darboux(chart);
        // Different forms at t = 0.
        let err = solve_moser(&o2.scale(&rat_int(2)), &o2, 2).unwrap_err();
        assert!(matches!(err, KernelError::Precondition(_)));
        // Non-cohomologous difference: t·ω⁰ has a nonzero mean on the torus.
        let o1 = o2.add(&o2.map(|f| f.t_mul(1)));
        let err = solve_moser(&o1, &o2, 2).unwrap_err();
        assert!(matches!(err, KernelError::Precondition(_)));
    }

    #[test]
    fn equivalence_search_finds_the_identity_for_equal_tables() {
        let base = Chart::torus(2, 0);
        let lam = darboux(base).invert().unwrap();
        let table = StarTable::moyal(&lam, 2);
        let cand = equivalence_search(&table, &table, 2, 2, 1).unwrap();
        assert_eq!(cand.status, EquivalenceStatus::Verified);
        assert_eq!(cand.transform, OpJet::identity(base, 2));
    }

    #[test]
    fn equivalence_search_verifies_cohomologous_characteristic_classes() {
        let base = Chart::torus(2, 0);
        let flat = ClosedFormSeries::new(base, vec![darboux(base)]).unwrap();
        let bumped =
            ClosedFormSeries::new(base, vec![darboux(base), wave_form(base)]).unwrap();
        let s1 = star_for_class(&flat, None, 2).unwrap();
        let s2 = star_for_class(&bumped, None, 2).unwrap();
        let cand = equivalence_search(&s1, &s2, 2, 2, 2).unwrap();
        assert_eq!(cand.status, EquivalenceStatus::Verified);
        // The class difference is exact but nonzero, so the intertwiner
        // cannot be the identity: its order-1 part is the vector field that
        // absorbs the antisymmetric obstruction.
        assert_ne!(*cand.transform.order(1), DiffOp::zero(base));
    }

    #[test]
    fn equivalence_search_reports_inconclusive_for_a_nonexact_class_difference() {
        let base = Chart::torus(2, 0);
        let flat = ClosedFormSeries::new(base, vec![darboux(base)]).unwrap();
        let shifted =
            ClosedFormSeries::new(base, vec![darboux(base), darboux(base)]).unwrap();
        let s1 = star_for_class(&flat, None, 2).unwrap();
        let s2 = star_for_class(&shifted, None, 2).unwrap();
        let cand = equivalence_search(&s1, &s2, 2, 2, 1).unwrap();
        assert_eq!(cand.status, EquivalenceStatus::Inconclusive { order: 2 });
    }
}
