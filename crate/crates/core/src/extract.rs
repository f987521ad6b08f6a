//! Symbolic jet coefficients for extracting star-product tables.
//!
//! [`JetPoly`] is the coefficient ring `𝒞 ⊕ (⊕_α 𝒞·F_α) ⊕ (⊕_β 𝒞·G_β) ⊕
//! (⊕_{αβ} 𝒞·F_α G_β)` over the base function ring 𝒞, where `F_α` stands
//! for the α-th partial derivative of an indeterminate function `f` (and
//! `G_β` of a second one, `g`). Its x-derivative obeys the chain rule
//! `∂_i F_α = F_{α+e_i}`, so running the quantization pipeline on the bare
//! symbols `F_0`, `G_0` produces every table coefficient in one pass.
//!
//! The ring deliberately refuses products `F·F` or `G·G` (they cannot occur
//! in a bilinear pipeline); hitting one is a programmer error and panics.
//!
//! [`cochains_sampled`] is the independent second extraction strategy: on a
//! torus it evaluates the star product on complex waves `e^{ik·x}` (built
//! from four real runs), where a table coefficient equation becomes a
//! tensor Vandermonde system over ℚ(i) with function-valued right-hand
//! sides, solved exactly in two Kronecker stages. Both strategies must give
//! identical tables; the cross-check is a test, not a hope.

use std::collections::BTreeMap;

use crate::base::{BaseFunction, Chart, ChartKind};
use crate::error::{KernelError, Result};
use crate::fedosov::{series_from_scalar, FedosovData};
use crate::linalg::{i_power, solve_exact, CRat, Module, SolveOutcome};
use crate::ops::{multi_total, multis_up_to, Multi};
use crate::rat::{rat_int, Rat};
use crate::table::{BiDiffOp, StarTable};
use crate::weyl::{Coeff, Weyl};

/// Key of one symbolic term: jet symbol of `f` (if any) and of `g` (if any).
pub type JetKey = (Option<Multi>, Option<Multi>);

/// Polynomial in the jet symbols, at most linear in each symbol family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetPoly {
    chart: Chart,
    terms: BTreeMap<JetKey, BaseFunction>,
}

impl JetPoly {
    pub fn zero(chart: Chart) -> Self {
        JetPoly { chart, terms: BTreeMap::new() }
    }

    /// The bare symbol `F_0` (the indeterminate left factor itself).
    pub fn f_symbol(chart: Chart) -> Self {
        let mut p = JetPoly::zero(chart);
        p.add_term(
            (Some(vec![0; chart.dim]), None),
            BaseFunction::one(chart),
        );
        p
    }

    /// The bare symbol `G_0` (the indeterminate right factor itself).
    pub fn g_symbol(chart: Chart) -> Self {
        let mut p = JetPoly::zero(chart);
        p.add_term(
            (None, Some(vec![0; chart.dim])),
            BaseFunction::one(chart),
        );
        p
    }

    pub fn add_term(&mut self, key: JetKey, c: BaseFunction) {
        if c.is_zero() {
            return;
        }
        c.chart().assert_compat(&self.chart, "JetPoly::add_term");
        match self.terms.entry(key) {
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

    pub fn terms(&self) -> impl Iterator<Item = (&JetKey, &BaseFunction)> {
        self.terms.iter()
    }

    /// Substitute concrete functions for the symbols: every `F_α` becomes
    /// `D^α f`, every `G_β` becomes `D^β g`.
    pub fn evaluate(&self, f: &BaseFunction, g: &BaseFunction) -> BaseFunction {
        let mut out = BaseFunction::zero(self.chart);
        for ((fa, gb), c) in &self.terms {
            let mut v = c.clone();
            if let Some(a) = fa {
                v = v.mul(&f.dx_multi(a));
            }
            if let Some(b) = gb {
                v = v.mul(&g.dx_multi(b));
            }
            out = out.add(&v);
        }
        out
    }
}

fn combine_slot(a: &Option<Multi>, b: &Option<Multi>, family: &str) -> Option<Multi> {
    match (a, b) {
        (None, x) => x.clone(),
        (x, None) => x.clone(),
        (Some(_), Some(_)) => panic!(
            "JetPoly product is nonlinear in the {family}-jet symbols; \
             the extraction pipeline must stay bilinear"
        ),
    }
}

impl Coeff for JetPoly {
    fn chart(&self) -> Chart {
        self.chart
    }

    fn from_base(b: BaseFunction) -> Self {
        let chart = b.chart();
        let mut p = JetPoly::zero(chart);
        p.add_term((None, None), b);
        p
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add(&self, other: &Self) -> Self {
        self.chart.assert_compat(&other.chart, "JetPoly::add");
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    fn neg(&self) -> Self {
        let mut out = JetPoly::zero(self.chart);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c.neg());
        }
        out
    }

    fn scale(&self, r: &Rat) -> Self {
        if num::traits::Zero::is_zero(r) {
            return JetPoly::zero(self.chart);
        }
        let mut out = JetPoly::zero(self.chart);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c.scale(r));
        }
        out
    }

    fn mul(&self, other: &Self) -> Self {
        self.chart.assert_compat(&other.chart, "JetPoly::mul");
        let mut out = JetPoly::zero(self.chart);
        for ((fa, ga), ca) in &self.terms {
            for ((fb, gb), cb) in &other.terms {
                let key = (combine_slot(fa, fb, "F"), combine_slot(ga, gb, "G"));
                out.add_term(key, ca.mul(cb));
            }
        }
        out
    }

    fn mul_base(&self, b: &BaseFunction) -> Self {
        if b.is_zero() {
            return JetPoly::zero(self.chart);
        }
        let mut out = JetPoly::zero(self.chart);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c.mul(b));
        }
        out
    }

    fn dx(&self, i: usize) -> Self {
        let mut out = JetPoly::zero(self.chart);
        for ((fa, ga), c) in &self.terms {
            // product rule: derivative of the function coefficient …
            out.add_term((fa.clone(), ga.clone()), c.dx(i));
            // … plus the chain rule raising each jet symbol
            if let Some(a) = fa {
                let mut a2 = a.clone();
                a2[i] += 1;
                out.add_term((Some(a2), ga.clone()), c.clone());
            }
            if let Some(b) = ga {
                let mut b2 = b.clone();
                b2[i] += 1;
                out.add_term((fa.clone(), Some(b2)), c.clone());
            }
        }
        out
    }
}

/// A complex-valued base function, real and imaginary parts held exactly.
#[derive(Clone, Debug)]
struct CFun {
    re: BaseFunction,
    im: BaseFunction,
}

impl CFun {
    fn mul_fun(&self, other: &CFun) -> CFun {
        CFun {
            re: self.re.mul(&other.re).sub(&self.im.mul(&other.im)),
            im: self.re.mul(&other.im).add(&self.im.mul(&other.re)),
        }
    }
}

impl Module<CRat> for CFun {
    fn add(&self, other: &Self) -> Self {
        CFun { re: self.re.add(&other.re), im: self.im.add(&other.im) }
    }
    fn sub(&self, other: &Self) -> Self {
        CFun { re: self.re.sub(&other.re), im: self.im.sub(&other.im) }
    }
    fn scale(&self, s: &CRat) -> Self {
        CFun {
            re: self.re.scale(&s.re).sub(&self.im.scale(&s.im)),
            im: self.re.scale(&s.im).add(&self.im.scale(&s.re)),
        }
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

/// All wave vectors in the box `{0..=kmax}^d`, lexicographically.
fn wave_nodes(dim: usize, kmax: i32) -> Vec<Vec<i32>> {
    let mut nodes: Vec<Vec<i32>> = vec![vec![]];
    for _ in 0..dim {
        let mut grown = Vec::new();
        for n in &nodes {
            for k in 0..=kmax {
                let mut n2 = n.clone();
                n2.push(k);
                grown.push(n2);
            }
        }
        nodes = grown;
    }
    nodes
}

/// `(ik)^α` as a Gaussian rational.
fn wave_power(k: &[i32], alpha: &Multi) -> CRat {
    let mut mag = rat_int(1);
    for (kj, &aj) in k.iter().zip(alpha) {
        for _ in 0..aj {
            mag *= rat_int(*kj as i64);
        }
    }
    i_power(multi_total(alpha)).scale(mag)
}

/// Extract the star-product table by sampling on complex torus waves and
/// solving the resulting tensor Vandermonde systems exactly over ℚ(i).
///
/// This is deliberately a *different* strategy from [`FedosovData::cochains`]
/// (which runs the pipeline once on indeterminate jet symbols); the two must
/// agree exactly, and tests enforce that. Torus charts only.
pub fn cochains_sampled(fd: &FedosovData) -> Result<StarTable> {
    let p = fd.poisson();
    let chart = p.chart();
    if chart.kind != ChartKind::Torus {
        return Err(KernelError::Precondition(
            "sampled extraction interpolates trigonometric waves and needs a torus chart".into(),
        ));
    }
    let d = chart.dim;
    let n = p.order_cap();
    let alg = fd.algebra();
    let lam = p.lambda();

    // flat sections of every wave needed at the largest order, cached
    let nodes = wave_nodes(d, 2 * n as i32);
    let mut tau_cos: BTreeMap<Vec<i32>, Weyl<BaseFunction>> = BTreeMap::new();
    let mut tau_sin: BTreeMap<Vec<i32>, Weyl<BaseFunction>> = BTreeMap::new();
    for k in &nodes {
        let c = BaseFunction::cos_wave(chart, k.clone());
        let s = BaseFunction::sin_wave(chart, k.clone());
        tau_cos.insert(
            k.clone(),
            fd.quantize::<BaseFunction>(&Weyl::from_base_fn(alg, &c))?,
        );
        tau_sin.insert(
            k.clone(),
            fd.quantize::<BaseFunction>(&Weyl::from_base_fn(alg, &s))?,
        );
    }

    // per wave pair: E(ka) ⋆ E(kb) · E(−(ka+kb)), one CFun per ℏ-order
    let star_orders = |ta: &Weyl<BaseFunction>, tb: &Weyl<BaseFunction>| -> Vec<BaseFunction> {
        let prod = series_from_scalar(&ta.moyal(tb, lam).pr0(), n);
        (0..=n).map(|m| prod.order(m).clone()).collect()
    };
    let mut rhs_map: BTreeMap<(Vec<i32>, Vec<i32>), Vec<CFun>> = BTreeMap::new();
    for ka in &nodes {
        for kb in &nodes {
            let cc = star_orders(&tau_cos[ka], &tau_cos[kb]);
            let ss = star_orders(&tau_sin[ka], &tau_sin[kb]);
            let cs = star_orders(&tau_cos[ka], &tau_sin[kb]);
            let sc = star_orders(&tau_sin[ka], &tau_cos[kb]);
            let w: Vec<i32> = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
            let e_minus = CFun {
                re: BaseFunction::cos_wave(chart, w.clone()),
                im: BaseFunction::sin_wave(chart, w).neg(),
            };
            let per_order: Vec<CFun> = (0..=n as usize)
                .map(|m| {
                    CFun {
                        re: cc[m].sub(&ss[m]),
                        im: cs[m].add(&sc[m]),
                    }
                    .mul_fun(&e_minus)
                })
                .collect();
            rhs_map.insert((ka.clone(), kb.clone()), per_order);
        }
    }

    let mut table = StarTable::zero(chart, n);
    for i in 0..=n {
        let sub_nodes = wave_nodes(d, 2 * i as i32);
        let multis = multis_up_to(d, 2 * i);
        let v_mat: Vec<Vec<CRat>> = sub_nodes
            .iter()
            .map(|k| multis.iter().map(|a| wave_power(k, a)).collect())
            .collect();

        // stage 1: for each right wave, solve over the left grid for
        // u_α(kb) = Σ_β c^{αβ} (i·kb)^β
        let mut stage1: Vec<Vec<CFun>> = vec![Vec::new(); multis.len()];
        for kb in &sub_nodes {
            let rhs: Vec<CFun> = sub_nodes
                .iter()
                .map(|ka| rhs_map[&(ka.clone(), kb.clone())][i as usize].clone())
                .collect();
            match solve_exact(&v_mat, &rhs) {
                SolveOutcome::Unique(u) => {
                    for (ai, val) in u.into_iter().enumerate() {
                        stage1[ai].push(val);
                    }
                }
                SolveOutcome::Underdetermined { .. } => {
                    return Err(KernelError::Underdetermined(
                        "sampled extraction is rank-deficient; enlarge the wave family".into(),
                    ))
                }
                SolveOutcome::Inconsistent { .. } => {
                    return Err(KernelError::Postcondition(
                        "sampled star values are inconsistent with a bidifferential table".into(),
                    ))
                }
            }
        }

        // stage 2: for each left multi-index, solve over the right grid
        let mut op = BiDiffOp::zero(chart);
        for (ai, ua) in stage1.iter().enumerate() {
            match solve_exact(&v_mat, ua) {
                SolveOutcome::Unique(c_row) => {
                    for (bi, val) in c_row.into_iter().enumerate() {
                        if !val.im.is_zero() {
                            return Err(KernelError::Postcondition(
                                "sampled table coefficient has an imaginary residue".into(),
                            ));
                        }
                        if !val.re.is_zero() {
                            op.add_term(multis[ai].clone(), multis[bi].clone(), val.re);
                        }
                    }
                }
                SolveOutcome::Underdetermined { .. } => {
                    return Err(KernelError::Underdetermined(
                        "sampled extraction is rank-deficient; enlarge the wave family".into(),
                    ))
                }
                SolveOutcome::Inconsistent { .. } => {
                    return Err(KernelError::Postcondition(
                        "sampled star values are inconsistent with a bidifferential table".into(),
                    ))
                }
            }
        }
        table.set_order(i, op);
    }
    table.validate()?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fedosov::{ChartPoisson, FoliatedConnection};
    use crate::form::FormMatrix;
    use crate::rat::rat;

    fn chart() -> Chart {
        Chart::torus(2, 1)
    }

    #[test]
    fn derivative_obeys_the_chain_rule() {
        let c = chart();
        let f = JetPoly::f_symbol(c);
        // ∂₁ F₀ = F_{(1,0)}
        let df = f.dx(0);
        let mut expect = JetPoly::zero(c);
        expect.add_term((Some(vec![1, 0]), None), BaseFunction::one(c));
        assert_eq!(df, expect);

        // ∂₁ (cos(x¹)·F₀) = −sin(x¹)·F₀ + cos(x¹)·F_{(1,0)}
        let cf = f.mul_base(&BaseFunction::cos_wave(c, vec![1, 0]));
        let dcf = cf.dx(0);
        let mut expect2 = JetPoly::zero(c);
        expect2.add_term(
            (Some(vec![0, 0]), None),
            BaseFunction::sin_wave(c, vec![1, 0]).neg(),
        );
        expect2.add_term(
            (Some(vec![1, 0]), None),
            BaseFunction::cos_wave(c, vec![1, 0]),
        );
        assert_eq!(dcf, expect2);
    }

    #[test]
    fn products_pair_the_two_families() {
        let c = chart();
        let f = JetPoly::f_symbol(c).scale(&rat_int(3));
        let g = JetPoly::g_symbol(c);
        let fg = f.mul(&g);
        let mut expect = JetPoly::zero(c);
        expect.add_term(
            (Some(vec![0, 0]), Some(vec![0, 0])),
            BaseFunction::constant(c, rat_int(3)),
        );
        assert_eq!(fg, expect);
        // scalar × symbol keeps the symbol
        let s = JetPoly::from_base(BaseFunction::cos_wave(c, vec![0, 1]));
        let sf = s.mul(&JetPoly::f_symbol(c));
        assert_eq!(
            sf.terms().next().unwrap().0,
            &(Some(vec![0, 0]), None)
        );
    }

    #[test]
    #[should_panic(expected = "nonlinear in the F-jet symbols")]
    fn same_family_products_are_rejected() {
        let c = chart();
        let f = JetPoly::f_symbol(c);
        let _ = f.mul(&f);
    }

    #[test]
    fn evaluation_substitutes_jets() {
        let c = chart();
        // p = F_{(1,0)}·G_{(0,0)}
        let mut p = JetPoly::zero(c);
        p.add_term(
            (Some(vec![1, 0]), Some(vec![0, 0])),
            BaseFunction::one(c),
        );
        let f = BaseFunction::cos_wave(c, vec![1, 0]);
        let g = BaseFunction::sin_wave(c, vec![0, 1]);
        let v = p.evaluate(&f, &g);
        let expect = BaseFunction::sin_wave(c, vec![1, 0])
            .neg()
            .mul(&BaseFunction::sin_wave(c, vec![0, 1]));
        assert_eq!(v, expect);
    }

    fn darboux(chart: Chart) -> FormMatrix {
        FormMatrix::from_rat_entries(
            chart,
            &[rat_int(0), rat_int(1), rat_int(-1), rat_int(0)],
        )
    }

    #[test]
    fn both_extraction_routes_agree_on_flat_data() {
        let c = Chart::torus(2, 0);
        let p = ChartPoisson::new(c, 2, darboux(c)).unwrap();
        let fd = FedosovData::build(&p, &FoliatedConnection::zero(c)).unwrap();
        let symbolic = fd.cochains().unwrap();
        let sampled = cochains_sampled(&fd).unwrap();
        assert!(symbolic.agrees_through(&sampled, 2));
        // and both equal the closed-form constant-bivector table
        let oracle = StarTable::moyal(p.lambda(), 2);
        assert!(symbolic.agrees_through(&oracle, 2));
    }

    #[test]
    fn both_extraction_routes_agree_on_curved_data() {
        let c = Chart::torus(2, 1);
        let mut w = darboux(c);
        let bump = BaseFunction::cos_wave(c, vec![1, 0])
            .t_mul(1)
            .scale(&rat(1, 2));
        w.set(0, 1, w.get(0, 1).add(&bump));
        w.set(1, 0, w.get(1, 0).sub(&bump));
        let p = ChartPoisson::new(c, 1, w).unwrap();
        let fd = FedosovData::build(&p, &FoliatedConnection::zero(c)).unwrap();
        let symbolic = fd.cochains().unwrap();
        let sampled = cochains_sampled(&fd).unwrap();
        assert!(symbolic.agrees_through(&sampled, 1));
    }

    #[test]
    fn sampled_extraction_rejects_affine_charts() {
        let c = Chart::affine(2, 0);
        let p = ChartPoisson::new(c, 1, darboux(c)).unwrap();
        let fd = FedosovData::build(&p, &FoliatedConnection::zero(c)).unwrap();
        assert!(matches!(
            cochains_sampled(&fd),
            Err(KernelError::Precondition(_))
        ));
    }
}
