//! Differential forms and matrix-valued data on a chart.
//!
//! [`FormMatrix`] is a d×d matrix of [`BaseFunction`] entries. It is used
//! both for 2-forms (antisymmetric component matrices `ω_{ij}`, meaning
//! `ω = Σ_{i<j} ω_{ij} dx^i ∧ dx^j`) and for bivectors (`Λ^{ij}`, meaning
//! `Λ(df, dg) = Σ_{ij} Λ^{ij} ∂_i f ∂_j g`). Antisymmetry and closedness are
//! explicit checks rather than type invariants, since intermediate matrix
//! products need not satisfy them.
//!
//! Inversion is only defined for matrices of the shape `ω = ω⁰ + W` with
//! `ω⁰` constant in both `x` and `t` and every term of `W` of t-degree ≥ 1;
//! the inverse is then the terminating Neumann series
//! `Λ = Σ_{j≥0} (−Λ⁰ W)^j Λ⁰` modulo `t^{t_cap+1}`.
//!
//! [`OneForm`] is a dense vector of components with an exterior derivative
//! landing in [`FormMatrix`]; [`QForm`] handles arbitrary-degree forms with
//! sparse strictly-increasing index tuples (used by the asymptotic-sequence
//! realization, where the degree is an input).

use std::collections::BTreeMap;

use num::traits::{One, Zero};

use crate::base::{BaseFunction, Chart};
use crate::error::{KernelError, Result};
use crate::rat::Rat;

/// Square matrix of chart functions (row-major).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormMatrix {
    chart: Chart,
    dim: usize,
    entries: Vec<BaseFunction>,
}

impl FormMatrix {
    pub fn zero(chart: Chart) -> Self {
        let dim = chart.dim;
        FormMatrix {
            chart,
            dim,
            entries: vec![BaseFunction::zero(chart); dim * dim],
        }
    }

    /// Build from row-major entries; all entries must share `chart`.
    pub fn from_entries(chart: Chart, entries: Vec<BaseFunction>) -> Self {
        assert_eq!(entries.len(), chart.dim * chart.dim, "entry count != dim²");
        for e in &entries {
            e.chart().assert_compat(&chart, "FormMatrix::from_entries");
        }
        FormMatrix { chart, dim: chart.dim, entries }
    }

    /// Constant matrix from rationals (row-major).
    pub fn from_rat_entries(chart: Chart, vals: &[Rat]) -> Self {
        assert_eq!(vals.len(), chart.dim * chart.dim, "entry count != dim²");
        FormMatrix {
            chart,
            dim: chart.dim,
            entries: vals
                .iter()
                .map(|v| BaseFunction::constant(chart, v.clone()))
                .collect(),
        }
    }

    pub fn identity(chart: Chart) -> Self {
        let mut m = FormMatrix::zero(chart);
        for i in 0..m.dim {
            m.set(i, i, BaseFunction::one(chart));
        }
        m
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &BaseFunction {
        &self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, f: BaseFunction) {
        f.chart().assert_compat(&self.chart, "FormMatrix::set");
        self.entries[i * self.dim + j] = f;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(BaseFunction::is_zero)
    }

    pub fn map(&self, f: impl Fn(&BaseFunction) -> BaseFunction) -> Self {
        FormMatrix {
            chart: self.chart,
            dim: self.dim,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.chart.assert_compat(&other.chart, "FormMatrix::add");
        FormMatrix {
            chart: self.chart,
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
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
        self.map(|e| e.scale(r))
    }

    pub fn scale_fn(&self, f: &BaseFunction) -> Self {
        self.map(|e| e.mul(f))
    }

    pub fn transpose(&self) -> Self {
        let mut out = FormMatrix::zero(self.chart);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    /// Matrix product (entrywise function products, t-truncated).
    pub fn mat_mul(&self, other: &Self) -> Self {
        self.chart.assert_compat(&other.chart, "FormMatrix::mat_mul");
        let mut out = FormMatrix::zero(self.chart);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut acc = BaseFunction::zero(self.chart);
                for k in 0..self.dim {
                    acc = acc.add(&self.get(i, k).mul(other.get(k, j)));
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn is_antisymmetric(&self) -> bool {
        for i in 0..self.dim {
            for j in i..self.dim {
                if !self.get(i, j).add(self.get(j, i)).is_zero() {
                    return false;
                }
            }
        }
        true
    }

    pub fn check_antisymmetric(&self, ctx: &str) -> Result<()> {
        if self.is_antisymmetric() {
            Ok(())
        } else {
            Err(KernelError::Precondition(format!(
                "{ctx}: matrix is not antisymmetric"
            )))
        }
    }

    /// Closedness of the 2-form `Σ_{i<j} ω_{ij} dx^i∧dx^j`:
    /// `∂_i ω_{jk} − ∂_j ω_{ik} + ∂_k ω_{ij} = 0` for all `i<j<k`.
    pub fn is_closed(&self) -> bool {
        let d = self.dim;
        for i in 0..d {
            for j in (i + 1)..d {
                for k in (j + 1)..d {
                    let s = self
                        .get(j, k)
                        .dx(i)
                        .sub(&self.get(i, k).dx(j))
                        .add(&self.get(i, j).dx(k));
                    if !s.is_zero() {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn check_closed(&self, ctx: &str) -> Result<()> {
        if self.is_closed() {
            Ok(())
        } else {
            Err(KernelError::Precondition(format!(
                "{ctx}: 2-form is not closed"
            )))
        }
    }

    /// The t⁰, x-constant block as rationals, or an error when the t⁰ slice
    /// has x-dependence.
    pub fn constant_block(&self) -> Result<Vec<Rat>> {
        let mut out = Vec::with_capacity(self.dim * self.dim);
        for e in &self.entries {
            let t0 = e.t_slice(0);
            if !t0.is_x_constant() {
                return Err(KernelError::Precondition(
                    "matrix leading (t⁰) block depends on x; a constant leading block is required"
                        .into(),
                ));
            }
            out.push(t0.constant_part());
        }
        Ok(out)
    }

    /// Invert `ω = ω⁰ + W` (constant invertible `ω⁰`, `W = O(t)`) by the
    /// terminating Neumann series `Λ = Σ_j (−Λ⁰W)^j Λ⁰` modulo `t^{t_cap+1}`.
    pub fn invert(&self) -> Result<FormMatrix> {
        let d = self.dim;
        let w0 = self.constant_block()?;
        let lam0_vals = invert_rat_matrix(&w0, d).ok_or_else(|| {
            KernelError::Precondition("matrix leading block is singular".into())
        })?;
        let lam0 = FormMatrix::from_rat_entries(self.chart, &lam0_vals);
        let w_rest = self.sub(&FormMatrix::from_rat_entries(self.chart, &w0));
        debug_assert!(w_rest
            .entries
            .iter()
            .all(|e| e.t_order().map_or(true, |o| o >= 1)));

        // M = −Λ⁰W has every entry of t-degree ≥ 1, so powers terminate.
        let m = lam0.mat_mul(&w_rest).neg();
        let mut acc = lam0.clone();
        let mut pow = m.clone();
        for _ in 0..=self.chart.t_cap {
            if pow.is_zero() {
                break;
            }
            acc = acc.add(&pow.mat_mul(&lam0));
            pow = m.mat_mul(&pow);
        }
        if !pow.is_zero() {
            return Err(KernelError::Postcondition(
                "Neumann series failed to terminate within the t-truncation".into(),
            ));
        }
        if self.mat_mul(&acc) != FormMatrix::identity(self.chart) {
            return Err(KernelError::Postcondition(
                "matrix inverse verification ω·Λ = Id failed".into(),
            ));
        }
        Ok(acc)
    }

    /// Bivector pairing `Σ_{ij} M^{ij} ∂_i f ∂_j g`.
    pub fn bivector_apply(&self, f: &BaseFunction, g: &BaseFunction) -> BaseFunction {
        let mut acc = BaseFunction::zero(self.chart);
        let dfs: Vec<_> = (0..self.dim).map(|i| f.dx(i)).collect();
        let dgs: Vec<_> = (0..self.dim).map(|j| g.dx(j)).collect();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let e = self.get(i, j);
                if e.is_zero() {
                    continue;
                }
                acc = acc.add(&e.mul(&dfs[i]).mul(&dgs[j]));
            }
        }
        acc
    }

    pub fn with_t_cap(&self, t_cap: u32) -> Self {
        FormMatrix {
            chart: self.chart.with_t_cap(t_cap),
            dim: self.dim,
            entries: self.entries.iter().map(|e| e.with_t_cap(t_cap)).collect(),
        }
    }

    /// View the antisymmetric matrix as a degree-2 [`QForm`].
    pub fn to_qform(&self) -> Result<QForm> {
        self.check_antisymmetric("FormMatrix::to_qform")?;
        let mut q = QForm::zero(self.chart, 2);
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                q.add_comp(vec![i, j], self.get(i, j).clone());
            }
        }
        Ok(q)
    }
}

/// Gauss–Jordan inversion of a d×d rational matrix (row-major). Returns
/// `None` when singular.
pub fn invert_rat_matrix(vals: &[Rat], d: usize) -> Option<Vec<Rat>> {
    assert_eq!(vals.len(), d * d);
    let mut a: Vec<Rat> = vals.to_vec();
    let mut inv: Vec<Rat> = (0..d * d)
        .map(|k| if k / d == k % d { Rat::one() } else { Rat::zero() })
        .collect();
    for col in 0..d {
        let pivot_row = (col..d).find(|&r| !a[r * d + col].is_zero())?;
        if pivot_row != col {
            for j in 0..d {
                a.swap(col * d + j, pivot_row * d + j);
                inv.swap(col * d + j, pivot_row * d + j);
            }
        }
        let p = a[col * d + col].clone();
        for j in 0..d {
            a[col * d + j] /= p.clone();
            inv[col * d + j] /= p.clone();
        }
        for r in 0..d {
            if r == col || a[r * d + col].is_zero() {
                continue;
            }
            let f = a[r * d + col].clone();
            for j in 0..d {
                let s = a[col * d + j].clone() * f.clone();
                a[r * d + j] -= s;
                let s = inv[col * d + j].clone() * f.clone();
                inv[r * d + j] -= s;
            }
        }
    }
    Some(inv)
}

/// Dense 1-form `ν = Σ_j ν_j dx^j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OneForm {
    chart: Chart,
    comps: Vec<BaseFunction>,
}

impl OneForm {
    pub fn zero(chart: Chart) -> Self {
        OneForm {
            chart,
            comps: vec![BaseFunction::zero(chart); chart.dim],
        }
    }

    pub fn from_components(chart: Chart, comps: Vec<BaseFunction>) -> Self {
        assert_eq!(comps.len(), chart.dim, "component count != dim");
        for c in &comps {
            c.chart().assert_compat(&chart, "OneForm::from_components");
        }
        OneForm { chart, comps }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn get(&self, j: usize) -> &BaseFunction {
        &self.comps[j]
    }

    pub fn set(&mut self, j: usize, f: BaseFunction) {
        f.chart().assert_compat(&self.chart, "OneForm::set");
        self.comps[j] = f;
    }

    pub fn components(&self) -> &[BaseFunction] {
        &self.comps
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(BaseFunction::is_zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.chart.assert_compat(&other.chart, "OneForm::add");
        OneForm {
            chart: self.chart,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        OneForm {
            chart: self.chart,
            comps: self.comps.iter().map(BaseFunction::neg).collect(),
        }
    }

    pub fn scale(&self, r: &Rat) -> Self {
        OneForm {
            chart: self.chart,
            comps: self.comps.iter().map(|c| c.scale(r)).collect(),
        }
    }

    pub fn scale_fn(&self, f: &BaseFunction) -> Self {
        OneForm {
            chart: self.chart,
            comps: self.comps.iter().map(|c| c.mul(f)).collect(),
        }
    }

    /// Exterior derivative as an antisymmetric matrix:
    /// `(dν)_{ij} = ∂_i ν_j − ∂_j ν_i`.
    pub fn exterior_d(&self) -> FormMatrix {
        let mut out = FormMatrix::zero(self.chart);
        for i in 0..self.chart.dim {
            for j in 0..self.chart.dim {
                out.set(i, j, self.comps[j].dx(i).sub(&self.comps[i].dx(j)));
            }
        }
        out
    }

    pub fn to_qform(&self) -> QForm {
        let mut q = QForm::zero(self.chart, 1);
        for (j, c) in self.comps.iter().enumerate() {
            q.add_comp(vec![j], c.clone());
        }
        q
    }
}

/// Sparse q-form with strictly increasing index tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QForm {
    chart: Chart,
    degree: usize,
    comps: BTreeMap<Vec<usize>, BaseFunction>,
}

impl QForm {
    pub fn zero(chart: Chart, degree: usize) -> Self {
        assert!(degree <= chart.dim, "form degree exceeds chart dimension");
        QForm { chart, degree, comps: BTreeMap::new() }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn components(&self) -> impl Iterator<Item = (&Vec<usize>, &BaseFunction)> {
        self.comps.iter()
    }

    pub fn component(&self, idx: &[usize]) -> BaseFunction {
        self.comps
            .get(idx)
            .cloned()
            .unwrap_or_else(|| BaseFunction::zero(self.chart))
    }

    /// Add `f · dx^{idx}` where `idx` is strictly increasing.
    pub fn add_comp(&mut self, idx: Vec<usize>, f: BaseFunction) {
        assert_eq!(idx.len(), self.degree, "index tuple length != degree");
        assert!(
            idx.windows(2).all(|w| w[0] < w[1]),
            "index tuple must be strictly increasing"
        );
        assert!(
            idx.iter().all(|&i| i < self.chart.dim),
            "form index out of range"
        );
        if f.is_zero() {
            return;
        }
        f.chart().assert_compat(&self.chart, "QForm::add_comp");
        match self.comps.entry(idx) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(f);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().add(&f);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.chart.assert_compat(&other.chart, "QForm::add");
        assert_eq!(self.degree, other.degree, "QForm::add: degree mismatch");
        let mut out = self.clone();
        for (idx, f) in &other.comps {
            out.add_comp(idx.clone(), f.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        QForm {
            chart: self.chart,
            degree: self.degree,
            comps: self
                .comps
                .iter()
                .map(|(k, f)| (k.clone(), f.neg()))
                .collect(),
        }
    }

    pub fn scale(&self, r: &Rat) -> Self {
        if r.is_zero() {
            return QForm::zero(self.chart, self.degree);
        }
        QForm {
            chart: self.chart,
            degree: self.degree,
            comps: self
                .comps
                .iter()
                .map(|(k, f)| (k.clone(), f.scale(r)))
                .collect(),
        }
    }

    /// Exterior derivative: `d(f dx^J) = Σ_i ∂_i f · dx^i ∧ dx^J`, the wedge
    /// sorted into increasing order with sign `(−1)^{#{j∈J : j<i}}`.
    pub fn exterior_d(&self) -> QForm {
        let mut out = QForm::zero(self.chart, self.degree + 1);
        for (idx, f) in &self.comps {
            for i in 0..self.chart.dim {
                if idx.contains(&i) {
                    continue;
                }
                let df = f.dx(i);
                if df.is_zero() {
                    continue;
                }
                let pos = idx.iter().filter(|&&j| j < i).count();
                let mut new_idx = idx.clone();
                new_idx.insert(pos, i);
                let signed = if pos % 2 == 0 { df } else { df.neg() };
                out.add_comp(new_idx, signed);
            }
        }
        out
    }

    /// Convert a degree-2 form to its antisymmetric matrix.
    pub fn to_form_matrix(&self) -> FormMatrix {
        assert_eq!(self.degree, 2, "to_form_matrix requires a 2-form");
        let mut m = FormMatrix::zero(self.chart);
        for (idx, f) in &self.comps {
            m.set(idx[0], idx[1], f.clone());
            m.set(idx[1], idx[0], f.neg());
        }
        m
    }

    /// Evaluate every component at a numeric point.
    pub fn eval_f64(&self, x: &[f64], t: f64) -> BTreeMap<Vec<usize>, f64> {
        self.comps
            .iter()
            .map(|(k, f)| (k.clone(), f.eval_f64(x, t)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{ChartKind, XBasis};
    use crate::rat::{rat, rat_int};

    fn t2(cap: u32) -> Chart {
        Chart::torus(2, cap)
    }

    fn darboux2(chart: Chart) -> FormMatrix {
        FormMatrix::from_rat_entries(
            chart,
            &[rat_int(0), rat_int(1), rat_int(-1), rat_int(0)],
        )
    }

    #[test]
    fn darboux_inverse() {
        let w = darboux2(t2(3));
        let lam = w.invert().unwrap();
        let expect = FormMatrix::from_rat_entries(
            t2(3),
            &[rat_int(0), rat_int(-1), rat_int(1), rat_int(0)],
        );
        assert_eq!(lam, expect);
    }

    #[test]
    fn neumann_inverse_with_t_correction() {
        // ω = ω⁰ + t cos(x1) dx1∧dx2 on T², t_cap = 3
        let chart = t2(3);
        let mut w = darboux2(chart);
        let bump = BaseFunction::term(chart, 1, XBasis::Cos(vec![1, 0]), rat_int(1));
        w.set(0, 1, w.get(0, 1).add(&bump));
        w.set(1, 0, w.get(1, 0).sub(&bump));
        let lam = w.invert().unwrap();
        assert_eq!(w.mat_mul(&lam), FormMatrix::identity(chart));
        assert_eq!(lam.mat_mul(&w), FormMatrix::identity(chart));
        assert!(lam.is_antisymmetric());
        assert_eq!(lam.transpose(), lam.neg());
    }

    #[test]
    fn invert_rejects_x_dependent_leading_block() {
        let chart = t2(3);
        let mut w = darboux2(chart);
        let c = BaseFunction::cos_wave(chart, vec![1, 0]);
        w.set(0, 1, w.get(0, 1).add(&c));
        w.set(1, 0, w.get(1, 0).sub(&c));
        assert!(matches!(
            w.invert(),
            Err(KernelError::Precondition(_))
        ));
    }

    #[test]
    fn invert_rejects_singular_leading_block() {
        let chart = t2(2);
        let w = FormMatrix::zero(chart);
        assert!(matches!(w.invert(), Err(KernelError::Precondition(_))));
    }

    #[test]
    fn closedness_detects_obstruction() {
        // On T³: ω with ω_{12} = cos(x3) is not closed.
        let chart = Chart::torus(3, 1);
        let mut w = FormMatrix::zero(chart);
        let f = BaseFunction::cos_wave(chart, vec![0, 0, 1]);
        w.set(0, 1, f.clone());
        w.set(1, 0, f.neg());
        assert!(!w.is_closed());
        // Constant forms are closed.
        let mut w2 = FormMatrix::zero(chart);
        w2.set(0, 1, BaseFunction::one(chart));
        w2.set(1, 0, BaseFunction::one(chart).neg());
        assert!(w2.is_closed());
    }

    #[test]
    fn exterior_d_of_one_form() {
        // ν = sin(x1) dx2 → dν has (1,2)-entry cos(x1)
        let chart = t2(2);
        let mut nu = OneForm::zero(chart);
        nu.set(1, BaseFunction::sin_wave(chart, vec![1, 0]));
        let d = nu.exterior_d();
        assert_eq!(*d.get(0, 1), BaseFunction::cos_wave(chart, vec![1, 0]));
        assert_eq!(*d.get(1, 0), BaseFunction::cos_wave(chart, vec![1, 0]).neg());
        assert!(d.get(0, 0).is_zero() && d.get(1, 1).is_zero());
    }

    #[test]
    fn d_squared_vanishes_on_qforms() {
        let chart = Chart::torus(3, 2);
        let mut q = QForm::zero(chart, 1);
        q.add_comp(vec![0], BaseFunction::sin_wave(chart, vec![1, 2, 0]));
        q.add_comp(
            vec![2],
            BaseFunction::term(chart, 1, XBasis::Cos(vec![0, 1, 1]), rat(2, 3)),
        );
        let dd = q.exterior_d().exterior_d();
        assert!(dd.is_zero());
        // and the 2-form route agrees with the matrix route
        let mut nu = OneForm::zero(chart);
        nu.set(0, BaseFunction::sin_wave(chart, vec![1, 2, 0]));
        nu.set(
            2,
            BaseFunction::term(chart, 1, XBasis::Cos(vec![0, 1, 1]), rat(2, 3)),
        );
        assert_eq!(nu.exterior_d().to_qform().unwrap(), q.exterior_d());
    }

    #[test]
    fn bivector_pairing_matches_poisson_bracket() {
        // Λ = [[0,-1],[1,0]]: Λ(df,dg) = ∂2 f ∂1 g − ∂1 f ∂2 g
        let chart = t2(2);
        let lam = FormMatrix::from_rat_entries(
            chart,
            &[rat_int(0), rat_int(-1), rat_int(1), rat_int(0)],
        );
        let f = BaseFunction::cos_wave(chart, vec![1, 0]);
        let g = BaseFunction::sin_wave(chart, vec![0, 1]);
        // ∂2 f ∂1 g − ∂1 f ∂2 g = 0 − (−sin x1)(cos x2) = sin(x1)cos(x2)
        let got = lam.bivector_apply(&f, &g);
        let expect = BaseFunction::sin_wave(chart, vec![1, 0])
            .mul(&BaseFunction::cos_wave(chart, vec![0, 1]));
        assert_eq!(got, expect);
    }

    #[test]
    fn affine_chart_matrices_work() {
        let chart = Chart::new(ChartKind::Affine, 2, 2);
        let mut w = darboux2(chart);
        // W = t·x1 dx1∧dx2
        let tx = BaseFunction::term(chart, 1, XBasis::Mono(vec![1, 0]), rat_int(1));
        w.set(0, 1, w.get(0, 1).add(&tx));
        w.set(1, 0, w.get(1, 0).sub(&tx));
        let lam = w.invert().unwrap();
        assert_eq!(w.mat_mul(&lam), FormMatrix::identity(chart));
    }
}
