//! Exact linear algebra over a field, with right-hand sides in any module.
//!
//! The solver is plain Gaussian elimination with exact arithmetic — no
//! pivoting heuristics are needed over ℚ or ℚ(i). Right-hand sides live in
//! an arbitrary module over the scalar field (for example, function-valued
//! unknowns with rational sample matrices), so one elimination routine
//! serves both numeric and symbolic solves. Overdetermined systems are
//! checked for consistency instead of being least-squares-fudged.

use num::Complex;

use crate::rat::Rat;

/// Exact field scalars.
pub trait Field: Clone + PartialEq + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    /// `self / other`; caller guarantees `other ≠ 0`.
    fn div(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
}

impl Field for Rat {
    fn zero() -> Self {
        num::traits::Zero::zero()
    }
    fn one() -> Self {
        num::traits::One::one()
    }
    fn is_zero(&self) -> bool {
        num::traits::Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        assert!(!Field::is_zero(other), "division by zero");
        self / other
    }
    fn neg(&self) -> Self {
        -self
    }
}

/// Gaussian rationals ℚ(i).
pub type CRat = Complex<Rat>;

impl Field for CRat {
    fn zero() -> Self {
        num::traits::Zero::zero()
    }
    fn one() -> Self {
        num::traits::One::one()
    }
    fn is_zero(&self) -> bool {
        num::traits::Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        assert!(!Field::is_zero(other), "division by zero");
        self / other
    }
    fn neg(&self) -> Self {
        -self
    }
}

/// `i^k` for the mixed-power tables of wave derivatives.
pub fn i_power(k: u32) -> CRat {
    let one: Rat = num::traits::One::one();
    let zero: Rat = num::traits::Zero::zero();
    match k % 4 {
        0 => Complex::new(one, zero),
        1 => Complex::new(zero, one),
        2 => Complex::new(-one, zero),
        _ => Complex::new(zero, -one),
    }
}

/// Values a right-hand side may take: any module over the scalar field.
pub trait Module<F: Field>: Clone {
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn scale(&self, s: &F) -> Self;
    fn is_zero(&self) -> bool;
}

impl<F: Field> Module<F> for F {
    fn add(&self, other: &Self) -> Self {
        Field::add(self, other)
    }
    fn sub(&self, other: &Self) -> Self {
        Field::sub(self, other)
    }
    fn scale(&self, s: &F) -> Self {
        Field::mul(self, s)
    }
    fn is_zero(&self) -> bool {
        Field::is_zero(self)
    }
}

impl Module<Rat> for crate::base::BaseFunction {
    fn add(&self, other: &Self) -> Self {
        crate::base::BaseFunction::add(self, other)
    }
    fn sub(&self, other: &Self) -> Self {
        crate::base::BaseFunction::sub(self, other)
    }
    fn scale(&self, s: &Rat) -> Self {
        crate::base::BaseFunction::scale(self, s)
    }
    fn is_zero(&self) -> bool {
        crate::base::BaseFunction::is_zero(self)
    }
}

/// Result of an exact solve.
#[derive(Clone, Debug)]
pub enum SolveOutcome<V> {
    /// Full column rank and consistent: the unique solution.
    Unique(Vec<V>),
    /// Rank-deficient but consistent: rank and the free columns.
    Underdetermined { rank: usize, free_cols: Vec<usize> },
    /// No solution: the first surplus row whose reduced RHS is nonzero.
    Inconsistent { row: usize },
}

struct Eliminated<F, V> {
    mat: Vec<Vec<F>>,
    rhs: Vec<V>,
    /// (row, col) of each pivot, in elimination order.
    pivots: Vec<(usize, usize)>,
}

fn eliminate<F: Field, V: Module<F>>(a: &[Vec<F>], rhs: &[V]) -> Eliminated<F, V> {
    let m = a.len();
    assert_eq!(m, rhs.len(), "matrix and RHS row counts differ");
    let n = if m == 0 { 0 } else { a[0].len() };
    let mut mat: Vec<Vec<F>> = a.to_vec();
    for row in &mat {
        assert_eq!(row.len(), n, "ragged matrix");
    }
    let mut r: Vec<V> = rhs.to_vec();
    let mut pivots = Vec::new();
    let mut row = 0usize;
    for col in 0..n {
        let Some(p) = (row..m).find(|&i| !mat[i][col].is_zero()) else {
            continue;
        };
        mat.swap(row, p);
        r.swap(row, p);
        let pivot = mat[row][col].clone();
        for i in (row + 1)..m {
            if mat[i][col].is_zero() {
                continue;
            }
            let factor = mat[i][col].div(&pivot);
            for j in col..n {
                let delta = mat[row][j].mul(&factor);
                mat[i][j] = mat[i][j].sub(&delta);
            }
            let delta = r[row].scale(&factor);
            r[i] = r[i].sub(&delta);
        }
        pivots.push((row, col));
        row += 1;
        if row == m {
            break;
        }
    }
    Eliminated { mat, rhs: r, pivots }
}

/// Solve `A·x = rhs` exactly. Rows may exceed columns; surplus rows are
/// consistency-checked. Rank deficiency and inconsistency are reported, not
/// papered over.
pub fn solve_exact<F: Field, V: Module<F>>(a: &[Vec<F>], rhs: &[V]) -> SolveOutcome<V> {
    let n = if a.is_empty() { 0 } else { a[0].len() };
    let e = eliminate(a, rhs);
    let rank = e.pivots.len();
    for i in rank..e.rhs.len() {
        if !e.rhs[i].is_zero() {
            return SolveOutcome::Inconsistent { row: i };
        }
    }
    if rank < n {
        let pivot_cols: Vec<usize> = e.pivots.iter().map(|&(_, c)| c).collect();
        let free_cols = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
        return SolveOutcome::Underdetermined { rank, free_cols };
    }
    SolveOutcome::Unique(back_substitute(&e, n))
}

/// Solve like [`solve_exact`], but on a rank-deficient consistent system
/// return the particular solution with every free variable set to zero,
/// together with the free column indices.
pub fn solve_particular<F: Field, V: Module<F>>(
    a: &[Vec<F>],
    rhs: &[V],
    zero_value: &V,
) -> Result<(Vec<V>, Vec<usize>), usize> {
    let n = if a.is_empty() { 0 } else { a[0].len() };
    let e = eliminate(a, rhs);
    let rank = e.pivots.len();
    for i in rank..e.rhs.len() {
        if !e.rhs[i].is_zero() {
            return Err(i);
        }
    }
    let pivot_cols: Vec<usize> = e.pivots.iter().map(|&(_, c)| c).collect();
    let free_cols: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
    let mut x: Vec<V> = vec![zero_value.clone(); n];
    for &(row, col) in e.pivots.iter().rev() {
        let mut v = e.rhs[row].clone();
        for j in (col + 1)..n {
            if e.mat[row][j].is_zero() {
                continue;
            }
            let delta = x[j].scale(&e.mat[row][j]);
            v = v.sub(&delta);
        }
        let inv = F::one().div(&e.mat[row][col]);
        x[col] = v.scale(&inv);
    }
    Ok((x, free_cols))
}

fn back_substitute<F: Field, V: Module<F>>(e: &Eliminated<F, V>, n: usize) -> Vec<V> {
    // full rank: pivot k sits at (k, pivot_cols[k]) with pivot_cols strictly
    // increasing and of length n
    let mut x: Vec<Option<V>> = vec![None; n];
    for &(row, col) in e.pivots.iter().rev() {
        let mut v = e.rhs[row].clone();
        for j in (col + 1)..n {
            if e.mat[row][j].is_zero() {
                continue;
            }
            let xj = x[j].as_ref().expect("upper-triangular order");
            let delta = xj.scale(&e.mat[row][j]);
            v = v.sub(&delta);
        }
        let inv = F::one().div(&e.mat[row][col]);
        x[col] = Some(v.scale(&inv));
    }
    x.into_iter().map(|v| v.expect("full rank")).collect()
}
