//! Independent oracle for the fiber product normalization.
//!
//! The fiber algebra is, by definition, the ordered (PBW) algebra generated
//! by `y^1..y^d` with relations `y^i y^j − y^j y^i = ℏ Λ^{ij}`, its product
//! transported to symmetric tensors along the symmetrization map
//! `sym(y^α) = average of all orderings`. This file implements that
//! construction literally — noncommutative words, bubble normal-ordering,
//! symmetrization, and its inverse by degree descent — and compares the
//! transported product against the kernel's contraction formula on all
//! monomial pairs through fiber degree 3, for several constant bivectors
//! including a degenerate one.

use std::collections::BTreeMap;

use num::traits::Zero;
use starjet::base::{BaseFunction, Chart};
use starjet::form::FormMatrix;
use starjet::rat::{rat, rat_int, Rat};
use starjet::weyl::{Caps, TermKey, Weyl, WeylAlgebra};

/// Commutative (or normal-ordered) polynomial: (exponents, ℏ-power) → coeff.
type Poly = BTreeMap<(Vec<u32>, u32), Rat>;

fn poly_add(p: &mut Poly, key: (Vec<u32>, u32), c: Rat) {
    if c.is_zero() {
        return;
    }
    match p.entry(key) {
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

struct Oracle {
    d: usize,
    lam: Vec<Vec<Rat>>,
}

impl Oracle {
    /// Normal-order `coeff · ℏ^hbar · word` into sorted-word monomials using
    /// `y^a y^b = y^b y^a + ℏΛ^{ab}` on descents (`a > b`).
    fn normal_order(&self, word: &[usize], hbar: u32, coeff: &Rat, out: &mut Poly) {
        match word.windows(2).position(|w| w[0] > w[1]) {
            None => {
                let mut exps = vec![0u32; self.d];
                for &l in word {
                    exps[l] += 1;
                }
                poly_add(out, (exps, hbar), coeff.clone());
            }
            Some(i) => {
                let (a, b) = (word[i], word[i + 1]);
                let mut swapped = word.to_vec();
                swapped.swap(i, i + 1);
                self.normal_order(&swapped, hbar, coeff, out);
                let l = &self.lam[a][b];
                if !l.is_zero() {
                    let mut rest = word.to_vec();
                    rest.drain(i..=i + 1);
                    let c2 = coeff.clone() * l.clone();
                    self.normal_order(&rest, hbar + 1, &c2, out);
                }
            }
        }
    }

    /// Product of two normal-ordered polynomials.
    fn nmul(&self, a: &Poly, b: &Poly) -> Poly {
        let mut out = Poly::new();
        for ((ea, ha), ca) in a {
            for ((eb, hb), cb) in b {
                let mut word = exps_to_word(ea);
                word.extend(exps_to_word(eb));
                let c = ca.clone() * cb.clone();
                self.normal_order(&word, ha + hb, &c, &mut out);
            }
        }
        out
    }

    /// `sym(y^α)`: the average over all distinct orderings, normal-ordered.
    fn sym_monomial(&self, exps: &[u32]) -> Poly {
        let word = exps_to_word(&exps.to_vec());
        let mut perms: Vec<Vec<usize>> = Vec::new();
        let mut w = word.clone();
        loop {
            perms.push(w.clone());
            if !next_permutation(&mut w) {
                break;
            }
        }
        let inv = Rat::new(1.into(), (perms.len() as i64).into());
        let mut out = Poly::new();
        for p in &perms {
            self.normal_order(p, 0, &inv, &mut out);
        }
        out
    }

    /// Linear extension of `sym` to a commutative polynomial.
    fn sym(&self, p: &Poly) -> Poly {
        let mut out = Poly::new();
        for ((e, h), c) in p {
            for ((e2, h2), c2) in self.sym_monomial(e) {
                poly_add(&mut out, (e2, h2 + h), c2 * c.clone());
            }
        }
        out
    }

    /// Inverse of `sym` by descent on fiber degree: top-degree terms pass
    /// through unchanged, corrections live strictly lower.
    fn sym_inv(&self, n: &Poly) -> Poly {
        let mut out = Poly::new();
        let mut rem = n.clone();
        while !rem.is_empty() {
            let maxd = rem
                .keys()
                .map(|(e, _)| e.iter().sum::<u32>())
                .max()
                .unwrap();
            let tops: Vec<((Vec<u32>, u32), Rat)> = rem
                .iter()
                .filter(|((e, _), _)| e.iter().sum::<u32>() == maxd)
                .map(|(k, c)| (k.clone(), c.clone()))
                .collect();
            for ((e, h), c) in tops {
                poly_add(&mut out, (e.clone(), h), c.clone());
                for ((e2, h2), c2) in self.sym_monomial(&e) {
                    poly_add(&mut rem, (e2, h2 + h), -(c2 * c.clone()));
                }
            }
        }
        out
    }

    /// The transported product on symmetric tensors.
    fn transported_product(&self, a: &Poly, b: &Poly) -> Poly {
        self.sym_inv(&self.nmul(&self.sym(a), &self.sym(b)))
    }
}

fn exps_to_word(exps: &Vec<u32>) -> Vec<usize> {
    let mut w = Vec::new();
    for (i, &e) in exps.iter().enumerate() {
        for _ in 0..e {
            w.push(i);
        }
    }
    w
}

/// Lexicographic next permutation; `false` when wrapped to sorted order.
fn next_permutation(w: &mut [usize]) -> bool {
    if w.len() < 2 {
        return false;
    }
    let mut i = w.len() - 1;
    while i > 0 && w[i - 1] >= w[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = w.len() - 1;
    while w[j] <= w[i - 1] {
        j -= 1;
    }
    w.swap(i - 1, j);
    w[i..].reverse();
    true
}

/// All exponent vectors in `d` variables with total degree ≤ `max`.
fn monomials_up_to(d: usize, max: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0u32; d]];
    for _ in 0..max {
        let mut grown = Vec::new();
        for m in &out {
            for i in 0..d {
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

/// Kernel Moyal product of two pure fiber monomials, as a `Poly`.
fn kernel_product(d: usize, lam_vals: &[Vec<Rat>], ea: &[u32], eb: &[u32]) -> Poly {
    let chart = Chart::torus(d, 0);
    let alg = WeylAlgebra::new(chart, Caps { degree: 14, hbar: 7 });
    let flat: Vec<Rat> = lam_vals.iter().flatten().cloned().collect();
    let lam = FormMatrix::from_rat_entries(chart, &flat);
    let mono = |e: &[u32]| {
        let mut w: Weyl<BaseFunction> = Weyl::zero(alg);
        w.add_term(
            TermKey { hbar: 0, y: e.to_vec(), dx: 0 },
            BaseFunction::one(chart),
        );
        w
    };
    let p = mono(ea).moyal(&mono(eb), &lam);
    let mut out = Poly::new();
    for (k, c) in p.terms() {
        assert_eq!(k.dx, 0);
        let (t0, c0) = {
            let mut val = Rat::zero();
            for ((tp, b), coeff) in c.terms() {
                assert_eq!(*tp, 0);
                assert_eq!(*b, starjet::base::XBasis::One);
                val += coeff.clone();
            }
            (k.hbar, val)
        };
        poly_add(&mut out, (k.y.clone(), t0), c0);
    }
    out
}

fn run_comparison(d: usize, lam_vals: Vec<Vec<Rat>>, max_deg: u32) {
    let oracle = Oracle { d, lam: lam_vals.clone() };
    let monos = monomials_up_to(d, max_deg);
    for ea in &monos {
        for eb in &monos {
            let mut a = Poly::new();
            poly_add(&mut a, (ea.clone(), 0), rat_int(1));
            let mut b = Poly::new();
            poly_add(&mut b, (eb.clone(), 0), rat_int(1));
            let expect = oracle.transported_product(&a, &b);
            let got = kernel_product(d, &lam_vals, ea, eb);
            assert_eq!(
                got, expect,
                "product mismatch at y^{ea:?} ∘ y^{eb:?} (Λ = {lam_vals:?})"
            );
        }
    }
}

#[test]
fn transported_ordered_product_matches_contraction_formula_d2() {
    run_comparison(
        2,
        vec![
            vec![rat_int(0), rat_int(-1)],
            vec![rat_int(1), rat_int(0)],
        ],
        3,
    );
}

#[test]
fn transported_ordered_product_matches_scaled_bivector() {
    run_comparison(
        2,
        vec![
            vec![rat_int(0), rat(3, 2)],
            vec![rat(-3, 2), rat_int(0)],
        ],
        3,
    );
}

#[test]
fn transported_ordered_product_matches_degenerate_bivector_d3() {
    run_comparison(
        3,
        vec![
            vec![rat_int(0), rat_int(1), rat_int(0)],
            vec![rat_int(-1), rat_int(0), rat_int(0)],
            vec![rat_int(0), rat_int(0), rat_int(0)],
        ],
        3,
    );
}

#[test]
fn generator_commutator_equals_hbar_times_bivector() {
    // y^i ∘ y^j − y^j ∘ y^i = ℏΛ^{ij} in the ordered algebra, hence in the
    // transported product.
    let lam = vec![
        vec![rat_int(0), rat(5, 3)],
        vec![rat(-5, 3), rat_int(0)],
    ];
    let oracle = Oracle { d: 2, lam: lam.clone() };
    let mut y1 = Poly::new();
    poly_add(&mut y1, (vec![1, 0], 0), rat_int(1));
    let mut y2 = Poly::new();
    poly_add(&mut y2, (vec![0, 1], 0), rat_int(1));
    let ab = oracle.transported_product(&y1, &y2);
    let ba = oracle.transported_product(&y2, &y1);
    let mut comm = ab.clone();
    for (k, c) in &ba {
        poly_add(&mut comm, k.clone(), -c.clone());
    }
    let mut expect = Poly::new();
    poly_add(&mut expect, (vec![0, 0], 1), rat(5, 3));
    assert_eq!(comm, expect);

    let mut kernel_comm = kernel_product(2, &lam, &[1, 0], &[0, 1]);
    for (k, c) in kernel_product(2, &lam, &[0, 1], &[1, 0]) {
        poly_add(&mut kernel_comm, k, -c);
    }
    assert_eq!(kernel_comm, expect);
}
