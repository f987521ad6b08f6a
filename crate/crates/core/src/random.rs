//! Seeded generators for the randomized identity suites.
//!
//! Every randomized check in the crate draws from a [`ChaCha8Rng`] with an
//! explicit seed, so suites replay bit for bit: the same seed produces the
//! same elements, and reports built on top of them are byte-stable.

use crate::base::{BaseFunction, Chart, ChartKind, XBasis};
use crate::form::OneForm;
use crate::rat::{rat, Rat};
use crate::weyl::{TermKey, Weyl, WeylAlgebra};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The deterministic RNG used by all randomized suites.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nonzero rational with numerator in `±1..=4` and denominator in `1..=4`.
pub fn random_rat(rng: &mut impl Rng) -> Rat {
    let num = loop {
        let n = rng.random_range(-4i64..=4);
        if n != 0 {
            break n;
        }
    };
    rat(num, rng.random_range(1i64..=4))
}

/// Frequency vector with entries in `[-bound, bound]`, not all zero.
pub fn random_wave_vector(rng: &mut impl Rng, dim: usize, bound: i32) -> Vec<i32> {
    assert!(bound >= 1, "wave bound must be positive");
    loop {
        let k: Vec<i32> = (0..dim).map(|_| rng.random_range(-bound..=bound)).collect();
        if k.iter().any(|&e| e != 0) {
            return k;
        }
    }
}

/// Monomial exponents with total degree in `1..=bound`.
fn random_exponents(rng: &mut impl Rng, dim: usize, bound: u32) -> Vec<u32> {
    loop {
        let alpha: Vec<u32> = (0..dim).map(|_| rng.random_range(0..=bound)).collect();
        let total: u32 = alpha.iter().sum();
        if total >= 1 && total <= bound {
            return alpha;
        }
    }
}

/// Sum of `terms` random basis terms: constants plus waves of Fourier
/// degree ≤ `degree_bound` on torus charts, constants plus monomials of
/// total degree ≤ `degree_bound` on affine charts, with t-powers spread
/// uniformly over the chart's cap.
pub fn random_base_function(
    rng: &mut impl Rng,
    chart: Chart,
    degree_bound: u32,
    terms: usize,
) -> BaseFunction {
    assert!(degree_bound >= 1, "degree bound must be positive");
    let mut f = BaseFunction::zero(chart);
    for _ in 0..terms {
        let tpow = rng.random_range(0..=chart.t_cap);
        let c = random_rat(rng);
        let basis = match chart.kind {
            ChartKind::Torus => match rng.random_range(0u8..3) {
                0 => XBasis::One,
                1 => XBasis::Cos(random_wave_vector(rng, chart.dim, degree_bound as i32)),
                _ => XBasis::Sin(random_wave_vector(rng, chart.dim, degree_bound as i32)),
            },
            ChartKind::Affine => {
                if rng.random_range(0u8..3) == 0 {
                    XBasis::One
                } else {
                    XBasis::Mono(random_exponents(rng, chart.dim, degree_bound))
                }
            }
        };
        f = f.add(&BaseFunction::term(chart, tpow, basis, c));
    }
    f
}

/// As [`random_base_function`] but divisible by `t` (every term carries at
/// least one power), for perturbations that must vanish at `t = 0`.
pub fn random_t_multiple(
    rng: &mut impl Rng,
    chart: Chart,
    degree_bound: u32,
    terms: usize,
) -> BaseFunction {
    assert!(chart.t_cap >= 1, "a t-multiple needs t_cap ≥ 1");
    random_base_function(rng, chart, degree_bound, terms).t_mul(1)
}

/// Random fiber element: `terms` monomials `f(x,t)·y^α ℏ^m dx^I` with
/// `|α| ≤ max_y`, `m ≤ max_hbar`, and coefficient functions of degree
/// ≤ `degree_bound`.  The stated bounds must fit inside the algebra caps so
/// no term is silently truncated away.
pub fn random_weyl(
    rng: &mut impl Rng,
    alg: WeylAlgebra,
    max_y: u32,
    max_hbar: u32,
    degree_bound: u32,
    terms: usize,
) -> Weyl<BaseFunction> {
    assert!(
        max_y + 2 * max_hbar <= alg.caps.degree && max_hbar <= alg.caps.hbar,
        "requested element bounds exceed the algebra caps"
    );
    let dim = alg.chart.dim;
    let mut w = Weyl::zero(alg);
    for _ in 0..terms {
        let y = loop {
            let y: Vec<u32> = (0..dim).map(|_| rng.random_range(0..=max_y)).collect();
            if y.iter().sum::<u32>() <= max_y {
                break y;
            }
        };
        let key = TermKey {
            hbar: rng.random_range(0..=max_hbar),
            y,
            dx: rng.random_range(0..(1u16 << dim)),
        };
        w.add_term(key, random_base_function(rng, alg.chart, degree_bound, 1));
    }
    w
}

/// Random one-form with `terms` random summands per component.
pub fn random_one_form(
    rng: &mut impl Rng,
    chart: Chart,
    degree_bound: u32,
    terms: usize,
) -> OneForm {
    OneForm::from_components(
        chart,
        (0..chart.dim)
            .map(|_| random_base_function(rng, chart, degree_bound, terms))
            .collect(),
    )
}
