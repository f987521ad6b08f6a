//! Deterministic invariant suite: replays the kernel's defining identities
//! on seeded random elements and renders a byte-stable plaintext report.
//!
//! Each suite derives its own ChaCha stream from the base seed, so the
//! suites are independent of one another but fully reproducible: two runs
//! with the same seed produce identical reports byte for byte.  Failures
//! are collected rather than panicking, so a front end can print the whole
//! report and exit nonzero.

use crate::base::{BaseFunction, Chart, XBasis};
use crate::borel::{bump, choose_lambda, BorelConfig, FormSequence};
use crate::fedosov::{
    curvature, symplectize_connection, ChartPoisson, FedosovData, FoliatedConnection,
};
use crate::form::{FormMatrix, OneForm, QForm};
use crate::jets::{induce_star, jet_operator, jet_scalar};
use crate::moser::solve_moser;
use crate::ops::{DiffOp, HSeries, OpJet};
use crate::random::{
    random_base_function, random_rat, random_t_multiple, random_wave_vector, random_weyl,
    seeded_rng,
};
use crate::rat::{rat, rat_int, Rat};
use crate::table::StarTable;
use crate::weyl::{Caps, TermKey, Weyl, WeylAlgebra};
use rand::Rng;
use std::fmt::Write as _;

/// Outcome of one named identity: how many instances were checked and
/// which (if any) failed, with at most a few recorded details.
#[derive(Clone, Debug)]
pub struct CheckLine {
    pub name: &'static str,
    pub checks: usize,
    pub failed: usize,
    pub details: Vec<String>,
}

struct Tally {
    line: CheckLine,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            line: CheckLine { name, checks: 0, failed: 0, details: Vec::new() },
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.line.checks += 1;
        if !ok {
            self.line.failed += 1;
            if self.line.details.len() < 3 {
                self.line.details.push(detail());
            }
        }
    }

    fn done(self) -> CheckLine {
        self.line
    }
}

/// Aggregated report over all suites.
#[derive(Clone, Debug)]
pub struct SelftestReport {
    pub seed: u64,
    pub lines: Vec<CheckLine>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.lines.iter().all(|l| l.failed == 0)
    }

    /// Byte-stable plaintext rendering: fixed ordering, no timing, no
    /// environment-dependent content.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "star-kernel selftest");
        let _ = writeln!(out, "seed: {}", self.seed);
        for line in &self.lines {
            let status = if line.failed == 0 { "ok" } else { "FAIL" };
            let tail = if line.failed == 0 {
                String::new()
            } else {
                format!(", {} failed", line.failed)
            };
            let _ = writeln!(out, "[{status}] {}: {} checks{tail}", line.name, line.checks);
            for d in &line.details {
                let _ = writeln!(out, "       {d}");
            }
        }
        let checks: usize = self.lines.iter().map(|l| l.checks).sum();
        let failed: usize = self.lines.iter().map(|l| l.failed).sum();
        let verdict = if failed == 0 { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "result: {verdict} ({} identities, {checks} checks, {failed} failures)",
            self.lines.len()
        );
        out
    }
}

/// Run every suite at its default size.
pub fn run_selftest(seed: u64) -> SelftestReport {
    let mut lines = Vec::new();
    lines.extend(weyl_suite(seed, 100));
    lines.extend(fedosov_suite(seed, 10));
    lines.extend(induced_suite(seed, 10));
    lines.extend(moser_suite(seed, 10));
    lines.extend(borel_suite());
    SelftestReport { seed, lines }
}

fn darboux(chart: Chart) -> FormMatrix {
    FormMatrix::from_rat_entries(
        chart,
        &[rat_int(0), rat_int(1), rat_int(-1), rat_int(0)],
    )
}

/// `ω⁰ + t·c·cos(k·x) dx¹∧dx²` with random amplitude and frequency: the
/// standing family all curved suites quantize.
fn random_wave_symplectic(rng: &mut impl Rng, chart: Chart) -> FormMatrix {
    let wave = BaseFunction::term(
        chart,
        1,
        XBasis::Cos(random_wave_vector(rng, chart.dim, 2)),
        random_rat(rng),
    );
    let mut omega = darboux(chart);
    omega.set(0, 1, omega.get(0, 1).add(&wave));
    omega.set(1, 0, omega.get(1, 0).sub(&wave));
    omega
}

/// Weight-homogeneous random element: every term has `|α| + 2m = weight`.
fn random_homogeneous(
    rng: &mut impl Rng,
    alg: WeylAlgebra,
    weight: u32,
    terms: usize,
) -> Weyl<BaseFunction> {
    let dim = alg.chart.dim;
    let mut w = Weyl::zero(alg);
    for _ in 0..terms {
        let m = rng.random_range(0..=(weight / 2).min(alg.caps.hbar));
        let mut y = vec![0u32; dim];
        for _ in 0..(weight - 2 * m) {
            y[rng.random_range(0..dim)] += 1;
        }
        let key = TermKey { hbar: m, y, dx: rng.random_range(0..(1u16 << dim)) };
        w.add_term(key, random_base_function(rng, alg.chart, 2, 1));
    }
    w
}

/// Fiber-calculus identities on random elements: δ² = 0, the Hodge-type
/// decomposition, the moment element generating δ, associativity of the
/// fiber product, its graded Leibniz rule for δ, and weight multiplicativity.
pub fn weyl_suite(seed: u64, elements: usize) -> Vec<CheckLine> {
    let mut rng = seeded_rng(seed);
    rng.set_stream(1);
    let chart = Chart::torus(2, 1);
    // caps sized so products of two generated elements are never truncated
    // (weight ≤ 5 each): the Leibniz and moment identities are exact only
    // below the caps boundary.
    let alg = WeylAlgebra::new(chart, Caps { degree: 10, hbar: 5 });
    let wave = BaseFunction::term(chart, 1, XBasis::Cos(vec![1, 0]), rat(1, 3));
    let mut omega = darboux(chart);
    omega.set(0, 1, omega.get(0, 1).add(&wave));
    omega.set(1, 0, omega.get(1, 0).sub(&wave));
    let lam = omega.invert().expect("standing symplectic form inverts");
    // moment element μ = Σ ω_{jk} y^k dx^j generating ℏδ = ad(μ)
    let mut mu = Weyl::zero(alg);
    for j in 0..2 {
        for k in 0..2 {
            let mut key = TermKey::scalar(2);
            key.y[k] = 1;
            key.dx = 1 << j;
            mu.add_term(key, omega.get(j, k).clone());
        }
    }

    let mut dsq = Tally::new("weyl/delta-squared");
    let mut hodge = Tally::new("weyl/hodge-identity");
    let mut moment = Tally::new("weyl/moment-element");
    let mut assoc = Tally::new("weyl/associativity");
    let mut leibniz = Tally::new("weyl/delta-antiderivation");
    let mut grading = Tally::new("weyl/grading");

    for i in 0..elements {
        let e = random_weyl(&mut rng, alg, 3, 1, 2, 3);
        dsq.check(
            e.delta().delta().is_zero() && e.delta_inv().delta_inv().is_zero(),
            || format!("element {i}"),
        );
        let lhs = e.delta().delta_inv().add(&e.delta_inv().delta());
        hodge.check(lhs == e.sub(&e.pr0()), || format!("element {i}"));
        moment.check(mu.ad(&e, &lam) == e.delta().hbar_mul(1), || {
            format!("element {i}")
        });

        let u = random_weyl(&mut rng, alg, 3, 1, 2, 3);
        let v = random_weyl(&mut rng, alg, 3, 1, 2, 3);
        assoc.check(
            u.moyal(&v, &lam).moyal(&e, &lam) == u.moyal(&v.moyal(&e, &lam), &lam),
            || format!("triple {i}"),
        );

        // δ(u∘v) = δu∘v + Σ_p (−1)^p u_p∘δv over form components of u
        let lhs = u.moyal(&v, &lam).delta();
        let mut rhs = u.delta().moyal(&v, &lam);
        for p in 0..=2u32 {
            let up = u.form_component(p);
            if up.is_zero() {
                continue;
            }
            let term = up.moyal(&v.delta(), &lam);
            rhs = rhs.add(&if p % 2 == 1 { term.neg() } else { term });
        }
        leibniz.check(lhs == rhs, || format!("pair {i}"));

        let w1 = rng.random_range(0..=4u32);
        let w2 = rng.random_range(0..=4u32);
        let h1 = random_homogeneous(&mut rng, alg, w1, 2);
        let h2 = random_homogeneous(&mut rng, alg, w2, 2);
        let prod = h1.moyal(&h2, &lam);
        grading.check(
            prod.terms().all(|(k, _)| k.weight() == w1 + w2),
            || format!("weights {w1}+{w2}, element {i}"),
        );
    }
    vec![dsq.done(), hodge.done(), moment.done(), assoc.done(), leibniz.done(), grading.done()]
}

/// Flat-connection pipeline on a random curved torus family: connection
/// postconditions, the curvature identity, flatness of the recursion's
/// output, its gauge normalization, the closed-form oracle on flat data,
/// and flat-section/unit laws on random scalars.
pub fn fedosov_suite(seed: u64, scalars: usize) -> Vec<CheckLine> {
    let mut rng = seeded_rng(seed);
    rng.set_stream(2);
    let mut conn_line = Tally::new("fedosov/symplectic-connection");
    let mut curv = Tally::new("fedosov/curvature-identity");
    let mut flat = Tally::new("fedosov/flatness");
    let mut gauge = Tally::new("fedosov/gauge-normalization");
    let mut oracle = Tally::new("fedosov/flat-oracle");
    let mut sections = Tally::new("fedosov/flat-sections");

    let chart = Chart::torus(2, 2);
    let omega = random_wave_symplectic(&mut rng, chart);
    let outcome = (|| -> crate::error::Result<()> {
        let p = ChartPoisson::new(chart, 2, omega)?;
        let conn = symplectize_connection(&FoliatedConnection::zero(chart), &p)?;
        conn_line.check(conn.is_torsion_free(), || "torsion".into());
        conn_line.check(conn.check_parallel(p.omega()).is_ok(), || "∇ω ≠ 0".into());
        // curvature() verifies 2ℏ∂² = ad(R̄) on a spanning set internally
        let rbar = curvature(&conn, &p)?;
        curv.check(true, String::new);
        curv.check(
            rbar.terms().all(|(k, _)| {
                k.y_degree() == 2 && k.hbar == 0 && k.form_degree() == 2
            }),
            || "R̄ grading".into(),
        );
        let fd = FedosovData::build(&p, &FoliatedConnection::zero(chart))?;
        flat.check(fd.verify_flatness().is_ok(), || "D² ≠ 0".into());
        let r = fd.connection_form();
        gauge.check(r.delta_inv().is_zero(), || "δ⁻¹r ≠ 0".into());
        gauge.check(r.pr0().is_zero(), || "pr₀r ≠ 0".into());

        // flat Darboux data reproduces the closed-form expansion exactly
        let flat_chart = Chart::torus(2, 0);
        let pf = ChartPoisson::new(flat_chart, 2, darboux(flat_chart))?;
        let fdf = FedosovData::build(&pf, &FoliatedConnection::zero(flat_chart))?;
        let table = fdf.cochains()?;
        oracle.check(
            table == StarTable::moyal(pf.lambda(), 2),
            || "flat cochains ≠ closed form".into(),
        );

        let one = HSeries::one(chart, 2);
        for i in 0..scalars {
            let f = HSeries::from_fn(&random_base_function(&mut rng, chart, 2, 2), 2);
            sections.check(
                fd.star(&one, &f)? == f && fd.star(&f, &one)? == f,
                || format!("unit law, scalar {i}"),
            );
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        flat.check(false, || format!("pipeline error: {e}"));
    }
    vec![
        conn_line.done(),
        curv.done(),
        flat.done(),
        gauge.done(),
        oracle.done(),
        sections.done(),
    ]
}

/// Substituting ℏ for the leaf parameter: the induced tables validate, are
/// associative, agree across orders, and the substitution is a homomorphism
/// compatible with operator jets.
pub fn induced_suite(seed: u64, pairs: usize) -> Vec<CheckLine> {
    let mut rng = seeded_rng(seed);
    rng.set_stream(3);
    let mut valid = Tally::new("induced/table-validates");
    let mut compat = Tally::new("induced/order-compatibility");
    let mut assoc = Tally::new("induced/associativity");
    let mut hom = Tally::new("induced/jet-homomorphism");
    let mut opcompat = Tally::new("induced/operator-compatibility");

    let n = 2u32;
    let hat = Chart::torus(2, n);
    let omega = random_wave_symplectic(&mut rng, hat);
    let outcome = (|| -> crate::error::Result<()> {
        let p = ChartPoisson::new(hat, n, omega)?;
        let fd = FedosovData::build(&p, &FoliatedConnection::zero(hat))?;
        let table = fd.cochains()?;
        let ind2 = induce_star(&table, 2)?;
        let ind1 = induce_star(&table, 1)?;
        valid.check(ind2.validate().is_ok(), || "order-2 table".into());
        compat.check(ind2.agrees_through(&ind1, 1), || "⋆₁ ≢ ⋆₂ mod ℏ²".into());

        let base = hat.with_t_cap(0);
        let family: Vec<BaseFunction> =
            (0..5).map(|_| random_base_function(&mut rng, base, 2, 2)).collect();
        assoc.check(ind2.check_associative(&family).is_ok(), || {
            "induced table association".into()
        });

        for i in 0..pairs {
            let a = HSeries::from_fn(&random_base_function(&mut rng, hat, 2, 2), n);
            let b = HSeries::from_fn(&random_base_function(&mut rng, hat, 2, 2), n);
            let lhs = jet_scalar(&fd.star(&a, &b)?, n)?;
            let rhs = ind2.apply(&jet_scalar(&a, n)?, &jet_scalar(&b, n)?);
            hom.check(lhs == rhs, || format!("pair {i}"));

            // random operator jet: identity head plus random t-graded parts
            let mut phi = OpJet::identity(hat, n);
            for m in 1..=n {
                let mut d = DiffOp::zero(hat);
                d.add_term(vec![0, 0], random_base_function(&mut rng, hat, 2, 1));
                d.add_term(vec![1, 0], random_base_function(&mut rng, hat, 2, 1));
                phi.set_order(m, d);
            }
            let lhs = jet_scalar(&phi.apply(&a), n)?;
            let rhs = jet_operator(&phi, n)?.apply(&jet_scalar(&a, n)?);
            opcompat.check(lhs == rhs, || format!("operator {i}"));
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        valid.check(false, || format!("pipeline error: {e}"));
    }
    vec![valid.done(), compat.done(), assoc.done(), hom.done(), opcompat.done()]
}

/// Formal isotopies for random exact perturbations: the solved family
/// pulls Ω₁ back to Ω₂, starts at the identity, and its pullback is a ring
/// map commuting with the exterior derivative.
pub fn moser_suite(seed: u64, perturbations: usize) -> Vec<CheckLine> {
    let mut rng = seeded_rng(seed);
    rng.set_stream(4);
    let mut solves = Tally::new("moser/pullback-matches");
    let mut start = Tally::new("moser/starts-at-identity");
    let mut ring = Tally::new("moser/pullback-ring-map");
    let mut natural = Tally::new("moser/d-naturality");

    let n_t = 3u32;
    let chart = Chart::torus(2, n_t);
    for i in 0..perturbations {
        let mut omega1 = darboux(chart);
        let f01 = omega1.get(0, 1).add(&random_t_multiple(&mut rng, chart, 2, 1));
        omega1.set(0, 1, f01.clone());
        omega1.set(1, 0, f01.neg());
        let nu = OneForm::from_components(
            chart,
            vec![
                random_t_multiple(&mut rng, chart, 2, 2),
                random_t_multiple(&mut rng, chart, 2, 2),
            ],
        );
        let omega2 = omega1.add(&nu.exterior_d());
        match solve_moser(&omega1, &omega2, n_t) {
            Ok(family) => {
                solves.check(family.pullback_form(&omega1) == omega2, || {
                    format!("perturbation {i}")
                });
                let rho = match family.rho_jet(1) {
                    Ok(rho) => rho.order(0) == &DiffOp::identity(chart.with_t_cap(0)),
                    Err(_) => false,
                };
                start.check(rho, || format!("perturbation {i}"));

                let f = random_base_function(&mut rng, chart, 2, 2);
                let g = random_base_function(&mut rng, chart, 2, 2);
                let pf = family.pullback_function(&f);
                let pg = family.pullback_function(&g);
                let unit = family.pullback_function(&BaseFunction::one(chart));
                ring.check(
                    family.pullback_function(&f.mul(&g)) == pf.mul(&pg)
                        && unit == BaseFunction::one(chart),
                    || format!("perturbation {i}"),
                );

                let df = OneForm::from_components(chart, vec![f.dx(0), f.dx(1)]);
                let dpf = OneForm::from_components(chart, vec![pf.dx(0), pf.dx(1)]);
                natural.check(family.pullback_oneform(&df) == dpf, || {
                    format!("perturbation {i}")
                });
            }
            Err(e) => solves.check(false, || format!("perturbation {i}: {e}")),
        }
    }
    vec![solves.done(), start.done(), ring.done(), natural.done()]
}

/// Numeric realization sanity: exact plateau values, exact jets at zero,
/// vanishing beyond the support, and the per-term certificates.
pub fn borel_suite() -> Vec<CheckLine> {
    let mut plateau = Tally::new("borel/plateau-identity");
    let mut jets = Tally::new("borel/jet-property");
    let mut support = Tally::new("borel/support");
    let mut certs = Tally::new("borel/certificates");

    let chart = Chart::torus(2, 0);
    let two_form = |c: Rat, k: Vec<i32>| {
        let mut q = QForm::zero(chart, 2);
        q.add_comp(vec![0, 1], BaseFunction::term(chart, 0, XBasis::Cos(k), c));
        q
    };
    let beta = two_form(rat(5, 7), vec![1, 0]);
    let two_beta = two_form(rat(10, 7), vec![1, 0]);
    let outcome = (|| -> crate::error::Result<()> {
        let seq = FormSequence::new(vec![beta, two_beta])?;
        let r = choose_lambda(&seq, &BorelConfig::default())?;
        let radius = r.plateau_radius();
        for i in 1..=4 {
            let t = radius * i as f64 / 4.0;
            let x = [0.9f64, 0.3];
            let got = r.eval(&x, t)[&vec![0, 1]];
            let expected = (1.0 + 2.0 * t) * (5.0 / 7.0) * x[0].cos();
            let rel = (got - expected).abs() / expected.abs().max(1e-300);
            plateau.check(rel <= 1e-12, || format!("relative error {rel} at t = {t}"));
        }
        for k in 0..2u32 {
            let got = r.eval_derivative(&[0.9, 0.3], 0.0, &[0, 0], k);
            let want = r.sequence().form(k as usize).eval_f64(&[0.9, 0.3], 0.0);
            jets.check(
                want.iter().all(|(idx, v)| got[idx] == *v),
                || format!("order {k}"),
            );
        }
        support.check(
            bump(1.0) == 0.0 && r.eval(&[0.0, 0.0], r.support_radius() * 1.01)[&vec![0, 1]] == 0.0,
            || "values past the support".into(),
        );
        let seq3 = FormSequence::new(vec![
            two_form(rat_int(1), vec![1, 0]),
            two_form(rat_int(2), vec![0, 1]),
            two_form(rat(-3, 2), vec![1, 1]),
        ])?;
        let r3 = choose_lambda(&seq3, &BorelConfig::default())?;
        for n in 1..3u32 {
            let sup = r3.certificate_sup(n, 9, 33);
            certs.check(sup <= 0.5f64.powi(n as i32), || {
                format!("term {n}: sup {sup}")
            });
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        plateau.check(false, || format!("pipeline error: {e}"));
    }
    vec![plateau.done(), jets.done(), support.done(), certs.done()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_default_suite_passes_and_replays_byte_identically() {
        let first = run_selftest(7);
        assert!(first.all_passed(), "\n{}", first.render());
        let second = run_selftest(7);
        assert_eq!(first.render(), second.render());
        assert!(first.render().contains("result: PASS"));
    }

    #[test]
    fn different_seeds_still_pass() {
        let report = run_selftest(20260816);
        assert!(report.all_passed(), "\n{}", report.render());
    }

    #[test]
    fn failures_are_reported_not_panicked() {
        let mut tally = Tally::new("demo/failing");
        for i in 0..5 {
            tally.check(i % 2 == 0, || format!("instance {i}"));
        }
        let line = tally.done();
        assert_eq!(line.checks, 5);
        assert_eq!(line.failed, 2);
        let report = SelftestReport { seed: 0, lines: vec![line] };
        assert!(!report.all_passed());
        let text = report.render();
        assert!(text.contains("[FAIL] demo/failing: 5 checks, 2 failed"));
        assert!(text.contains("instance 1"));
        assert!(text.contains("result: FAIL"));
    }
}
