//! `starjet`: scenario-driven command-line front end for the star-product
//! kernel.
//!
//! Each subcommand reads a JSON scenario document (schema in
//! `starjet::scenario`), runs one kernel pipeline, and writes its artifact
//! to stdout.  Outputs are deterministic: the same document and flags
//! produce byte-identical bytes.
//!
//! Exit codes: `0` success, `2` schema violation (unreadable or malformed
//! document, missing field, bad flag combination), `3` failed mathematical
//! precondition (the failing identity is printed), `1` anything else —
//! failed postcondition, violated numeric certificate, failed selftest.

mod emit;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use starjet::base::Chart;
use starjet::borel::{
    choose_lambda, realize_triple, BorelConfig, BorelRealization, FormSequence,
};
use starjet::error::{KernelError, Result};
use starjet::fedosov::{ChartPoisson, FedosovData, FoliatedConnection};
use starjet::form::FormMatrix;
use starjet::jets::{
    classes_equal, induce_star, star_for_class, ClassComparison, ClosedFormSeries,
};
use starjet::moser::{equivalence_search, solve_moser, EquivalenceStatus};
use starjet::ops::multi_zero;
use starjet::rat::{fmt_rat, rat, rat_int};
use starjet::scenario::{parse_scenario, FormMatrixSpec, QFormSpec, ScenarioDoc};
use starjet::selftest::run_selftest;
use starjet::table::{BiDiffOp, StarTable};

use emit::EmitFormat;

/// Absolute/relative tolerance for the floating-point spot checks
/// (plateau identity and the exterior-derivative relation on sample grids).
const FLOAT_TOL: f64 = 1e-12;
/// Verification-grid density for the derivative certificates: points per
/// torus axis and sample count across each bump's support.
const CERT_X_SAMPLES: usize = 9;
const CERT_T_SAMPLES: usize = 41;

#[derive(Parser)]
#[command(
    name = "starjet",
    version,
    about = "Exact star products on regular Poisson manifolds: Fedosov \
             recursion, induced products, class comparison, Moser isotopies, \
             and certified asymptotic realizations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Constant-coefficient star table (the flat oracle): invert `omega`
    /// and expand the closed-form contraction series
    Moyal(TableArgs),
    /// Run the Fedosov flatness recursion on the cylinder chart and emit
    /// the extracted cochain table
    BuildStar(TableArgs),
    /// Fedosov pipeline followed by the order-n jet: emit the induced star
    /// product on the base chart
    Induce(TableArgs),
    /// Star product attached to a closed 2-form series (quantize the
    /// polynomial representative, then induce)
    ClassStar(TableArgs),
    /// Compare the coefficient classes of `class` and `class2`; report
    /// witness primitives, or the first differing order with the
    /// order-(k+1) cochain witness
    Compare(CompareArgs),
    /// Solve the formal Moser problem between `omega` and `omega2` and
    /// report the isotopy
    Moser(MoserArgs),
    /// Search for an equivalence transform between the star products of
    /// `class` and `class2`
    EquivSearch(SearchArgs),
    /// Certified asymptotic realization of a form sequence (or of a triple
    /// sharing scales, when `forms2` and `primitive` are present)
    Borel(BorelArgs),
    /// Run the randomized invariant suites and print the report
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct TableArgs {
    /// Path to the scenario JSON document
    #[arg(long)]
    scenario: PathBuf,
    /// Target hbar-order N (overrides the scenario's `order`)
    #[arg(long)]
    order: Option<u32>,
    /// Output format for the emitted table
    #[arg(long, value_enum, default_value_t = EmitFormat::Pretty)]
    emit: EmitFormat,
}

#[derive(Args)]
struct CompareArgs {
    /// Path to the scenario JSON document
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args)]
struct MoserArgs {
    /// Path to the scenario JSON document
    #[arg(long)]
    scenario: PathBuf,
    /// Target t-order (overrides the scenario's `t_order`)
    #[arg(long)]
    order: Option<u32>,
}

#[derive(Args)]
struct SearchArgs {
    /// Path to the scenario JSON document
    #[arg(long)]
    scenario: PathBuf,
    /// Target hbar-order N (overrides the scenario's `order`)
    #[arg(long)]
    order: Option<u32>,
    /// Output format for the transform when the search verifies
    #[arg(long, value_enum, default_value_t = EmitFormat::Pretty)]
    emit: EmitFormat,
}

#[derive(Args)]
struct BorelArgs {
    /// Path to the scenario JSON document
    #[arg(long)]
    scenario: PathBuf,
    /// Sample count for the bump-derivative sup grids (overrides the
    /// scenario's `borel.grid`)
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Seed for the randomized suites
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok((output, code)) => {
            print!("{output}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                KernelError::Schema(_) => ExitCode::from(2),
                KernelError::Precondition(_) => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: &Command) -> Result<(String, u8)> {
    match command {
        Command::Moyal(a) => Ok((cmd_moyal(a)?, 0)),
        Command::BuildStar(a) => Ok((cmd_build_star(a)?, 0)),
        Command::Induce(a) => Ok((cmd_induce(a)?, 0)),
        Command::ClassStar(a) => Ok((cmd_class_star(a)?, 0)),
        Command::Compare(a) => Ok((cmd_compare(a)?, 0)),
        Command::Moser(a) => Ok((cmd_moser(a)?, 0)),
        Command::EquivSearch(a) => Ok((cmd_equiv_search(a)?, 0)),
        Command::Borel(a) => Ok((cmd_borel(a)?, 0)),
        Command::Selftest(a) => {
            let report = run_selftest(a.seed);
            let code = if report.all_passed() { 0 } else { 1 };
            Ok((report.render(), code))
        }
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioDoc> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        KernelError::Schema(format!("cannot read scenario {}: {e}", path.display()))
    })?;
    parse_scenario(&text)
}

fn require<T>(value: Option<T>, field: &str) -> Result<T> {
    value.ok_or_else(|| {
        KernelError::Schema(format!("scenario is missing the `{field}` field"))
    })
}

fn hbar_order(doc: &ScenarioDoc, flag: Option<u32>) -> Result<u32> {
    flag.or(doc.order).ok_or_else(|| {
        KernelError::Schema(
            "no target order: pass --order or set `order` in the scenario".into(),
        )
    })
}

fn parse_series(chart: Chart, specs: &[FormMatrixSpec]) -> Result<ClosedFormSeries> {
    let forms = specs
        .iter()
        .map(|s| s.to_form(chart))
        .collect::<Result<Vec<_>>>()?;
    ClosedFormSeries::new(chart, forms)
}

/// The `k`-th coefficient of a series, zero-padded above its stored length.
fn series_form(series: &ClosedFormSeries, k: usize) -> FormMatrix {
    if k < series.order_count() {
        series.form(k).clone()
    } else {
        FormMatrix::zero(series.chart())
    }
}

/// The bivector `m^{ij} ∂_i ⊗ ∂_j` of a matrix, as a bidifferential
/// operator with single first-derivative slots.
fn bivector_op(m: &FormMatrix) -> BiDiffOp {
    let chart = m.chart();
    let mut op = BiDiffOp::zero(chart);
    for i in 0..chart.dim {
        for j in 0..chart.dim {
            let c = m.get(i, j);
            if c.is_zero() {
                continue;
            }
            let mut a = multi_zero(chart.dim);
            a[i] += 1;
            let mut b = multi_zero(chart.dim);
            b[j] += 1;
            op.add_term(a, b, c.clone());
        }
    }
    op
}

fn cmd_moyal(args: &TableArgs) -> Result<String> {
    let doc = load_scenario(&args.scenario)?;
    let chart = doc.chart.to_chart()?;
    let n = hbar_order(&doc, args.order)?;
    let omega = require(doc.omega.as_ref(), "omega")?.to_form(chart)?;
    omega.check_antisymmetric("flat-oracle symplectic matrix")?;
    let constant = FormMatrix::from_rat_entries(chart, &omega.constant_block()?);
    if !omega.sub(&constant).is_zero() {
        return Err(KernelError::Precondition(
            "the flat-oracle table needs a constant symplectic matrix".into(),
        ));
    }
    let lambda = omega.invert()?;
    let table = StarTable::moyal(&lambda, n);
    emit::emit_table(&table, args.emit)
}

/// Shared front half of `build-star` and `induce`: run the flatness
/// recursion on the scenario's cylinder chart and extract the cochains.
fn build_cylinder_table(doc: &ScenarioDoc, order_flag: Option<u32>) -> Result<(StarTable, u32)> {
    let chart = doc.chart.to_chart()?;
    let n = hbar_order(doc, order_flag)?;
    let omega = require(doc.omega.as_ref(), "omega")?.to_form(chart)?;
    let poisson = ChartPoisson::new(chart, n, omega)?;
    let start = match doc.connection.as_ref() {
        Some(c) => c.to_connection(chart)?,
        None => FoliatedConnection::zero(chart),
    };
    let data = FedosovData::build(&poisson, &start)?;
    data.verify_flatness()?;
    Ok((data.cochains()?, n))
}

fn cmd_build_star(args: &TableArgs) -> Result<String> {
    let doc = load_scenario(&args.scenario)?;
    let (table, _) = build_cylinder_table(&doc, args.order)?;
    emit::emit_table(&table, args.emit)
}

fn cmd_induce(args: &TableArgs) -> Result<String> {
    let doc = load_scenario(&args.scenario)?;
    let (table, n) = build_cylinder_table(&doc, args.order)?;
    let induced = induce_star(&table, n)?;
    emit::emit_table(&induced, args.emit)
}

fn cmd_class_star(args: &TableArgs) -> Result<String> {
    let doc = load_scenario(&args.scenario)?;
    let chart = doc.chart.to_chart()?;
    let n = hbar_order(&doc, args.order)?;
    let series = parse_series(chart, require(doc.class.as_deref(), "class")?)?;
    let start = doc
        .connection
        .as_ref()
        .map(|c| c.to_connection(series.ambient_chart(n)))
        .transpose()?;
    let table = star_for_class(&series, start.as_ref(), n)?;
    emit::emit_table(&table, args.emit)
}

/// Nonzero constant Fourier modes of a matrix of functions — on a torus the
/// obstruction to exactness of a closed 2-form.
fn constant_mode_lines(m: &FormMatrix, out: &mut String) {
    let d = m.chart().dim;
    let mut any = false;
    for i in 0..d {
        for j in 0..d {
            let c = m.get(i, j).constant_part();
            if c != rat_int(0) {
                let _ = writeln!(out, "  [{i},{j}] {}", fmt_rat(&c));
                any = true;
            }
        }
    }
    if !any {
        out.push_str("  0\n");
    }
}

fn cmd_compare(args: &CompareArgs) -> Result<String> {
    let doc = load_scenario(&args.scenario)?;
    let chart = doc.chart.to_chart()?;
    let a = parse_series(chart, require(doc.class.as_deref(), "class")?)?;
    let b = parse_series(chart, require(doc.class2.as_deref(), "class2")?)?;
    let mut out = String::new();
    match classes_equal(&a, &b)? {
        ClassComparison::Equal { primitives } => {
            let _ = writeln!(
                out,
                "classes equal through hbar^{}",
                primitives.len().saturating_sub(1)
            );
            for (k, nu) in primitives.iter().enumerate() {
                if nu.is_zero() {
                    continue;
                }
                let _ = writeln!(
                    out,
                    "primitive at hbar^{k} (d nu = omega1_{k} - omega2_{k}):"
                );
                for (j, c) in nu.components().iter().enumerate() {
                    if !c.is_zero() {
                        let _ = writeln!(out, "  dx{}: {}", j + 1, emit::function_pretty(c));
                    }
                }
            }
        }
        ClassComparison::Differ { order: k } => {
            let _ = writeln!(out, "classes differ first at hbar^{k}");
            let alpha = series_form(&b, k as usize).sub(&series_form(&a, k as usize));
            let _ = writeln!(out, "difference alpha = omega2_{k} - omega1_{k}:");
            out.push_str(&emit::form_matrix_pretty(&alpha));
            let _ = writeln!(out, "constant Fourier mode of alpha (the obstruction):");
            constant_mode_lines(&alpha, &mut out);

            let lower_equal = (0..k as usize)
                .all(|j| series_form(&a, j).sub(&series_form(&b, j)).is_zero());
            if k == 0 {
                let _ = writeln!(
                    out,
                    "(no cochain witness: the leading symplectic forms themselves differ)"
                );
            } else if !lower_equal {
                let _ = writeln!(
                    out,
                    "(cochain witness skipped: coefficients below hbar^{k} are \
                     cohomologous but not identical)"
                );
            } else {
                let n = k + 1;
                let c1 = star_for_class(&a, None, n)?;
                let c2 = star_for_class(&b, None, n)?;
                if !c2.agrees_through(&c1, k) {
                    return Err(KernelError::Postcondition(format!(
                        "star products fail to agree through hbar^{k} although the \
                         series coefficients below do"
                    )));
                }
                let _ = writeln!(out, "star products agree through hbar^{k}");
                let actual = c2.order_difference(&c1, n);
                let _ = writeln!(out, "cochain witness at hbar^{n}: C'_{n} - C_{n} =");
                out.push_str(&emit::bidiff_pretty(&actual));
                let lam0 = a.form(0).invert()?;
                let expected =
                    bivector_op(&lam0.mat_mul(&alpha).mat_mul(&lam0).scale(&rat(-1, 2)));
                if actual != expected {
                    return Err(KernelError::Postcondition(
                        "cochain witness does not match the sharp(alpha) bivector \
                         -1/2 Lambda0 alpha Lambda0"
                            .into(),
                    ));
                }
                let _ = writeln!(
                    out,
                    "sharp(alpha) cross-check (-1/2 Lambda0 alpha Lambda0 bivector): \
                     exact match"
                );
            }
        }
    }
    Ok(out)
}

fn cmd_moser(args: &MoserArgs) -> Result<String> {
    let doc = load_scenario(&args.scenario)?;
    let chart = doc.chart.to_chart()?;
    let n_t = args.order.or(doc.t_order).ok_or_else(|| {
        KernelError::Schema(
            "no target t-order: pass --order or set `t_order` in the scenario".into(),
        )
    })?;
    let o1 = require(doc.omega.as_ref(), "omega")?.to_form(chart)?;
    let o2 = require(doc.omega2.as_ref(), "omega2")?.to_form(chart)?;
    let family = solve_moser(&o1, &o2, n_t)?;
    let mut out = String::new();
    let _ = writeln!(out, "moser isotopy solved to t-order {n_t}");
    let _ = writeln!(out, "displacement (phi(x) = x + D(x)):");
    for (i, c) in family.displacement().iter().enumerate() {
        let _ = writeln!(out, "  D{}: {}", i + 1, emit::function_pretty(c));
    }
    // Re-check the defining identity independently of the solver.
    let residual = family
        .pullback_form(&o1.with_t_cap(n_t))
        .sub(&o2.with_t_cap(n_t));
    if !residual.is_zero() {
        return Err(KernelError::Postcondition(
            "pullback of omega along the solved isotopy does not equal omega2".into(),
        ));
    }
    let _ = writeln!(
        out,
        "pullback check P(Omega1) = Omega2 (mod t^{}): exact",
        n_t + 1
    );
    // The hbar-jet of the pullback starts at the identity (verified inside).
    let _rho = family.rho_jet(n_t)?;
    let _ = writeln!(out, "pullback jet rho_0 = identity: ok");
    Ok(out)
}

fn cmd_equiv_search(args: &SearchArgs) -> Result<String> {
    let doc = load_scenario(&args.scenario)?;
    let chart = doc.chart.to_chart()?;
    let n = hbar_order(&doc, args.order)?;
    let a = parse_series(chart, require(doc.class.as_deref(), "class")?)?;
    let b = parse_series(chart, require(doc.class2.as_deref(), "class2")?)?;
    let search = require(doc.search.as_ref(), "search")?;
    let start = doc
        .connection
        .as_ref()
        .map(|c| c.to_connection(a.ambient_chart(n)))
        .transpose()?;
    let star1 = star_for_class(&a, start.as_ref(), n)?;
    let star2 = star_for_class(&b, start.as_ref(), n)?;
    let candidate = equivalence_search(&star1, &star2, n, search.order_bound, search.basis_bound)?;
    let mut out = String::new();
    match candidate.status {
        EquivalenceStatus::Verified => {
            let _ = writeln!(
                out,
                "equivalence verified to hbar-order {n}: T(f *1 g) = T(f) *2 T(g) \
                 on the separating family"
            );
            match args.emit {
                EmitFormat::Json => out.push_str(&emit::op_jet_json(&candidate.transform)?),
                EmitFormat::Pretty => out.push_str(&emit::op_jet_pretty(&candidate.transform)),
                EmitFormat::Latex => {
                    return Err(KernelError::Schema(
                        "latex output is only defined for cochain tables".into(),
                    ))
                }
            }
        }
        EquivalenceStatus::Inconclusive { order } => {
            let _ = writeln!(
                out,
                "equivalence search inconclusive at hbar-order {order} (ansatz bounds: \
                 derivative order <= {}, basis bound {})",
                search.order_bound, search.basis_bound
            );
            let _ = writeln!(out, "note: this is not a proof of inequivalence");
            match classes_equal(&a, &b)? {
                ClassComparison::Differ { order: k } => {
                    let _ = writeln!(
                        out,
                        "class comparison: the characteristic classes differ first at \
                         hbar^{k}"
                    );
                    let alpha =
                        series_form(&b, k as usize).sub(&series_form(&a, k as usize));
                    let _ = writeln!(
                        out,
                        "constant Fourier mode of the difference (the obstruction):"
                    );
                    constant_mode_lines(&alpha, &mut out);
                }
                ClassComparison::Equal { .. } => {
                    let _ = writeln!(
                        out,
                        "class comparison: the classes agree; retry with larger bounds"
                    );
                }
            }
        }
    }
    Ok(out)
}

fn parse_sequence(chart: Chart, specs: &[QFormSpec]) -> Result<FormSequence> {
    let forms = specs
        .iter()
        .map(|s| s.to_qform(chart))
        .collect::<Result<Vec<_>>>()?;
    FormSequence::new(forms)
}

/// Equispaced sample points of the torus, 5 per axis, offset to avoid
/// lattice-symmetric special points.
fn sample_points(dim: usize) -> Vec<Vec<f64>> {
    let step = std::f64::consts::TAU / 5.0;
    let mut pts: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..dim {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                (0..5).map(move |i| {
                    let mut q = p.clone();
                    q.push(0.31 + i as f64 * step);
                    q
                })
            })
            .collect();
    }
    pts
}

/// Report scales, bounds, radii, derivative certificates, and the plateau
/// spot check for one realization.  Certificate or plateau violations are
/// postcondition errors.
fn realization_report(label: &str, r: &BorelRealization, out: &mut String) -> Result<()> {
    let seq = r.sequence();
    let _ = writeln!(
        out,
        "{label}: {} terms, degree-{} forms, dim {}",
        seq.len(),
        seq.degree(),
        seq.chart().dim
    );
    for n in 0..seq.len() {
        let _ = writeln!(
            out,
            "  n={n}: lambda = {}, K = {}, M = {}",
            r.lambda(n),
            r.k_bound(n),
            r.m_bound(n)
        );
    }
    let _ = writeln!(
        out,
        "  plateau radius {} (the sum equals its Taylor polynomial below this |t|)",
        r.plateau_radius()
    );
    let _ = writeln!(
        out,
        "  support radius {} (the sum vanishes beyond this |t|)",
        r.support_radius()
    );
    for n in 1..seq.len() as u32 {
        let sup = r.certificate_sup(n, CERT_X_SAMPLES, CERT_T_SAMPLES);
        let bound = 0.5f64.powi(n as i32);
        if sup > bound {
            return Err(KernelError::Postcondition(format!(
                "derivative certificate violated at n = {n}: sup {sup:e} exceeds 2^-{n}"
            )));
        }
        let _ = writeln!(out, "  certificate n={n}: sup {sup:e} <= 2^-{n}: ok");
    }
    let radius = r.plateau_radius();
    let mut worst = 0.0f64;
    for ti in 1..=3 {
        let t = radius * ti as f64 / 3.0;
        for x in sample_points(seq.chart().dim) {
            let f = r.eval(&x, t);
            let p = r.taylor_eval(&x, t);
            for (idx, v) in &f {
                let rel = (v - p[idx]).abs() / p[idx].abs().max(1.0);
                worst = worst.max(rel);
            }
        }
    }
    if worst > FLOAT_TOL {
        return Err(KernelError::Postcondition(format!(
            "plateau identity violated: relative error {worst:e} exceeds {FLOAT_TOL:e}"
        )));
    }
    let _ = writeln!(
        out,
        "  plateau identity: max relative error {worst:e} (tolerance {FLOAT_TOL:e})"
    );
    Ok(())
}

fn cmd_borel(args: &BorelArgs) -> Result<String> {
    let doc = load_scenario(&args.scenario)?;
    let chart = doc.chart.to_chart()?;
    let spec = require(doc.borel.as_ref(), "borel")?;
    let mut config = BorelConfig::default();
    if let Some(g) = spec.grid {
        config.grid = g;
    }
    if let Some(g) = args.grid {
        config.grid = g;
    }
    if let Some(s) = spec.safety {
        config.safety = s;
    }
    let seq = parse_sequence(chart, &spec.forms)?;
    let mut out = String::new();
    match (&spec.forms2, &spec.primitive) {
        (None, None) => {
            let r = choose_lambda(&seq, &config)?;
            realization_report("realization", &r, &mut out)?;
        }
        (Some(f2), Some(p)) => {
            let seq2 = parse_sequence(chart, f2)?;
            let nu = parse_sequence(chart, p)?;
            let (r1, r2, rn) = realize_triple(&seq, &seq2, &nu, &config)?;
            realization_report("realization 1", &r1, &mut out)?;
            realization_report("realization 2", &r2, &mut out)?;
            realization_report("primitive realization", &rn, &mut out)?;
            // With shared scales the relation f2 - f1 = d(f_nu) holds
            // pointwise; verify it on a sample grid across the support.
            let df = rn.exterior_d()?;
            let support = r1.support_radius();
            let mut worst = 0.0f64;
            for ti in 0..=8 {
                let t = -support + 2.0 * support * ti as f64 / 8.0;
                for x in sample_points(chart.dim) {
                    let f1 = r1.eval(&x, t);
                    let f2v = r2.eval(&x, t);
                    let dv = df.eval(&x, t);
                    let keys: std::collections::BTreeSet<_> =
                        f1.keys().chain(f2v.keys()).chain(dv.keys()).cloned().collect();
                    for idx in &keys {
                        let at = |m: &std::collections::BTreeMap<Vec<usize>, f64>| {
                            m.get(idx).copied().unwrap_or(0.0)
                        };
                        let residual = (at(&f2v) - at(&f1) - at(&dv)).abs();
                        worst = worst.max(residual);
                    }
                }
            }
            if worst > FLOAT_TOL {
                return Err(KernelError::Postcondition(format!(
                    "exterior-derivative relation violated on the grid: residual \
                     {worst:e} exceeds {FLOAT_TOL:e}"
                )));
            }
            let _ = writeln!(
                out,
                "d-relation f2 - f1 = d(f_nu): max grid residual {worst:e} \
                 (tolerance {FLOAT_TOL:e})"
            );
        }
        _ => {
            return Err(KernelError::Schema(
                "borel: `forms2` and `primitive` must be given together".into(),
            ))
        }
    }
    Ok(out)
}
