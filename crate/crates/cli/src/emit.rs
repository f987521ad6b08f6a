//! Output renderers: JSON documents that parse back into kernel types,
//! human-readable plaintext, and LaTeX for cochain tables.
//!
//! Every table goes through [`revalidate`] before it is rendered, so a
//! document is only ever written for a table that still satisfies its
//! defining identities.

use starjet::base::{BaseFunction, XBasis};
use starjet::error::Result;
use starjet::form::FormMatrix;
use starjet::ops::OpJet;
use starjet::rat::{fmt_rat, rat_int, Rat};
use starjet::scenario::{OpJetSpec, StarTableSpec};
use starjet::table::{separating_family, BiDiffOp, StarTable};
use std::fmt::Write as _;

/// Check the emitted-table invariants: structural validity, the unit laws,
/// and an associativity spot check on the chart's separating family.
pub fn revalidate(table: &StarTable) -> Result<()> {
    table.validate()?;
    let family = separating_family(table.chart(), 2);
    table.check_unital(&family)?;
    table.check_associative(&family)?;
    Ok(())
}

/// `2x1 - x2` (plaintext) or `2x^{1} - x^{2}` (LaTeX) from a frequency
/// vector.
fn wave_body(k: &[i32], latex: bool) -> String {
    let mut out = String::new();
    for (i, &c) in k.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let var = if latex {
            format!("x^{{{}}}", i + 1)
        } else {
            format!("x{}", i + 1)
        };
        let mag = c.abs();
        let piece = if mag == 1 { var } else { format!("{mag}{var}") };
        if out.is_empty() {
            if c < 0 {
                out.push('-');
            }
        } else {
            out.push_str(if c < 0 { " - " } else { " + " });
        }
        out.push_str(&piece);
    }
    out
}

fn basis_pretty(basis: &XBasis, latex: bool) -> Option<String> {
    match basis {
        XBasis::One => None,
        XBasis::Cos(k) => Some(if latex {
            format!("\\cos({})", wave_body(k, true))
        } else {
            format!("cos({})", wave_body(k, false))
        }),
        XBasis::Sin(k) => Some(if latex {
            format!("\\sin({})", wave_body(k, true))
        } else {
            format!("sin({})", wave_body(k, false))
        }),
        XBasis::Mono(a) => {
            let mut out = String::new();
            for (i, &e) in a.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !out.is_empty() {
                    out.push(' ');
                }
                let var = if latex {
                    format!("x^{{{}}}", i + 1)
                } else {
                    format!("x{}", i + 1)
                };
                if e == 1 {
                    out.push_str(&var);
                } else if latex {
                    let _ = write!(out, "({var})^{{{e}}}");
                } else {
                    let _ = write!(out, "{var}^{e}");
                }
            }
            Some(out)
        }
    }
}

fn rat_latex(r: &Rat) -> String {
    let s = fmt_rat(r);
    match s.split_once('/') {
        None => s,
        Some((p, q)) => {
            let (sign, mag) = match p.strip_prefix('-') {
                Some(stripped) => ("-", stripped),
                None => ("", p),
            };
            format!("{sign}\\tfrac{{{mag}}}{{{q}}}")
        }
    }
}

/// One term of a function as factor strings, e.g. `["(-1/2)", "t^2",
/// "cos(x1)"]`; the constant `1` collapses factors so `1` alone renders as
/// `"1"`.
fn term_pretty(t: u32, basis: &XBasis, coeff: &Rat, latex: bool) -> String {
    let mut factors: Vec<String> = Vec::new();
    let one = rat_int(1);
    let body = basis_pretty(basis, latex);
    let has_tail = t > 0 || body.is_some();
    if coeff != &one || !has_tail {
        let plain = fmt_rat(coeff);
        factors.push(if latex {
            rat_latex(coeff)
        } else if has_tail && (plain.contains('/') || plain.starts_with('-')) {
            format!("({plain})")
        } else {
            plain
        });
    }
    if t == 1 {
        factors.push("t".into());
    } else if t > 1 {
        factors.push(if latex { format!("t^{{{t}}}") } else { format!("t^{t}") });
    }
    if let Some(b) = body {
        factors.push(b);
    }
    factors.join(" ")
}

/// Plaintext rendering of an exact function.
pub fn function_pretty(f: &BaseFunction) -> String {
    render_function(f, false)
}

/// LaTeX rendering of an exact function.
pub fn function_latex(f: &BaseFunction) -> String {
    render_function(f, true)
}

/// Join summands, folding a leading minus into the separator
/// (`a + -b` becomes `a - b`).
fn join_terms<I: IntoIterator<Item = String>>(terms: I) -> String {
    let mut out = String::new();
    for term in terms {
        if out.is_empty() {
            out.push_str(&term);
        } else if let Some(rest) = term.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(&term);
        }
    }
    out
}

fn render_function(f: &BaseFunction, latex: bool) -> String {
    if f.is_zero() {
        return "0".into();
    }
    join_terms(
        f.terms()
            .map(|((t, basis), coeff)| term_pretty(*t, basis, coeff, latex)),
    )
}

fn multi_label(alpha: &[u32]) -> String {
    alpha
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Plaintext rendering of a single bidifferential operator.
pub fn bidiff_pretty(op: &BiDiffOp) -> String {
    let mut out = String::new();
    bidiff_lines(op, &mut out);
    out
}

fn bidiff_lines(op: &BiDiffOp, out: &mut String) {
    if op.is_zero() {
        let _ = writeln!(out, "  0");
        return;
    }
    for ((alpha, beta), c) in op.terms() {
        let _ = writeln!(
            out,
            "  D^({}) (x) D^({}): {}",
            multi_label(alpha),
            multi_label(beta),
            function_pretty(c)
        );
    }
}

/// Plaintext rendering of a star-product table.
pub fn table_pretty(table: &StarTable) -> String {
    let chart = table.chart();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "star table: {:?} chart, dim {}, t_cap {}, hbar cap {}",
        chart.kind, chart.dim, chart.t_cap, table.cap()
    );
    for m in 0..=table.cap() {
        let _ = writeln!(out, "hbar^{m}:");
        bidiff_lines(table.order(m), &mut out);
    }
    out
}

/// LaTeX rendering of the cochains `C_m(f,g)`.
pub fn table_latex(table: &StarTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\begin{{align*}}");
    for m in 0..=table.cap() {
        let op = table.order(m);
        let mut terms: Vec<String> = Vec::new();
        for ((alpha, beta), c) in op.terms() {
            let coeff = function_latex(c);
            let wrapped = if c.terms().count() > 1 {
                format!("\\bigl({coeff}\\bigr)")
            } else {
                coeff
            };
            terms.push(format!(
                "{wrapped} \\, \\partial^{{({})}} f \\, \\partial^{{({})}} g",
                multi_label(alpha),
                multi_label(beta)
            ));
        }
        let rhs = if terms.is_empty() { "0".to_string() } else { join_terms(terms) };
        let sep = if m == table.cap() { "" } else { " \\\\" };
        let _ = writeln!(out, "C_{{{m}}}(f,g) &= {rhs}{sep}");
    }
    let _ = writeln!(out, "\\end{{align*}}");
    out
}

/// Requested output format for documents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum EmitFormat {
    Json,
    Pretty,
    Latex,
}

/// Render a validated table in the requested format.  The JSON form is
/// parsed back and compared before being returned, so emitted documents
/// are guaranteed readable.
pub fn emit_table(table: &StarTable, format: EmitFormat) -> Result<String> {
    revalidate(table)?;
    match format {
        EmitFormat::Pretty => Ok(table_pretty(table)),
        EmitFormat::Latex => Ok(table_latex(table)),
        EmitFormat::Json => {
            let spec = StarTableSpec::from_table(table);
            let text = serde_json::to_string_pretty(&spec)
                .map_err(|e| starjet::error::KernelError::Postcondition(format!(
                    "table serialization failed: {e}"
                )))?;
            let back: StarTableSpec = serde_json::from_str(&text).map_err(|e| {
                starjet::error::KernelError::Postcondition(format!(
                    "emitted table does not parse back: {e}"
                ))
            })?;
            if back.to_table()? != *table {
                return Err(starjet::error::KernelError::Postcondition(
                    "emitted table round-trips to a different table".into(),
                ));
            }
            Ok(text + "\n")
        }
    }
}

/// Plaintext rendering of an ℏ-graded operator.
pub fn op_jet_pretty(jet: &OpJet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "operator jet, hbar cap {}:", jet.cap());
    for m in 0..=jet.cap() {
        let op = jet.order(m);
        let _ = writeln!(out, "hbar^{m}:");
        if op.is_zero() {
            let _ = writeln!(out, "  0");
            continue;
        }
        for (alpha, c) in op.terms() {
            let _ = writeln!(out, "  D^({}): {}", multi_label(alpha), function_pretty(c));
        }
    }
    out
}

/// JSON rendering of an ℏ-graded operator.
pub fn op_jet_json(jet: &OpJet) -> Result<String> {
    serde_json::to_string_pretty(&OpJetSpec::from_op_jet(jet))
        .map(|s| s + "\n")
        .map_err(|e| {
            starjet::error::KernelError::Postcondition(format!(
                "operator serialization failed: {e}"
            ))
        })
}

/// Plaintext rendering of a matrix of functions.
pub fn form_matrix_pretty(m: &FormMatrix) -> String {
    let chart = m.chart();
    let mut out = String::new();
    for i in 0..chart.dim {
        for j in 0..chart.dim {
            let f = m.get(i, j);
            if !f.is_zero() {
                let _ = writeln!(out, "  [{i},{j}] {}", function_pretty(f));
            }
        }
    }
    if out.is_empty() {
        out.push_str("  0\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use starjet::base::Chart;
    use starjet::rat::rat;

    #[test]
    fn functions_render_readably() {
        let chart = Chart::torus(2, 2);
        let f = BaseFunction::cos_wave(chart, vec![2, -1])
            .scale(&rat(-1, 2))
            .add(&BaseFunction::sin_wave(chart, vec![1, 0]).t_mul(2))
            .add(&BaseFunction::constant(chart, rat_int(3)));
        let text = function_pretty(&f);
        assert!(text.contains("(-1/2) cos(2x1 - x2)"), "{text}");
        assert!(text.contains("t^2 sin(x1)"), "{text}");
        assert!(text.contains('3'), "{text}");
        assert_eq!(function_pretty(&BaseFunction::zero(chart)), "0");
        assert_eq!(function_pretty(&BaseFunction::one(chart)), "1");

        let latex = function_latex(&f);
        assert!(latex.contains("\\cos(2x^{1} - x^{2})"), "{latex}");
        assert!(latex.contains("3 - \\tfrac{1}{2} \\cos"), "{latex}");

        let affine = Chart::affine(2, 0);
        let g = BaseFunction::monomial(affine, vec![2, 1]);
        assert_eq!(function_pretty(&g), "x1^2 x2");
    }

    #[test]
    fn tables_emit_and_round_trip() {
        let chart = Chart::torus(2, 0);
        let lam = FormMatrix::from_rat_entries(
            chart,
            &[rat_int(0), rat_int(1), rat_int(-1), rat_int(0)],
        );
        let table = StarTable::moyal(&lam, 2);
        let json = emit_table(&table, EmitFormat::Json).unwrap();
        let spec: StarTableSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec.to_table().unwrap(), table);

        let pretty = emit_table(&table, EmitFormat::Pretty).unwrap();
        assert!(pretty.contains("hbar^1:"), "{pretty}");
        assert!(pretty.contains("D^(1,0) (x) D^(0,1): 1/2"), "{pretty}");

        let latex = emit_table(&table, EmitFormat::Latex).unwrap();
        assert!(latex.contains("C_{1}(f,g) &="), "{latex}");
        assert!(latex.contains("\\partial^{(1,0)} f"), "{latex}");
    }
}
