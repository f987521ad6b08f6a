//! Interchange format for scenario documents and emitted tables.
//!
//! Scenarios are JSON with a small, strict schema: unknown fields are
//! rejected, all rationals are strings `"p"` or `"p/q"`, and functions are
//! sparse term lists with basis labels
//!
//! - `"1"` — the constant function,
//! - `"cos:2,0"` / `"sin:1,-1"` — waves `cos(2x¹)`, `sin(x¹ − x²)` on
//!   torus charts,
//! - `"mono:2,1"` — the monomial `(x¹)²x²` on affine charts,
//!
//! each term optionally multiplied by a power of the leaf parameter via its
//! `"t"` field.  The same labels are used in emitted tables, so every
//! document the tool writes can be read back.
//!
//! Parsing maps onto the exact kernel types and returns
//! [`KernelError::Schema`] for anything malformed (the CLI's exit code 2);
//! mathematically invalid but well-formed data (a non-closed form, say) is
//! left for the kernel's own precondition checks (exit code 3).

use crate::base::{BaseFunction, Chart, ChartKind, XBasis};
use crate::error::{KernelError, Result};
use crate::fedosov::FoliatedConnection;
use crate::form::{FormMatrix, OneForm, QForm};
use crate::ops::{DiffOp, OpJet};
use crate::rat::{fmt_rat, parse_rat};
use crate::table::{BiDiffOp, StarTable};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn schema(msg: impl Into<String>) -> KernelError {
    KernelError::Schema(msg.into())
}

/// Chart description: `kind` is `"torus"` or `"affine"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub kind: String,
    pub dim: usize,
    #[serde(default)]
    pub t_cap: u32,
}

impl ChartSpec {
    pub fn to_chart(&self) -> Result<Chart> {
        let kind = match self.kind.as_str() {
            "torus" => ChartKind::Torus,
            "affine" => ChartKind::Affine,
            other => return Err(schema(format!("unknown chart kind {other:?}"))),
        };
        if self.dim < 1 || self.dim > 16 {
            return Err(schema(format!("chart dimension {} out of range", self.dim)));
        }
        Ok(Chart::new(kind, self.dim, self.t_cap))
    }

    pub fn from_chart(chart: Chart) -> Self {
        ChartSpec {
            kind: match chart.kind {
                ChartKind::Torus => "torus".into(),
                ChartKind::Affine => "affine".into(),
            },
            dim: chart.dim,
            t_cap: chart.t_cap,
        }
    }
}

/// One term `coeff · t^t · basis`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(default)]
    pub t: u32,
    pub basis: String,
    pub coeff: String,
}

/// A function is a list of terms (empty = zero).
pub type FunctionSpec = Vec<TermSpec>;

fn parse_int_list(body: &str, label: &str) -> Result<Vec<i64>> {
    body.split(',')
        .map(|p| {
            p.trim()
                .parse::<i64>()
                .map_err(|_| schema(format!("malformed index list in basis label {label:?}")))
        })
        .collect()
}

/// Parse a basis label against a chart (wave labels need a torus, monomial
/// labels an affine chart; index lists must match the dimension).
pub fn parse_basis(label: &str, chart: Chart) -> Result<XBasis> {
    if label == "1" {
        return Ok(XBasis::One);
    }
    let (head, body) = label
        .split_once(':')
        .ok_or_else(|| schema(format!("unknown basis label {label:?}")))?;
    let ints = parse_int_list(body, label)?;
    if ints.len() != chart.dim {
        return Err(schema(format!(
            "basis label {label:?} has {} indices on a {}-dimensional chart",
            ints.len(),
            chart.dim
        )));
    }
    match head {
        "cos" | "sin" => {
            if chart.kind != ChartKind::Torus {
                return Err(schema(format!(
                    "wave basis {label:?} needs a torus chart"
                )));
            }
            let k: Vec<i32> = ints
                .iter()
                .map(|&v| {
                    i32::try_from(v)
                        .map_err(|_| schema(format!("frequency out of range in {label:?}")))
                })
                .collect::<Result<_>>()?;
            Ok(if head == "cos" { XBasis::Cos(k) } else { XBasis::Sin(k) })
        }
        "mono" => {
            if chart.kind != ChartKind::Affine {
                return Err(schema(format!(
                    "monomial basis {label:?} needs an affine chart"
                )));
            }
            let alpha: Vec<u32> = ints
                .iter()
                .map(|&v| {
                    u32::try_from(v)
                        .map_err(|_| schema(format!("negative exponent in {label:?}")))
                })
                .collect::<Result<_>>()?;
            Ok(XBasis::Mono(alpha))
        }
        _ => Err(schema(format!("unknown basis label {label:?}"))),
    }
}

/// Render a basis element back to its label.
pub fn basis_label(basis: &XBasis) -> String {
    fn join<T: std::fmt::Display>(v: &[T]) -> String {
        v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
    }
    match basis {
        XBasis::One => "1".into(),
        XBasis::Cos(k) => format!("cos:{}", join(k)),
        XBasis::Sin(k) => format!("sin:{}", join(k)),
        XBasis::Mono(a) => format!("mono:{}", join(a)),
    }
}

/// Build an exact function from its term list.
pub fn parse_function(spec: &FunctionSpec, chart: Chart) -> Result<BaseFunction> {
    let mut f = BaseFunction::zero(chart);
    for term in spec {
        if term.t > chart.t_cap {
            return Err(schema(format!(
                "term with t^{} exceeds the chart's t_cap {}",
                term.t, chart.t_cap
            )));
        }
        let basis = parse_basis(&term.basis, chart)?;
        let coeff = parse_rat(&term.coeff)?;
        f = f.add(&BaseFunction::term(chart, term.t, basis, coeff));
    }
    Ok(f)
}

/// Render a function as its canonical term list.
pub fn function_spec(f: &BaseFunction) -> FunctionSpec {
    f.terms()
        .map(|((t, basis), coeff)| TermSpec {
            t: *t,
            basis: basis_label(basis),
            coeff: fmt_rat(coeff),
        })
        .collect()
}

/// Sparse antisymmetric matrix of functions keyed `"i,j"`.  Mirror entries
/// may be omitted (they are filled by antisymmetry); when both are present
/// they must already be antisymmetric, which the kernel re-checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormMatrixSpec {
    pub entries: BTreeMap<String, FunctionSpec>,
}

fn parse_pair(key: &str, dim: usize) -> Result<(usize, usize)> {
    let (i, j) = key
        .split_once(',')
        .ok_or_else(|| schema(format!("matrix key {key:?} is not \"i,j\"")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| schema(format!("matrix key {key:?} is not \"i,j\"")))
    };
    let (i, j) = (parse(i)?, parse(j)?);
    if i >= dim || j >= dim {
        return Err(schema(format!("matrix key {key:?} out of range for dimension {dim}")));
    }
    Ok((i, j))
}

impl FormMatrixSpec {
    pub fn to_form(&self, chart: Chart) -> Result<FormMatrix> {
        let mut m = FormMatrix::zero(chart);
        let mut explicit = std::collections::BTreeSet::new();
        for (key, spec) in &self.entries {
            let (i, j) = parse_pair(key, chart.dim)?;
            if i == j {
                return Err(schema(format!(
                    "diagonal entry {key:?} in an antisymmetric matrix"
                )));
            }
            if !explicit.insert((i, j)) {
                return Err(schema(format!("duplicate matrix entry {key:?}")));
            }
            m.set(i, j, parse_function(spec, chart)?);
        }
        // fill omitted mirror entries by antisymmetry
        for &(i, j) in &explicit {
            if !explicit.contains(&(j, i)) {
                m.set(j, i, m.get(i, j).neg());
            }
        }
        Ok(m)
    }

    pub fn from_form(m: &FormMatrix) -> Self {
        let chart = m.chart();
        let mut entries = BTreeMap::new();
        for i in 0..chart.dim {
            for j in 0..chart.dim {
                let f = m.get(i, j);
                if !f.is_zero() {
                    entries.insert(format!("{i},{j}"), function_spec(f));
                }
            }
        }
        FormMatrixSpec { entries }
    }
}

/// One-form as components keyed by coordinate index `"0"`, `"1"`, …
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneFormSpec {
    pub components: BTreeMap<String, FunctionSpec>,
}

impl OneFormSpec {
    pub fn to_one_form(&self, chart: Chart) -> Result<OneForm> {
        let mut comps = vec![BaseFunction::zero(chart); chart.dim];
        for (key, spec) in &self.components {
            let i: usize = key
                .trim()
                .parse()
                .map_err(|_| schema(format!("component key {key:?} is not an index")))?;
            if i >= chart.dim {
                return Err(schema(format!(
                    "component key {key:?} out of range for dimension {}",
                    chart.dim
                )));
            }
            comps[i] = parse_function(spec, chart)?;
        }
        Ok(OneForm::from_components(chart, comps))
    }
}

/// Exterior form of degree `degree` with components keyed by strictly
/// increasing index lists `"0,1"`, `"0,2"`, …
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QFormSpec {
    pub degree: usize,
    pub components: BTreeMap<String, FunctionSpec>,
}

impl QFormSpec {
    pub fn to_qform(&self, chart: Chart) -> Result<QForm> {
        let mut q = QForm::zero(chart, self.degree);
        for (key, spec) in &self.components {
            let idx: Vec<usize> = key
                .split(',')
                .map(|p| {
                    p.trim().parse::<usize>().map_err(|_| {
                        schema(format!("component key {key:?} is not an index list"))
                    })
                })
                .collect::<Result<_>>()?;
            if idx.len() != self.degree {
                return Err(schema(format!(
                    "component key {key:?} has {} indices on a degree-{} form",
                    idx.len(),
                    self.degree
                )));
            }
            if idx.iter().any(|&i| i >= chart.dim) {
                return Err(schema(format!(
                    "component key {key:?} out of range for dimension {}",
                    chart.dim
                )));
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(schema(format!(
                    "component key {key:?} must be strictly increasing"
                )));
            }
            q.add_comp(idx, parse_function(spec, chart)?);
        }
        Ok(q)
    }
}

/// Christoffel symbols `Γ^k_{ij}` keyed `"k;i,j"`; omitted entries are zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    pub entries: BTreeMap<String, FunctionSpec>,
}

impl ConnectionSpec {
    pub fn to_connection(&self, chart: Chart) -> Result<FoliatedConnection> {
        let mut conn = FoliatedConnection::zero(chart);
        for (key, spec) in &self.entries {
            let (k, pair) = key
                .split_once(';')
                .ok_or_else(|| schema(format!("connection key {key:?} is not \"k;i,j\"")))?;
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| schema(format!("connection key {key:?} is not \"k;i,j\"")))?;
            let (i, j) = parse_pair(pair, chart.dim)?;
            if k >= chart.dim {
                return Err(schema(format!(
                    "connection key {key:?} out of range for dimension {}",
                    chart.dim
                )));
            }
            conn.set(k, i, j, parse_function(spec, chart)?);
        }
        Ok(conn)
    }
}

/// One term `coeff · D^left ⊗ D^right` of a bidifferential cochain.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiTermSpec {
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub coeff: FunctionSpec,
}

/// A star-product table: `cochains[m]` lists the terms of the ℏ-order-`m`
/// cochain.  This is the document the table-emitting commands write, and it
/// parses back into the exact kernel type.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarTableSpec {
    pub chart: ChartSpec,
    pub order_cap: u32,
    pub cochains: Vec<Vec<BiTermSpec>>,
}

impl StarTableSpec {
    pub fn from_table(table: &StarTable) -> Self {
        let chart = table.chart();
        let cochains = (0..=table.cap())
            .map(|m| {
                table
                    .order(m)
                    .terms()
                    .map(|((alpha, beta), c)| BiTermSpec {
                        left: alpha.clone(),
                        right: beta.clone(),
                        coeff: function_spec(c),
                    })
                    .collect()
            })
            .collect();
        StarTableSpec {
            chart: ChartSpec::from_chart(chart),
            order_cap: table.cap(),
            cochains,
        }
    }

    pub fn to_table(&self) -> Result<StarTable> {
        let chart = self.chart.to_chart()?;
        if self.cochains.len() != self.order_cap as usize + 1 {
            return Err(schema(format!(
                "table with order cap {} must list {} cochains, found {}",
                self.order_cap,
                self.order_cap + 1,
                self.cochains.len()
            )));
        }
        let mut table = StarTable::zero(chart, self.order_cap);
        for (m, terms) in self.cochains.iter().enumerate() {
            let mut op = BiDiffOp::zero(chart);
            for term in terms {
                if term.left.len() != chart.dim || term.right.len() != chart.dim {
                    return Err(schema(format!(
                        "cochain term indices must have {} entries",
                        chart.dim
                    )));
                }
                op.add_term(
                    term.left.clone(),
                    term.right.clone(),
                    parse_function(&term.coeff, chart)?,
                );
            }
            table.set_order(m as u32, op);
        }
        Ok(table)
    }
}

/// One term `coeff · D^index` of a differential operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpTermSpec {
    pub index: Vec<u32>,
    pub coeff: FunctionSpec,
}

/// An ℏ-graded differential operator (an equivalence transform):
/// `orders[m]` lists the terms of the ℏ-order-`m` part.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpJetSpec {
    pub chart: ChartSpec,
    pub order_cap: u32,
    pub orders: Vec<Vec<OpTermSpec>>,
}

impl OpJetSpec {
    pub fn from_op_jet(jet: &OpJet) -> Self {
        let orders = (0..=jet.cap())
            .map(|m| {
                jet.order(m)
                    .terms()
                    .map(|(alpha, c)| OpTermSpec {
                        index: alpha.clone(),
                        coeff: function_spec(c),
                    })
                    .collect()
            })
            .collect();
        OpJetSpec {
            chart: ChartSpec::from_chart(jet.chart()),
            order_cap: jet.cap(),
            orders,
        }
    }

    pub fn to_op_jet(&self) -> Result<OpJet> {
        let chart = self.chart.to_chart()?;
        if self.orders.len() != self.order_cap as usize + 1 {
            return Err(schema(format!(
                "operator with order cap {} must list {} parts, found {}",
                self.order_cap,
                self.order_cap + 1,
                self.orders.len()
            )));
        }
        let mut jet = OpJet::zero(chart, self.order_cap);
        for (m, terms) in self.orders.iter().enumerate() {
            let mut op = DiffOp::zero(chart);
            for term in terms {
                if term.index.len() != chart.dim {
                    return Err(schema(format!(
                        "operator term index must have {} entries",
                        chart.dim
                    )));
                }
                op.add_term(term.index.clone(), parse_function(&term.coeff, chart)?);
            }
            jet.set_order(m as u32, op);
        }
        Ok(jet)
    }
}

/// Data for the numeric realization commands.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BorelSpec {
    /// Sequence `α₀, …, α_N` to realize.
    pub forms: Vec<QFormSpec>,
    /// Optional second sequence and the primitive linking them, for the
    /// shared-scale triple realization.
    #[serde(default)]
    pub forms2: Option<Vec<QFormSpec>>,
    #[serde(default)]
    pub primitive: Option<Vec<QFormSpec>>,
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub safety: Option<f64>,
}

/// Options for the equivalence search.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    pub order_bound: u32,
    pub basis_bound: u32,
}

/// A scenario document: the chart plus whatever data the invoked command
/// needs.  Validation of field presence is per command; this type only
/// guarantees the document is well-formed.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub chart: ChartSpec,
    /// Target ℏ-order `N` (also the induced-product order `n`).
    #[serde(default)]
    pub order: Option<u32>,
    /// Target t-order for isotopy commands.
    #[serde(default)]
    pub t_order: Option<u32>,
    /// A single (possibly t-dependent) symplectic form.
    #[serde(default)]
    pub omega: Option<FormMatrixSpec>,
    /// Second symplectic family, for isotopy commands.
    #[serde(default)]
    pub omega2: Option<FormMatrixSpec>,
    /// Closed formal series `ω⁰ + ℏω¹ + …` as a list of forms.
    #[serde(default)]
    pub class: Option<Vec<FormMatrixSpec>>,
    /// Second series, for comparisons.
    #[serde(default)]
    pub class2: Option<Vec<FormMatrixSpec>>,
    /// Starting connection for the flatness recursion (defaults to zero).
    #[serde(default)]
    pub connection: Option<ConnectionSpec>,
    #[serde(default)]
    pub borel: Option<BorelSpec>,
    #[serde(default)]
    pub search: Option<SearchSpec>,
}

/// Parse a scenario document, mapping JSON errors to schema violations.
pub fn parse_scenario(text: &str) -> Result<ScenarioDoc> {
    serde_json::from_str(text).map_err(|e| schema(format!("scenario document: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat_int;

    fn torus(t_cap: u32) -> Chart {
        Chart::torus(2, t_cap)
    }

    #[test]
    fn functions_round_trip_through_their_labels() {
        let chart = torus(2);
        let f = BaseFunction::cos_wave(chart, vec![2, 0])
            .scale(&crate::rat::rat(3, 4))
            .add(&BaseFunction::sin_wave(chart, vec![1, -1]).t_mul(2))
            .add(&BaseFunction::constant(chart, rat_int(-5)));
        let spec = function_spec(&f);
        let back = parse_function(&spec, chart).unwrap();
        assert_eq!(back, f);

        let affine = Chart::affine(2, 0);
        let g = BaseFunction::monomial(affine, vec![2, 1]).scale(&rat_int(7));
        assert_eq!(parse_function(&function_spec(&g), affine).unwrap(), g);
    }

    #[test]
    fn malformed_labels_are_schema_errors() {
        let chart = torus(0);
        for label in ["cosh:1,0", "cos", "cos:1", "cos:1,0,0", "mono:1,0", ""] {
            let err = parse_basis(label, chart).unwrap_err();
            assert!(matches!(err, KernelError::Schema(_)), "label {label:?}");
        }
        // wave coefficients must parse as integers
        assert!(parse_basis("cos:x,0", chart).is_err());
        // monomials require an affine chart and vice versa
        assert!(parse_basis("mono:1,1", chart).is_err());
        assert!(parse_basis("sin:1,0", Chart::affine(2, 0)).is_err());
        // t-power beyond the cap is rejected, not silently dropped
        let spec = vec![TermSpec { t: 1, basis: "1".into(), coeff: "1".into() }];
        assert!(matches!(
            parse_function(&spec, chart).unwrap_err(),
            KernelError::Schema(_)
        ));
    }

    #[test]
    fn form_matrices_fill_mirror_entries() {
        let chart = torus(1);
        let spec = FormMatrixSpec {
            entries: BTreeMap::from([(
                "0,1".to_string(),
                vec![
                    TermSpec { t: 0, basis: "1".into(), coeff: "1".into() },
                    TermSpec { t: 1, basis: "cos:1,0".into(), coeff: "1/2".into() },
                ],
            )]),
        };
        let m = spec.to_form(chart).unwrap();
        assert!(m.is_antisymmetric());
        assert_eq!(*m.get(1, 0), m.get(0, 1).neg());
        let round = FormMatrixSpec::from_form(&m).to_form(chart).unwrap();
        assert_eq!(round, m);

        assert!(matches!(
            FormMatrixSpec {
                entries: BTreeMap::from([("0,0".to_string(), vec![])])
            }
            .to_form(chart)
            .unwrap_err(),
            KernelError::Schema(_)
        ));
        assert!(matches!(
            FormMatrixSpec {
                entries: BTreeMap::from([("0,7".to_string(), vec![])])
            }
            .to_form(chart)
            .unwrap_err(),
            KernelError::Schema(_)
        ));
    }

    #[test]
    fn scenario_documents_parse_strictly() {
        let text = r#"{
            "chart": { "kind": "torus", "dim": 2, "t_cap": 2 },
            "order": 2,
            "omega": { "entries": { "0,1": [
                { "basis": "1", "coeff": "1" },
                { "t": 1, "basis": "cos:1,0", "coeff": "1" }
            ] } }
        }"#;
        let doc = parse_scenario(text).unwrap();
        let chart = doc.chart.to_chart().unwrap();
        assert_eq!(chart, torus(2));
        let omega = doc.omega.unwrap().to_form(chart).unwrap();
        assert!(omega.is_antisymmetric());
        assert_eq!(doc.order, Some(2));

        // unknown fields and malformed rationals are schema errors
        assert!(matches!(
            parse_scenario(r#"{ "chart": { "kind": "torus", "dim": 2 }, "bogus": 1 }"#)
                .unwrap_err(),
            KernelError::Schema(_)
        ));
        let bad_rat = r#"{
            "chart": { "kind": "torus", "dim": 2 },
            "omega": { "entries": { "0,1": [ { "basis": "1", "coeff": "one" } ] } }
        }"#;
        let doc = parse_scenario(bad_rat).unwrap();
        let chart = doc.chart.to_chart().unwrap();
        assert!(matches!(
            doc.omega.unwrap().to_form(chart).unwrap_err(),
            KernelError::Schema(_)
        ));
    }

    #[test]
    fn star_tables_round_trip_through_their_documents() {
        let chart = torus(0);
        let lam = FormMatrix::from_rat_entries(
            chart,
            &[rat_int(0), rat_int(1), rat_int(-1), rat_int(0)],
        );
        let table = crate::table::StarTable::moyal(&lam, 3);
        let doc = StarTableSpec::from_table(&table);
        let json = serde_json::to_string(&doc).unwrap();
        let parsed: StarTableSpec = serde_json::from_str(&json).unwrap();
        let back = parsed.to_table().unwrap();
        assert_eq!(back, table);
        back.validate().unwrap();

        // mismatched cochain count is rejected
        let mut bad = StarTableSpec::from_table(&table);
        bad.cochains.pop();
        assert!(matches!(bad.to_table().unwrap_err(), KernelError::Schema(_)));
    }

    #[test]
    fn operator_jets_round_trip_through_their_documents() {
        let chart = torus(0);
        let mut jet = OpJet::identity(chart, 2);
        let mut d = DiffOp::zero(chart);
        d.add_term(vec![1, 0], BaseFunction::sin_wave(chart, vec![1, 0]));
        jet.set_order(1, d);
        let doc = OpJetSpec::from_op_jet(&jet);
        let back = doc.to_op_jet().unwrap();
        assert_eq!(back, jet);
    }

    #[test]
    fn qforms_and_connections_parse() {
        let chart = torus(0);
        let q = QFormSpec {
            degree: 2,
            components: BTreeMap::from([(
                "0,1".to_string(),
                vec![TermSpec { t: 0, basis: "cos:1,0".into(), coeff: "5/7".into() }],
            )]),
        };
        let form = q.to_qform(chart).unwrap();
        assert_eq!(form.degree(), 2);
        assert!(!form.is_zero());
        assert!(matches!(
            QFormSpec { degree: 2, components: BTreeMap::from([("1,0".to_string(), vec![])]) }
                .to_qform(chart)
                .unwrap_err(),
            KernelError::Schema(_)
        ));

        let conn = ConnectionSpec {
            entries: BTreeMap::from([(
                "0;0,1".to_string(),
                vec![TermSpec { t: 0, basis: "sin:1,0".into(), coeff: "1".into() }],
            )]),
        };
        let c = conn.to_connection(chart).unwrap();
        assert!(!c.is_zero());
        assert_eq!(*c.get(0, 0, 1), BaseFunction::sin_wave(chart, vec![1, 0]));
    }
}
