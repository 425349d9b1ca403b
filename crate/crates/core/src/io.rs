//! Instance and solution files, result tables and the random instance
//! generator.
//!
//! Instance files are JSON:
//!
//! ```text
//! {"periods": T, "facility_count": I,
//!  "users": [{"demands": [d^1 .. d^T], "coverage": [[i ..] x T]}, ..],
//!  "domain": {"constraints": [{"type": "cardinality", ..}, ..]}}
//! ```
//!
//! An optional `"name"` key labels the instance.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::model::{DomainConstraint, DomainSpec, Instance, Solution, Term, UserRecord};
use crate::stats::SolveResult;

/// Demands produced by the generator are multiples of this.
pub const DEMAND_QUANTUM: f64 = 1.0 / 1024.0;

pub const RESULT_COLUMNS: [&str; 14] = [
    "instance",
    "method",
    "features",
    "status",
    "objective",
    "bound",
    "gap_percent",
    "nodes",
    "lazy_cuts",
    "user_cuts",
    "restricted_subproblems",
    "diversified_subproblems",
    "branches",
    "wall_seconds",
];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn invalid(line: Option<usize>, message: impl Into<String>) -> IoError {
    IoError::Invalid {
        line,
        message: message.into(),
    }
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// `printf("%.17g")`: shortest fixed or exponent form with 17 significant
/// digits, trailing zeros removed.
pub fn format_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mant = trim_fraction(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        trim_fraction(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    #[serde(default)]
    name: Option<String>,
    periods: usize,
    facility_count: usize,
    users: Vec<RawUser>,
    domain: DomainSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUser {
    demands: Vec<f64>,
    coverage: Vec<Vec<usize>>,
}

/// 1-based line on which the `index`-th element of the top-level array
/// under `key` starts.
fn locate_element(text: &str, key: &str, index: usize) -> Option<usize> {
    let mut line = 1;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    let mut string_start = 0usize;
    let mut last_key_matches = false;
    let mut array_depth: Option<usize> = None;
    let mut seen = 0usize;
    let mut expecting_element = false;
    for (pos, c) in text.char_indices() {
        if c == '\n' {
            line += 1;
        }
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
                if depth == 1 && array_depth.is_none() {
                    last_key_matches = &text[string_start..pos] == key;
                }
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                string_start = pos + 1;
            }
            '[' | '{' => {
                if expecting_element && Some(depth) == array_depth {
                    if seen == index {
                        return Some(line);
                    }
                    seen += 1;
                    expecting_element = false;
                }
                depth += 1;
                if c == '[' && depth == 2 && last_key_matches && array_depth.is_none() {
                    array_depth = Some(depth);
                    expecting_element = true;
                }
            }
            ']' | '}' => {
                if Some(depth) == array_depth {
                    return None;
                }
                depth = depth.saturating_sub(1);
            }
            ',' if Some(depth) == array_depth => expecting_element = true,
            _ => {}
        }
    }
    None
}

/// Parses and validates an instance file.
pub fn parse_instance(text: &str) -> Result<Instance, IoError> {
    let raw: RawInstance = serde_json::from_str(text)?;
    if raw.periods == 0 {
        return Err(invalid(None, "periods must be positive"));
    }
    if raw.facility_count == 0 {
        return Err(invalid(None, "facility_count must be positive"));
    }
    let mut users = Vec::with_capacity(raw.users.len());
    for (j, u) in raw.users.into_iter().enumerate() {
        let at = || locate_element(text, "users", j);
        if u.demands.len() != raw.periods {
            return Err(invalid(
                at(),
                format!("users[{j}].demands: expected {} entries, got {}", raw.periods, u.demands.len()),
            ));
        }
        if u.coverage.len() != raw.periods {
            return Err(invalid(
                at(),
                format!("users[{j}].coverage: expected {} entries, got {}", raw.periods, u.coverage.len()),
            ));
        }
        for (t, &d) in u.demands.iter().enumerate() {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid(at(), format!("users[{j}].demands[{t}]: d_j^t > 0 required, got {d}")));
            }
        }
        for (t, cov) in u.coverage.iter().enumerate() {
            if let Some(&i) = cov.iter().find(|&&i| i >= raw.facility_count) {
                return Err(invalid(
                    at(),
                    format!(
                        "users[{j}].coverage[{t}]: facility index {i} out of range 0..{}",
                        raw.facility_count
                    ),
                ));
            }
        }
        users.push(UserRecord::new(u.demands, u.coverage));
    }
    Instance::new(
        raw.name.unwrap_or_default(),
        raw.periods,
        raw.facility_count,
        users,
        raw.domain,
    )
    .map_err(|e| invalid(None, e.to_string()))
}

fn write_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => write!(out, "{u}").expect("string write"),
            (_, Some(i)) => write!(out, "{i}").expect("string write"),
            _ => out.push_str(&format_g17(n.as_f64().expect("finite number"))),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            out.push('[');
            for (k, x) in a.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_value(out, x);
            }
            out.push(']');
        }
        Value::Object(m) => {
            out.push('{');
            for (k, (key, x)) in m.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(out, x);
            }
            out.push('}');
        }
    }
}

fn numbers(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&d| format_g17(d)).collect();
    format!("[{}]", parts.join(", "))
}

fn index_lists(v: &[Vec<usize>]) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|c| {
            let s: Vec<String> = c.iter().map(usize::to_string).collect();
            format!("[{}]", s.join(", "))
        })
        .collect();
    format!("[{}]", parts.join(", "))
}

/// Canonical text: fixed key order, one user and one constraint per line,
/// reals with 17 significant digits.
pub fn write_instance(inst: &Instance) -> String {
    let mut out = String::from("{\n");
    if !inst.name().is_empty() {
        writeln!(out, "  \"name\": {},", Value::String(inst.name().into())).expect("string write");
    }
    writeln!(out, "  \"periods\": {},", inst.periods()).expect("string write");
    writeln!(out, "  \"facility_count\": {},", inst.facility_count()).expect("string write");
    out.push_str("  \"users\": [");
    for (j, u) in inst.users().iter().enumerate() {
        out.push_str(if j == 0 { "\n" } else { ",\n" });
        write!(
            out,
            "    {{\"demands\": {}, \"coverage\": {}}}",
            numbers(&u.demands),
            index_lists(&u.covering)
        )
        .expect("string write");
    }
    out.push_str(if inst.users().is_empty() { "],\n" } else { "\n  ],\n" });
    out.push_str("  \"domain\": {\"constraints\": [");
    let cons = &inst.domain().constraints;
    for (k, c) in cons.iter().enumerate() {
        out.push_str(if k == 0 { "\n" } else { ",\n" });
        out.push_str("    ");
        let v = serde_json::to_value(c).expect("constraints serialize");
        write_value(&mut out, &v);
    }
    out.push_str(if cons.is_empty() { "]}\n" } else { "\n  ]}\n" });
    out.push_str("}\n");
    out
}

/// `{"x": [[x_i^1 .. x_i^T] per facility]}`.
pub fn write_solution(x: &Solution) -> String {
    let rows: Vec<String> = x
        .to_rows()
        .iter()
        .map(|r| {
            let s: Vec<String> = r.iter().map(u8::to_string).collect();
            format!("[{}]", s.join(", "))
        })
        .collect();
    format!("{{\"x\": [{}]}}\n", rows.join(", "))
}

/// Reads `{"x": rows}`, a bare list of facility rows, or a flat 0/1 list
/// for a single period.
pub fn parse_solution(text: &str) -> Result<Solution, IoError> {
    let v: Value = serde_json::from_str(text)?;
    let body = match &v {
        Value::Object(m) => m
            .get("x")
            .ok_or_else(|| invalid(None, "solution object needs an \"x\" key"))?,
        other => other,
    };
    let bit = |e: &Value| -> Result<u8, IoError> {
        match e.as_f64() {
            Some(f) if f == 0.0 => Ok(0),
            Some(f) if f == 1.0 => Ok(1),
            _ => Err(invalid(None, format!("solution entries must be 0 or 1, got {e}"))),
        }
    };
    let Value::Array(items) = body else {
        return Err(invalid(None, "solution must be an array"));
    };
    let rows: Vec<Vec<u8>> = if items.iter().all(Value::is_array) {
        items
            .iter()
            .map(|r| r.as_array().expect("checked").iter().map(bit).collect())
            .collect::<Result<_, _>>()?
    } else {
        items.iter().map(|e| bit(e).map(|b| vec![b])).collect::<Result<_, _>>()?
    };
    Solution::from_rows(&rows).map_err(|e| invalid(None, e.to_string()))
}

fn opt_number(v: Option<f64>) -> String {
    v.map(format_g17).unwrap_or_default()
}

/// One CSV record in [`RESULT_COLUMNS`] order.
pub fn result_record(r: &SolveResult) -> Vec<String> {
    vec![
        r.instance.clone(),
        r.method.clone(),
        r.features.clone(),
        r.status.as_str().to_string(),
        opt_number(r.objective),
        format_g17(r.bound),
        format_g17(r.gap_percent()),
        r.nodes.to_string(),
        r.lazy_cuts.to_string(),
        r.user_cuts.to_string(),
        r.restricted_subproblems.to_string(),
        r.diversified_subproblems.to_string(),
        r.branches.to_string(),
        format_g17(r.wall_seconds),
    ]
}

/// Header plus one row per result.
pub fn write_results_csv(results: &[SolveResult]) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULT_COLUMNS)?;
    for r in results {
        w.write_record(result_record(r))?;
    }
    let bytes = w.into_inner().map_err(|e| invalid(None, e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Gap in percent rounded for display, e.g. `0.00`.
pub fn gap_display(r: &SolveResult) -> String {
    if r.gap.is_finite() {
        format!("{:.2}", r.gap_percent())
    } else {
        "-".into()
    }
}

/// Human-readable one-line summary.
pub fn summary_line(r: &SolveResult) -> String {
    format!(
        "{} {} [{}] status={} objective={} bound={} gap={}% (exact {}) nodes={} time={:.3}s",
        r.instance,
        r.method,
        r.features,
        r.status,
        opt_number(r.objective),
        format_g17(r.bound),
        gap_display(r),
        format_g17(r.gap_percent()),
        r.nodes,
        r.wall_seconds
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainTemplate {
    /// At most `limit` open facilities per period.
    Cardinality { limit: usize },
    /// One knapsack per period with weights in 1..=4 and capacity 40% of
    /// the total weight.
    Knapsack,
    /// Persistence, a per-period opening budget with costs in 1..=3, and
    /// precedence between consecutive facility pairs.
    EvStyle { budget: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub seed: u64,
    pub periods: usize,
    pub facilities: usize,
    pub users: usize,
    pub radius: f64,
    pub demand_low: f64,
    pub demand_high: f64,
    /// Demand multiplier per period.
    pub growth: f64,
    pub domain: DomainTemplate,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            seed: 0,
            periods: 2,
            facilities: 6,
            users: 30,
            radius: 0.3,
            demand_low: 1.0,
            demand_high: 10.0,
            growth: 1.1,
            domain: DomainTemplate::Cardinality { limit: 2 },
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), IoError> {
        if self.periods == 0 || self.facilities == 0 || self.users == 0 {
            return Err(invalid(None, "periods, facilities and users must be positive"));
        }
        if !(self.radius > 0.0) {
            return Err(invalid(None, "radius must be positive"));
        }
        if !(self.demand_low > 0.0 && self.demand_low <= self.demand_high && self.demand_high.is_finite()) {
            return Err(invalid(None, "demand range needs 0 < low <= high"));
        }
        if !(self.growth > 0.0 && self.growth.is_finite()) {
            return Err(invalid(None, "growth must be positive"));
        }
        Ok(())
    }
}

fn quantize(d: f64) -> f64 {
    ((d / DEMAND_QUANTUM).round() * DEMAND_QUANTUM).max(DEMAND_QUANTUM)
}

/// Deterministic instance for the given parameters.
pub fn generate_instance(params: &GeneratorParams) -> Result<Instance, IoError> {
    params.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(params.seed);
    let point = |rng: &mut Xoshiro256PlusPlus| (rng.random::<f64>(), rng.random::<f64>());
    let facilities: Vec<(f64, f64)> = (0..params.facilities).map(|_| point(&mut rng)).collect();
    let mut users = Vec::with_capacity(params.users);
    for _ in 0..params.users {
        let (ux, uy) = point(&mut rng);
        let base = params.demand_low + (params.demand_high - params.demand_low) * rng.random::<f64>();
        let cov: Vec<usize> = facilities
            .iter()
            .enumerate()
            .filter(|(_, &(fx, fy))| (fx - ux).hypot(fy - uy) <= params.radius)
            .map(|(i, _)| i)
            .collect();
        let demands = (0..params.periods)
            .map(|t| quantize(base * params.growth.powi(t as i32)))
            .collect();
        users.push(UserRecord::new(demands, vec![cov; params.periods]));
    }
    let (n, periods) = (params.facilities, params.periods);
    let constraints = match params.domain {
        DomainTemplate::Cardinality { limit } => (0..periods)
            .map(|t| DomainConstraint::Cardinality {
                period: t,
                limit: limit as f64,
            })
            .collect(),
        DomainTemplate::Knapsack => (0..periods)
            .map(|t| {
                let w: Vec<f64> = (0..n).map(|_| rng.random_range(1..=4) as f64).collect();
                let rhs = (0.4 * w.iter().sum::<f64>()).floor().max(1.0);
                DomainConstraint::Knapsack {
                    terms: w
                        .iter()
                        .enumerate()
                        .map(|(i, &c)| Term {
                            facility: i,
                            period: t,
                            coef: c,
                        })
                        .collect(),
                    rhs,
                }
            })
            .collect(),
        DomainTemplate::EvStyle { budget } => {
            let mut c = vec![DomainConstraint::Persistence];
            for t in 0..periods {
                c.push(DomainConstraint::Budget {
                    period: t,
                    costs: (0..n).map(|_| rng.random_range(1..=3) as f64).collect(),
                    rhs: budget,
                });
            }
            for t in 0..periods {
                for k in (0..n.saturating_sub(1)).step_by(2) {
                    c.push(DomainConstraint::Precedence {
                        before: (k, t),
                        after: (k + 1, t),
                    });
                }
            }
            c
        }
    };
    Instance::new(
        format!("gen-s{}", params.seed),
        periods,
        n,
        users,
        DomainSpec::new(constraints),
    )
    .map_err(|e| invalid(None, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fig1;
    use crate::preprocess::drop_uncoverable;
    use crate::stats::SolveStatus;

    const FIG1_TEXT: &str = r#"{
  "name": "fig1",
  "periods": 1,
  "facility_count": 3,
  "users": [
    {"demands": [10], "coverage": [[0]]},
    {"demands": [5], "coverage": [[1]]},
    {"demands": [7], "coverage": [[2]]},
    {"demands": [8], "coverage": [[0, 1]]},
    {"demands": [2], "coverage": [[0, 2]]},
    {"demands": [3], "coverage": [[1, 2]]}
  ],
  "domain": {"constraints": [
    {"limit": 2, "period": 0, "type": "cardinality"}
  ]}
}
"#;

    #[test]
    fn g17_matches_printf() {
        assert_eq!(format_g17(10.0), "10");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1.5), "1.5");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(1.25e-5), "1.2500000000000001e-05");
        assert_eq!(format_g17(-2.0), "-2");
        assert_eq!(format_g17(123456789012345680.0), "1.2345678901234568e+17");
        assert_eq!(format_g17(0.0001), "0.0001");
    }

    #[test]
    fn fig1_golden_text() {
        assert_eq!(write_instance(&fig1()), FIG1_TEXT);
        let back = parse_instance(FIG1_TEXT).unwrap();
        assert_eq!(back, fig1());
        assert_eq!(write_instance(&back), FIG1_TEXT);
    }

    #[test]
    fn rejects_bad_data() {
        let zero = FIG1_TEXT.replace("[5]", "[0]");
        let e = parse_instance(&zero).unwrap_err().to_string();
        assert!(e.contains("d_j^t > 0"), "{e}");
        assert!(e.starts_with("line 7:"), "{e}");
        let oor = FIG1_TEXT.replace("[[1, 2]]", "[[1, 3]]");
        let e = parse_instance(&oor).unwrap_err().to_string();
        assert!(e.contains("out of range"), "{e}");
        assert!(e.starts_with("line 11:"), "{e}");
        let t = FIG1_TEXT.replace("\"periods\": 1", "\"periods\": 2");
        assert!(parse_instance(&t).is_err());
        let e = parse_instance("{\"periods\": 1,").unwrap_err();
        assert!(matches!(e, IoError::Syntax { .. }));
        let missing = FIG1_TEXT.replace("\"facility_count\": 3,\n", "");
        assert!(parse_instance(&missing).is_err());
    }

    #[test]
    fn solution_formats() {
        let x = Solution::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(parse_solution(&write_solution(&x)).unwrap(), x);
        assert_eq!(parse_solution("[[1, 0], [0, 1]]").unwrap(), x);
        assert_eq!(
            parse_solution("[1, 0, 0]").unwrap(),
            Solution::single_period(&[1, 0, 0])
        );
        assert!(parse_solution("[2]").is_err());
    }

    #[test]
    fn csv_layout() {
        let mut r = SolveResult::new("fig1", "abbc", "pareto");
        r.status = SolveStatus::Optimal;
        r.objective = Some(30.0);
        r.bound = 30.000001;
        r.refresh_gap();
        let text = write_results_csv(&[r.clone()]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RESULT_COLUMNS.join(","));
        let row = lines.next().unwrap();
        assert!(row.starts_with("fig1,abbc,pareto,optimal,30,30.000001000000001,"), "{row}");
        assert_eq!(gap_display(&r), "0.00");
        assert!(summary_line(&r).contains("gap=0.00% (exact 3.33"));
    }

    #[test]
    fn generator_is_deterministic() {
        let p = GeneratorParams {
            seed: 7,
            ..GeneratorParams::default()
        };
        let a = generate_instance(&p).unwrap();
        assert_eq!(a, generate_instance(&p).unwrap());
        assert_ne!(
            a,
            generate_instance(&GeneratorParams { seed: 8, ..p.clone() }).unwrap()
        );
        assert_eq!(parse_instance(&write_instance(&a)).unwrap(), a);
        for u in a.users() {
            for &d in &u.demands {
                assert_eq!((d / DEMAND_QUANTUM).fract(), 0.0);
            }
        }
    }

    #[test]
    fn generator_radius_extremes() {
        let wide = generate_instance(&GeneratorParams {
            radius: 1.5,
            ..GeneratorParams::default()
        })
        .unwrap();
        assert!(wide.users().iter().all(|u| u.covering[0].len() == 6));
        let narrow = generate_instance(&GeneratorParams {
            radius: 1e-12,
            ..GeneratorParams::default()
        })
        .unwrap();
        assert_eq!(drop_uncoverable(&narrow).0.user_count(), 0);
    }

    #[test]
    fn generator_templates_round_trip() {
        for domain in [
            DomainTemplate::Knapsack,
            DomainTemplate::EvStyle { budget: 3.0 },
            DomainTemplate::Cardinality { limit: 1 },
        ] {
            let inst = generate_instance(&GeneratorParams {
                seed: 3,
                periods: 3,
                domain,
                ..GeneratorParams::default()
            })
            .unwrap();
            let text = write_instance(&inst);
            assert_eq!(parse_instance(&text).unwrap(), inst);
            assert_eq!(write_instance(&parse_instance(&text).unwrap()), text);
        }
        assert!(generate_instance(&GeneratorParams {
            radius: 0.0,
            ..GeneratorParams::default()
        })
        .is_err());
    }
}
