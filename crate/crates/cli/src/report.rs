//! Report types and their JSON and text renderings.

use std::io;

use noisebound::cgf_bounds::BoundReport;
use noisebound::lingauss::GaussianAnalysis;
use noisebound::scalar_fpk::EntropyChain;
use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;

use crate::config::{SystemConfig, Tolerances};

/// Every report lists these gates, in this order.
pub const GATE_NAMES: [&str; 9] = [
    "hurwitz_nominal",
    "hurwitz_perturbed",
    "controllable",
    "elliptic",
    "nf_hinf_lt_1",
    "confining_nominal",
    "confining_perturbed",
    "normalizable",
    "k_below_half_theta_star",
];

/// Gates whose failure leaves the report valid.
pub const SOFT_GATES: [&str; 1] = ["k_below_half_theta_star"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GateStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: &'static str,
    pub status: GateStatus,
    pub hard: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// `lhs ≤ rhs + tol`, with `slack = rhs − lhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tol: f64,
    pub holds: bool,
}

impl Inequality {
    pub fn new(name: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack,
            tol,
            holds: slack >= -tol,
        }
    }
}

/// A computed value against a published one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tol: f64,
    pub deviation: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, expected: f64, tol: f64) -> Self {
        let deviation = (value - expected).abs();
        Self {
            name: name.into(),
            value,
            expected,
            tol,
            deviation,
            pass: deviation <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub tolerances: Tolerances,
}

impl Provenance {
    pub fn new(seed: Option<u64>, tolerances: Tolerances) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            tolerances,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<SystemConfig>,
    pub gates: Vec<Gate>,
    pub inequalities: Vec<Inequality>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear: Option<GaussianAnalysis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar: Option<EntropyChain>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundReport>,
    /// Extra command-specific sections, such as Monte Carlo results.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<Value>,
    pub provenance: Provenance,
}

impl AnalysisReport {
    /// A report with every gate skipped.
    pub fn new(command: &'static str, input: Option<SystemConfig>, provenance: Provenance) -> Self {
        Self {
            command,
            input,
            gates: GATE_NAMES
                .iter()
                .map(|&name| Gate {
                    name,
                    status: GateStatus::Skipped,
                    hard: !SOFT_GATES.contains(&name),
                    detail: None,
                })
                .collect(),
            inequalities: Vec::new(),
            checks: Vec::new(),
            linear: None,
            scalar: None,
            bound: None,
            extra: None,
            provenance,
        }
    }

    pub fn set_gate(&mut self, name: &str, status: GateStatus, detail: Option<String>) {
        let gate = self
            .gates
            .iter_mut()
            .find(|g| g.name == name)
            .unwrap_or_else(|| panic!("unknown gate {name}"));
        gate.status = status;
        gate.detail = detail;
    }

    pub fn pass_if(&mut self, name: &str, ok: bool, detail: Option<String>) {
        let status = if ok { GateStatus::Pass } else { GateStatus::Fail };
        self.set_gate(name, status, detail);
    }

    pub fn gate(&self, name: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.name == name)
    }

    pub fn hard_failure(&self) -> bool {
        self.gates.iter().any(|g| g.hard && g.status == GateStatus::Fail)
    }

    pub fn to_json(&self) -> String {
        to_json_string(self)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} report ({} {})\n", self.command, self.provenance.tool, self.provenance.version);
        for c in &self.checks {
            out.push_str(&check_line(c));
            out.push('\n');
        }
        out.push_str("gates:\n");
        for g in &self.gates {
            let status = match g.status {
                GateStatus::Pass => "pass",
                GateStatus::Fail => "fail",
                GateStatus::Skipped => "skipped",
            };
            let kind = if g.hard { "" } else { " (soft)" };
            match &g.detail {
                Some(d) => out.push_str(&format!("  {:<24} {status}{kind}: {d}\n", g.name)),
                None => out.push_str(&format!("  {:<24} {status}{kind}\n", g.name)),
            }
        }
        if !self.inequalities.is_empty() {
            out.push_str("inequalities (lhs <= rhs):\n");
            for q in &self.inequalities {
                out.push_str(&format!(
                    "  {:<24} {} {} <= {} slack {}\n",
                    q.name,
                    if q.holds { "holds" } else { "FAILS" },
                    fmt6(q.lhs),
                    fmt6(q.rhs),
                    fmt6(q.slack)
                ));
            }
        }
        let value = serde_json::to_value(self).expect("report serializes");
        for key in ["linear", "scalar", "bound", "extra"] {
            if let Some(v) = value.get(key) {
                out.push_str(&format!("{key}:\n"));
                render_text(v, 1, &mut out);
            }
        }
        out.push_str(&format!("seed: {}\n", self.provenance.seed.map_or("none".into(), |s| s.to_string())));
        out
    }
}

/// `PASS name value (expected e ± tol)`.
pub fn check_line(c: &Check) -> String {
    format!(
        "{} {} {} (expected {} ± {:e}, deviation {:.3e})",
        if c.pass { "PASS" } else { "FAIL" },
        c.name,
        fmt6(c.value),
        c.expected,
        c.tol,
        c.deviation
    )
}

fn render_text(v: &Value, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                if is_leaf(v) {
                    out.push_str(&format!("{pad}{k}: {}\n", leaf_text(v)));
                } else {
                    out.push_str(&format!("{pad}{k}:\n"));
                    render_text(v, depth + 1, out);
                }
            }
        }
        Value::Array(items) => {
            for item in items {
                if is_leaf(item) {
                    out.push_str(&format!("{pad}- {}\n", leaf_text(item)));
                } else {
                    out.push_str(&format!("{pad}-\n"));
                    render_text(item, depth + 1, out);
                }
            }
        }
        leaf => out.push_str(&format!("{pad}{}\n", leaf_text(leaf))),
    }
}

fn is_leaf(v: &Value) -> bool {
    match v {
        Value::Array(items) => items.iter().all(|i| !i.is_object() && !i.is_array()),
        Value::Object(_) => false,
        _ => true,
    }
}

fn leaf_text(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => fmt6(n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Array(items) => format!("[{}]", items.iter().map(leaf_text).collect::<Vec<_>>().join(", ")),
        other => other.to_string(),
    }
}

/// Six significant digits, `%g` style.
pub fn fmt6(x: f64) -> String {
    format_g(x, 6)
}

/// Seventeen significant digits, `%g` style; exact for every `f64`.
pub fn fmt17(x: f64) -> String {
    format_g(x, 17)
}

/// C `%.{digits}g`: scientific when the exponent is below −4 or at least
/// `digits`, trailing zeros removed.
pub fn format_g(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let all: String = mantissa.chars().filter(|c| *c != '.').collect();
    let sig = all.trim_end_matches('0');
    let sig = if sig.is_empty() { "0" } else { sig };
    if exp < -4 || exp >= digits as i32 {
        let (head, tail) = sig.split_at(1);
        if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        }
    } else if exp < 0 {
        format!("{sign}0.{}{sig}", "0".repeat((-exp - 1) as usize))
    } else {
        let int_len = exp as usize + 1;
        if sig.len() <= int_len {
            format!("{sign}{sig}{}", "0".repeat(int_len - sig.len()))
        } else {
            format!("{sign}{}.{}", &sig[..int_len], &sig[int_len..])
        }
    }
}

/// Writes floats with [`fmt17`]; non-finite values become `null`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SeventeenDigits;

impl Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt17(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with every float at seventeen significant digits.
pub fn to_json_string(value: &impl Serialize) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
