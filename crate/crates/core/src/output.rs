//! Plain-text artifacts: CSV tables with LF line endings and `key: value`
//! reports. Numbers use nine significant digits (C's `%.9g`) so reruns are
//! byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::sysid::SimTrace;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Malformed { path: String, line: usize, msg: String },
}

/// `%.9g`: nine significant digits, trailing zeros dropped, exponent form
/// outside `[1e-5, 1e9)`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mant}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// In-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text, columns: header.len() }
    }

    /// Appends one row; panics on a column-count mismatch, which is a bug
    /// in the caller rather than bad input.
    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        assert_eq!(fields.len(), self.columns, "row width does not match header");
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            push_field(&mut self.text, f.as_ref());
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), OutputError> {
        write_text(path, &self.text)
    }
}

fn push_field(out: &mut String, f: &str) {
    if f.contains([',', '"', '\n', '\r']) {
        out.push('"');
        out.push_str(&f.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(f);
    }
}

/// Ordered `key: value` report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn line(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.text, "{key}: {value}");
        self
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        self.line(key, fmt_num(value))
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), OutputError> {
        write_text(path, &self.text)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), OutputError> {
    let io = |source| OutputError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

/// Parses a `key: value` report back into pairs.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub const TRACE_HEADER: [&str; 7] = ["t_s", "x_m", "v_mps", "u_A", "F_motor_N", "F_ext_N", "saturated"];

/// One actuator-trace row in CSV field order.
pub fn trace_fields(t: f64, x: f64, v: f64, current: f64, f_motor: f64, f_ext: f64, saturated: bool) -> [String; 7] {
    [fmt_num(t), fmt_num(x), fmt_num(v), fmt_num(current), fmt_num(f_motor), fmt_num(f_ext), fmt_bool(saturated).into()]
}

/// Reads an actuator trace. `F_ext_N` is the operator's force on the rod;
/// velocity and motor force columns are informational and recomputed by
/// the identification code.
pub fn read_trace(path: &Path) -> Result<SimTrace, OutputError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| OutputError::Io { path: p.clone(), source })?;
    parse_trace(&text, &p)
}

pub fn parse_trace(text: &str, origin: &str) -> Result<SimTrace, OutputError> {
    let bad = |line: usize, msg: String| OutputError::Malformed { path: origin.to_string(), line, msg };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name).ok_or_else(|| bad(1, format!("missing column {name}")));
    let (it, ix, iu, ie, is) = (find("t_s")?, find("x_m")?, find("u_A")?, find("F_ext_N")?, find("saturated")?);
    let mut tr = SimTrace { sample_rate: 0.0, t: vec![], x: vec![], force: vec![], current: vec![], saturated: vec![] };
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != cols.len() {
            return Err(bad(i + 1, format!("expected {} fields, found {}", cols.len(), f.len())));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad(i + 1, format!("not a number: '{}'", f[k])));
        tr.t.push(num(it)?);
        tr.x.push(num(ix)?);
        tr.current.push(num(iu)?);
        tr.force.push(num(ie)?);
        tr.saturated.push(match f[is] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(bad(i + 1, format!("bad saturated flag '{other}'"))),
        });
    }
    if tr.t.len() >= 2 {
        let span = tr.t[tr.t.len() - 1] - tr.t[0];
        tr.sample_rate = (tr.t.len() - 1) as f64 / span;
    }
    Ok(tr)
}
