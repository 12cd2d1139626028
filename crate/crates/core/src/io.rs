//! Text and JSON file formats.
//!
//! Tensor text format (indices 1-based, one entry per line):
//!
//! ```text
//! tensor v1
//! modes <d>
//! dims <m1> ... <md>
//! nnz <N>
//! <i1> ... <id> <value>
//! ```
//!
//! Vector files (`targets v1`, `scaling v1`, `certificate v1`) hold one line
//! of values per mode. Blank lines and lines starting with `#` are ignored.
//! Numbers are written with 17 significant digits. A file whose name ends in
//! `.json` is read and written in the JSON mirror instead.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::feasibility::{FeasibilityReport, Verdict};
use crate::newton::{ScalingResult, Status};
use crate::tensor::{ScalingVectors, SparseTensor, TargetSums};

pub const TARGETS_HEADER: &str = "targets v1";
pub const SCALING_HEADER: &str = "scaling v1";
pub const CERTIFICATE_HEADER: &str = "certificate v1";

/// Lossless decimal form of a double.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {} '{}'", what, tok)))
}

fn expect_keyword<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    keyword: &str,
    last_line: usize,
) -> Result<(usize, Vec<&'a str>)> {
    let (line, text) = lines
        .next()
        .ok_or_else(|| parse_err(last_line, format!("missing '{}' line", keyword)))?;
    let mut toks = text.split_whitespace();
    if toks.next() != Some(keyword) {
        return Err(parse_err(line, format!("expected '{}' line, found '{}'", keyword, text)));
    }
    Ok((line, toks.collect()))
}

pub fn parse_tensor(text: &str) -> Result<SparseTensor> {
    parse_tensor_with_threshold(text, 0.0)
}

/// Parses the tensor text format; values `≤ 0` or below `threshold` are
/// rejected, as are duplicate index tuples.
pub fn parse_tensor_with_threshold(text: &str, threshold: f64) -> Result<SparseTensor> {
    let mut lines = content_lines(text);
    let (line, rest) = expect_keyword(&mut lines, "tensor", 1)?;
    if rest != ["v1"] {
        return Err(parse_err(line, "unsupported tensor format version"));
    }
    let (line, rest) = expect_keyword(&mut lines, "modes", line)?;
    let [d] = rest.as_slice() else {
        return Err(parse_err(line, "expected 'modes <d>'"));
    };
    let d: usize = parse_num(d, line, "mode count")?;
    if d == 0 {
        return Err(parse_err(line, "mode count must be positive"));
    }
    let (line, rest) = expect_keyword(&mut lines, "dims", line)?;
    if rest.len() != d {
        return Err(parse_err(line, format!("expected {} dimensions, found {}", d, rest.len())));
    }
    let dims = rest
        .iter()
        .map(|t| parse_num::<usize>(t, line, "dimension"))
        .collect::<Result<Vec<_>>>()?;
    if dims.contains(&0) {
        return Err(parse_err(line, "dimensions must be positive"));
    }
    let (line, rest) = expect_keyword(&mut lines, "nnz", line)?;
    let [nnz] = rest.as_slice() else {
        return Err(parse_err(line, "expected 'nnz <N>'"));
    };
    let nnz: usize = parse_num(nnz, line, "entry count")?;

    let mut entries = Vec::with_capacity(nnz);
    let mut seen = HashSet::with_capacity(nnz);
    let mut last = line;
    for _ in 0..nnz {
        let (line, text) = lines
            .next()
            .ok_or_else(|| parse_err(last, format!("expected {} entries, found {}", nnz, entries.len())))?;
        last = line;
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != d + 1 {
            return Err(parse_err(line, format!("expected {} indices and a value", d)));
        }
        let mut idx = Vec::with_capacity(d);
        for (k, tok) in toks[..d].iter().enumerate() {
            let i: usize = parse_num(tok, line, "index")?;
            if i == 0 || i > dims[k] {
                return Err(parse_err(line, format!("index {} out of range 1..={} in mode {}", i, dims[k], k + 1)));
            }
            idx.push(i - 1);
        }
        let value: f64 = parse_num(toks[d], line, "value")?;
        if !value.is_finite() || value <= 0.0 || value < threshold {
            return Err(parse_err(line, format!("value {} must be positive (zeros are stated by omission)", toks[d])));
        }
        if !seen.insert(idx.clone()) {
            return Err(parse_err(line, "duplicate index tuple"));
        }
        entries.push((idx, value));
    }
    if let Some((line, _)) = lines.next() {
        return Err(parse_err(line, "unexpected content after entries"));
    }
    SparseTensor::from_entries(dims, entries).map_err(|e| parse_err(last, e.to_string()))
}

pub fn write_tensor(t: &SparseTensor) -> String {
    let mut out = String::new();
    out.push_str("tensor v1\n");
    out.push_str(&format!("modes {}\n", t.num_modes()));
    let dims: Vec<String> = t.dims().iter().map(|m| m.to_string()).collect();
    out.push_str(&format!("dims {}\n", dims.join(" ")));
    out.push_str(&format!("nnz {}\n", t.nnz()));
    for (idx, v) in t.entries() {
        for i in idx {
            out.push_str(&(i + 1).to_string());
            out.push(' ');
        }
        out.push_str(&fmt_f64(v));
        out.push('\n');
    }
    out
}

/// Parses a vector file with the given header line.
pub fn parse_vectors(text: &str, header: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = content_lines(text);
    let (line, first) = lines.next().ok_or_else(|| parse_err(1, format!("missing '{}' header", header)))?;
    if first.split_whitespace().collect::<Vec<_>>().join(" ") != header {
        return Err(parse_err(line, format!("expected '{}' header, found '{}'", header, first)));
    }
    let mut modes = Vec::new();
    for (line, text) in lines {
        let row = text
            .split_whitespace()
            .map(|t| parse_num::<f64>(t, line, "value"))
            .collect::<Result<Vec<_>>>()?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(line, "non-finite value"));
        }
        modes.push(row);
    }
    if modes.is_empty() {
        return Err(parse_err(line, "no vectors after header"));
    }
    Ok(modes)
}

pub fn write_vectors(header: &str, modes: &[Vec<f64>]) -> String {
    let mut out = format!("{}\n", header);
    for row in modes {
        let vals: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&vals.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_targets(text: &str) -> Result<TargetSums> {
    let modes = parse_vectors(text, TARGETS_HEADER)?;
    TargetSums::new(modes)
}

pub fn write_targets(s: &TargetSums) -> String {
    write_vectors(TARGETS_HEADER, s.modes())
}

pub fn write_scaling(x: &ScalingVectors) -> String {
    write_vectors(SCALING_HEADER, &x.modes())
}

pub fn write_certificate(y: &ScalingVectors) -> String {
    write_vectors(CERTIFICATE_HEADER, &y.modes())
}

#[derive(Serialize, Deserialize)]
struct TensorJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    modes: Option<usize>,
    dims: Vec<usize>,
    entries: Vec<(Vec<usize>, f64)>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TargetsJson {
    Wrapped { targets: Vec<Vec<f64>> },
    Bare(Vec<Vec<f64>>),
}

fn json_err(e: serde_json::Error) -> Error {
    parse_err(e.line(), e.to_string())
}

pub fn parse_tensor_json(text: &str) -> Result<SparseTensor> {
    let raw: TensorJson = serde_json::from_str(text).map_err(json_err)?;
    if let Some(d) = raw.modes {
        if d != raw.dims.len() {
            return Err(parse_err(1, format!("modes {} but {} dims", d, raw.dims.len())));
        }
    }
    let mut entries = Vec::with_capacity(raw.entries.len());
    for (idx, value) in raw.entries {
        if idx.len() != raw.dims.len() || idx.contains(&0) {
            return Err(parse_err(1, format!("bad 1-based index tuple {:?}", idx)));
        }
        entries.push((idx.iter().map(|i| i - 1).collect(), value));
    }
    SparseTensor::from_entries(raw.dims, entries).map_err(|e| parse_err(1, e.to_string()))
}

pub fn write_tensor_json(t: &SparseTensor) -> String {
    let raw = TensorJson {
        modes: Some(t.num_modes()),
        dims: t.dims().to_vec(),
        entries: t
            .entries()
            .map(|(idx, v)| (idx.iter().map(|i| i + 1).collect(), v))
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("tensor serializes")
}

pub fn parse_targets_json(text: &str) -> Result<TargetSums> {
    let modes = match serde_json::from_str(text).map_err(json_err)? {
        TargetsJson::Wrapped { targets } => targets,
        TargetsJson::Bare(t) => t,
    };
    TargetSums::new(modes)
}

pub fn write_targets_json(s: &TargetSums) -> String {
    serde_json::to_string_pretty(&json!({ "targets": s.modes() })).expect("targets serialize")
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {}", path.display(), e)))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {}", path.display(), e)))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<SparseTensor> {
    let path = path.as_ref();
    let text = read(path)?;
    if is_json(path) {
        parse_tensor_json(&text)
    } else {
        parse_tensor(&text)
    }
}

pub fn read_targets(path: impl AsRef<Path>) -> Result<TargetSums> {
    let path = path.as_ref();
    let text = read(path)?;
    if is_json(path) {
        parse_targets_json(&text)
    } else {
        parse_targets(&text)
    }
}

pub fn save_tensor(path: impl AsRef<Path>, t: &SparseTensor) -> Result<()> {
    let path = path.as_ref();
    if is_json(path) {
        write(path, &write_tensor_json(t))
    } else {
        write(path, &write_tensor(t))
    }
}

pub fn save_targets(path: impl AsRef<Path>, s: &TargetSums) -> Result<()> {
    let path = path.as_ref();
    if is_json(path) {
        write(path, &write_targets_json(s))
    } else {
        write(path, &write_targets(s))
    }
}

pub fn save_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write(path.as_ref(), text)
}

pub fn report_json(report: &FeasibilityReport) -> Value {
    json!({
        "verdict": match report.verdict {
            Verdict::Feasible => "Feasible",
            Verdict::Infeasible => "Infeasible",
        },
        "certificate": report.certificate.as_ref().map(|y| y.modes()),
        "objective_at_certificate": report.objective_at_certificate,
        "lp_optimum": report.lp_optimum,
        "pivots": report.pivots,
    })
}

pub fn status_name(status: Status) -> &'static str {
    match status {
        Status::Converged => "Converged",
        Status::Diverged => "Diverged",
        Status::MaxItersExceeded => "MaxItersExceeded",
    }
}

/// Per-iteration trace with the run summary.
pub fn trace_json(result: &ScalingResult) -> Value {
    let iterations: Vec<Value> = result
        .trace
        .iter()
        .map(|t| {
            json!({
                "iteration": t.iteration,
                "f": t.objective,
                "residual": t.residual,
                "step_length": t.step_length,
            })
        })
        .collect();
    json!({
        "status": status_name(result.status),
        "iterations": result.iterations,
        "residual": result.residual,
        "trace": iterations,
    })
}
