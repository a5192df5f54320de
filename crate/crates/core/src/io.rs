//! Plain-text graph, seed and matrix formats.
//!
//! Edge lists start with a header `n directed|undirected [base0|base1]`
//! followed by one `u v` pair per line. Blank lines and `#` comments are
//! ignored everywhere.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Injection};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(k, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((k + 1, line))
    })
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_usize(line: usize, tok: &str) -> Result<usize> {
    tok.parse().map_err(|_| parse_err(line, format!("expected a vertex index, got {tok:?}")))
}

pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if !(2..=3).contains(&toks.len()) {
        return Err(parse_err(hl, "header must be `n directed|undirected [base0|base1]`"));
    }
    let n = parse_usize(hl, toks[0])?;
    let directed = match toks[1] {
        "directed" => true,
        "undirected" => false,
        other => return Err(parse_err(hl, format!("unknown graph kind {other:?}"))),
    };
    let base = match toks.get(2).copied() {
        None | Some("base0") => 0,
        Some("base1") => 1,
        Some(other) => return Err(parse_err(hl, format!("unknown index base {other:?}"))),
    };
    let mut edges = Vec::new();
    for (k, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(k, "expected `u v`"));
        }
        let (u, v) = (parse_usize(k, toks[0])?, parse_usize(k, toks[1])?);
        if u < base || v < base || u - base >= n || v - base >= n {
            return Err(parse_err(k, format!("edge ({u}, {v}) out of range for {n} vertices")));
        }
        edges.push((u - base, v - base));
    }
    Graph::new(n, directed, edges)
}

pub fn read_edge_list(path: &Path) -> Result<Graph> {
    parse_edge_list(&fs::read_to_string(path)?)
}

/// Zero-based edge list; undirected edges are written once with `u < v`.
pub fn format_edge_list(g: &Graph) -> String {
    let mut out = format!("{} {}\n", g.n(), if g.directed() { "directed" } else { "undirected" });
    for &(u, v) in g.edges() {
        writeln!(out, "{u} {v}").unwrap();
    }
    out
}

pub fn write_edge_list(g: &Graph, path: &Path) -> Result<()> {
    fs::write(path, format_edge_list(g))?;
    Ok(())
}

/// Zero-based `template network` pairs.
pub fn parse_seeds(text: &str) -> Result<Vec<(usize, usize)>> {
    content_lines(text)
        .map(|(k, line)| {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(parse_err(k, "expected `template network`"));
            }
            Ok((parse_usize(k, toks[0])?, parse_usize(k, toks[1])?))
        })
        .collect()
}

pub fn read_seeds(path: &Path) -> Result<Vec<(usize, usize)>> {
    parse_seeds(&fs::read_to_string(path)?)
}

pub fn write_seeds(seeds: &[(usize, usize)], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (a, b) in seeds {
        writeln!(out, "{a} {b}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// `n` rows of `n` whitespace-separated reals.
pub fn parse_matrix(text: &str, n: usize) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((n, n));
    let mut rows = 0;
    for (k, line) in content_lines(text) {
        if rows == n {
            return Err(parse_err(k, format!("more than {n} rows")));
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(k, format!("bad number {t:?}"))))
            .collect::<Result<_>>()?;
        if vals.len() != n {
            return Err(parse_err(k, format!("expected {n} values, got {}", vals.len())));
        }
        for (j, v) in vals.into_iter().enumerate() {
            m[(rows, j)] = v;
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(text.lines().count(), format!("expected {n} rows, got {rows}")));
    }
    Ok(m)
}

pub fn read_matrix(path: &Path, n: usize) -> Result<Array2<f64>> {
    parse_matrix(&fs::read_to_string(path)?, n)
}

pub fn write_matrix(m: &Array2<f64>, path: &Path) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Sidecar written next to sampled graphs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruthFile {
    pub n_c: usize,
    pub n: usize,
    /// Network vertex of each template vertex.
    pub truth: Vec<usize>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub model: serde_json::Value,
}

impl TruthFile {
    pub fn injection(&self) -> Result<Injection> {
        if self.truth.len() != self.n_c {
            return Err(Error::InvalidInjection(format!(
                "truth lists {} targets for {} template vertices",
                self.truth.len(),
                self.n_c
            )));
        }
        Injection::new(self.truth.clone(), self.n)
    }
}

pub fn read_truth(path: &Path) -> Result<Injection> {
    let t: TruthFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    t.injection()
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `header` and `rows` as CSV.
pub fn write_csv<R, S>(path: &Path, header: &[&str], rows: R) -> Result<()>
where
    R: IntoIterator<Item = Vec<S>>,
    S: AsRef<str>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref()))?;
    }
    w.flush()?;
    Ok(())
}

/// Space-separated targets.
pub fn format_injection(sigma: &Injection) -> String {
    let parts: Vec<String> = sigma.as_slice().iter().map(|j| j.to_string()).collect();
    parts.join(" ")
}
