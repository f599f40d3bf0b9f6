//! Edge-list and dense-matrix readers and writers.
//!
//! Edge lists hold one `src,dst,weight` row per edge (tab or comma
//! separated, 1-based ids, optional header, `#` comments). Missing pairs
//! are weight 0.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use bidegree::{Graph, WeightFamily};

fn fields(line: &str) -> Vec<&str> {
    let sep = if line.contains('\t') { '\t' } else { ',' };
    line.split(sep).map(str::trim).collect()
}

fn is_skippable(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

fn check_weight(family: &WeightFamily, value: f64, src: usize, dst: usize, line_no: usize) -> Result<()> {
    if family.in_support(value) {
        Ok(())
    } else {
        bail!(
            "line {line_no}: {}",
            bidegree::Error::InvalidWeight {
                family: family.spec(),
                i: src,
                j: dst,
                value,
            }
        )
    }
}

/// Parses an edge list; `n` defaults to the largest vertex id.
pub fn parse_edge_list(text: &str, family: &WeightFamily, n: Option<usize>) -> Result<Graph> {
    let mut edges: Vec<(usize, usize, f64, usize)> = Vec::new();
    let mut first_data = true;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if is_skippable(line) {
            continue;
        }
        let cols = fields(line);
        if first_data && cols.first().is_some_and(|c| c.parse::<usize>().is_err()) {
            // header row
            first_data = false;
            continue;
        }
        first_data = false;
        if cols.len() != 3 {
            bail!("line {line_no}: expected 3 fields (src, dst, weight), found {}", cols.len());
        }
        let id = |s: &str, what: &str| -> Result<usize> {
            let v: usize = s.parse().map_err(|_| anyhow!("line {line_no}: bad {what} id `{s}`"))?;
            if v == 0 {
                bail!("line {line_no}: vertex ids are 1-based, got 0");
            }
            Ok(v)
        };
        let src = id(cols[0], "source")?;
        let dst = id(cols[1], "target")?;
        let weight: f64 = cols[2]
            .parse()
            .map_err(|_| anyhow!("line {line_no}: bad weight `{}`", cols[2]))?;
        if src == dst {
            bail!("line {line_no}: self-loop on vertex {src}");
        }
        check_weight(family, weight, src, dst, line_no)?;
        edges.push((src, dst, weight, line_no));
    }
    let max_id = edges.iter().map(|e| e.0.max(e.1)).max().unwrap_or(0);
    let n = match n {
        Some(n) if n < max_id => bail!("vertex id {max_id} exceeds the declared n = {n}"),
        Some(n) => n,
        None => max_id,
    };
    if n < 2 {
        bail!("need at least 2 vertices, found {n}");
    }
    let mut weights = vec![0.0; n * n];
    let mut seen = vec![false; n * n];
    for (src, dst, w, line_no) in edges {
        let k = (src - 1) * n + (dst - 1);
        if seen[k] {
            bail!("line {line_no}: duplicate edge {src} -> {dst}");
        }
        seen[k] = true;
        weights[k] = w;
    }
    Graph::new(n, weights, family).context("edge list does not form a valid graph")
}

/// Parses an `n × n` comma-separated weight matrix with zero diagonal.
pub fn parse_dense(text: &str, family: &WeightFamily) -> Result<Graph> {
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if is_skippable(line) {
            continue;
        }
        let row = fields(line)
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| anyhow!("line {line_no}: bad weight `{s}`")))
            .collect::<Result<Vec<_>>>()?;
        rows.push((line_no, row));
    }
    let n = rows.len();
    if n < 2 {
        bail!("need at least 2 rows, found {n}");
    }
    let mut weights = Vec::with_capacity(n * n);
    for (i, (line_no, row)) in rows.into_iter().enumerate() {
        if row.len() != n {
            bail!("line {line_no}: expected {n} columns, found {}", row.len());
        }
        for (j, w) in row.into_iter().enumerate() {
            if i == j {
                if w != 0.0 {
                    bail!("line {line_no}: diagonal entry must be 0, got {w}");
                }
            } else {
                check_weight(family, w, i + 1, j + 1, line_no)?;
            }
            weights.push(w);
        }
    }
    Graph::new(n, weights, family).context("matrix does not form a valid graph")
}

/// Integers print as integers; reals with 17 significant digits.
pub fn format_weight(w: f64, family: &WeightFamily) -> String {
    if family.integer_valued() {
        format!("{w:.0}")
    } else {
        format!("{w:.16e}")
    }
}

/// Nonzero edges only, with a `src,dst,weight` header.
pub fn write_edge_list(graph: &Graph, family: &WeightFamily) -> String {
    let mut out = String::from("src,dst,weight\n");
    for (i, j, w) in graph.edges() {
        let _ = writeln!(out, "{},{},{}", i + 1, j + 1, format_weight(w, family));
    }
    out
}

pub fn write_dense(graph: &Graph, family: &WeightFamily) -> String {
    let n = graph.n();
    let mut out = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format_weight(graph.weight(i, j), family)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
