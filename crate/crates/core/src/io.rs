//! Plain-text formats for data matrices, scores, truth tables and
//! hyperparameters.
//!
//! Data files have a header `v,<sample ids...>` and one row per vertex.
//! Score tables are long-format CSV `vertex,row,col,method,score`. Floats are
//! written in Rust's shortest round-trip form unless noted.

use nalgebra::DMatrix;

use crate::engine::{GlobalHyperparams, LfdrResult, ScaleSource};
use crate::error::{Error, Result};
use crate::graph::Lattice;
use crate::model::{DataMatrices, Hyperparams};
use crate::numeric::fmt_sig8;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_f64(field: &str, line: usize, col: usize) -> Result<f64> {
    let t = field.trim();
    if t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>()
        .map_err(|_| parse_err(line, format!("column {col}: cannot parse {t:?} as a number")))
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// One group's data matrix with its sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub sample_ids: Vec<String>,
    pub values: DMatrix<f64>,
}

pub fn read_data_csv(text: &str) -> Result<DataTable> {
    let mut it = lines(text);
    let (hline, header) = it.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.first() != Some(&"v") {
        return Err(parse_err(hline, "header must start with `v`"));
    }
    let sample_ids: Vec<String> = fields[1..].iter().map(|s| s.to_string()).collect();
    if sample_ids.is_empty() {
        return Err(parse_err(hline, "no sample columns"));
    }
    let m = sample_ids.len();
    let mut values = Vec::new();
    let mut n = 0;
    for (ln, l) in it {
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != m + 1 {
            return Err(parse_err(ln, format!("expected {} fields, found {}", m + 1, f.len())));
        }
        let id: usize = f[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(ln, format!("column 1: bad vertex id {:?}", f[0].trim())))?;
        if id != n {
            return Err(parse_err(ln, format!("column 1: expected vertex {n}, found {id}")));
        }
        for (c, field) in f[1..].iter().enumerate() {
            let v = parse_f64(field, ln, c + 2)?;
            if !v.is_finite() {
                return Err(parse_err(ln, format!("column {}: missing or non-finite value", c + 2)));
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(parse_err(hline, "no data rows"));
    }
    Ok(DataTable { sample_ids, values: DMatrix::from_row_slice(n, m, &values) })
}

pub fn write_data_csv(table: &DataTable) -> String {
    let mut out = String::from("v");
    for id in &table.sample_ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for v in 0..table.values.nrows() {
        out.push_str(&v.to_string());
        for x in table.values.row(v).iter() {
            out.push(',');
            out.push_str(&format!("{x:?}"));
        }
        out.push('\n');
    }
    out
}

/// Data tables for both groups with generated sample ids `x1.., y1..`.
pub fn data_tables(data: &DataMatrices) -> (DataTable, DataTable) {
    let ids = |p: &str, m: usize| (1..=m).map(|i| format!("{p}{i}")).collect();
    (
        DataTable { sample_ids: ids("x", data.m_x()), values: data.x().clone() },
        DataTable { sample_ids: ids("y", data.m_y()), values: data.y().clone() },
    )
}

fn coords(lattice: Option<Lattice>, v: usize) -> (String, String) {
    match lattice {
        Some(l) => {
            let (r, c) = l.coords(v);
            (r.to_string(), c.to_string())
        }
        None => ("NA".into(), "NA".into()),
    }
}

/// `vertex,row,col,lfdr` with eight significant digits; failed vertices
/// are written as `NA`. Row and column are `NA` without a lattice.
pub fn write_lfdr_csv(result: &LfdrResult, lattice: Option<Lattice>) -> String {
    let mut out = String::from("vertex,row,col,lfdr\n");
    for (v, &l) in result.lfdr.iter().enumerate() {
        let (r, c) = coords(lattice, v);
        out.push_str(&format!("{v},{r},{c},{}\n", fmt_sig8(l)));
    }
    out
}

/// Named score vectors in long format.
pub fn write_scores_csv(methods: &[(&str, &[f64])], lattice: Option<Lattice>) -> String {
    let mut out = String::from("vertex,row,col,method,score\n");
    for (name, scores) in methods {
        for (v, &s) in scores.iter().enumerate() {
            let (r, c) = coords(lattice, v);
            out.push_str(&format!("{v},{r},{c},{name},{}\n", fmt_sig8(s)));
        }
    }
    out
}

/// Reads either a long-format score table or an lfdr table (whose scores
/// are reported under `default_method`). Methods keep their file order and
/// each must list vertices `0..n` in order.
pub fn read_scores_csv(text: &str, default_method: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut it = lines(text);
    let (hline, header) = it.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let (method_col, score_col) = match cols.as_slice() {
        ["vertex", "row", "col", "method", "score"] => (Some(3), 4),
        ["vertex", "row", "col", "lfdr"] => (None, 3),
        ["vertex", "score"] => (None, 1),
        _ => return Err(parse_err(hline, format!("unrecognised score header {header:?}"))),
    };
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (ln, l) in it {
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != cols.len() {
            return Err(parse_err(ln, format!("expected {} fields, found {}", cols.len(), f.len())));
        }
        let method = method_col.map_or(default_method, |c| f[c]);
        let v: usize = f[0].parse().map_err(|_| parse_err(ln, format!("column 1: bad vertex id {:?}", f[0])))?;
        let score = parse_f64(f[score_col], ln, score_col + 1)?;
        let slot = match out.iter().position(|(m, _)| m == method) {
            Some(i) => i,
            None => {
                out.push((method.to_string(), Vec::new()));
                out.len() - 1
            }
        };
        let scores = &mut out[slot].1;
        if v != scores.len() {
            return Err(parse_err(ln, format!("method {method}: expected vertex {}, found {v}", scores.len())));
        }
        scores.push(score);
    }
    Ok(out)
}

/// `vertex,row,col,null,block` for a latent truth.
pub fn write_truth_csv(truth_null: &[bool], labels: &[usize], lattice: Option<Lattice>) -> String {
    let mut out = String::from("vertex,row,col,null,block\n");
    for (v, (&null, &b)) in truth_null.iter().zip(labels).enumerate() {
        let (r, c) = coords(lattice, v);
        out.push_str(&format!("{v},{r},{c},{},{b}\n", null as u8));
    }
    out
}

pub fn read_truth_csv(text: &str) -> Result<Vec<bool>> {
    let mut it = lines(text);
    let (hline, header) = it.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let null_col = cols
        .iter()
        .position(|&c| c == "null")
        .ok_or_else(|| parse_err(hline, "truth header has no `null` column"))?;
    let mut out = Vec::new();
    for (ln, l) in it {
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != cols.len() {
            return Err(parse_err(ln, format!("expected {} fields, found {}", cols.len(), f.len())));
        }
        let v: usize = f[0].parse().map_err(|_| parse_err(ln, "column 1: bad vertex id"))?;
        if v != out.len() {
            return Err(parse_err(ln, format!("column 1: expected vertex {}, found {v}", out.len())));
        }
        out.push(match f[null_col] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(parse_err(ln, format!("column {}: bad null flag {other:?}", null_col + 1))),
        });
    }
    Ok(out)
}

fn write_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    out.push_str(&format!("[{name}]\n"));
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
}

/// Key-value listing of the hyperparameters. Scale matrices are written as
/// CSV blocks headed `[A]` and `[B]`; a pooled on-demand scale records only
/// its settings.
pub fn write_hyperparams(h: &GlobalHyperparams) -> String {
    let mut out = String::new();
    for (k, v) in [("mu0", h.mu0), ("tau2", h.tau2), ("delta0", h.delta0), ("sigma2", h.sigma2), ("p0", h.p0)] {
        out.push_str(&format!("{k}={v:?}\n"));
    }
    match &h.scale {
        ScaleSource::Shared { df, a, b } | ScaleSource::Full { df, a, b } => {
            out.push_str(&format!("df={df:?}\n"));
            write_matrix(&mut out, "A", a);
            write_matrix(&mut out, "B", b);
        }
        ScaleSource::Pooled { df_excess, shrink, shared, .. } => {
            out.push_str(&format!("scale=pooled\ndf_excess={df_excess:?}\nshrink={shrink:?}\nshared={shared}\n"));
        }
    }
    out
}

/// Parses a file written by [`write_hyperparams`] with explicit matrices.
pub fn read_hyperparams(text: &str) -> Result<Hyperparams> {
    let mut scalars = std::collections::HashMap::new();
    let mut mats: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    let mut current: Option<usize> = None;
    let mut last_line = 1;
    for (ln, l) in lines(text) {
        last_line = ln;
        let l = l.trim();
        if l.starts_with('#') {
            continue;
        }
        match l {
            "[A]" => current = Some(0),
            "[B]" => current = Some(1),
            _ if l.contains('=') => {
                let (k, v) = l.split_once('=').expect("checked");
                let k = k.trim();
                if !["mu0", "tau2", "delta0", "sigma2", "p0", "df"].contains(&k) {
                    return Err(parse_err(ln, format!("unknown key {k:?}")));
                }
                scalars.insert(k.to_string(), parse_f64(v, ln, 2)?);
                current = None;
            }
            _ => {
                let slot = current.ok_or_else(|| parse_err(ln, "matrix row outside an [A] or [B] block"))?;
                let row = l
                    .split(',')
                    .enumerate()
                    .map(|(c, f)| parse_f64(f, ln, c + 1))
                    .collect::<Result<Vec<f64>>>()?;
                mats[slot].push(row);
            }
        }
    }
    let get = |k: &str| scalars.get(k).copied().ok_or_else(|| parse_err(last_line, format!("missing key {k}")));
    let to_matrix = |rows: &[Vec<f64>], name: &str| -> Result<DMatrix<f64>> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(parse_err(last_line, format!("matrix {name} must be square and non-empty")));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    };
    let h = Hyperparams {
        mu0: get("mu0")?,
        tau2: get("tau2")?,
        delta0: get("delta0")?,
        sigma2: get("sigma2")?,
        df: get("df")?,
        a: to_matrix(&mats[0], "A")?,
        b: to_matrix(&mats[1], "B")?,
        p0: get("p0")?,
    };
    h.validate()?;
    Ok(h)
}
