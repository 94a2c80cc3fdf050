//! Run files, seeds, graph sources and file helpers shared by subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use graphmm::io::{read_data_csv, DataTable};
use graphmm::{lattice_graph, parse_dims, DataMatrices, Graph, HyperOverrides, Lattice, ShiftVarianceRule};
use serde::Deserialize;

use crate::exit::{Context, Failure};
use crate::GraphSource;

pub const SEED_ENV: &str = "GRAPHMM_SEED";

/// Settings for `score` read from a TOML run file. Relative paths are
/// taken relative to the file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub lattice: Option<String>,
    pub edges: Option<PathBuf>,
    pub patch: Option<String>,
    pub radius: Option<usize>,
    pub thresholds: Option<Vec<f64>>,
    pub hyper: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub separate_scales: Option<bool>,
    pub lambda: Option<f64>,
    pub df_excess: Option<f64>,
    pub shrink: Option<f64>,
    pub shift_variance: Option<ShiftVarianceRule>,
    #[serde(default)]
    pub overrides: HyperOverrides,
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = read_text(path)?;
        let mut rf: RunFile =
            toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut rf.x, &mut rf.y, &mut rf.edges, &mut rf.hyper, &mut rf.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(rf)
    }
}

/// Flag, then config file, then `GRAPHMM_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

/// Whether a TOML document sets `key` at the top level.
pub fn toml_has_key(text: &str, key: &str) -> bool {
    text.parse::<toml::Table>().map(|t| t.contains_key(key)).unwrap_or(false)
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
        }
    }
    fs::write(path, text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

pub fn read_table(path: &Path) -> Result<DataTable, Failure> {
    read_data_csv(&read_text(path)?).context(path.display())
}

pub fn read_data(x: &Path, y: &Path) -> Result<(DataTable, DataTable, DataMatrices), Failure> {
    let tx = read_table(x)?;
    let ty = read_table(y)?;
    if tx.values.nrows() != ty.values.nrows() {
        return Err(Failure::data(format!(
            "{} has {} vertices but {} has {}",
            x.display(),
            tx.values.nrows(),
            y.display(),
            ty.values.nrows()
        )));
    }
    let data = DataMatrices::new(tx.values.clone(), ty.values.clone())?;
    Ok((tx, ty, data))
}

pub fn check_thresholds(t: &[f64]) -> Result<(), Failure> {
    match t.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        Some(c) => Err(Failure::usage(format!("threshold {c} is outside [0, 1]"))),
        None if t.is_empty() => Err(Failure::usage("no thresholds given")),
        None => Ok(()),
    }
}

pub struct LoadedGraph {
    pub graph: Graph,
    pub lattice: Option<Lattice>,
}

/// Builds the graph from exactly one of `--lattice` and `--edges`.
pub fn load_graph(src: &GraphSource, n_vertices: Option<usize>) -> Result<LoadedGraph, Failure> {
    match (&src.lattice, &src.edges) {
        (Some(_), Some(_)) => Err(Failure::usage("give either --lattice or --edges, not both")),
        (None, None) => Err(Failure::usage("a graph is required: --lattice RxC or --edges FILE")),
        (Some(dims), None) => {
            let (r, c) = parse_dims(dims).map_err(|e| Failure::usage(e.to_string()))?;
            let lattice = Lattice::new(r, c).map_err(|e| Failure::usage(e.to_string()))?;
            let graph = lattice_graph(r, c).map_err(|e| Failure::usage(e.to_string()))?;
            Ok(LoadedGraph { graph, lattice: Some(lattice) })
        }
        (None, Some(path)) => {
            let graph = Graph::parse_edge_list(&read_text(path)?, n_vertices).context(path.display())?;
            Ok(LoadedGraph { graph, lattice: None })
        }
    }
}
