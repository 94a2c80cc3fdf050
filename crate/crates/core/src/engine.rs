//! Local false-discovery rates by exact summation over every discrete state
//! of each vertex's patch.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, Lattice, PatchShape};
use crate::model::{log_prior_mass, DataMatrices, DiscreteState, Hyperparams, LaplaceOptions, PatchModel};
use crate::numeric::log_sum_exp;
use crate::partition::{enumerate_graph_respecting_capped, Partition, DEFAULT_ENUMERATION_CAP};

/// Where each patch gets its inverse-Wishart scale matrices from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleSource {
    /// One pair of patch-sized matrices shared by every patch. This is the
    /// restriction of a stationary global matrix to identically shaped
    /// windows.
    Shared { df: f64, a: DMatrix<f64>, b: DMatrix<f64> },
    /// Whole-graph matrices; each patch uses its principal submatrix.
    Full { df: f64, a: DMatrix<f64>, b: DMatrix<f64> },
    /// Pooled within-group covariance of the patch, formed on demand from
    /// centred residuals (vertices x replicates). Off-diagonals are scaled by
    /// `shrink`; `df = n_patch + df_excess` and the scale is
    /// `(df - n_patch - 1)` times the covariance, so the prior mean equals it.
    Pooled {
        df_excess: f64,
        shrink: f64,
        resid_x: DMatrix<f64>,
        resid_y: DMatrix<f64>,
        /// Use one covariance from both groups rather than one per group.
        shared: bool,
    },
}

/// Hyperparameters for a whole data set; [`GlobalHyperparams::for_patch`]
/// produces the patch-level [`Hyperparams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalHyperparams {
    pub mu0: f64,
    pub tau2: f64,
    pub delta0: f64,
    pub sigma2: f64,
    pub p0: f64,
    pub scale: ScaleSource,
}

impl GlobalHyperparams {
    /// Wraps patch-level hyperparameters so every patch uses them unchanged.
    pub fn shared(h: Hyperparams) -> Self {
        GlobalHyperparams {
            mu0: h.mu0,
            tau2: h.tau2,
            delta0: h.delta0,
            sigma2: h.sigma2,
            p0: h.p0,
            scale: ScaleSource::Shared { df: h.df, a: h.a, b: h.b },
        }
    }

    pub fn for_patch(&self, patch: &[usize]) -> Result<Hyperparams> {
        let n = patch.len();
        let sub = |m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
            if let Some(&bad) = patch.iter().find(|&&v| v >= m.nrows()) {
                return Err(Error::invalid(format!("vertex {bad} outside the {}x{} scale matrix", m.nrows(), m.ncols())));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| m[(patch[i], patch[j])]))
        };
        let (df, a, b) = match &self.scale {
            ScaleSource::Shared { df, a, b } => {
                if a.nrows() != n {
                    return Err(Error::invalid(format!(
                        "shared scale matrices are {}x{} but the patch has {n} vertices",
                        a.nrows(),
                        a.ncols()
                    )));
                }
                (*df, a.clone(), b.clone())
            }
            ScaleSource::Full { df, a, b } => (*df, sub(a)?, sub(b)?),
            ScaleSource::Pooled { df_excess, shrink, resid_x, resid_y, shared } => {
                let df = n as f64 + df_excess;
                let factor = df - n as f64 - 1.0;
                let cov = |blocks: &[&DMatrix<f64>]| -> Result<DMatrix<f64>> {
                    let reps: usize = blocks.iter().map(|m| m.ncols()).sum();
                    let denom = (reps - blocks.len()) as f64;
                    let mut c = DMatrix::zeros(n, n);
                    for i in 0..n {
                        for j in i..n {
                            let mut s = 0.0;
                            for m in blocks {
                                if patch[i].max(patch[j]) >= m.nrows() {
                                    return Err(Error::invalid("patch vertex outside residual matrix"));
                                }
                                s += m.row(patch[i]).dot(&m.row(patch[j]));
                            }
                            let v = s / denom * if i == j { 1.0 } else { *shrink };
                            c[(i, j)] = factor * v;
                            c[(j, i)] = factor * v;
                        }
                    }
                    Ok(c)
                };
                if *shared {
                    let a = cov(&[resid_x, resid_y])?;
                    (df, a.clone(), a)
                } else {
                    (df, cov(&[resid_x])?, cov(&[resid_y])?)
                }
            }
        };
        Ok(Hyperparams {
            mu0: self.mu0,
            tau2: self.tau2,
            delta0: self.delta0,
            sigma2: self.sigma2,
            df,
            a,
            b,
            p0: self.p0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub laplace: LaplaceOptions,
    /// Largest patch the exact enumeration will accept.
    pub enumeration_cap: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            laplace: LaplaceOptions::default(),
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

/// One discrete state with its unnormalised and normalised log weight.
#[derive(Debug, Clone)]
pub struct WeightedState {
    pub state: DiscreteState,
    /// `log f(X, Y | state) + log P(state)`.
    pub log_weight: f64,
    pub probability: f64,
}

/// The posterior over all discrete states of one patch.
#[derive(Debug, Clone)]
pub struct PatchPosterior {
    pub states: Vec<WeightedState>,
    /// Log of the sum of all unnormalised weights.
    pub log_norm: f64,
}

impl PatchPosterior {
    /// Posterior probability that patch vertex `v` is null, computed as the
    /// ratio of null-state mass to total mass.
    pub fn null_probability(&self, v: usize) -> f64 {
        let null: Vec<f64> = self
            .states
            .iter()
            .filter(|s| s.state.is_null_at(v))
            .map(|s| s.log_weight)
            .collect();
        (log_sum_exp(&null) - self.log_norm).exp().min(1.0)
    }
}

/// Posterior over every (partition, indicator) state of a patch whose
/// graph-respecting partitions are given.
pub fn posterior_with_partitions(
    data: &DataMatrices,
    partitions: &[Partition],
    hyper: &Hyperparams,
    opts: &LaplaceOptions,
) -> Result<PatchPosterior> {
    if partitions.is_empty() {
        return Err(Error::invalid("no partitions to sum over"));
    }
    let model = PatchModel::new(data, hyper)?;
    let mut states = Vec::new();
    for p in partitions {
        if p.len() != data.n_vertices() {
            return Err(Error::invalid("partition size differs from patch size"));
        }
        for mask in 0..(1u64 << p.n_blocks()) {
            let state = DiscreteState::from_mask(p.clone(), mask);
            let prior = log_prior_mass(&state, hyper, partitions.len())?;
            let log_weight = if prior == f64::NEG_INFINITY {
                prior
            } else {
                let lap = model.laplace(&state, opts).map_err(|e| Error::InState {
                    state: describe(&state),
                    source: Box::new(e),
                })?;
                prior + lap.log_marginal
            };
            states.push(WeightedState { state, log_weight, probability: 0.0 });
        }
    }
    let weights: Vec<f64> = states.iter().map(|s| s.log_weight).collect();
    let log_norm = log_sum_exp(&weights);
    if !log_norm.is_finite() {
        return Err(Error::domain("patch posterior has no finite mass"));
    }
    for s in &mut states {
        s.probability = (s.log_weight - log_norm).exp();
    }
    Ok(PatchPosterior { states, log_norm })
}

fn describe(state: &DiscreteState) -> String {
    let d: Vec<&str> = state.delta.iter().map(|&b| if b { "1" } else { "0" }).collect();
    format!("partition [{}] delta [{}]", state.partition.to_line(), d.join(","))
}

/// Posterior over all states of a patch with the given graph.
pub fn posterior_over_states(data: &DataMatrices, patch_graph: &Graph, hyper: &Hyperparams) -> Result<PatchPosterior> {
    if patch_graph.n_vertices() != data.n_vertices() {
        return Err(Error::invalid(format!(
            "patch graph has {} vertices but data has {} rows",
            patch_graph.n_vertices(),
            data.n_vertices()
        )));
    }
    let parts = enumerate_graph_respecting_capped(patch_graph, DEFAULT_ENUMERATION_CAP)?;
    posterior_with_partitions(data, &parts, hyper, &LaplaceOptions::default())
}

/// Per-vertex record of how its local fdr was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexDiagnostics {
    /// Index of the patch the vertex was scored on.
    pub patch: usize,
    pub n_states: usize,
    pub log_norm: f64,
    /// Set when the patch failed; the vertex's lfdr is then NaN.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LfdrResult {
    pub lfdr: Vec<f64>,
    pub diagnostics: Vec<VertexDiagnostics>,
    /// Vertex lists of each patch, indexed by `VertexDiagnostics::patch`.
    pub patches: Vec<Vec<usize>>,
}

impl LfdrResult {
    pub fn len(&self) -> usize {
        self.lfdr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lfdr.is_empty()
    }

    pub fn n_failed(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.error.is_some()).count()
    }
}

/// A patch to score and the patch-local positions of the vertices whose
/// lfdr it supplies.
struct Job {
    vertices: Vec<usize>,
    targets: Vec<(usize, usize)>,
    partitions: Arc<Vec<Partition>>,
}

fn run_jobs(data: &DataMatrices, jobs: Vec<Job>, hyper: &GlobalHyperparams, cfg: &EngineConfig) -> Result<LfdrResult> {
    let n = data.n_vertices();
    let outcomes: Vec<std::result::Result<PatchPosterior, Error>> = jobs
        .par_iter()
        .map(|job| {
            let h = hyper.for_patch(&job.vertices)?;
            let sub = data.restrict_rows(&job.vertices)?;
            posterior_with_partitions(&sub, &job.partitions, &h, &cfg.laplace)
        })
        .collect();

    let mut lfdr = vec![f64::NAN; n];
    let mut diagnostics = vec![
        VertexDiagnostics { patch: usize::MAX, n_states: 0, log_norm: f64::NAN, error: None };
        n
    ];
    for (pid, (job, outcome)) in jobs.iter().zip(&outcomes).enumerate() {
        for &(v, local) in &job.targets {
            let d = &mut diagnostics[v];
            d.patch = pid;
            match outcome {
                Ok(post) => {
                    lfdr[v] = post.null_probability(local);
                    d.n_states = post.states.len();
                    d.log_norm = post.log_norm;
                }
                Err(e) => {
                    // Bad input is not a per-patch failure.
                    if !e.is_numeric() {
                        return Err(e.clone());
                    }
                    d.error = Some(e.to_string());
                }
            }
        }
    }
    let patches = jobs.into_iter().map(|j| j.vertices).collect();
    Ok(LfdrResult { lfdr, diagnostics, patches })
}

/// Local fdr of every vertex of a lattice, each from the window of `shape`
/// in which it is central. Vertices sharing a window share one posterior.
pub fn lfdr_all(
    data: &DataMatrices,
    lattice: Lattice,
    shape: PatchShape,
    hyper: &GlobalHyperparams,
    cfg: &EngineConfig,
) -> Result<LfdrResult> {
    if data.n_vertices() != lattice.n_vertices() {
        return Err(Error::invalid(format!(
            "data has {} rows but the {}x{} lattice has {} vertices",
            data.n_vertices(),
            lattice.rows,
            lattice.cols,
            lattice.n_vertices()
        )));
    }
    if shape.size() > cfg.enumeration_cap {
        return Err(Error::ResourceLimit {
            what: "patch size",
            requested: shape.size(),
            limit: cfg.enumeration_cap,
        });
    }
    let window_graph = Lattice::new(shape.rows, shape.cols)?.graph();
    let partitions = Arc::new(enumerate_graph_respecting_capped(&window_graph, cfg.enumeration_cap)?);

    let mut by_origin: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for v in 0..lattice.n_vertices() {
        by_origin.entry(lattice.patch_origin(v, shape)?).or_default().push(v);
    }
    let jobs = by_origin
        .into_iter()
        .map(|(origin, members)| {
            let vertices = lattice.window(origin, shape);
            let targets = members
                .into_iter()
                .map(|v| (v, vertices.iter().position(|&w| w == v).expect("vertex lies in its window")))
                .collect();
            Job { vertices, targets, partitions: Arc::clone(&partitions) }
        })
        .collect();
    run_jobs(data, jobs, hyper, cfg)
}

/// Local fdr of every vertex of an arbitrary graph, each scored on the
/// breadth-first ball of the given radius around it (capped in size).
pub fn lfdr_graph(
    data: &DataMatrices,
    graph: &Graph,
    radius: usize,
    hyper: &GlobalHyperparams,
    cfg: &EngineConfig,
) -> Result<LfdrResult> {
    if data.n_vertices() != graph.n_vertices() {
        return Err(Error::invalid(format!(
            "data has {} rows but the graph has {} vertices",
            data.n_vertices(),
            graph.n_vertices()
        )));
    }
    let mut cache: HashMap<Vec<(usize, usize)>, Arc<Vec<Partition>>> = HashMap::new();
    let mut jobs = Vec::with_capacity(graph.n_vertices());
    for v in 0..graph.n_vertices() {
        let ball = graph.bfs_ball(v, radius, cfg.enumeration_cap)?;
        let sub = graph.induced_subgraph(&ball)?;
        let mut key = sub.edges().to_vec();
        key.push((usize::MAX, ball.len()));
        let partitions = match cache.get(&key) {
            Some(p) => Arc::clone(p),
            None => {
                let p = Arc::new(enumerate_graph_respecting_capped(&sub, cfg.enumeration_cap)?);
                cache.insert(key, Arc::clone(&p));
                p
            }
        };
        jobs.push(Job { vertices: ball, targets: vec![(v, 0)], partitions });
    }
    run_jobs(data, jobs, hyper, cfg)
}

/// Vertices with `l_v <= c`, in increasing id order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryList {
    pub threshold: f64,
    pub vertices: Vec<usize>,
    /// Mean lfdr over the list; `None` when the list is empty.
    pub controlled_fdr: Option<f64>,
}

pub fn discovery_list(result: &LfdrResult, c: f64) -> Result<DiscoveryList> {
    threshold_list(&result.lfdr, c)
}

/// [`discovery_list`] for a bare score vector.
pub fn threshold_list(scores: &[f64], c: f64) -> Result<DiscoveryList> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::invalid(format!("threshold must be in [0, 1], got {c}")));
    }
    let vertices: Vec<usize> = (0..scores.len()).filter(|&v| scores[v] <= c).collect();
    let controlled_fdr = mean_over(scores, &vertices);
    Ok(DiscoveryList { threshold: c, vertices, controlled_fdr })
}

/// Mean of `l_v` over the listed vertices, or `None` for an empty list.
pub fn controlled_fdr(result: &LfdrResult, list: &DiscoveryList) -> Option<f64> {
    mean_over(&result.lfdr, &list.vertices)
}

fn mean_over(scores: &[f64], vertices: &[usize]) -> Option<f64> {
    if vertices.is_empty() {
        return None;
    }
    Some(vertices.iter().map(|&v| scores[v]).sum::<f64>() / vertices.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn hyper(n: usize, p0: f64) -> Hyperparams {
        Hyperparams {
            mu0: 0.0,
            tau2: 1.0,
            delta0: 0.0,
            sigma2: 1.0,
            df: n as f64 + 2.0,
            a: DMatrix::identity(n, n),
            b: DMatrix::identity(n, n),
            p0,
        }
    }

    fn noise(n: usize, m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(rng))
    }

    fn result_from(l: &[f64]) -> LfdrResult {
        LfdrResult { lfdr: l.to_vec(), diagnostics: vec![], patches: vec![] }
    }

    #[test]
    fn two_vertex_path_has_six_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = DataMatrices::new(noise(2, 4, &mut rng), noise(2, 4, &mut rng)).unwrap();
        let post = posterior_over_states(&data, &Graph::path(2), &hyper(2, 0.8)).unwrap();
        assert_eq!(post.states.len(), 6);
        let total: f64 = post.states.iter().map(|s| s.probability).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn p0_one_puts_all_mass_on_null_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = DataMatrices::new(noise(2, 4, &mut rng), noise(2, 4, &mut rng).add_scalar(3.0)).unwrap();
        let post = posterior_over_states(&data, &Graph::path(2), &hyper(2, 1.0)).unwrap();
        for s in &post.states {
            if s.state.n_shifted() > 0 {
                assert_eq!(s.probability, 0.0);
            }
        }
        assert_eq!(post.null_probability(0), 1.0);
        assert_eq!(post.null_probability(1), 1.0);
    }

    #[test]
    fn common_large_shift_favours_one_shifted_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = noise(2, 6, &mut rng) * 0.3;
        let y = noise(2, 6, &mut rng) * 0.3;
        let data = DataMatrices::new(x, y.add_scalar(4.0)).unwrap();
        let post = posterior_over_states(&data, &Graph::path(2), &hyper(2, 0.8)).unwrap();
        let best = post
            .states
            .iter()
            .max_by(|a, b| a.probability.total_cmp(&b.probability))
            .unwrap();
        assert_eq!(best.state.partition.n_blocks(), 1);
        assert_eq!(best.state.delta, vec![true]);
    }

    #[test]
    fn zero_data_favours_null() {
        let data = DataMatrices::new(DMatrix::zeros(9, 4), DMatrix::zeros(9, 4)).unwrap();
        let g = GlobalHyperparams::shared(hyper(4, 0.9));
        let r = lfdr_all(&data, Lattice::new(3, 3).unwrap(), PatchShape::default(), &g, &EngineConfig::default()).unwrap();
        assert!(r.lfdr.iter().all(|&l| l > 0.5 && l <= 1.0), "{:?}", r.lfdr);
        assert_eq!(r.n_failed(), 0);
        assert_eq!(r.diagnostics[0].n_states, 74);
    }

    #[test]
    fn windows_are_shared_between_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = DataMatrices::new(noise(12, 5, &mut rng), noise(12, 5, &mut rng)).unwrap();
        let g = GlobalHyperparams::shared(hyper(4, 0.8));
        let r = lfdr_all(&data, Lattice::new(3, 4).unwrap(), PatchShape::default(), &g, &EngineConfig::default()).unwrap();
        assert_eq!(r.patches.len(), 6);
        // the bottom-right corner reuses the window of its upper-left neighbour
        assert_eq!(r.diagnostics[11].patch, r.diagnostics[6].patch);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let data = DataMatrices::new(DMatrix::zeros(4, 3), DMatrix::zeros(4, 3)).unwrap();
        let g = GlobalHyperparams::shared(hyper(4, 0.8));
        let e = lfdr_all(&data, Lattice::new(3, 3).unwrap(), PatchShape::default(), &g, &EngineConfig::default());
        assert!(matches!(e, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pooled_scale_matches_direct_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rx = noise(5, 6, &mut rng);
        let ry = noise(5, 7, &mut rng);
        let g = GlobalHyperparams {
            mu0: 0.0,
            tau2: 1.0,
            delta0: 0.0,
            sigma2: 1.0,
            p0: 0.8,
            scale: ScaleSource::Pooled { df_excess: 2.0, shrink: 0.9, resid_x: rx.clone(), resid_y: ry.clone(), shared: true },
        };
        let h = g.for_patch(&[3, 1]).unwrap();
        assert_eq!(h.df, 4.0);
        let s31 = (rx.row(3).dot(&rx.row(1)) + ry.row(3).dot(&ry.row(1))) / 11.0;
        let s33 = (rx.row(3).dot(&rx.row(3)) + ry.row(3).dot(&ry.row(3))) / 11.0;
        assert!((h.a[(0, 1)] - 0.9 * s31).abs() < 1e-12);
        assert!((h.a[(0, 0)] - s33).abs() < 1e-12);
        assert_eq!(h.a, h.b);
    }

    #[test]
    fn graph_mode_on_a_path_scores_every_vertex() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = DataMatrices::new(noise(6, 5, &mut rng), noise(6, 5, &mut rng)).unwrap();
        let g = Graph::path(6);
        let resid_x = data.x().clone();
        let resid_y = data.y().clone();
        let h = GlobalHyperparams {
            mu0: 0.0,
            tau2: 1.0,
            delta0: 0.0,
            sigma2: 1.0,
            p0: 0.8,
            scale: ScaleSource::Pooled { df_excess: 2.0, shrink: 0.9, resid_x, resid_y, shared: true },
        };
        let r = lfdr_graph(&data, &g, 1, &h, &EngineConfig::default()).unwrap();
        assert_eq!(r.diagnostics[0].n_states, 6);
        assert_eq!(r.diagnostics[2].n_states, 18);
        assert!(r.lfdr.iter().all(|l| (0.0..=1.0).contains(l)));
    }

    #[test]
    fn discovery_examples() {
        let r = result_from(&[0.01, 0.04, 0.2]);
        let l = discovery_list(&r, 0.05).unwrap();
        assert_eq!(l.vertices, vec![0, 1]);
        assert!((controlled_fdr(&r, &l).unwrap() - 0.025).abs() < 1e-15);
        assert_eq!(discovery_list(&r, 1.0).unwrap().vertices.len(), 3);
        let empty = discovery_list(&r, 0.0).unwrap();
        assert!(empty.vertices.is_empty());
        assert_eq!(controlled_fdr(&r, &empty), None);
        assert_eq!(discovery_list(&r, 0.01).unwrap().controlled_fdr, Some(0.01));
        assert!(discovery_list(&r, 1.5).is_err());
    }

    #[test]
    fn failed_vertices_are_not_listed() {
        let r = result_from(&[f64::NAN, 0.01]);
        assert_eq!(discovery_list(&r, 1.0).unwrap().vertices, vec![1]);
    }
}
