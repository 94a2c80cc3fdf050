use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::Lattice;
use crate::model::DataMatrices;
use crate::partition::{sample_graph_respecting, Partition, RandTracker};

/// Parameters of a synthetic lattice data set.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Target block sizes; the number of blocks is set so the mean block
    /// size is the midpoint of this range.
    pub block_size_min: f64,
    pub block_size_max: f64,
    /// Fraction of blocks whose group-2 mean is shifted.
    pub fraction_shifted: f64,
    /// Shift magnitudes are `N(shift_mean, shift_sd^2)` with a random sign.
    pub shift_mean: f64,
    pub shift_sd: f64,
    #[serde(default)]
    pub mu0: f64,
    #[serde(default = "one")]
    pub tau2: f64,
    /// Marginal noise variance `s^2`.
    #[serde(default = "one")]
    pub noise_var: f64,
    /// Noise covariance is `s^2 exp(-decay * dist(u, v))` with lattice
    /// (Manhattan) distance.
    pub noise_decay: f64,
    pub m_x: usize,
    pub m_y: usize,
    #[serde(default)]
    pub seed: u64,
    /// When set, the latent partition is scrambled to this Rand index with a
    /// graph-respecting one (see [`generate_non_respecting_scenario`]).
    #[serde(default)]
    pub target_rand_index: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.rows, self.cols)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rows * self.cols;
        if n == 0 {
            return Err(Error::invalid("lattice must be non-empty"));
        }
        if !(self.block_size_min >= 1.0 && self.block_size_min <= self.block_size_max) {
            return Err(Error::invalid(format!(
                "block size range [{}, {}] is infeasible",
                self.block_size_min, self.block_size_max
            )));
        }
        if self.block_size_min > n as f64 {
            return Err(Error::invalid(format!("block size {} exceeds the {n} vertices", self.block_size_min)));
        }
        if !(0.0..=1.0).contains(&self.fraction_shifted) {
            return Err(Error::invalid("fraction_shifted must be in [0, 1]"));
        }
        if !(self.shift_sd >= 0.0 && self.tau2 >= 0.0 && self.noise_var > 0.0 && self.noise_decay > 0.0) {
            return Err(Error::invalid("variances must be non-negative, noise_var and noise_decay positive"));
        }
        if self.m_x < 2 || self.m_y < 2 {
            return Err(Error::invalid("each group needs at least two replicates"));
        }
        Ok(())
    }

    /// Number of blocks giving the target mean block size.
    pub fn n_blocks(&self) -> usize {
        let n = (self.rows * self.cols) as f64;
        let mid = 0.5 * (self.block_size_min + self.block_size_max);
        ((n / mid).round() as usize).clamp(1, self.rows * self.cols)
    }
}

/// A generated data set with its latent truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub data: DataMatrices,
    pub truth_partition: Partition,
    pub truth_delta: Vec<bool>,
    /// Per-vertex null status.
    pub truth_null: Vec<bool>,
    /// The graph-respecting partition a scrambled truth was derived from.
    pub reference_partition: Option<Partition>,
}

/// Draws block means, shifts and correlated noise for a given partition.
fn populate<R: Rng + ?Sized>(cfg: &ScenarioConfig, partition: Partition, rng: &mut R) -> Result<SyntheticDataset> {
    let k = partition.n_blocks();
    let n_shift = (cfg.fraction_shifted * k as f64).round() as usize;
    let mut truth_delta = vec![false; k];
    for i in rand::seq::index::sample(rng, k, n_shift) {
        truth_delta[i] = true;
    }
    let phi_dist = Normal::new(cfg.mu0, cfg.tau2.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let shift_dist = Normal::new(cfg.shift_mean, cfg.shift_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let phi: Vec<f64> = (0..k).map(|_| phi_dist.sample(rng)).collect();
    let shift: Vec<f64> = truth_delta
        .iter()
        .map(|&d| {
            if d {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                sign * shift_dist.sample(rng)
            } else {
                0.0
            }
        })
        .collect();

    let corr = |len: usize| -> Result<DMatrix<f64>> {
        let c = DMatrix::from_fn(len, len, |i, j| (-cfg.noise_decay * i.abs_diff(j) as f64).exp());
        Ok(c.cholesky().ok_or_else(|| Error::domain("noise correlation is not positive definite"))?.l())
    };
    let lr = corr(cfg.rows)?;
    let lc = corr(cfg.cols)?;
    let s = cfg.noise_var.sqrt();
    let n = cfg.rows * cfg.cols;
    let labels = partition.labels().to_vec();
    let group = |reps: usize, shifted: bool, rng: &mut R| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, reps);
        for m in 0..reps {
            let z = DMatrix::from_fn(cfg.rows, cfg.cols, |_, _| StandardNormal.sample(rng));
            let e = &lr * z * lc.transpose();
            for v in 0..n {
                let b = labels[v];
                let mean = phi[b] + if shifted { shift[b] } else { 0.0 };
                out[(v, m)] = mean + s * e[(v / cfg.cols, v % cfg.cols)];
            }
        }
        out
    };
    let x = group(cfg.m_x, false, rng);
    let y = group(cfg.m_y, true, rng);
    let truth_null = labels.iter().map(|&b| !truth_delta[b]).collect();
    Ok(SyntheticDataset {
        data: DataMatrices::new(x, y)?,
        truth_partition: partition,
        truth_delta,
        truth_null,
        reference_partition: None,
    })
}

/// Lattice data whose latent partition is graph-respecting, or scrambled
/// when `cfg.target_rand_index` is set.
pub fn generate<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<SyntheticDataset> {
    match cfg.target_rand_index {
        Some(t) => generate_non_respecting_scenario(cfg, t, rng),
        None => generate_scenario(cfg, rng),
    }
}

/// Lattice data whose latent partition is graph-respecting.
pub fn generate_scenario<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let graph = cfg.lattice()?.graph();
    let partition = sample_graph_respecting(&graph, cfg.n_blocks(), rng)?;
    populate(cfg, partition, rng)
}

/// Accepted distance between the achieved and the requested Rand index.
pub const NON_RESPECTING_TOLERANCE: f64 = 0.05;

/// Lattice data whose latent partition is scrambled away from a
/// graph-respecting one until its Rand index with the original is within
/// [`NON_RESPECTING_TOLERANCE`] of `target_rand_index`.
///
/// Label swaps keep block sizes fixed, and for fixed sizes the Rand index
/// cannot fall much below `s^2 + (1 - s)^2`, `s` being the chance that a
/// random pair is co-blocked. Targets near one half therefore need two
/// blocks of similar size, so the base partition has two blocks and is
/// redrawn until the target is reachable. The configured fraction of those
/// two blocks is shifted.
pub fn generate_non_respecting_scenario<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    target_rand_index: f64,
    rng: &mut R,
) -> Result<SyntheticDataset> {
    cfg.validate()?;
    if !(target_rand_index > 0.0 && target_rand_index < 1.0) {
        return Err(Error::invalid(format!("target Rand index must be in (0, 1), got {target_rand_index}")));
    }
    let n = cfg.rows * cfg.cols;
    if n < 4 {
        return Err(Error::invalid("need at least four vertices"));
    }
    let graph = cfg.lattice()?.graph();
    let total = n as f64 * (n as f64 - 1.0) / 2.0;
    let mut base = None;
    for _ in 0..500 {
        let p = sample_graph_respecting(&graph, 2, rng)?;
        let s: f64 = p.block_sizes().iter().map(|&a| a as f64 * (a as f64 - 1.0) / 2.0).sum::<f64>() / total;
        if s * s + (1.0 - s) * (1.0 - s) <= target_rand_index + 0.5 * NON_RESPECTING_TOLERANCE {
            base = Some(p);
            break;
        }
    }
    let base = base.ok_or_else(|| {
        Error::invalid(format!("no two-block base partition can reach Rand index {target_rand_index}"))
    })?;

    let reference = base.labels().to_vec();
    let mut labels = reference.clone();
    let mut tracker = RandTracker::new(&reference, &labels);
    let max_swaps = 50 * n;
    let mut members: Vec<Vec<usize>> = base.blocks();
    let mut swaps = 0;
    // Once inside the band, keep walking for `n` more swaps and keep the
    // labelling closest to the target.
    let mut extra: Option<usize> = None;
    let mut best = (f64::INFINITY, labels.clone());
    loop {
        let gap = (tracker.index() - target_rand_index).abs();
        if gap <= NON_RESPECTING_TOLERANCE {
            if gap < best.0 {
                best = (gap, labels.clone());
            }
            extra.get_or_insert(n);
        }
        match extra.as_mut() {
            Some(0) => break,
            Some(left) => *left -= 1,
            None if swaps >= max_swaps => {
                return Err(Error::invalid(format!(
                    "Rand index {:.3} still outside {target_rand_index} +/- {NON_RESPECTING_TOLERANCE} after {max_swaps} swaps",
                    tracker.index()
                )));
            }
            None => {}
        }
        let i = rng.random_range(0..members[0].len());
        let j = rng.random_range(0..members[1].len());
        let (u, w) = (members[0][i], members[1][j]);
        tracker.relabel(reference[u], 0, 1);
        tracker.relabel(reference[w], 1, 0);
        labels[u] = 1;
        labels[w] = 0;
        members[0][i] = w;
        members[1][j] = u;
        swaps += 1;
    }
    let labels = best.1;
    let partition = Partition::from_labels(&labels);
    let mut out = populate(cfg, partition, rng)?;
    out.reference_partition = Some(base);
    Ok(out)
}
