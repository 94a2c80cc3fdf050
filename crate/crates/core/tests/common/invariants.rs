//! Engine and baseline invariants as seeded checks, shared by the property
//! tests and the acceptance report.

use graphmm::*;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gaussian_matrix;

pub type Check = std::result::Result<(), String>;

/// A random patch of one to three vertices (path or triangle) with random
/// data and hyperparameters.
pub fn random_patch(seed: u64) -> (DataMatrices, Graph, Hyperparams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3);
    let g = if n == 3 && rng.random_bool(0.5) { Graph::complete(3) } else { Graph::path(n) };
    let (mx, my) = (rng.random_range(2..=6), rng.random_range(2..=6));
    let shift: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let sd = rng.random_range(0.2..3.0);
    let x = gaussian_matrix(n, mx, &vec![0.0; n], sd, &mut rng);
    let y = gaussian_matrix(n, my, &shift, sd, &mut rng);
    let rho = rng.random_range(-0.3..0.6);
    let scale = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho / 2.0 });
    let h = Hyperparams {
        mu0: rng.random_range(-1.0..1.0),
        tau2: rng.random_range(0.1..4.0),
        delta0: rng.random_range(-0.5..0.5),
        sigma2: rng.random_range(0.1..4.0),
        df: n as f64 + rng.random_range(1.5..10.0),
        a: scale.clone() * rng.random_range(0.3..3.0),
        b: scale * rng.random_range(0.3..3.0),
        p0: rng.random_range(0.01..0.99),
    };
    (DataMatrices::new(x, y).unwrap(), g, h)
}

pub fn posterior_normalization(seed: u64) -> Check {
    let (data, g, h) = random_patch(seed);
    let post = posterior_over_states(&data, &g, &h).map_err(|e| e.to_string())?;
    let total: f64 = post.states.iter().map(|s| s.probability).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(format!("probabilities sum to {total}"));
    }
    if let Some(s) = post.states.iter().find(|s| !(0.0..=1.0).contains(&s.probability)) {
        return Err(format!("state probability {}", s.probability));
    }
    Ok(())
}

/// `l_v` in `[0, 1]` for every vertex of a small lattice run.
pub fn lfdr_bounds(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = (rng.random_range(1..=3), rng.random_range(2..=3));
    let lattice = Lattice::new(rows, cols).unwrap();
    let n = lattice.n_vertices();
    let shape = PatchShape::new(rows.min(2), 2);
    let shift: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { 2.0 } else { 0.0 }).collect();
    let m = rng.random_range(3..=8);
    let x = gaussian_matrix(n, m, &vec![0.0; n], 1.0, &mut rng);
    let y = gaussian_matrix(n, m, &shift, 1.0, &mut rng);
    let data = DataMatrices::new(x, y).unwrap();
    let k = shape.size();
    let h = Hyperparams {
        mu0: 0.0,
        tau2: 1.0,
        delta0: 0.0,
        sigma2: rng.random_range(0.2..4.0),
        df: k as f64 + 2.0,
        a: DMatrix::identity(k, k),
        b: DMatrix::identity(k, k),
        p0: rng.random_range(0.0..=1.0),
    };
    let r = lfdr_all(&data, lattice, shape, &GlobalHyperparams::shared(h), &EngineConfig::default())
        .map_err(|e| e.to_string())?;
    match r.lfdr.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        Some(l) => Err(format!("lfdr {l}")),
        None => Ok(()),
    }
}

/// Reordering replicate columns within each group leaves `l_v` unchanged.
pub fn replicate_permutation(seed: u64) -> Check {
    let (data, g, h) = random_patch(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut cx: Vec<usize> = (0..data.m_x()).collect();
    let mut cy: Vec<usize> = (0..data.m_y()).collect();
    cx.shuffle(&mut rng);
    cy.shuffle(&mut rng);
    let permuted = DataMatrices::new(data.x().select_columns(&cx), data.y().select_columns(&cy)).unwrap();
    let a = posterior_over_states(&data, &g, &h).map_err(|e| e.to_string())?;
    let b = posterior_over_states(&permuted, &g, &h).map_err(|e| e.to_string())?;
    for v in 0..g.n_vertices() {
        let (la, lb) = (a.null_probability(v), b.null_probability(v));
        if (la - lb).abs() > 1e-12 {
            return Err(format!("vertex {v}: {la} vs {lb}"));
        }
    }
    Ok(())
}

/// With `p0 = 1` every vertex is null with probability exactly one.
pub fn p0_one(seed: u64) -> Check {
    let (data, g, mut h) = random_patch(seed);
    h.p0 = 1.0;
    let post = posterior_over_states(&data, &g, &h).map_err(|e| e.to_string())?;
    for v in 0..g.n_vertices() {
        let l = post.null_probability(v);
        if l != 1.0 {
            return Err(format!("vertex {v}: {l}"));
        }
    }
    Ok(())
}

/// Adjusted values keep the order of the p-values, never fall below them
/// and never exceed one.
pub fn bh_monotone(p: &[f64]) -> Check {
    let adj = bh_adjust(p).map_err(|e| e.to_string())?.scores;
    for i in 0..p.len() {
        if adj[i] < p[i] || adj[i] > 1.0 {
            return Err(format!("p {} adjusted to {}", p[i], adj[i]));
        }
        for j in 0..p.len() {
            if p[i] <= p[j] && adj[i] > adj[j] {
                return Err(format!("order broken: p {} -> {}, p {} -> {}", p[i], adj[i], p[j], adj[j]));
            }
        }
    }
    Ok(())
}

pub fn controlled_fdr_bound(scores: &[f64], c: f64) -> Check {
    let list = threshold_list(scores, c).map_err(|e| e.to_string())?;
    match list.controlled_fdr {
        Some(f) if f > c => Err(format!("controlled FDR {f} above {c}")),
        None if !list.vertices.is_empty() => Err("non-empty list without a controlled FDR".into()),
        _ => Ok(()),
    }
}
