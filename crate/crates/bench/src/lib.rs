//! Shared fixtures for benchmarks.

use graphmm::sim::{generate, replicate_rng, ScenarioConfig};
use graphmm::{DataMatrices, Hyperparams};
use nalgebra::DMatrix;

/// Lattice data with blocks of three to five vertices, a fifth of them shifted.
pub fn lattice_data(rows: usize, cols: usize, reps: usize, seed: u64) -> DataMatrices {
    let cfg = ScenarioConfig {
        name: String::new(),
        rows,
        cols,
        block_size_min: 3.0,
        block_size_max: 5.0,
        fraction_shifted: 0.2,
        shift_mean: 1.0,
        shift_sd: 0.2,
        mu0: 0.0,
        tau2: 1.0,
        noise_var: 1.0,
        noise_decay: 1.0,
        m_x: reps,
        m_y: reps,
        seed,
        target_rand_index: None,
    };
    generate(&cfg, &mut replicate_rng(seed, 0)).expect("valid scenario").data
}

/// Unit-scale hyperparameters for a patch of `k` vertices.
pub fn unit_hyper(k: usize) -> Hyperparams {
    Hyperparams {
        mu0: 0.0,
        tau2: 1.0,
        delta0: 0.0,
        sigma2: 0.5,
        df: k as f64 + 3.0,
        a: DMatrix::identity(k, k),
        b: DMatrix::identity(k, k),
        p0: 0.8,
    }
}
