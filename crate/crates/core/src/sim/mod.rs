//! Synthetic data, permutation experiments, operating characteristics, and
//! the two-variable blocking toy model.

mod evaluate;
mod permute;
mod scenario;
mod toy;

pub use evaluate::{discovery_clusters, evaluate, tpr_at_empirical_fdr, OcRow, OperatingCharacteristics};
pub use permute::{permute_sample_labels, permute_vertices};
pub use scenario::{
    generate, generate_non_respecting_scenario, generate_scenario, ScenarioConfig, SyntheticDataset, NON_RESPECTING_TOLERANCE,
};
pub use toy::{simulate_toy, toy_fdr_curve, toy_lfdr1, toy_lfdr2, ToyConfig, ToyCurve, ToySample};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream for replicate `replicate` of a run with master seed `seed`:
/// the ChaCha8 generator keyed by `seed`, on stream number `replicate`.
/// Streams are independent and do not depend on how many replicates run.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn replicate_streams_differ_and_repeat() {
        let a: u64 = replicate_rng(7, 0).random();
        let b: u64 = replicate_rng(7, 1).random();
        let c: u64 = replicate_rng(7, 1).random();
        assert_ne!(a, b);
        assert_eq!(b, c);
    }
}
