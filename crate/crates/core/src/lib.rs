//! Graph-respecting mixture modelling for two-group data on a graph.
//!
//! Each vertex carries replicate measurements under two conditions. On a
//! small patch around every vertex the model sums exactly over all
//! partitions of the patch into connected blocks, and over which blocks have
//! shifted means, to give the vertex's local false-discovery rate.
//!
//! ```
//! use graphmm::{enumerate_graph_respecting, lattice_graph};
//!
//! let g = lattice_graph(3, 3).unwrap();
//! assert_eq!(enumerate_graph_respecting(&g).unwrap().len(), 1434);
//! ```

pub mod baselines;
pub mod empirical_bayes;
pub mod engine;
pub mod error;
pub mod graph;
pub mod io;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod partition;
pub mod sim;

pub use baselines::{bh_adjust, kernel_locfdr, storey_qvalue, AdjustedScores, Method};
pub use empirical_bayes::{
    estimate_hyperparams, estimate_p0, vertex_t_tests, EstimationConfig, HyperOverrides, PatchLayout,
    ShiftVarianceRule, VertexTests,
};
pub use engine::{
    controlled_fdr, discovery_list, lfdr_all, lfdr_graph, posterior_over_states, posterior_with_partitions,
    threshold_list, DiscoveryList, EngineConfig, GlobalHyperparams, LfdrResult, PatchPosterior, ScaleSource,
    VertexDiagnostics, WeightedState,
};
pub use error::{Error, Result};
pub use graph::{lattice_graph, local_patch, parse_dims, Graph, Lattice, PatchShape};
pub use model::{
    laplace_log_marginal, laplace_with, log_mean_prior, log_pred_density_given_means, log_prior_mass, mean_vectors,
    BlockMeans, DataMatrices, DiscreteState, Hyperparams, LaplaceOptions, LaplaceResult, PatchModel,
};
pub use partition::{
    enumerate_all_partitions, enumerate_graph_respecting, enumerate_graph_respecting_capped, is_graph_respecting,
    rand_index, sample_graph_respecting, uniform_spanning_tree, Partition,
};
