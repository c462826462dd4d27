//! Topological simplicial analysis of timestamped single-cell point clouds.
//!
//! The pipeline runs from an expression table to correlation distances,
//! a low-dimensional embedding, temporally constrained Vietoris-Rips (or lazy
//! witness) filtrations, and from there to simplex-count curves, persistence
//! barcodes, permutation-normalized simplicial complexity, temporal Mapper
//! graphs and hierarchical clustering of groups by those statistics.

pub mod complex;
pub mod complexity;
pub mod data;
pub mod embed;
mod error;
pub mod homology;
pub mod lineage;
pub mod mapper;
pub mod seed;
pub mod synth;

pub use complex::{
    count_cliques, default_grid, maxmin_landmarks, neighborhood_graph, simplex_count_curve,
    FiltrationParams, GridSpec, LandmarkSet, NeighborhoodGraph, SimplexCountCurve, Tau,
    TimedPointCloud,
};
pub use complexity::{
    complexity_by_group, normalized_complexity, null_ensemble, permute_distances, ComplexKind, ComplexityConfig,
    ComplexityProfile, CountPipeline, FiltrationSource, NullEnsemble,
};
pub use data::{
    bootstrap_sample, correlation_distance, load_expression, ColumnSchema, Correlation,
    DistanceMatrix, ExpressionMatrix, GroupBy, Sampling,
};
pub use embed::{classical_mds, euclidean_distances, pca, EmbedMethod, Embedding};
pub use error::{Error, Result};
