//! Pattern similarity between stations' diurnal curves.
//!
//! Curves are compared with weighted, optionally regularized DTW; the
//! resulting matrix feeds average-linkage clustering and silhouette
//! validation. Distance correlation gives an alignment-free view of the
//! same curves.

mod cluster;
mod dcor;
mod dtw;
mod matrix;
mod silhouette;

pub use cluster::{
    agglomerative_cluster, cluster_report, ClusterReport, Clustering, Merge, ASSIGNMENT_HEADER,
    MERGES_HEADER,
};
pub use dcor::{dcor, dcor_matrix, dcor_permutation_test, DcorMatrix, DcorResult, MIN_PERMUTATIONS};
pub use dtw::{dtw_distance, pairwise_dtw, DtwAlignment, DtwConfig, PointwiseDistance};
pub use matrix::DistanceMatrix;
pub use silhouette::{silhouette, Silhouette};
