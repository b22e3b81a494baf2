//! Hierarchical k-median clustering with low average sensitivity.
//!
//! The [`hierarchy`] module builds nested clusterings on a randomly shifted
//! quadtree embedding ([`rhst`]), either greedily or by sampling each center
//! with the exponential mechanism. [`linkage`] provides the agglomerative
//! baselines and [`sensitivity`] measures how much an algorithm's output
//! moves when points are deleted.

pub mod algorithm;
pub mod cost;
pub mod dataset;
pub mod datasets;
pub mod error;
pub mod hierarchy;
pub mod linkage;
pub mod partition;
pub mod rhst;
pub mod sensitivity;
pub mod stream;

pub use dataset::{distance_extremes, euclidean_dist, Dataset, DistanceExtremes};
pub use error::{Error, Result};
pub use partition::{check_nested, CostKind, HierarchicalClustering, NestingViolation, Partition, Split};
