//! Hierarchical decomposition of 3D objects into a binary tree of
//! superquadric pairs.
//!
//! The pipeline samples labeled points around a mesh ([`geometry`]), fits
//! the root pair to the object's occupancy ([`fitter`]), splits space
//! between the two superquadrics of every pair ([`splitter`]) and recurses
//! on the resulting label sets, storing the pairs in an indexed tree
//! ([`sqtree`]). [`metrics`] evaluates each level and [`export`] writes
//! trees, surfaces and split fields.

pub mod cli;
pub mod export;
pub mod fitter;
pub mod geometry;
pub mod metrics;
pub mod splitter;
pub mod sqtree;
pub mod superquadric;

pub use fitter::{fit_node, fit_tree, node_loss, FitConfig, FitReport};
pub use geometry::{load_mesh, point_in_mesh, sample_labeled_points, LabeledPointSet, Mesh};
pub use metrics::{iou, predicted_label, voxel_iou, IouReport};
pub use splitter::{child_labels, split_pair, Side, SplitAssignment};
pub use sqtree::{SqPairNode, SqTree};
pub use superquadric::{OccupancyConfig, Superquadric};
