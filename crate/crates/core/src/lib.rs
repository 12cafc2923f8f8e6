//! Tree-based linear classifiers for extreme multi-label problems on
//! sparse data.
//!
//! A label tree recursively partitions the label set; every internal node
//! trains one binary classifier per child on just the instances carrying
//! its labels. Because sparse data leaves many features unseen at deeper
//! nodes, those classifiers come out with exact zero weights for the
//! unseen features and the whole tree model — despite holding more
//! classifiers — often stores fewer non-zeros than a flat one-vs-rest
//! model. This crate trains such models, measures that effect, predicts a
//! model's size before training it, and evaluates the balanced-tree size
//! formulas and their guarantees as executable checks.
//!
//! The numeric core is generic over the scalar type ([`Scalar`]: `f32` or
//! `f64`); the crate root exports `f64` aliases, which is also the
//! precision of the on-disk model format.

// validations use `!(v > 0.0)` forms on purpose: NaN must fail them
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::type_complexity)]

pub mod analysis;
pub mod data;
mod error;
pub mod model;
pub mod predict;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use data::{parse_libsvm_multilabel, parse_sidecar, FeatureUsage, ParseOptions, SidecarMeta};
pub use model::prune_weights;
pub use predict::{precision_at_k, predict_batch};
pub use solver::{build_node_problems, solve_binary, train_ovr, train_tree};
pub use solver::{LossKind, LossSpec, TrainConfig, TrainWarnings};
pub use tree::{build_label_tree, label_representations, spherical_kmeans, LabelTree, TreeNode};

/// Default-precision aliases of the generic types.
pub type SparseVector = data::SparseVector<f64>;
pub type SparseRowMatrix = data::SparseRowMatrix<f64>;
pub type MultiLabelDataset = data::MultiLabelDataset<f64>;
pub type LabelRepresentations = tree::LabelRepresentations<f64>;
pub type WeightVector = model::WeightVector<f64>;
pub type OvrModel = model::OvrModel<f64>;
pub type TreeModel = model::TreeModel<f64>;
pub type Model = model::Model<f64>;
pub type Prediction = predict::Prediction<f64>;
