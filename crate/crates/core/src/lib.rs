//! Graph contrastive learning with an SVD-directed global view.
//!
//! The crate builds everything from a small dense autodiff core: graph
//! loading and normalization, randomized truncated SVD of the normalized
//! adjacency, GCN/GIN/GPR-style encoders shared across the original and
//! reconstructed views, an adaptively reweighted InfoNCE objective combined
//! with node-classification cross-entropy, and a multi-split training
//! harness.
//!
//! All numeric types are generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the `f64` aliases below are what the harness and CLI use.

pub mod gradcheck;
pub mod graph;
pub mod loss;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod sparse;
pub mod encoder;
pub mod svd;
pub mod tensor;
pub mod train;

pub use rng::RngState;
pub use scalar::Scalar;

/// Default-precision aliases used by the training harness.
pub type Tensor = tensor::Tensor<f64>;
pub type Parameter = tensor::Parameter<f64>;
pub type GradStore = tensor::GradStore<f64>;
pub type Adam = optim::Adam<f64>;
pub type Graph = graph::Graph<f64>;
pub type NormalizedAdjacency = graph::NormalizedAdjacency<f64>;
pub type CsrMatrix = sparse::CsrMatrix<f64>;
