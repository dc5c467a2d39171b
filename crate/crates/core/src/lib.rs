//! Coarse-to-fine graph generation.
//!
//! Graphs are first reduced to higher-order skeletons (cycle-supported
//! 2-cells, clique simplices). A diffusion on the Laplacian spectrum then
//! connects consecutive skeletons with generalized Ornstein-Uhlenbeck
//! bridges, the last window being a variance-preserving diffusion into the
//! Gaussian prior. One small permutation-equivariant score network is
//! trained per window and the reverse-time SDEs are integrated from noise
//! back to a full graph.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`graph`] | padded graphs, Laplacian, Jacobi eigensolver, reconstruction, quantization |
//! | [`topology`] | cell / simplex / periphery filters and higher-order statistics |
//! | [`sde`] | GOU transition, h-function, bridge drift and marginals, VP process, integrators |
//! | [`model`] | score network, hand-written backward pass, Adam, checkpoints |
//! | [`pipeline`] | time windows, intermediate skeletons, training, sampling, guide ablation |
//! | [`eval`] | degree / clustering / orbit / spectral statistics and MMD |
//! | [`datasets`] | synthetic generators and the `.graphs.jsonl` format |
//! | [`config`] | run configuration file |
//! | [`verify`] | property checks runnable outside the test harness |

pub mod config;
pub mod datasets;
mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod sde;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{Graph, QuantizationRule, SpectralState};
