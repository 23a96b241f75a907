//! Fair graph embeddings trained by emulating graph modifications.
//!
//! A two-layer graph autoencoder is trained on link reconstruction while a
//! separate set of "fairness" tensors, which act like edits to the adjacency
//! or feature matrix, is trained to make each node's predicted links spread
//! across sensitive groups in the same proportions as the population.

pub mod autodiff;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
pub use graph::{Edge, Graph, SplitResult};
pub use io::{Dataset, DatasetKind, DatasetSpec};
pub use linalg::{DenseMatrix, Rng, SparseMatrix};
pub use metrics::{EvalConfig, MetricsRecord, SummaryRecord};
pub use model::{Activation, Architecture, Embeddings, Encoder, ModelParams, ParamKey, Variant};
pub use training::{joint_train, TrainConfig, TrainHistory, TrainOutcome};
