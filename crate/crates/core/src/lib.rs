//! Cross-modal hashing for two modalities where only some items are paired.
//!
//! Each modality is summarized by an anchor graph: k-means anchors, a
//! row-normalized Gaussian kernel `Z` between points and anchors, and the
//! induced small Laplacian. Training stacks a correspondence term for the
//! paired rows with both Laplacians and takes the smallest eigenvectors of
//! the result, so unpaired rows still shape the codes through their graphs.
//!
//! ## Examples
//!
//! One runnable example per capability lives in `examples/`:
//!
//! - **`quickstart`** - generate data, train, hash, and score MAP in both directions
//! - **`anchor_graph`** - anchors, kernel rows, affinity, and the reduced Laplacian
//! - **`eigen_training`** - inspect the block system, spectrum, and objective
//! - **`hamming_search`** - pack codes and rank a database by Hamming distance
//! - **`correspondence_sweep`** - MAP as the paired fraction grows
//! - **`cca_baseline`** - the CCA hashing baseline on the same split
//! - **`file_formats`** - CSV and binary matrices, model and code files
//!
//! ```bash
//! cargo run --release -p pccmh --example quickstart
//! ```
//!
//! ## Command line
//!
//! The `pccmh` binary wraps the same pipeline: `gen`, `train`, `encode`,
//! `query`, `eval`, and `sweep`.

pub mod anchor_graph;
pub mod anchors;
mod binfmt;
pub mod cca;
pub mod datamodel;
pub mod encoder;
pub mod error;
pub mod linalg;
pub mod retrieval;
pub mod seed;
pub mod trainer;

pub use anchor_graph::{approx_affinity, compute_z, reduced_laplacian, AnchorGraph, ReducedLaplacian};
pub use anchors::{kmeans_fit, AnchorSet};
pub use cca::{encode_cca, train_cca, CcaModel};
pub use datamodel::{FeatureMatrix, Labels, MultiModalDataset};
pub use encoder::{encode, hamming_distance, CrossModalHasher, HashCodeSet, Modality};
pub use error::{Error, Result, Stage};
pub use retrieval::{average_precision, mean_average_precision, rank_by_hamming, Direction, Relevance};
pub use trainer::{train, HashModel, TrainConfig};
