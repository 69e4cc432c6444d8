//! Learning one incoherent orthonormal subspace per class from labeled
//! training signals and classifying new signals by the p-norm of their
//! per-class feature responses.
//!
//! The pipeline: normalize the training columns, embed them into their span
//! ([`preprocess::qr_reduce`]), learn a [`FeatureBank`] by alternating
//! projections ([`trainer::train`]), lift it back to the original space and
//! score signals with [`classifier::classify`]. Synthetic planted-subspace
//! data for experiments comes from [`synth::generate_synthetic`].

pub mod classifier;
pub mod error;
pub mod io;
pub mod norms;
pub mod preprocess;
pub mod prox;
pub mod synth;
pub mod trainer;
pub mod types;

pub use classifier::{classify, evaluate, nn_classify, ns_classify, LinearFeatureMap, Prediction};
pub use error::{Error, Result};
pub use norms::{operator_norm, vector_pnorm, NormPair, PNorm};
pub use preprocess::{lift_features, normalize_columns, qr_reduce, QrReduction};
pub use synth::{generate_synthetic, CoefficientModel, SyntheticSpec};
pub use trainer::{beta_for, grassmann_bound, train, StepPolicy, TrainConfig, TrainReport};
pub use types::{ClassDataset, FeatureBank, ResponseGrid};
