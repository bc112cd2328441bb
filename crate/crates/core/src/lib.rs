//! Supervised semantic gradients in aligned word-embedding spaces.
//!
//! The crate fits a direction in embedding space that predicts a rating
//! (valence, arousal, ...) per language, tests whether two languages'
//! directions are aligned or different, and clusters the vocabulary around
//! the difference of the two directions.

mod compensated;
pub mod difference;
pub mod embedding;
pub mod error;
pub mod gradient;
pub mod inference;
pub mod lexicon;
pub mod seed;
pub mod stats;
pub mod synth;

pub use difference::{
    cluster_metrics, cluster_pole, difference_gradient, select_pole_candidates, ClusterReport,
    DifferenceGradient, Pole,
};
pub use embedding::{load_embeddings, EmbeddingSpace, Preprocessing};
pub use error::{Error, Result};
pub use gradient::{
    closed_form_pls1, corrected_t_test, fit_gradient, fit_pls, fit_pls_gradient, select_k,
    standardize, FitOptions, FitReport, FittedGradient, Gradient, KSelection, PlsModel,
    StandardizationStats,
};
pub use inference::{
    alignment_test, bootstrap_interval, cosine, difference_test, BootstrapResult,
    PermutationResult, Tail,
};
pub use lexicon::{join, load_lexicon, zscore, JoinedSample, NormLexicon};
pub use synth::{generate, SynthData, SynthSpec};
