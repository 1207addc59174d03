//! Semi-supervised cross-modal matching through shared reference points.
//!
//! Objects of two modalities are re-represented by their distances to a small
//! set of matched reference pairs. Because both modalities are measured against
//! the same semantic anchors, their distance profiles ("structure rows") live in
//! comparable coordinate systems; a per-dimension affine calibration fitted on
//! the reference pairs then aligns them so that cross-modal neighbours can be
//! ranked directly.
//!
//! The pipeline, stage by stage:
//!
//! - [`data`]: feature, label and pair files; seeded train/test splits.
//! - [`text`]: smooth-inverse-frequency sentence embeddings over word vectors.
//! - [`structure`]: distance-to-reference representations and distances inside them.
//! - [`refselect`]: choosing which matched pairs act as references.
//! - [`calibrate`]: the diagonal affine map between structure spaces and ranking.
//! - [`evaluate`]: average precision and the train-size sweep experiment.
//! - [`correlate`]: Monte Carlo and closed-form checks that inner-product
//!   similarity matrices of linearly or sigmoidally related data are positively
//!   correlated.

pub mod calibrate;
pub mod config;
pub mod correlate;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod refselect;
pub mod structure;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
