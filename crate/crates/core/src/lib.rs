//! Semi-synthetic segmentation data from chroma-keyed foregrounds.
//!
//! Foreground objects are cut out of green-screen recordings ([`chroma`]),
//! augmented ([`augment`]) and composited onto background images with a
//! random convex combination of blending functions ([`blend`]). The
//! [`pipeline`] module turns this into a reproducible, parallel dataset
//! generator. [`grabcut`], [`fourier`] and [`eval`] provide the refinement,
//! domain-adaptation and scoring tools used around a trained model.

pub mod augment;
pub mod blend;
pub mod chroma;
pub mod error;
pub mod eval;
pub mod fourier;
pub mod grabcut;
pub mod imgcore;
pub mod pipeline;

pub use error::{Error, Result};
