//! Augmentations of foregrounds, backgrounds and finished composites.
//!
//! Every function takes its randomness from an explicit RNG, so a fixed seed
//! reproduces the same output. Geometric foreground transforms are applied to
//! the image and mask together; everything else leaves the label alone except
//! endoscopic padding, which clears the label under the frame.

pub mod corrupt;
pub mod foreground;
pub mod params;
pub mod scene;

pub use corrupt::corrupt_blended;
pub use foreground::{augment_background, augment_foreground, standardize_pair, AugmentedForeground};
pub use params::{
    AugmentParams, BackgroundParams, CorruptionParams, DistractorParams, ForegroundParams, PaddingParams, Range,
};
pub use scene::{add_flying_distractors, draw_distractor_count, endoscopic_padding, touches_frame, Padding};
