//! Image containers and the kernels every other module builds on: color
//! conversion, resizing, morphology, connected components, pyramids and
//! geometric transforms.

pub mod color;
pub mod components;
pub mod geometry;
pub mod io;
pub mod morph;
pub mod plane;
pub mod pyramid;
pub mod resize;

pub use color::{hsv_to_rgb, rgb_to_hsv};
pub use components::{connected_components, Components};
pub use geometry::{Affine, GeometricTransform};
pub use morph::{dilate, erode, erode_with_border, gaussian_blur, Border};
pub use plane::{BinaryMask, ImageF, Linear, Plane, Rgb, SoftMask};
pub use pyramid::{
    build_gaussian_pyramid, build_laplacian_pyramid, collapse_laplacian, GaussianPyramid, LaplacianPyramid,
};
pub use resize::{resize_exact, resize_keep_aspect, resize_mask};
