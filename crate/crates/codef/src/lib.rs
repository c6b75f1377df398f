//! Fit a video to a canonical content field plus a temporal deformation field,
//! then exploit the fitted representation for temporally consistent processing.
//!
//! The representation couples two multi-resolution hash-grid encodings with two
//! small dense networks:
//!
//! * a 2D **canonical field** mapping canonical coordinates to RGB — the video's
//!   flattened, time-free texture, and
//! * a 3D **deformation field** mapping `(x, y, t)` to a displacement whose
//!   addition yields the canonical position of the queried pixel.
//!
//! Both fields are optimized jointly against the input frames with a
//! reconstruction loss, a flow-guided consistency loss and (in grouped mode) a
//! background loss. Once fitted, a single canonical image can be rendered,
//! edited or segmented, and the result propagated to every frame through the
//! deformation field; keypoints are tracked by inverting it.
//!
//! Module map:
//!
//! * [`grid_encoding`] — multi-resolution feature grids with hashing,
//!   d-linear interpolation, coarse-to-fine anneal weights and hand-derived
//!   gradients.
//! * [`tiny_mlp`] — small dense networks with explicit forward/backward.
//! * [`fields`] — the composed canonical/deformation model (plus grouped
//!   per-layer variants) and its end-to-end gradient.
//! * [`flow`] — `.flo` I/O, bilinear warping and flow-confidence masks.
//! * [`video`] — frame stacks, PNG I/O and coordinate conventions.
//! * [`synth`] — procedural videos with exact flows, occlusions and masks.
//! * [`trainer`] — batch sampling, losses, Adam, the fitting loop and the
//!   checkpoint format.
//! * [`toolkit`] — canonical rendering, reconstruction, keypoint tracking,
//!   mask/edit propagation, PSNR.
//! * [`cli`] — the `codef` command-line entry point.
//!
//! See the crate examples for one runnable program per capability.

pub mod cli;
pub mod error;
pub mod fields;
pub mod flow;
pub mod grid_encoding;
pub mod real;
pub mod synth;
pub mod tiny_mlp;
pub mod toolkit;
pub mod trainer;
pub mod video;

pub use error::{Error, Result};
pub use real::Real;
