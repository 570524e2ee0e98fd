//! Multi-view depth-map fusion.
//!
//! Given per-view depth maps, confidence maps, and calibrated pinhole
//! cameras, this crate fuses them into a refined depth map per reference
//! view.  The pipeline:
//!
//! 1. [`geometry`] — render every source view into the reference view by
//!    forward splatting with a z-buffer.
//! 2. [`swe`] — predict a per-pixel depth search window from statistics of
//!    the rendered depths/confidences, then sample a small hypothesis ladder
//!    inside it (instead of a dense depth sweep over the full scene range).
//! 3. [`vcv`] — score every hypothesis against three visibility constraints:
//!    photometric-consistency *support*, *occlusion* (hypothesis behind a
//!    rendered surface), and *free-space violation* (hypothesis in front of a
//!    surface seen by a source view).
//! 4. [`fusion`] — mix the three channels into per-ray probabilities and
//!    regress the fused depth by soft-argmax; window tightness doubles as a
//!    fused confidence.
//! 5. [`losses`] — depth / window-coverage / window-radius losses, analytic
//!    gradients via forward-mode duals, a finite-difference gradient checker,
//!    and a plain gradient-descent fitter for the pipeline parameters.
//! 6. [`evalbench`] — synthetic scene generation, depth-map metrics,
//!    confidence sparsification curves, point-cloud export with consistency
//!    filtering, and Chamfer distances.
//!
//! The whole pipeline is deterministic: identical inputs and seeds produce
//! byte-identical outputs regardless of thread count.

pub mod dual;
pub mod error;
pub mod evalbench;
pub mod fusion;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod losses;
pub mod pipeline;
pub mod swe;
pub mod vcv;

pub use error::{Error, Result};
pub use grid::{Grid2, Grid3};
