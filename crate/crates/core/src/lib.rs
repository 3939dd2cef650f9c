//! Focal stack spectral toolkit.
//!
//! Builds refocused focal stacks from angularly undersampled light fields,
//! analyzes their 2D spectra over the `(f, x)` plane, and removes refocus
//! aliasing over a whole stack at once by completing the missing spectral
//! lines.
//!
//! Module map:
//!
//! * [`lightfield`]: light field containers, EPI extraction, synthetic scenes.
//! * [`refocus`]: shear-and-integrate refocusing, 3D and 4D.
//! * [`spectrum`]: centered unitary 2D DFT of focal stack slices.
//! * [`cone`]: closed-form cone/line geometry of focal stacks and their spectra.
//! * [`antialias`]: completion operators and the per-row anti-aliasing pipeline.
//! * [`metrics`]: PSNR, SSIM, per-layer reports, spectral energy loss.
//! * [`io`]: on-disk formats (`FSTK`, `FSSP`, `FSSW`, manifests, PNG/PFM).

pub mod antialias;
pub mod cone;
pub mod error;
pub mod io;
pub mod lightfield;
pub mod metrics;
pub mod refocus;
pub mod spectrum;

pub use error::{Error, Result};
