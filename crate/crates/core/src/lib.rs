//! Correlation plenoptic imaging with chaotic light.
//!
//! The crate computes the correlation of intensity fluctuations between a
//! spatially resolving sensor S_a and an angular sensor S_b, either in closed
//! form for a Gaussian source ([`engine`]) or by Monte-Carlo speckle
//! simulation ([`speckle`]), and quantifies refocusing, resolution and depth
//! of field ([`analysis`]).

pub mod error;
pub mod grid;
pub mod mask;
pub mod scenario;
pub mod source;

pub mod engine;
pub mod speckle;
pub mod analysis;
pub mod io;

pub use error::{CpiError, ErrorClass, Result};
pub use grid::SampledGrid;
pub use mask::{make_slit_mask, ApertureMask, MaskSpec, Slit};
pub use scenario::{DerivedSet, ScenarioConfig};
pub use source::SourceProfile;
