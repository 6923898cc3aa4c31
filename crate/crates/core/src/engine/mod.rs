//! Analytic correlation engine.

pub mod gamma;
pub mod images;
pub mod profile;
pub mod psf;
pub mod tensor;

pub use gamma::{gamma_map, gamma_map_with, geometric_object_point, plan_object_sampling, GammaOptions, ObjectSampling};
pub use images::{
    coherent_image, coherent_slice, ghost_image, image_width_alpha, incoherent_image, optimal_alpha, psf_profile,
    refocus, refocus_onto, RefocusOutput,
};
pub use profile::{ImageKind, ImageProfile, Normalization};
pub use psf::{coherent_psf, incoherent_psf, ComplexPsf, PsfParams};
pub use tensor::{normalized_rmse, CorrelationTensor, Provenance};
