//! Template estimation and treatment-effect decomposition for replicate
//! spectra subject to multiplicative error, offset shift and scale-dependent
//! noise.
//!
//! The workflow has three stages:
//!
//! 1. [`template::estimate_template`] recovers a zero-mean, unit-norm template
//!    from pre-treatment signals by solving a constrained eigenproblem.
//! 2. [`effect::bcd_fit`] holds the template fixed and splits post-treatment
//!    signals into a shared pattern `g̃` and per-signal magnitudes `δ`.
//! 3. [`sparsify`] rotates `g̃` inside `span{g̃, 1, x0}` towards the
//!    direction of smallest L1 norm.
//!
//! [`msc`] provides multiplicative scatter correction as a baseline and
//! [`model`] a seeded generator for closed-loop experiments.

pub mod align;
pub mod effect;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod msc;
pub mod sparsify;
pub mod spectrum;
pub mod template;

pub use align::{align_to_target, AffineAlignment};
pub use effect::{bcd_fit, rank1_step, refit_alignments, BcdOptions, EffectFit};
pub use error::{Error, Result};
pub use model::{generate_posttreatment, generate_pretreatment, GenerativeParams, Law};
pub use msc::{msc_correct, MscFit};
pub use sparsify::{evaluate_g, scan_landscape, select_and_polish, Frame, SparsifiedPattern};
pub use spectrum::{validate_set, Spectrum, SpectrumSet, WavenumberGrid};
pub use template::{aligned_signals, build_quadratic_form, estimate_template, TemplateFit};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/template.md")]
    mod template {}
    #[doc = include_str!("../../../book/src/effect.md")]
    mod effect {}
    #[doc = include_str!("../../../book/src/sparsify.md")]
    mod sparsify {}
    #[doc = include_str!("../../../book/src/msc.md")]
    mod msc {}
}
