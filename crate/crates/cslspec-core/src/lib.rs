//! Primordial curvature power spectrum and collapse-model corrections.
//!
//! The crate computes, in reduced-Planck natural units:
//!
//! * the standard spectrum of the comoving curvature perturbation from
//!   Bunch–Davies mode functions ([`modes`], [`spectrum`]);
//! * corrections induced by a CSL-type collapse term, both through closed
//!   forms and through direct quadrature of the exact collapse kernels for
//!   the inflationary and radiation eras ([`kernels`], [`spectrum`]);
//! * observational bounds on the collapse rate implied by those corrections;
//! * a small stochastic-unraveling toy simulator used to validate the
//!   collapse master equation against trajectory ensembles and first-order
//!   perturbation theory ([`cslsim`]).
//!
//! Kernel evaluations can hide hundreds of decades of cancellation between
//! intermediate terms; all wide-range arithmetic flows through the scaled
//! representation in [`scaled`] and escalates to arbitrary precision
//! ([`highprec`]) when a runtime cancellation monitor demands it.

pub mod arith;
pub mod background;
pub mod cslsim;
pub mod error;
pub mod highprec;
pub mod kernels;
pub mod modes;
pub mod quadrature;
pub mod scaled;
pub mod spectrum;
pub mod units;

pub use background::{derive_times, scale_factor, z_factor, CosmoParams, Era, EraTag};
pub use cslsim::{
    ensemble_expectation, ensemble_expectations, evolve_master, evolve_trajectory, expectation,
    perturbative_expectation, CollapseOp, EnsembleStats, PerturbativeEstimate, Trajectory,
    ToySystem,
};
pub use error::CoreError;
pub use kernels::{
    bilinear_coeffs, chi_linear, kernel_exact, kernel_exact_arranged, kernel_exact_oracle,
    kernel_exact_symmetrized, kernel_exact_transcribed, kernel_leading, kernel_linear,
    transcribed_attachment, BilinearCoeffs, EndArrangement, KernelEval, KernelVariant,
};
pub use modes::{mode_inflation, mode_radiation, mode_sho, ModeState};
pub use scaled::Scaled;
pub use spectrum::{
    closed_form_result, delta_p_inflation_closed, delta_p_linear_closed,
    delta_p_radiation_closed, delta_r2_numeric, lambda_bound, power_spectrum_standard, CslParams,
    Method, ParamsSnapshot, QuadratureConfig, SpectrumResult,
};
pub use units::PlanckConstants;
