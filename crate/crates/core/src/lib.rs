//! Quantum-noise model of two laser fields propagating through an optically
//! dense Λ-type medium near coherent population trapping.
//!
//! Mean Rabi envelopes are propagated through the medium with the atomic
//! response held at its local steady state, and the field fluctuations are
//! propagated alongside them with Langevin noise from the atoms. The crate
//! reports the best quadrature variance at the output, the closed-form small
//! detuning model, parameter scans and noise spectra.

pub mod analytic;
pub mod atomic;
pub mod correlations;
pub mod error;
pub mod linalg;
pub mod meanfield;
pub mod model;
pub mod optimize;
pub mod spectra;

pub use analytic::{analytic_factors, analytic_optimum, AnalyticFactors};
pub use atomic::{response_coefficients, steady_state, ResponseBundle, ResponseCoefficients};
pub use correlations::{
    local_matrices, optimal_variance, propagate_correlations, quadrature_variance, squeeze, LocalNoiseMatrices,
    Propagation,
};
pub use error::{Error, Result};
pub use meanfield::{propagate_mean, transmission, MeanField};
pub use model::{
    validate_params, AtomicState, CorrelationState, DetuningSetting, FieldProfile, RawParams, SpectrumResult,
    SqueezingResult, SystemParams, C64,
};
pub use optimize::{
    detuning_setting_compare, optimize_over_detuning, optimize_over_rabi, ratio_scan, sweep_map, ScanGrid, ScanResult,
};
pub use spectra::{default_grid, frequency_response, spectrum_features, squeezing_spectrum, SpectrumFeatures};
