//! Closed-form small-detuning model of the output squeezing.
//!
//! For ε = Γδ/Ω² ≪ 1 and equal input fields, the probe fluctuations see a
//! squeezing coefficient |Q| = αε/4 and accumulate excess noise Z from the
//! residual absorption, giving
//!
//! V ≈ (√(|Q|²+1) − |Q|)² + Z(2+Z)/(3+2Z),  Z = (αε²/2)(1 + Ω²/4Γ²).

use serde::Serialize;

use crate::error::{Error, Result};

/// Search bracket for the optimal ε.
pub const EPSILON_BRACKET: (f64, f64) = (1e-6, 1.0);
pub const EPSILON_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticFactors {
    pub epsilon: f64,
    pub q_mag: f64,
    pub z_noise: f64,
    pub v_approx: f64,
    /// Slow-light delay αΓ/(4Ω²), in 1/Γ.
    pub t_delay: f64,
}

/// Squeezing limited by the coefficient |Q| alone.
pub fn coherent_term(q: f64) -> f64 {
    let r = (q * q + 1.0).sqrt() - q;
    r * r
}

/// Penalty from the absorption noise Z.
pub fn noise_term(z: f64) -> f64 {
    z * (2.0 + z) / (3.0 + 2.0 * z)
}

fn variance_at(alpha: f64, omega: f64, eps: f64) -> f64 {
    let q = alpha * eps / 4.0;
    let z = alpha * eps * eps / 2.0 * (1.0 + omega * omega / 4.0);
    coherent_term(q) + noise_term(z)
}

/// Factors of the approximate model with Γ = 1.
pub fn analytic_factors(alpha: f64, omega: f64, delta: f64) -> Result<AnalyticFactors> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParams(format!("omega must be positive, got {omega}")));
    }
    if !(alpha.is_finite() && alpha >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParams("alpha and delta must be finite, alpha >= 0".into()));
    }
    let epsilon = delta / (omega * omega);
    let q_mag = alpha * epsilon.abs() / 4.0;
    let z_noise = alpha * epsilon * epsilon / 2.0 * (1.0 + omega * omega / 4.0);
    Ok(AnalyticFactors {
        epsilon,
        q_mag,
        z_noise,
        v_approx: coherent_term(q_mag) + noise_term(z_noise),
        t_delay: alpha / (4.0 * omega * omega),
    })
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
///
/// Returns `(x, f(x))` for the best point evaluated. Exact ties between the two
/// interior probes keep the left (smaller) bracket.
pub fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Predicted optimal detuning and variance at fixed α and Ω.
pub fn analytic_optimum(alpha: f64, omega: f64) -> Result<(f64, f64)> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParams(format!("alpha must be positive, got {alpha}")));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParams(format!("omega must be positive, got {omega}")));
    }
    let (lo, hi) = EPSILON_BRACKET;
    let (eps, v) = golden_section(|e| variance_at(alpha, omega, e), lo, hi, EPSILON_TOLERANCE);
    Ok((eps * omega * omega, v))
}
