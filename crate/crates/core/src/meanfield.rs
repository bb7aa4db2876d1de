//! Steady-state propagation of the mean Rabi envelopes through the medium.
//!
//! With the atomic dynamics adiabatically eliminated the envelopes obey
//! `dΩp/dξ = i(Γα/2)σ13`, `dΩc/dξ = i(Γα/2)σ23`, with the coherences taken
//! from the local Bloch steady state. Integration is classical fixed-step RK4
//! and every stage evaluation is cached for the fluctuation pass.

use crate::atomic::{noise_mixing, solve_local};
use crate::error::{Error, Result};
use crate::linalg::Mat4x9;
use crate::model::{AtomicState, FieldProfile, SystemParams, C64};

/// Relative change of the output fields under grid doubling that is accepted as converged.
pub const GRID_TOLERANCE: f64 = 1e-6;

/// Number of times the ξ grid may be doubled before giving up.
pub const MAX_DOUBLINGS: u32 = 4;

/// One right-hand-side evaluation of the RK4 scheme.
#[derive(Debug, Clone)]
pub struct StageSample {
    pub omega_p: C64,
    pub omega_c: C64,
    pub state: AtomicState,
    /// Rows (T₉, −T₁, T₈, −T₂) of the response matrix at this stage.
    pub v4x9: Mat4x9,
}

/// Converged mean-field solution with its per-stage cache.
#[derive(Debug, Clone)]
pub struct MeanField {
    pub profile: FieldProfile,
    /// Atomic steady state at each ξ node.
    pub node_states: Vec<AtomicState>,
    /// The four stage evaluations of each step, in RK4 order.
    pub stages: Vec<[StageSample; 4]>,
    /// Grid actually used (the requested grid times a power of two).
    pub xi_steps: usize,
    /// Largest relative change of the output fields seen in the accepted
    /// refinement comparison.
    pub refinement_change: f64,
}

impl MeanField {
    pub fn step(&self) -> f64 {
        1.0 / self.xi_steps as f64
    }
}

fn sample(params: &SystemParams, omega_p: C64, omega_c: C64) -> Result<(StageSample, [C64; 2])> {
    let local = solve_local(params, omega_p, omega_c)?;
    let coupling = C64::new(0.0, params.gamma() * params.alpha() / 2.0);
    let deriv = [coupling * local.state.s13(), coupling * local.state.s23()];
    let t = -local.factorized.inverse();
    Ok((
        StageSample {
            omega_p,
            omega_c,
            state: local.state,
            v4x9: noise_mixing(&t),
        },
        deriv,
    ))
}

fn axpy(f: [C64; 2], h: f64, k: [C64; 2]) -> [C64; 2] {
    [f[0] + k[0] * h, f[1] + k[1] * h]
}

/// Single RK4 pass on `steps` uniform steps, without refinement.
pub fn integrate_fixed(params: &SystemParams, steps: usize) -> Result<MeanField> {
    params.require_input_field()?;
    let h = 1.0 / steps as f64;
    let mut f = [params.omega_p0(), params.omega_c0()];
    let mut xi = Vec::with_capacity(steps + 1);
    let mut omega_p = Vec::with_capacity(steps + 1);
    let mut omega_c = Vec::with_capacity(steps + 1);
    let mut node_states = Vec::with_capacity(steps + 1);
    let mut stages = Vec::with_capacity(steps);

    for i in 0..steps {
        xi.push(i as f64 * h);
        omega_p.push(f[0]);
        omega_c.push(f[1]);
        let (s1, k1) = sample(params, f[0], f[1])?;
        let f2 = axpy(f, h / 2.0, k1);
        let (s2, k2) = sample(params, f2[0], f2[1])?;
        let f3 = axpy(f, h / 2.0, k2);
        let (s3, k3) = sample(params, f3[0], f3[1])?;
        let f4 = axpy(f, h, k3);
        let (s4, k4) = sample(params, f4[0], f4[1])?;
        node_states.push(s1.state);
        for c in 0..2 {
            f[c] += (k1[c] + (k2[c] + k3[c]) * 2.0 + k4[c]) * (h / 6.0);
        }
        if !(f[0].re.is_finite() && f[0].im.is_finite() && f[1].re.is_finite() && f[1].im.is_finite()) {
            return Err(Error::NonConvergence(format!(
                "mean field diverged at xi = {} with {steps} steps",
                (i + 1) as f64 * h
            )));
        }
        stages.push([s1, s2, s3, s4]);
    }
    xi.push(1.0);
    omega_p.push(f[0]);
    omega_c.push(f[1]);
    node_states.push(sample(params, f[0], f[1])?.0.state);

    Ok(MeanField {
        profile: FieldProfile { xi, omega_p, omega_c },
        node_states,
        stages,
        xi_steps: steps,
        refinement_change: f64::NAN,
    })
}

fn output_change(coarse: &MeanField, fine: &MeanField, scale: f64) -> f64 {
    let a = &coarse.profile;
    let b = &fine.profile;
    let n = a.len() - 1;
    let m = b.len() - 1;
    let dp = (a.omega_p[n] - b.omega_p[m]).norm();
    let dc = (a.omega_c[n] - b.omega_c[m]).norm();
    dp.max(dc) / scale
}

/// Propagates the mean fields on `params.xi_steps()` steps, doubling the grid
/// until one more doubling changes the output fields by less than
/// [`GRID_TOLERANCE`] relative to the input amplitude. The returned solution
/// is the coarser grid of the converged pair.
pub fn propagate_mean(params: &SystemParams) -> Result<MeanField> {
    params.require_input_field()?;
    let scale = (params.omega_p0().norm_sqr() + params.omega_c0().norm_sqr()).sqrt();
    let mut steps = params.xi_steps();
    let mut coarse = integrate_fixed(params, steps)?;
    let mut last_change = f64::NAN;
    for _ in 0..=MAX_DOUBLINGS {
        let fine = integrate_fixed(params, steps * 2)?;
        let change = output_change(&coarse, &fine, scale);
        if change < GRID_TOLERANCE {
            coarse.refinement_change = change;
            return Ok(coarse);
        }
        last_change = change;
        steps *= 2;
        coarse = fine;
    }
    Err(Error::NonConvergence(format!(
        "mean-field output still changed by {last_change:.3e} (relative) at {steps} steps"
    )))
}

/// Output/input intensity ratios `(Tp, Tc)`. `Tc` is 1 for a zero coupling input;
/// a zero probe input is an error.
pub fn transmission(profile: &FieldProfile) -> Result<(f64, f64)> {
    let last = profile.len() - 1;
    let in_p = profile.omega_p[0].norm_sqr();
    let in_c = profile.omega_c[0].norm_sqr();
    if in_p == 0.0 {
        return Err(Error::UndefinedInput("probe transmission with zero probe input".into()));
    }
    let tp = profile.omega_p[last].norm_sqr() / in_p;
    let tc = if in_c == 0.0 {
        1.0
    } else {
        profile.omega_c[last].norm_sqr() / in_c
    };
    Ok((tp, tc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DetuningSetting;

    #[test]
    fn dark_state_transparency() {
        let p = SystemParams::new(1000.0, 1.0, 0.0).unwrap().with_xi_steps(200).unwrap();
        let mf = propagate_mean(&p).unwrap();
        mf.profile.check_invariants().unwrap();
        for (a, b) in mf.profile.omega_p.iter().zip(&mf.profile.omega_c) {
            assert!((a - C64::from(1.0)).norm() < 1e-10);
            assert!((b - C64::from(1.0)).norm() < 1e-10);
        }
        assert_eq!(transmission(&mf.profile).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn empty_medium_is_identity() {
        let p = SystemParams::new(0.0, 0.7, 0.05)
            .unwrap()
            .with_fields(C64::new(0.7, 0.1), C64::new(0.3, -0.2))
            .unwrap()
            .with_xi_steps(50)
            .unwrap();
        let mf = propagate_mean(&p).unwrap();
        assert!(mf.profile.omega_p.iter().all(|z| *z == p.omega_p0()));
        assert!(mf.profile.omega_c.iter().all(|z| *z == p.omega_c0()));
        assert_eq!(mf.xi_steps, 50);
    }

    #[test]
    fn small_epsilon_phase_and_attenuation() {
        // ε = Γδ/Ω² = 0.01: phase αε/4 = 2.5 rad, intensity exp(-αε²/2)
        let p = SystemParams::new(1000.0, 1.0, 0.01).unwrap();
        let mf = propagate_mean(&p).unwrap();
        let last = mf.profile.len() - 1;
        let phase = (mf.profile.omega_p[last] / mf.profile.omega_p[0]).arg();
        assert!((phase - 2.5).abs() < 0.05 * 2.5, "phase {phase}");
        let (tp, tc) = transmission(&mf.profile).unwrap();
        let expect = (-0.05f64).exp();
        assert!((tp - expect).abs() < 0.1 * expect, "tp {tp}");
        assert!((tp - tc).abs() < 1e-8);
    }

    #[test]
    fn exchange_symmetry() {
        let p = SystemParams::new(300.0, 1.2, 0.03)
            .unwrap()
            .with_detuning(0.03, DetuningSetting::Symmetric)
            .unwrap()
            .with_xi_steps(400)
            .unwrap();
        let mf = propagate_mean(&p).unwrap();
        for (a, b) in mf.profile.omega_p.iter().zip(&mf.profile.omega_c) {
            assert!((a.norm() - b.norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_input_rejected() {
        let p = SystemParams::new(10.0, 0.0, 0.01).unwrap();
        assert!(propagate_mean(&p).is_err());
    }

    #[test]
    fn transmission_edge_cases() {
        let prof = FieldProfile {
            xi: vec![0.0, 1.0],
            omega_p: vec![C64::from(0.0); 2],
            omega_c: vec![C64::from(1.0); 2],
        };
        assert!(matches!(transmission(&prof), Err(Error::UndefinedInput(_))));
        let prof = FieldProfile {
            xi: vec![0.0, 1.0],
            omega_p: vec![C64::from(2.0), C64::from(1.0)],
            omega_c: vec![C64::from(0.0); 2],
        };
        assert_eq!(transmission(&prof).unwrap(), (0.25, 1.0));
    }
}
