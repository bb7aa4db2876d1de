//! Propagation of the field-fluctuation second moments and the resulting
//! quadrature squeezing.
//!
//! The fluctuation vector a = (âp, âp†, âc, âc†) obeys `∂ξ a = C a + N`, so
//! `G = ⟨a a†⟩` obeys `∂ξ G = C G + G C† + Z` with `Z = ⟨N N†⟩`. With the
//! optical density written as α = g²NL/(cΓ) the single-photon coupling drops
//! out and `Z = (Γα/4)·V·D·V†`.
//!
//! Two equivalent integrators are provided: the 4×4 matrix form and the six
//! scalar moment equations, whose noise terms are assembled independently from
//! explicit sums over the Langevin forces.

use std::f64::consts::PI;

use crate::atomic::{build_diffusion, build_m2, response_coefficients, ResponseBundle};
use crate::error::{Error, Result};
use crate::linalg::{Mat4, Mat4x9, Mat9};
use crate::meanfield::{propagate_mean, transmission, MeanField, StageSample, MAX_DOUBLINGS};
use crate::model::{idx, to_db, AtomicState, CorrelationState, FieldProfile, SqueezingResult, SystemParams, C64};

/// Bound on `h·‖drift‖∞` for the moment equations (RK4 is stable up to ≈2.8
/// along both axes, the moment equations double the drift rates).
pub const STIFFNESS_LIMIT: f64 = 1.25;

/// Drift and noise matrices of the fluctuation equations at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalNoiseMatrices {
    pub c4: Mat4,
    pub z4: Mat4,
}

fn coupling(params: &SystemParams) -> C64 {
    C64::new(0.0, params.gamma() * params.alpha() / 2.0)
}

fn noise_prefactor(params: &SystemParams) -> f64 {
    params.gamma() * params.alpha() / 4.0
}

/// Drift matrix from the response coefficients, rows 2 and 4 being the
/// Hermitian-conjugate equations.
pub fn drift_matrix(params: &SystemParams, bundle: &ResponseBundle) -> Mat4 {
    let k = coupling(params);
    let c = &bundle.coeffs;
    let m = Mat4::new(
        c.a1,
        c.b1,
        c.c1,
        c.d1,
        -c.b1.conj(),
        -c.a1.conj(),
        -c.d1.conj(),
        -c.c1.conj(),
        c.a2,
        c.b2,
        c.c2,
        c.d2,
        -c.b2.conj(),
        -c.a2.conj(),
        -c.d2.conj(),
        -c.c2.conj(),
    );
    m * k
}

fn noise_matrix(params: &SystemParams, v: &Mat4x9, d: &Mat9) -> Mat4 {
    v * d * v.adjoint() * C64::from(noise_prefactor(params))
}

/// Drift and noise matrices at the given local fields.
pub fn local_matrices(params: &SystemParams, omega_p: C64, omega_c: C64) -> Result<LocalNoiseMatrices> {
    let bundle = response_coefficients(params, omega_p, omega_c)?;
    Ok(matrices_from_bundle(params, &bundle))
}

pub fn matrices_from_bundle(params: &SystemParams, bundle: &ResponseBundle) -> LocalNoiseMatrices {
    LocalNoiseMatrices {
        c4: drift_matrix(params, bundle),
        z4: noise_matrix(params, &bundle.v4x9, &bundle.d),
    }
}

/// The same matrices rebuilt from a cached stage: `C = i(Γα/2)·V·M2` (the
/// dagger rows of V reproduce the conjugate coefficient pattern).
fn matrices_from_stage(params: &SystemParams, stage: &StageSample) -> LocalNoiseMatrices {
    let m2 = build_m2(&stage.state);
    let d = build_diffusion(&stage.state, params);
    LocalNoiseMatrices {
        c4: stage.v4x9 * m2 * coupling(params),
        z4: noise_matrix(params, &stage.v4x9, &d),
    }
}

/// Noise terms n1…n6 assembled from explicit sums over the Langevin forces,
/// `f13 = Σ T₉ₖ rₖ`, `f23 = Σ T₈ₖ rₖ`, using `rₖ† = r_adj(k)` and
/// `⟨r_μ r_ν†⟩ = D(μ, ν)`:
///
/// n1 = −η⟨f13 f13⟩, n2 = η⟨f13† f13⟩, n3 = −η⟨f23 f23⟩,
/// n4 = η⟨f23† f23⟩, n5 = −η⟨f13 f23⟩, n6 = η⟨f13† f23⟩,
///
/// with η⟨·⟩ reducing to (Γα/4)·(sum over D).
pub fn langevin_noise_terms(params: &SystemParams, t: &Mat9, state: &AtomicState) -> [C64; 6] {
    let d = build_diffusion(state, params);
    let adj = idx::ADJOINT;
    let r13 = t.row(idx::S13);
    let r23 = t.row(idx::S23);
    // ⟨(Σ a_k r_k)(Σ b_l r_l)⟩ = Σ a_k b_l D(k, adj l)
    let pair = |a: &[C64; 9], b: &[C64; 9]| {
        let mut acc = C64::default();
        for k in 0..9 {
            for l in 0..9 {
                acc += a[k] * b[l] * d[(k, adj[l])];
            }
        }
        acc
    };
    let f13: [C64; 9] = std::array::from_fn(|k| r13[k]);
    let f23: [C64; 9] = std::array::from_fn(|k| r23[k]);
    // f13† = Σ conj(T₉ₖ) r_adj(k)
    let f13_dag: [C64; 9] = std::array::from_fn(|m| r13[adj[m]].conj());
    let f23_dag: [C64; 9] = std::array::from_fn(|m| r23[adj[m]].conj());
    let eta = C64::from(noise_prefactor(params));
    [
        -eta * pair(&f13, &f13),
        eta * pair(&f13_dag, &f13),
        -eta * pair(&f23, &f23),
        eta * pair(&f23_dag, &f23),
        -eta * pair(&f13, &f23),
        eta * pair(&f13_dag, &f23),
    ]
}

fn lyapunov_rhs(m: &LocalNoiseMatrices, g: &Mat4) -> Mat4 {
    m.c4 * g + g * m.c4.adjoint() + m.z4
}

fn infinity_norm(m: &Mat4) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn check_stiffness(mats: &[LocalNoiseMatrices; 4], h: f64) -> bool {
    mats.iter().all(|m| infinity_norm(&m.c4) * h <= STIFFNESS_LIMIT)
}

/// Integrates the matrix form on the cached grid. `Ok(None)` means the grid is
/// too coarse for the local drift rates.
fn integrate_matrix(params: &SystemParams, mf: &MeanField) -> Result<Option<CorrelationState>> {
    let h = mf.step();
    let mut g = CorrelationState::vacuum().to_matrix();
    for (i, step) in mf.stages.iter().enumerate() {
        let mats: [LocalNoiseMatrices; 4] = std::array::from_fn(|s| matrices_from_stage(params, &step[s]));
        if !check_stiffness(&mats, h) {
            return Ok(None);
        }
        let k1 = lyapunov_rhs(&mats[0], &g);
        let k2 = lyapunov_rhs(&mats[1], &(g + k1 * C64::from(h / 2.0)));
        let k3 = lyapunov_rhs(&mats[2], &(g + k2 * C64::from(h / 2.0)));
        let k4 = lyapunov_rhs(&mats[3], &(g + k3 * C64::from(h)));
        g += (k1 + (k2 + k3) * C64::from(2.0) + k4) * C64::from(h / 6.0);
        if g.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonConvergence(format!(
                "correlations diverged at xi = {}",
                (i + 1) as f64 * h
            )));
        }
    }
    Ok(Some(CorrelationState::from_matrix(&g)))
}

/// Coefficients of the six scalar moment equations at one stage.
#[derive(Debug, Clone, Copy)]
struct ScalarCoefficients {
    p1: C64,
    q1: C64,
    r1: C64,
    s1: C64,
    p2: C64,
    q2: C64,
    r2: C64,
    s2: C64,
    n: [C64; 6],
}

impl ScalarCoefficients {
    fn at_stage(params: &SystemParams, stage: &StageSample) -> Self {
        // rows 9 and 8 of T are rows 0 and 2 of the cached V
        let mut t = Mat9::zeros();
        t.set_row(idx::S13, &stage.v4x9.row(0));
        t.set_row(idx::S23, &stage.v4x9.row(2));
        let tm2 = t * build_m2(&stage.state);
        let k = coupling(params);
        let row1 = tm2.row(idx::S13);
        let row2 = tm2.row(idx::S23);
        ScalarCoefficients {
            p1: k * row1[0],
            q1: k * row1[1],
            r1: k * row1[2],
            s1: k * row1[3],
            p2: k * row2[0],
            q2: k * row2[1],
            r2: k * row2[2],
            s2: k * row2[3],
            n: langevin_noise_terms(params, &t, &stage.state),
        }
    }

    fn rhs(&self, c: &CorrelationState) -> CorrelationState {
        let ScalarCoefficients {
            p1,
            q1,
            r1,
            s1,
            p2,
            q2,
            r2,
            s2,
            n,
        } = *self;
        let np = C64::from(c.n_p);
        let nc = C64::from(c.n_c);
        let one = C64::from(1.0);
        let two = C64::from(2.0);
        // ⟨âp âc†⟩ and ⟨âp† âc†⟩, ⟨âp†²⟩, ⟨âc†²⟩
        let p_cdag = c.x_pc.conj();
        let pdag_cdag = c.c_pc.conj();
        let pp_dag = c.c_pp.conj();
        let cc_dag = c.c_cc.conj();

        let d_cpp = two * p1 * c.c_pp + q1 * (two * np + one) + two * r1 * c.c_pc + two * s1 * p_cdag + n[0];
        let d_np = two * p1.re * np
            + q1.conj() * c.c_pp
            + q1 * pp_dag
            + s1.conj() * c.c_pc
            + s1 * pdag_cdag
            + r1.conj() * p_cdag
            + r1 * c.x_pc
            + n[1];
        let d_ccc = two * r2 * c.c_cc + two * p2 * c.c_pc + two * q2 * c.x_pc + s2 * (two * nc + one) + n[2];
        let d_nc = two * r2.re * nc
            + q2.conj() * c.c_pc
            + q2 * pdag_cdag
            + p2.conj() * c.x_pc
            + p2 * p_cdag
            + s2.conj() * c.c_cc
            + s2 * cc_dag
            + n[3];
        let d_cpc = (p1 + r2) * c.c_pc
            + r1 * c.c_cc
            + p2 * c.c_pp
            + s1 * nc
            + s2 * p_cdag
            + q1 * c.x_pc
            + q2 * (np + one)
            + n[4];
        let d_xpc = (p1.conj() + r2) * c.x_pc
            + q1.conj() * c.c_pc
            + q2 * pp_dag
            + s1.conj() * c.c_cc
            + r1.conj() * nc
            + p2 * np
            + s2 * pdag_cdag
            + n[5];
        CorrelationState {
            c_pp: d_cpp,
            n_p: d_np.re,
            c_cc: d_ccc,
            n_c: d_nc.re,
            c_pc: d_cpc,
            x_pc: d_xpc,
        }
    }
}

fn add_scaled(a: &CorrelationState, h: f64, k: &CorrelationState) -> CorrelationState {
    CorrelationState {
        c_pp: a.c_pp + k.c_pp * h,
        n_p: a.n_p + k.n_p * h,
        c_cc: a.c_cc + k.c_cc * h,
        n_c: a.n_c + k.n_c * h,
        c_pc: a.c_pc + k.c_pc * h,
        x_pc: a.x_pc + k.x_pc * h,
    }
}

/// Output moments plus the smallest photon number met at any node.
struct ScalarRun {
    moments: CorrelationState,
    min_photon_number: f64,
}

fn drift_norm(co: &ScalarCoefficients) -> f64 {
    let r1 = co.p1.norm() + co.q1.norm() + co.r1.norm() + co.s1.norm();
    let r2 = co.p2.norm() + co.q2.norm() + co.r2.norm() + co.s2.norm();
    r1.max(r2)
}

fn integrate_scalar(params: &SystemParams, mf: &MeanField) -> Result<Option<ScalarRun>> {
    let h = mf.step();
    let mut c = CorrelationState::vacuum();
    let mut min_n = 0.0f64;
    for (i, step) in mf.stages.iter().enumerate() {
        let co: [ScalarCoefficients; 4] = std::array::from_fn(|s| ScalarCoefficients::at_stage(params, &step[s]));
        if co.iter().any(|k| drift_norm(k) * h > STIFFNESS_LIMIT) {
            return Ok(None);
        }
        let k1 = co[0].rhs(&c);
        let k2 = co[1].rhs(&add_scaled(&c, h / 2.0, &k1));
        let k3 = co[2].rhs(&add_scaled(&c, h / 2.0, &k2));
        let k4 = co[3].rhs(&add_scaled(&c, h, &k3));
        let mut sum = add_scaled(&k1, 2.0, &k2);
        sum = add_scaled(&sum, 2.0, &k3);
        sum = add_scaled(&sum, 1.0, &k4);
        c = add_scaled(&c, h / 6.0, &sum);
        if !c.is_finite() {
            return Err(Error::NonConvergence(format!(
                "moment equations diverged at xi = {}",
                (i + 1) as f64 * h
            )));
        }
        min_n = min_n.min(c.n_p).min(c.n_c);
    }
    Ok(Some(ScalarRun {
        moments: c,
        min_photon_number: min_n,
    }))
}

fn too_coarse(mf: &MeanField) -> Error {
    Error::NonConvergence(format!(
        "{} steps too coarse for the fluctuation drift",
        mf.xi_steps
    ))
}

/// Output moments at ξ = 1 from the six scalar moment equations, on the grid
/// of `mf`.
///
/// Fails with `NonConvergence` if that grid is too coarse for the local drift;
/// [`squeeze`] refines the grid automatically in that case.
pub fn propagate_correlations(params: &SystemParams, mf: &MeanField) -> Result<CorrelationState> {
    integrate_scalar(params, mf)?.map(|r| r.moments).ok_or_else(|| too_coarse(mf))
}

/// The same moments from the 4×4 matrix equation for `G = ⟨a a†⟩`.
pub fn propagate_correlations_matrix(params: &SystemParams, mf: &MeanField) -> Result<CorrelationState> {
    integrate_matrix(params, mf)?.ok_or_else(|| too_coarse(mf))
}

/// Variance of X(θ) = e^{−iθ}âp + e^{iθ}âp†; the vacuum gives 1.
pub fn quadrature_variance(corr: &CorrelationState, theta: f64) -> f64 {
    1.0 + 2.0 * corr.n_p + 2.0 * (C64::from_polar(1.0, -2.0 * theta) * corr.c_pp).re
}

/// Same for the coupling field.
pub fn coupling_quadrature_variance(corr: &CorrelationState, theta: f64) -> f64 {
    quadrature_variance(&corr.swapped(), theta)
}

/// Minimum quadrature variance and the angle reaching it, in [0, π). Zero
/// anomalous moment gives angle 0.
pub fn minimum_variance(corr: &CorrelationState) -> (f64, f64) {
    let v = 1.0 + 2.0 * corr.n_p - 2.0 * corr.c_pp.norm();
    let theta = if corr.c_pp.norm() == 0.0 {
        0.0
    } else {
        ((corr.c_pp.arg() + PI) / 2.0).rem_euclid(PI)
    };
    let theta = if theta >= PI { 0.0 } else { theta };
    (v, theta)
}

/// Builds the squeezing summary from the output moments and the mean-field profile.
pub fn optimal_variance(corr: &CorrelationState, profile: &FieldProfile, params: &SystemParams) -> Result<SqueezingResult> {
    let (variance, theta_opt) = minimum_variance(corr);
    let (transmission_p, transmission_c) = transmission(profile)?;
    Ok(SqueezingResult {
        variance,
        variance_db: to_db(variance),
        theta_opt,
        transmission_p,
        transmission_c,
        params_echo: params.clone(),
    })
}

/// A complete steady-state run.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub mean: MeanField,
    pub correlations: CorrelationState,
    pub result: SqueezingResult,
    /// Smallest n_p or n_c seen at any node (0 for the vacuum input).
    pub min_photon_number: f64,
}

/// Slack allowed below V(θ)·V(θ+π/2) = 1 before a result is rejected.
pub const UNCERTAINTY_TOLERANCE: f64 = 1e-6;

/// Mean-field propagation followed by the correlation pass, doubling the grid
/// (at most [`MAX_DOUBLINGS`] times in total) when the fluctuation drift is too
/// stiff for it. Results whose moments break the uncertainty bound are
/// reported as [`Error::PrecisionLoss`].
pub fn squeeze(params: &SystemParams) -> Result<Propagation> {
    let mut mean = propagate_mean(params)?;
    loop {
        if let Some(run) = integrate_scalar(params, &mean)? {
            let result = optimal_variance(&run.moments, &mean.profile, params)?;
            let product = result.variance
                * quadrature_variance(&run.moments, result.theta_opt + std::f64::consts::FRAC_PI_2);
            if !(result.variance > 0.0 && product >= 1.0 - UNCERTAINTY_TOLERANCE) {
                return Err(Error::PrecisionLoss(format!(
                    "minimum variance {:.3e} with uncertainty product {product:.3e} \
                     (probe transmission {:.3e})",
                    result.variance, result.transmission_p
                )));
            }
            return Ok(Propagation {
                mean,
                correlations: run.moments,
                result,
                min_photon_number: run.min_photon_number,
            });
        }
        let steps = mean.xi_steps * 2;
        if steps > params.xi_steps() << MAX_DOUBLINGS {
            return Err(Error::NonConvergence(format!(
                "fluctuation drift too stiff even at {} steps",
                mean.xi_steps
            )));
        }
        mean = crate::meanfield::integrate_fixed(params, steps)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_defect, min_hermitian_eigenvalue};

    fn c(re: f64) -> C64 {
        C64::from(re)
    }

    #[test]
    fn empty_medium_has_no_drift_or_noise() {
        let p = SystemParams::new(0.0, 1.0, 0.02).unwrap();
        let m = local_matrices(&p, c(1.0), c(1.0)).unwrap();
        assert_eq!(m.c4, Mat4::zeros());
        assert_eq!(m.z4, Mat4::zeros());
    }

    #[test]
    fn noise_matrix_is_hermitian_psd() {
        let p = SystemParams::new(1000.0, 1.0, 0.02).unwrap();
        let m = local_matrices(&p, C64::new(0.9, 0.2), C64::new(1.1, -0.1)).unwrap();
        assert!(hermitian_defect(&m.z4) < 1e-12);
        assert!(min_hermitian_eigenvalue(&m.z4) > -1e-9);
    }

    #[test]
    fn drift_rows_are_conjugate_pattern() {
        let p = SystemParams::new(1000.0, 1.0, 0.02).unwrap();
        let m = local_matrices(&p, C64::new(0.9, 0.2), C64::new(1.1, -0.1)).unwrap();
        let swap = [1, 0, 3, 2];
        for (row, src) in [(1usize, 0usize), (3, 2)] {
            for (col, mirror) in swap.into_iter().enumerate() {
                assert!((m.c4[(row, col)] - m.c4[(src, mirror)].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn stage_route_matches_coefficient_route() {
        let p = SystemParams::new(700.0, 1.3, 0.02).unwrap();
        let (op, oc) = (C64::new(1.2, 0.4), C64::new(0.9, -0.3));
        let bundle = response_coefficients(&p, op, oc).unwrap();
        let direct = matrices_from_bundle(&p, &bundle);
        let stage = StageSample {
            omega_p: op,
            omega_c: oc,
            state: bundle.state,
            v4x9: bundle.v4x9,
        };
        let cached = matrices_from_stage(&p, &stage);
        assert!((direct.c4 - cached.c4).norm() < 1e-10);
        assert!((direct.z4 - cached.z4).norm() < 1e-12);
    }

    #[test]
    fn small_epsilon_squeezing_coefficient() {
        // |Q| ≈ αε/4 = 2.5 for α = 1000, Ω = 1, δ = 0.01
        let p = SystemParams::new(1000.0, 1.0, 0.01).unwrap();
        let m = local_matrices(&p, c(1.0), c(1.0)).unwrap();
        let q = m.c4[(0, 1)].norm();
        assert!((q - 2.5).abs() < 0.15 * 2.5, "|Q| = {q}");
    }

    #[test]
    fn quadrature_examples() {
        let zero = CorrelationState::vacuum();
        for th in [0.0, 0.3, 1.7] {
            assert_eq!(quadrature_variance(&zero, th), 1.0);
        }
        let corr = CorrelationState {
            c_pp: c(-0.4),
            n_p: 0.2,
            ..CorrelationState::default()
        };
        assert!((quadrature_variance(&corr, 0.0) - 0.6).abs() < 1e-15);
        assert!((quadrature_variance(&corr, PI / 2.0) - 2.2).abs() < 1e-15);
        let (v, th) = minimum_variance(&corr);
        assert!((v - 0.6).abs() < 1e-15);
        assert!(th.abs() < 1e-15);
        assert_eq!(minimum_variance(&zero), (1.0, 0.0));
    }

    #[test]
    fn optimal_angle_in_range() {
        for k in 0..24 {
            let phase = -PI + k as f64 * PI / 12.0;
            let corr = CorrelationState {
                c_pp: C64::from_polar(0.3, phase),
                n_p: 0.4,
                ..CorrelationState::default()
            };
            let (v, th) = minimum_variance(&corr);
            assert!((0.0..PI).contains(&th));
            assert!((quadrature_variance(&corr, th) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn transparency_gives_no_squeezing() {
        let p = SystemParams::new(1000.0, 1.0, 0.0).unwrap().with_xi_steps(200).unwrap();
        let run = squeeze(&p).unwrap();
        assert!((run.result.variance - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_medium_moments_vanish() {
        let p = SystemParams::new(0.0, 1.0, 0.02).unwrap().with_xi_steps(20).unwrap();
        let run = squeeze(&p).unwrap();
        assert_eq!(run.correlations, CorrelationState::vacuum());
        assert_eq!(run.result.variance, 1.0);
    }

    #[test]
    fn absorbed_fields_report_precision_loss() {
        let p = SystemParams::new(100.0, 1.0, 0.154).unwrap();
        match squeeze(&p) {
            Err(Error::PrecisionLoss(_)) => {}
            other => panic!("expected precision loss, got {other:?}"),
        }
    }
}
