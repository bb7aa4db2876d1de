//! Noise spectra of the output probe quadrature.
//!
//! At noise frequency ω the atomic response is `T′(ω) = −(M1 + iω·I_o)⁻¹`,
//! where `I_o` is the identity with the population-conservation entry removed.
//! The extended fluctuation vector (ãp(ω), ãp†(−ω), ãc(ω), ãc†(−ω)) then
//! obeys the same kind of linear equation as the zero-frequency one, and its
//! spectral second moments are propagated through the medium with the
//! quadrature angle held at the zero-frequency optimum.

use std::f64::consts::PI;

use serde::Serialize;

use crate::atomic::{build_diffusion, build_m1, build_m2, noise_mixing};
use crate::correlations::{squeeze, Propagation, STIFFNESS_LIMIT};
use crate::error::{Error, Result};
use crate::linalg::{Factorized, Mat4, Mat4x9, Mat9};
use crate::meanfield::{MeanField, StageSample};
use crate::model::{idx, SpectrumResult, SystemParams, C64};

/// Number of leading maxima averaged for the oscillation period.
const PERIOD_MAXIMA: usize = 4;

/// `T′(w)` at the given local fields.
pub fn frequency_response(params: &SystemParams, omega_p: C64, omega_c: C64, w: f64) -> Result<Mat9> {
    response_from_m1(build_m1(params, omega_p, omega_c), w)
}

fn response_from_m1(mut m1: Mat9, w: f64) -> Result<Mat9> {
    for k in 0..9 {
        if k != idx::S33 {
            m1[(k, k)] += C64::new(0.0, w);
        }
    }
    match Factorized::new(m1) {
        Ok(f) => Ok(-f.inverse()),
        Err(Error::SingularSystem { condition, .. }) => Err(Error::SingularSystem {
            condition,
            omega: Some(w),
        }),
        Err(e) => Err(e),
    }
}

/// Frequency-domain counterparts of the drift and noise matrices, with both
/// response matrices kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrices {
    pub t_plus: Mat9,
    /// Elementwise conjugate of `T′(−w)`.
    pub t_minus_conj: Mat9,
    pub c4w: Mat4,
    pub z4w: Mat4,
}

/// Builds the spectral matrices with the dagger rows taken explicitly from
/// the conjugated equations at −w.
pub fn spectral_matrices(params: &SystemParams, omega_p: C64, omega_c: C64, w: f64) -> Result<SpectralMatrices> {
    let m1 = build_m1(params, omega_p, omega_c);
    let t_plus = response_from_m1(m1, w)?;
    let t_minus_conj = response_from_m1(m1, -w)?.map(|z| z.conj());
    let state = crate::atomic::steady_state(params, omega_p, omega_c)?;
    let m2 = build_m2(&state);
    let d = build_diffusion(&state, params);

    // The operator r_k† is r_adj(k), so conj(T′(−w)) acting on r† becomes
    // a row over r after the adjoint relabelling of the columns.
    let adj = idx::ADJOINT;
    let dagger_row = |row: usize| -> [C64; 9] { std::array::from_fn(|k| t_minus_conj[(row, adj[k])]) };
    let p_dag = dagger_row(idx::S13);
    let c_dag = dagger_row(idx::S23);
    let mut v = Mat4x9::zeros();
    for k in 0..9 {
        v[(0, k)] = t_plus[(idx::S13, k)];
        v[(1, k)] = -p_dag[k];
        v[(2, k)] = t_plus[(idx::S23, k)];
        v[(3, k)] = -c_dag[k];
    }

    let coupling = C64::new(0.0, params.gamma() * params.alpha() / 2.0);
    let tm2_plus = t_plus * m2;
    let tm2_minus = response_from_m1(m1, -w)? * m2;
    let swap = [1usize, 0, 3, 2];
    let free = C64::new(0.0, w * params.lc());
    let mut c4w = Mat4::zeros();
    for j in 0..4 {
        c4w[(0, j)] = coupling * tm2_plus[(idx::S13, j)];
        c4w[(2, j)] = coupling * tm2_plus[(idx::S23, j)];
        c4w[(1, j)] = (coupling * tm2_minus[(idx::S13, swap[j])]).conj();
        c4w[(3, j)] = (coupling * tm2_minus[(idx::S23, swap[j])]).conj();
    }
    for k in 0..4 {
        c4w[(k, k)] += free;
    }
    let z4w = v * d * v.adjoint() * C64::from(params.gamma() * params.alpha() / 4.0);
    Ok(SpectralMatrices {
        t_plus,
        t_minus_conj,
        c4w,
        z4w,
    })
}

/// Drift and noise at one cached stage. Uses `T′(w)` alone: its σ31 and σ32
/// rows coincide with the relabelled conjugates of the −w equations.
fn stage_matrices(params: &SystemParams, stage: &StageSample, w: f64) -> Result<(Mat4, Mat4)> {
    let t = response_from_m1(build_m1(params, stage.omega_p, stage.omega_c), w)?;
    let v = noise_mixing(&t);
    let coupling = C64::new(0.0, params.gamma() * params.alpha() / 2.0);
    let mut c = v * build_m2(&stage.state) * coupling;
    let free = C64::new(0.0, w * params.lc());
    for k in 0..4 {
        c[(k, k)] += free;
    }
    let z = v * build_diffusion(&stage.state, params) * v.adjoint() * C64::from(params.gamma() * params.alpha() / 4.0);
    Ok((c, z))
}

fn rhs(c: &Mat4, z: &Mat4, g: &Mat4) -> Mat4 {
    c * g + g * c.adjoint() + z
}

fn row_norm(m: &Mat4) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Spectral moment matrix at the output for one frequency.
pub fn spectral_moments(params: &SystemParams, mf: &MeanField, w: f64) -> Result<Mat4> {
    let h = mf.step();
    let mut g = Mat4::from_diagonal(&nalgebra::Vector4::new(
        C64::from(1.0),
        C64::from(0.0),
        C64::from(1.0),
        C64::from(0.0),
    ));
    for step in &mf.stages {
        let mut mats = [(Mat4::zeros(), Mat4::zeros()); 4];
        for (s, m) in mats.iter_mut().enumerate() {
            *m = stage_matrices(params, &step[s], w)?;
            if row_norm(&m.0) * h > STIFFNESS_LIMIT {
                return Err(Error::NonConvergence(format!(
                    "{} steps too coarse for the fluctuation drift at w = {w}",
                    mf.xi_steps
                )));
            }
        }
        let k1 = rhs(&mats[0].0, &mats[0].1, &g);
        let k2 = rhs(&mats[1].0, &mats[1].1, &(g + k1 * C64::from(h / 2.0)));
        let k3 = rhs(&mats[2].0, &mats[2].1, &(g + k2 * C64::from(h / 2.0)));
        let k4 = rhs(&mats[3].0, &mats[3].1, &(g + k3 * C64::from(h)));
        g += (k1 + (k2 + k3) * C64::from(2.0) + k4) * C64::from(h / 6.0);
    }
    if g.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(g)
    } else {
        Err(Error::NonConvergence(format!("spectral moments diverged at w = {w}")))
    }
}

/// Probe-quadrature noise at angle `theta` from the spectral moments.
pub fn spectral_density(g: &Mat4, theta: f64) -> f64 {
    g[(0, 0)].re + g[(1, 1)].re + 2.0 * (C64::from_polar(1.0, -2.0 * theta) * g[(0, 1)]).re
}

fn check_grid(w_grid: &[f64]) -> Result<()> {
    if w_grid.is_empty() {
        return Err(Error::InvalidParams("frequency grid is empty".into()));
    }
    if w_grid.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidParams("frequency grid must be finite".into()));
    }
    if w_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidParams("frequency grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Spectrum over `w_grid` reusing a finished steady-state run. Frequencies that
/// fail are listed in `failures` and left out of `omega`/`s`.
pub fn spectrum_from_run(params: &SystemParams, run: &Propagation, w_grid: &[f64]) -> Result<SpectrumResult> {
    spectrum_on(params, &run.mean, run.result.theta_opt, w_grid)
}

/// Spectrum on an explicit mean-field grid at a fixed quadrature angle.
pub fn spectrum_on(params: &SystemParams, mf: &MeanField, theta: f64, w_grid: &[f64]) -> Result<SpectrumResult> {
    check_grid(w_grid)?;
    let mut omega = Vec::with_capacity(w_grid.len());
    let mut s = Vec::with_capacity(w_grid.len());
    let mut failures = Vec::new();
    for &w in w_grid {
        match spectral_moments(params, mf, w) {
            Ok(g) => {
                omega.push(w);
                s.push(spectral_density(&g, theta));
            }
            Err(e) => failures.push((w, e.to_string())),
        }
    }
    let mut result = SpectrumResult {
        omega,
        s,
        theta_used: theta,
        bandwidth: None,
        half_depth_width: None,
        period: None,
        failures,
    };
    if let Ok(f) = spectrum_features(&result) {
        result.bandwidth = f.bandwidth;
        result.half_depth_width = f.half_depth_width;
        result.period = f.period;
    }
    Ok(result)
}

/// Frequency grid resolving the delay-induced oscillations: sixteen points per
/// expected period 2π/(2t_d) with t_d = α/(4Ω²), out to six periods. Falls back
/// to [0, 1] in steps of 0.01 when there is no delay.
pub fn default_grid(params: &SystemParams) -> Vec<f64> {
    let omega_sq = (params.omega_p0().norm_sqr() + params.omega_c0().norm_sqr()) / 2.0;
    let (step, n) = if params.alpha() > 0.0 && omega_sq > 0.0 {
        let t_delay = params.alpha() / (4.0 * omega_sq);
        (PI / t_delay / 16.0, 96)
    } else {
        (0.01, 100)
    };
    (0..=n).map(|k| k as f64 * step).collect()
}

/// Steady-state run followed by the spectrum at its optimal angle.
pub fn squeezing_spectrum(params: &SystemParams, w_grid: &[f64]) -> Result<SpectrumResult> {
    check_grid(w_grid)?;
    let run = squeeze(params)?;
    spectrum_from_run(params, &run, w_grid)
}

/// Diagnostic: largest |S(w) − S(−w)| over the positive entries of `w_grid`.
pub fn spectrum_asymmetry(params: &SystemParams, run: &Propagation, w_grid: &[f64]) -> Result<f64> {
    let theta = run.result.theta_opt;
    let mut worst = 0.0f64;
    for &w in w_grid.iter().filter(|w| **w > 0.0) {
        let plus = spectral_density(&spectral_moments(params, &run.mean, w)?, theta);
        let minus = spectral_density(&spectral_moments(params, &run.mean, -w)?, theta);
        worst = worst.max((plus - minus).abs());
    }
    Ok(worst)
}

/// Shape features of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumFeatures {
    /// Frequency where the lower envelope of S (S(0) and the successive local
    /// minima) first reaches the vacuum level 1.
    pub bandwidth: Option<f64>,
    /// Frequency where S itself first rises to (1 + S(0))/2.
    pub half_depth_width: Option<f64>,
    /// Mean spacing of the first few local maxima.
    pub period: Option<f64>,
}

/// Vertex of the parabola through three points.
fn parabola_vertex(x: [f64; 3], f: [f64; 3]) -> (f64, f64) {
    let d1 = (f[1] - f[0]) / (x[1] - x[0]);
    let d2 = (f[2] - f[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if a == 0.0 {
        return (x[1], f[1]);
    }
    // f = f0 + d1 (x − x0) + a (x − x0)(x − x1)
    let xv = (x[0] + x[1]) / 2.0 - d1 / (2.0 * a);
    let fv = f[0] + d1 * (xv - x[0]) + a * (xv - x[0]) * (xv - x[1]);
    (xv, fv)
}

fn local_extrema(w: &[f64], s: &[f64], maxima: bool) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..s.len().saturating_sub(1) {
        let (a, b, c) = (s[i - 1], s[i], s[i + 1]);
        let hit = if maxima { b > a && b >= c } else { b < a && b <= c };
        if hit {
            out.push(parabola_vertex([w[i - 1], w[i], w[i + 1]], [a, b, c]));
        }
    }
    out
}

/// Extracts bandwidth, half-depth width and period from the non-negative part
/// of a spectrum whose first such point must be w = 0.
pub fn spectrum_features(spec: &SpectrumResult) -> Result<SpectrumFeatures> {
    let start = spec.omega.iter().position(|w| *w >= 0.0);
    let start = match start {
        Some(i) if spec.omega[i] == 0.0 => i,
        _ => return Err(Error::FeatureUndefined("spectrum has no w = 0 point".into())),
    };
    let w = &spec.omega[start..];
    let s = &spec.s[start..];
    let s0 = s[0];
    if s0.is_nan() || s0 >= 1.0 {
        return Err(Error::FeatureUndefined(format!(
            "no squeezing at the band centre (S(0) = {s0})"
        )));
    }

    let target = (1.0 + s0) / 2.0;
    let half_depth_width = (1..s.len()).find(|&i| s[i] >= target).map(|i| {
        let t = (target - s[i - 1]) / (s[i] - s[i - 1]);
        w[i - 1] + t * (w[i] - w[i - 1])
    });

    let mut envelope = vec![(w[0], s0)];
    envelope.extend(local_extrema(w, s, false));
    let bandwidth = envelope.windows(2).find(|p| p[0].1 < 1.0 && p[1].1 >= 1.0).map(|p| {
        let ((x0, f0), (x1, f1)) = (p[0], p[1]);
        x0 + (1.0 - f0) / (f1 - f0) * (x1 - x0)
    });

    let peaks: Vec<f64> = local_extrema(w, s, true)
        .into_iter()
        .take(PERIOD_MAXIMA)
        .map(|(x, _)| x)
        .collect();
    let period = (peaks.len() >= 2).then(|| (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64);

    Ok(SpectrumFeatures {
        bandwidth,
        half_depth_width,
        period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::local_matrices;
    use crate::linalg::{hermitian_defect, min_hermitian_eigenvalue};

    fn synthetic(f: impl Fn(f64) -> f64, max: f64, n: usize) -> SpectrumResult {
        let omega: Vec<f64> = (0..n).map(|k| max * k as f64 / (n - 1) as f64).collect();
        SpectrumResult {
            s: omega.iter().map(|&w| f(w)).collect(),
            omega,
            theta_used: 0.0,
            bandwidth: None,
            half_depth_width: None,
            period: None,
            failures: vec![],
        }
    }

    #[test]
    fn zero_frequency_response_is_steady_state() {
        let p = SystemParams::new(1000.0, 1.0, 0.02).unwrap();
        let (op, oc) = (C64::new(0.9, 0.1), C64::new(1.1, -0.2));
        let t0 = frequency_response(&p, op, oc, 0.0).unwrap();
        let b = crate::atomic::response_coefficients(&p, op, oc).unwrap();
        assert!((t0 - b.t).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn constraint_row_is_kept() {
        let p = SystemParams::new(1000.0, 1.0, 0.02).unwrap();
        let (op, oc) = (C64::new(0.9, 0.1), C64::new(1.1, -0.2));
        let t = frequency_response(&p, op, oc, 0.3).unwrap();
        let mut m = build_m1(&p, op, oc);
        for k in 0..9 {
            if k != idx::S33 {
                m[(k, k)] += C64::new(0.0, 0.3);
            }
        }
        // −T′ inverts the shifted matrix, whose constraint row is untouched
        assert!(((m * t) + Mat9::identity()).iter().all(|z| z.norm() < 1e-10));
        for (j, z) in m.row(idx::S33).iter().enumerate() {
            let expect = if (3..6).contains(&j) { 1.0 } else { 0.0 };
            assert_eq!(*z, C64::from(expect));
        }
    }

    #[test]
    fn high_frequency_decay() {
        let p = SystemParams::new(1000.0, 1.0, 0.02).unwrap();
        let t10 = frequency_response(&p, C64::from(1.0), C64::from(1.0), 10.0).unwrap();
        let t20 = frequency_response(&p, C64::from(1.0), C64::from(1.0), 20.0).unwrap();
        let ratio = t10[(idx::S13, idx::S13)].norm() / t20[(idx::S13, idx::S13)].norm();
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn explicit_and_fast_routes_agree() {
        let p = SystemParams::new(800.0, 1.2, 0.02).unwrap().with_lc(0.3).unwrap();
        let (op, oc) = (C64::new(1.1, 0.2), C64::new(0.8, -0.3));
        let state = crate::atomic::steady_state(&p, op, oc).unwrap();
        let t = frequency_response(&p, op, oc, 0.0).unwrap();
        let stage = StageSample {
            omega_p: op,
            omega_c: oc,
            state,
            v4x9: noise_mixing(&t),
        };
        for w in [0.0, 0.004, -0.02, 0.5] {
            let full = spectral_matrices(&p, op, oc, w).unwrap();
            let (c, z) = stage_matrices(&p, &stage, w).unwrap();
            assert!((full.c4w - c).iter().all(|e| e.norm() < 1e-9), "c4w at {w}");
            assert!((full.z4w - z).iter().all(|e| e.norm() < 1e-10), "z4w at {w}");
            assert!(hermitian_defect(&full.z4w) < 1e-12);
            assert!(min_hermitian_eigenvalue(&full.z4w) > -1e-9);
        }
    }

    #[test]
    fn zero_frequency_matrices_match_steady_state() {
        let p = SystemParams::new(800.0, 1.2, 0.02).unwrap();
        let (op, oc) = (C64::new(1.1, 0.2), C64::new(0.8, -0.3));
        let sm = spectral_matrices(&p, op, oc, 0.0).unwrap();
        let lm = local_matrices(&p, op, oc).unwrap();
        assert!((sm.c4w - lm.c4).iter().all(|e| e.norm() < 1e-12));
        assert!((sm.z4w - lm.z4).iter().all(|e| e.norm() < 1e-12));
    }

    #[test]
    fn zero_frequency_spectrum_is_steady_variance() {
        let p = SystemParams::new(300.0, 1.0, 0.019).unwrap().with_xi_steps(400).unwrap();
        let run = squeeze(&p).unwrap();
        let spec = spectrum_from_run(&p, &run, &[0.0]).unwrap();
        assert!((spec.s[0] / run.result.variance - 1.0).abs() < 1e-9);
    }

    #[test]
    fn synthetic_period() {
        let spec = synthetic(|w| 1.0 - 0.5 * (2.0 * PI * w / 0.01).cos() * (-(w / 0.02).powi(2)).exp(), 0.06, 601);
        let f = spectrum_features(&spec).unwrap();
        let period = f.period.unwrap();
        assert!((period / 0.01 - 1.0).abs() < 0.05, "period {period}");
        assert!(f.half_depth_width.unwrap() > 0.0);
    }

    #[test]
    fn flat_spectrum_has_no_features() {
        let spec = synthetic(|_| 1.0, 0.1, 11);
        assert!(matches!(spectrum_features(&spec), Err(Error::FeatureUndefined(_))));
        let mut shifted = synthetic(|_| 0.5, 0.1, 11);
        shifted.omega.iter_mut().for_each(|w| *w += 0.01);
        assert!(spectrum_features(&shifted).is_err());
    }

    #[test]
    fn envelope_and_half_depth_on_known_shape() {
        // Dip at 0 reaching 1 at w = 0.3, with undulations afterwards
        let spec = synthetic(|w| 0.2 + 0.8 * (w / 0.3).min(1.0).powi(2), 1.0, 1001);
        let f = spectrum_features(&spec).unwrap();
        assert!((f.half_depth_width.unwrap() - 0.3 / 2f64.sqrt()).abs() < 1e-3);
        // Monotone curve has no interior minima, so the envelope never closes
        assert_eq!(f.bandwidth, None);
        assert_eq!(f.period, None);
    }

    #[test]
    fn parabola_vertex_is_exact_for_parabolas() {
        let f = |x: f64| 2.0 * (x - 0.37).powi(2) + 0.5;
        let (xv, fv) = parabola_vertex([0.1, 0.3, 0.8], [f(0.1), f(0.3), f(0.8)]);
        assert!((xv - 0.37).abs() < 1e-12);
        assert!((fv - 0.5).abs() < 1e-12);
    }

    #[test]
    fn default_grid_tracks_delay() {
        let p = SystemParams::new(1000.0, 1.0, 0.01).unwrap();
        let g = default_grid(&p);
        assert_eq!(g.len(), 97);
        assert_eq!(g[0], 0.0);
        assert!((g[16] - 4.0 * PI / 1000.0).abs() < 1e-12);
        let empty = default_grid(&SystemParams::new(0.0, 1.0, 0.01).unwrap());
        assert!((empty[100] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_grids_rejected() {
        let p = SystemParams::new(10.0, 1.0, 0.02).unwrap();
        assert!(squeezing_spectrum(&p, &[]).is_err());
        assert!(squeezing_spectrum(&p, &[0.0, 0.0]).is_err());
        assert!(squeezing_spectrum(&p, &[0.0, f64::NAN]).is_err());
    }
}
