//! Shared domain types and parameter validation.
//!
//! Units: the excited-state decay rate Γ is the rate unit, so every
//! frequency, detuning and Rabi frequency is stored in units of Γ and every
//! time in units of 1/Γ. Positions along the medium are stored as the
//! dimensionless coordinate ξ = z/L ∈ [0, 1]; the medium length never appears
//! on its own.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default number of ξ steps used by the propagators.
pub const DEFAULT_XI_STEPS: usize = 2000;

/// Tolerance on `delta == delta_p - delta_c` for explicitly supplied detunings.
pub const DETUNING_TOLERANCE: f64 = 1e-12;

/// Slot of each density-matrix element in the nine-component state vector.
pub mod idx {
    pub const S31: usize = 0;
    pub const S32: usize = 1;
    pub const S21: usize = 2;
    pub const S11: usize = 3;
    pub const S22: usize = 4;
    pub const S33: usize = 5;
    pub const S12: usize = 6;
    pub const S23: usize = 7;
    pub const S13: usize = 8;

    /// Maps each slot to the slot of its Hermitian adjoint (σ_ij ↔ σ_ji).
    pub const ADJOINT: [usize; 9] = [S13, S23, S12, S11, S22, S33, S21, S32, S31];
}

/// How the two-photon detuning δ is split between the two one-photon detunings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetuningSetting {
    /// Δp = −Δc = δ/2.
    Symmetric,
    /// Δp = δ, Δc = 0.
    ProbeOnly,
    /// Δp = 0, Δc = −δ.
    CouplingOnly,
}

impl DetuningSetting {
    pub const ALL: [DetuningSetting; 3] = [
        DetuningSetting::Symmetric,
        DetuningSetting::ProbeOnly,
        DetuningSetting::CouplingOnly,
    ];

    /// Returns `(delta_p, delta_c)` for the two-photon detuning `delta`.
    pub fn split(self, delta: f64) -> (f64, f64) {
        match self {
            DetuningSetting::Symmetric => (delta / 2.0, -delta / 2.0),
            DetuningSetting::ProbeOnly => (delta, 0.0),
            DetuningSetting::CouplingOnly => (0.0, -delta),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DetuningSetting::Symmetric => "symmetric",
            DetuningSetting::ProbeOnly => "probe-only",
            DetuningSetting::CouplingOnly => "coupling-only",
        }
    }
}

impl fmt::Display for DetuningSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetuningSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "symmetric" => Ok(DetuningSetting::Symmetric),
            "probe-only" | "probe_only" => Ok(DetuningSetting::ProbeOnly),
            "coupling-only" | "coupling_only" => Ok(DetuningSetting::CouplingOnly),
            other => Err(Error::invalid(format!("unknown detuning setting '{other}'"))),
        }
    }
}

/// Unvalidated parameter record, as read from a config file or the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub gamma12: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub delta: Option<f64>,
    pub delta_p: Option<f64>,
    pub delta_c: Option<f64>,
    pub setting: Option<DetuningSetting>,
    /// Common input Rabi frequency, used for whichever of the two fields is not given.
    pub omega: Option<f64>,
    pub omega_p0: Option<C64>,
    pub omega_c0: Option<C64>,
    pub lc: Option<f64>,
    pub xi_steps: Option<usize>,
    pub g_norm: Option<f64>,
}

/// Validated physical configuration. Immutable; use the `with_*` methods to
/// derive modified copies, which are re-validated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemParams {
    alpha: f64,
    gamma: f64,
    gamma12: f64,
    gamma1: f64,
    gamma2: f64,
    delta: f64,
    delta_p: f64,
    delta_c: f64,
    omega_p0: C64,
    omega_c0: C64,
    lc: f64,
    xi_steps: usize,
    g_norm: Option<f64>,
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {v}")))
    }
}

fn finite_c(name: &str, v: C64) -> Result<C64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {v}")))
    }
}

/// Validates a raw record.
pub fn validate_params(raw: &RawParams) -> Result<SystemParams> {
    let alpha = finite("alpha", raw.alpha.ok_or_else(|| Error::invalid("alpha is required"))?)?;
    if alpha < 0.0 {
        return Err(Error::invalid(format!("alpha must be non-negative, got {alpha}")));
    }
    let gamma = finite("gamma", raw.gamma.unwrap_or(1.0))?;
    if gamma <= 0.0 {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    let gamma12 = finite("gamma12", raw.gamma12.unwrap_or(0.0))?;
    if gamma12 < 0.0 {
        return Err(Error::invalid(format!("gamma12 must be non-negative, got {gamma12}")));
    }
    let gamma1 = finite("gamma1", raw.gamma1.unwrap_or(gamma / 2.0))?;
    let gamma2 = finite("gamma2", raw.gamma2.unwrap_or(gamma - gamma1))?;
    if gamma1 < 0.0 || gamma2 < 0.0 || (gamma1 + gamma2 - gamma).abs() > 1e-12 * gamma {
        return Err(Error::invalid(format!(
            "branching rates gamma1={gamma1}, gamma2={gamma2} must be non-negative and sum to gamma={gamma}"
        )));
    }

    let (delta, delta_p, delta_c) = match (raw.delta_p, raw.delta_c, raw.setting) {
        (Some(_), _, Some(_)) | (_, Some(_), Some(_)) => {
            return Err(Error::invalid(
                "give either explicit delta_p/delta_c or a detuning setting, not both",
            ))
        }
        (Some(dp), Some(dc), None) => {
            let dp = finite("delta_p", dp)?;
            let dc = finite("delta_c", dc)?;
            let implied = dp - dc;
            if let Some(d) = raw.delta {
                let d = finite("delta", d)?;
                if (d - implied).abs() > DETUNING_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "delta={d} does not equal delta_p - delta_c = {implied}"
                    )));
                }
            }
            (implied, dp, dc)
        }
        (Some(_), None, None) | (None, Some(_), None) => {
            return Err(Error::invalid("delta_p and delta_c must be given together"))
        }
        (None, None, setting) => {
            let d = finite("delta", raw.delta.ok_or_else(|| Error::invalid("delta is required"))?)?;
            let (dp, dc) = setting.unwrap_or(DetuningSetting::Symmetric).split(d);
            (dp - dc, dp, dc)
        }
    };

    let common = raw.omega.map(|o| finite("omega", o)).transpose()?.map(C64::from);
    let omega_p0 = finite_c(
        "omega_p0",
        raw.omega_p0
            .or(common)
            .ok_or_else(|| Error::invalid("omega_p0 (or omega) is required"))?,
    )?;
    let omega_c0 = finite_c(
        "omega_c0",
        raw.omega_c0
            .or(common)
            .ok_or_else(|| Error::invalid("omega_c0 (or omega) is required"))?,
    )?;

    let lc = finite("lc", raw.lc.unwrap_or(0.0))?;
    if lc < 0.0 {
        return Err(Error::invalid(format!("lc must be non-negative, got {lc}")));
    }
    let xi_steps = raw.xi_steps.unwrap_or(DEFAULT_XI_STEPS);
    if xi_steps < 2 {
        return Err(Error::invalid(format!("xi_steps must be at least 2, got {xi_steps}")));
    }
    let g_norm = raw.g_norm.map(|g| finite("g_norm", g)).transpose()?;
    if matches!(g_norm, Some(g) if g <= 0.0) {
        return Err(Error::invalid("g_norm must be positive"));
    }

    Ok(SystemParams {
        alpha,
        gamma,
        gamma12,
        gamma1,
        gamma2,
        delta,
        delta_p,
        delta_c,
        omega_p0,
        omega_c0,
        lc,
        xi_steps,
        g_norm,
    })
}

impl SystemParams {
    /// Symmetric detuning with equal real input fields; the common case.
    pub fn new(alpha: f64, omega: f64, delta: f64) -> Result<Self> {
        validate_params(&RawParams {
            alpha: Some(alpha),
            omega: Some(omega),
            delta: Some(delta),
            ..RawParams::default()
        })
    }

    /// The record this value would be rebuilt from.
    pub fn to_raw(&self) -> RawParams {
        RawParams {
            alpha: Some(self.alpha),
            gamma: Some(self.gamma),
            gamma12: Some(self.gamma12),
            gamma1: Some(self.gamma1),
            gamma2: Some(self.gamma2),
            delta: Some(self.delta),
            delta_p: Some(self.delta_p),
            delta_c: Some(self.delta_c),
            setting: None,
            omega: None,
            omega_p0: Some(self.omega_p0),
            omega_c0: Some(self.omega_c0),
            lc: Some(self.lc),
            xi_steps: Some(self.xi_steps),
            g_norm: self.g_norm,
        }
    }

    fn rebuild(&self, edit: impl FnOnce(&mut RawParams)) -> Result<Self> {
        let mut raw = self.to_raw();
        edit(&mut raw);
        validate_params(&raw)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        self.rebuild(|r| r.alpha = Some(alpha))
    }

    pub fn with_fields(&self, omega_p0: C64, omega_c0: C64) -> Result<Self> {
        self.rebuild(|r| {
            r.omega_p0 = Some(omega_p0);
            r.omega_c0 = Some(omega_c0);
        })
    }

    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        self.with_fields(C64::from(omega), C64::from(omega))
    }

    pub fn with_detuning(&self, delta: f64, setting: DetuningSetting) -> Result<Self> {
        self.rebuild(|r| {
            r.delta = Some(delta);
            r.delta_p = None;
            r.delta_c = None;
            r.setting = Some(setting);
        })
    }

    pub fn with_explicit_detunings(&self, delta_p: f64, delta_c: f64) -> Result<Self> {
        self.rebuild(|r| {
            r.delta = None;
            r.delta_p = Some(delta_p);
            r.delta_c = Some(delta_c);
        })
    }

    pub fn with_gamma12(&self, gamma12: f64) -> Result<Self> {
        self.rebuild(|r| r.gamma12 = Some(gamma12))
    }

    pub fn with_branching(&self, gamma1: f64, gamma2: f64) -> Result<Self> {
        self.rebuild(|r| {
            r.gamma1 = Some(gamma1);
            r.gamma2 = Some(gamma2);
        })
    }

    pub fn with_lc(&self, lc: f64) -> Result<Self> {
        self.rebuild(|r| r.lc = Some(lc))
    }

    pub fn with_xi_steps(&self, xi_steps: usize) -> Result<Self> {
        self.rebuild(|r| r.xi_steps = Some(xi_steps))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn gamma12(&self) -> f64 {
        self.gamma12
    }
    /// Branching rate of |3⟩ → |1⟩.
    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }
    /// Branching rate of |3⟩ → |2⟩.
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn delta_p(&self) -> f64 {
        self.delta_p
    }
    pub fn delta_c(&self) -> f64 {
        self.delta_c
    }
    pub fn omega_p0(&self) -> C64 {
        self.omega_p0
    }
    pub fn omega_c0(&self) -> C64 {
        self.omega_c0
    }
    /// Vacuum transit time L/c in units of 1/Γ.
    pub fn lc(&self) -> f64 {
        self.lc
    }
    pub fn xi_steps(&self) -> usize {
        self.xi_steps
    }
    /// Single-photon Rabi frequency. Informational only: the noise terms are
    /// written in a form where it cancels against the optical density.
    pub fn g_norm(&self) -> Option<f64> {
        self.g_norm
    }

    /// Errors unless at least one input field is nonzero.
    pub fn require_input_field(&self) -> Result<()> {
        if self.omega_p0.norm_sqr() + self.omega_c0.norm_sqr() > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("at least one input Rabi frequency must be nonzero"))
        }
    }
}

/// Steady-state density-matrix elements in the order
/// (σ31, σ32, σ21, σ11, σ22, σ33, σ12, σ23, σ13).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomicState {
    pub x: [C64; 9],
}

impl AtomicState {
    pub fn from_slice(x: &[C64]) -> Self {
        let mut out = [C64::default(); 9];
        out.copy_from_slice(x);
        AtomicState { x: out }
    }

    pub fn s31(&self) -> C64 {
        self.x[idx::S31]
    }
    pub fn s32(&self) -> C64 {
        self.x[idx::S32]
    }
    pub fn s21(&self) -> C64 {
        self.x[idx::S21]
    }
    pub fn s11(&self) -> C64 {
        self.x[idx::S11]
    }
    pub fn s22(&self) -> C64 {
        self.x[idx::S22]
    }
    pub fn s33(&self) -> C64 {
        self.x[idx::S33]
    }
    pub fn s12(&self) -> C64 {
        self.x[idx::S12]
    }
    pub fn s23(&self) -> C64 {
        self.x[idx::S23]
    }
    pub fn s13(&self) -> C64 {
        self.x[idx::S13]
    }

    /// ρ with ρ_ij = ⟨σ_ji⟩ (the expectation of |i⟩⟨j| is ρ_ji).
    pub fn density_matrix(&self) -> Matrix3<C64> {
        let mut rho = Matrix3::zeros();
        for (slot, &(i, j)) in SLOT_LEVELS.iter().enumerate() {
            rho[(j, i)] = self.x[slot];
        }
        rho
    }

    /// Checks populations, trace, conjugate pairs and positivity; returns the
    /// first violated condition.
    pub fn check_invariants(&self, tol: f64, eig_tol: f64) -> std::result::Result<(), String> {
        let pops = [self.s11(), self.s22(), self.s33()];
        for (k, p) in pops.iter().enumerate() {
            if p.im.abs() > tol {
                return Err(format!("population {} has imaginary part {}", k + 1, p.im));
            }
            if p.re < -tol || p.re > 1.0 + tol {
                return Err(format!("population {} = {} outside [0, 1]", k + 1, p.re));
            }
        }
        let trace: f64 = pops.iter().map(|p| p.re).sum();
        if (trace - 1.0).abs() > tol {
            return Err(format!("trace = {trace}"));
        }
        for (a, b) in [(idx::S12, idx::S21), (idx::S13, idx::S31), (idx::S23, idx::S32)] {
            if (self.x[a] - self.x[b].conj()).norm() > tol {
                return Err(format!("slots {a} and {b} are not conjugate"));
            }
        }
        let rho = self.density_matrix();
        let herm = (rho + rho.adjoint()) * C64::from(0.5);
        let min_eig = herm.symmetric_eigenvalues().min();
        if min_eig < -eig_tol {
            return Err(format!("density matrix eigenvalue {min_eig}"));
        }
        Ok(())
    }
}

// (i, j) level pair (zero-based) for σ_ij in each slot.
const SLOT_LEVELS: [(usize, usize); 9] = [
    (2, 0),
    (2, 1),
    (1, 0),
    (0, 0),
    (1, 1),
    (2, 2),
    (0, 1),
    (1, 2),
    (0, 2),
];

/// Mean Rabi envelopes on the ξ grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldProfile {
    pub xi: Vec<f64>,
    pub omega_p: Vec<C64>,
    pub omega_c: Vec<C64>,
}

impl FieldProfile {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.xi.len();
        if n < 2 || self.omega_p.len() != n || self.omega_c.len() != n {
            return Err("profile arrays must share a length of at least 2".into());
        }
        if self.xi[0] != 0.0 || self.xi[n - 1] != 1.0 {
            return Err("xi must run from 0 to 1".into());
        }
        if self.xi.windows(2).any(|w| w[1] <= w[0]) {
            return Err("xi must be strictly increasing".into());
        }
        Ok(())
    }
}

/// Second moments of the field fluctuations, normally ordered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CorrelationState {
    /// ⟨âp²⟩
    pub c_pp: C64,
    /// ⟨âp†âp⟩
    pub n_p: f64,
    /// ⟨âc²⟩
    pub c_cc: C64,
    /// ⟨âc†âc⟩
    pub n_c: f64,
    /// ⟨âpâc⟩
    pub c_pc: C64,
    /// ⟨âp†âc⟩
    pub x_pc: C64,
}

impl CorrelationState {
    /// Coherent-state input: every normally ordered moment vanishes.
    pub fn vacuum() -> Self {
        Self::default()
    }

    /// ⟨a a†⟩ for a = (âp, âp†, âc, âc†), including the commutator terms.
    pub fn to_matrix(&self) -> nalgebra::Matrix4<C64> {
        let one = C64::from(1.0);
        let np = C64::from(self.n_p);
        let nc = C64::from(self.n_c);
        let xc = self.x_pc.conj();
        nalgebra::Matrix4::new(
            np + one,
            self.c_pp,
            xc,
            self.c_pc,
            self.c_pp.conj(),
            np,
            self.c_pc.conj(),
            self.x_pc,
            self.x_pc,
            self.c_pc,
            nc + one,
            self.c_cc,
            self.c_pc.conj(),
            xc,
            self.c_cc.conj(),
            nc,
        )
    }

    /// Inverse of [`to_matrix`](Self::to_matrix), reading the upper triangle.
    pub fn from_matrix(g: &nalgebra::Matrix4<C64>) -> Self {
        CorrelationState {
            c_pp: g[(0, 1)],
            n_p: g[(1, 1)].re,
            c_cc: g[(2, 3)],
            n_c: g[(3, 3)].re,
            c_pc: g[(0, 3)],
            x_pc: g[(1, 3)],
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.c_pp, self.c_cc, self.c_pc, self.x_pc]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
            && self.n_p.is_finite()
            && self.n_c.is_finite()
    }

    /// Largest absolute difference over the six moments.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        [
            (self.c_pp - other.c_pp).norm(),
            (self.n_p - other.n_p).abs(),
            (self.c_cc - other.c_cc).norm(),
            (self.n_c - other.n_c).abs(),
            (self.c_pc - other.c_pc).norm(),
            (self.x_pc - other.x_pc).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// The same moments with the probe and coupling modes exchanged.
    pub fn swapped(&self) -> Self {
        CorrelationState {
            c_pp: self.c_cc,
            n_p: self.n_c,
            c_cc: self.c_pp,
            n_c: self.n_p,
            c_pc: self.c_pc,
            x_pc: self.x_pc.conj(),
        }
    }
}

/// Output squeezing of the probe field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqueezingResult {
    /// Minimum quadrature variance, vacuum = 1.
    pub variance: f64,
    pub variance_db: f64,
    /// Quadrature angle attaining `variance`, in [0, π).
    pub theta_opt: f64,
    pub transmission_p: f64,
    pub transmission_c: f64,
    pub params_echo: SystemParams,
}

/// Quadrature-noise spectrum at a fixed quadrature angle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub omega: Vec<f64>,
    pub s: Vec<f64>,
    pub theta_used: f64,
    /// Edge of the squeezing band, when extractable.
    pub bandwidth: Option<f64>,
    /// Frequency where S first rises to (1 + S(0))/2.
    pub half_depth_width: Option<f64>,
    /// Oscillation period of S(ω), when extractable.
    pub period: Option<f64>,
    /// Frequencies whose evaluation failed, with the reason.
    pub failures: Vec<(f64, String)>,
}

pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
