//! Steady-state Bloch system of the Λ atom and its linear response to field
//! fluctuations.
//!
//! The nine unknowns are ordered as in [`idx`]. Row 6 of the Bloch matrix is
//! replaced by population conservation, so the steady state solves
//! `M1 · x = b` with `b = e6`. Field fluctuations enter through the 9×4 matrix
//! `M2`, acting on (δΩp, δΩp*, δΩc, δΩc*), and the atomic response is
//! `y = T·M2·u + T·r` with `T = −M1⁻¹` and `r` the Langevin forces.

use serde::Serialize;

use crate::error::Result;
use crate::linalg::{Factorized, Mat4x9, Mat9, Mat9x4, Vec9};
use crate::model::{idx, AtomicState, SystemParams, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn half(z: C64) -> C64 {
    z * 0.5
}

/// Bloch matrix with the population-conservation row in slot 6.
pub fn build_m1(params: &SystemParams, omega_p: C64, omega_c: C64) -> Mat9 {
    use idx::*;
    let g = params.gamma();
    let g13 = C64::new(g / 2.0, -params.delta_p());
    let g23 = C64::new(g / 2.0, -params.delta_c());
    let g21 = C64::new(params.gamma12(), params.delta());
    let (op, oc) = (omega_p, omega_c);
    let (opc, occ) = (op.conj(), oc.conj());

    let mut m = Mat9::zeros();
    // σ31
    m[(S31, S31)] = -g13.conj();
    m[(S31, S21)] = -I * half(occ);
    m[(S31, S11)] = -I * half(opc);
    m[(S31, S33)] = I * half(opc);
    // σ32
    m[(S32, S32)] = -g23.conj();
    m[(S32, S22)] = -I * half(occ);
    m[(S32, S33)] = I * half(occ);
    m[(S32, S12)] = -I * half(opc);
    // σ21
    m[(S21, S31)] = -I * half(oc);
    m[(S21, S21)] = -g21;
    m[(S21, S23)] = I * half(opc);
    // σ11
    m[(S11, S31)] = -I * half(op);
    m[(S11, S33)] = C64::from(params.gamma1());
    m[(S11, S13)] = I * half(opc);
    // σ22
    m[(S22, S32)] = -I * half(oc);
    m[(S22, S33)] = C64::from(params.gamma2());
    m[(S22, S23)] = I * half(occ);
    // population conservation
    m[(S33, S11)] = C64::from(1.0);
    m[(S33, S22)] = C64::from(1.0);
    m[(S33, S33)] = C64::from(1.0);
    // σ12
    m[(S12, S32)] = -I * half(op);
    m[(S12, S12)] = -g21.conj();
    m[(S12, S13)] = I * half(occ);
    // σ23
    m[(S23, S21)] = I * half(op);
    m[(S23, S22)] = I * half(oc);
    m[(S23, S33)] = -I * half(oc);
    m[(S23, S23)] = -g23;
    // σ13
    m[(S13, S11)] = I * half(op);
    m[(S13, S33)] = -I * half(op);
    m[(S13, S12)] = I * half(oc);
    m[(S13, S13)] = -g13;
    m
}

fn rhs_vector() -> Vec9 {
    let mut b = Vec9::zeros();
    b[idx::S33] = C64::from(1.0);
    b
}

/// Steady state together with the factorized Bloch matrix it came from.
pub(crate) struct LocalSolution {
    pub state: AtomicState,
    pub m1: Mat9,
    pub factorized: Factorized,
}

pub(crate) fn solve_local(params: &SystemParams, omega_p: C64, omega_c: C64) -> Result<LocalSolution> {
    let m1 = build_m1(params, omega_p, omega_c);
    let factorized = Factorized::new(m1)?;
    let x = factorized.solve(&rhs_vector());
    Ok(LocalSolution {
        state: AtomicState::from_slice(x.as_slice()),
        m1,
        factorized,
    })
}

/// Steady state of the Bloch equations at the given local fields.
///
/// Fails with `SingularSystem` when the dark manifold is degenerate (both
/// fields zero with no ground-state relaxation).
pub fn steady_state(params: &SystemParams, omega_p: C64, omega_c: C64) -> Result<AtomicState> {
    Ok(solve_local(params, omega_p, omega_c)?.state)
}

/// Coupling of the atomic fluctuations to (δΩp, δΩp*, δΩc, δΩc*).
pub fn build_m2(state: &AtomicState) -> Mat9x4 {
    use idx::*;
    let s = state;
    let p_inv = s.s11() - s.s33();
    let c_inv = s.s22() - s.s33();
    let mut m = Mat9x4::zeros();
    m[(S31, 1)] = -I * p_inv;
    m[(S31, 3)] = -I * s.s21();
    m[(S32, 1)] = -I * s.s12();
    m[(S32, 3)] = -I * c_inv;
    m[(S21, 1)] = I * s.s23();
    m[(S21, 2)] = -I * s.s31();
    m[(S11, 0)] = -I * s.s31();
    m[(S11, 1)] = I * s.s13();
    m[(S22, 2)] = -I * s.s32();
    m[(S22, 3)] = I * s.s23();
    m[(S12, 0)] = -I * s.s32();
    m[(S12, 3)] = I * s.s13();
    m[(S23, 0)] = I * s.s21();
    m[(S23, 2)] = I * c_inv;
    m[(S13, 0)] = I * p_inv;
    m[(S13, 2)] = I * s.s12();
    m * C64::from(0.5)
}

/// Langevin diffusion matrix `D(μ, ν) = ⟨r_μ r_ν†⟩` (per unit density and time),
/// from the generalized Einstein relation. Ground-state relaxation does not
/// contribute.
pub fn build_diffusion(state: &AtomicState, params: &SystemParams) -> Mat9 {
    use idx::*;
    let s = state;
    let g = params.gamma();
    let g1 = params.gamma1();
    let g2 = params.gamma2();
    let s33 = s.s33();
    let mut d = Mat9::zeros();
    d[(S21, S21)] = s33 * g2;
    d[(S11, S11)] = s33 * g1;
    d[(S11, S23)] = -s.s32() * g1;
    d[(S11, S13)] = -s.s31() * g1;
    d[(S22, S22)] = s33 * g2;
    d[(S22, S23)] = -s.s32() * g2;
    d[(S22, S13)] = -s.s31() * g2;
    d[(S12, S12)] = s33 * g1;
    d[(S23, S11)] = -s.s23() * g1;
    d[(S23, S22)] = -s.s23() * g2;
    d[(S23, S23)] = s33 * g2 + s.s22() * g;
    d[(S23, S13)] = s.s21() * g;
    d[(S13, S11)] = -s.s13() * g1;
    d[(S13, S22)] = -s.s13() * g2;
    d[(S13, S23)] = s.s12() * g;
    d[(S13, S13)] = s33 * g1 + s.s11() * g;
    d
}

/// Linear response of σ13 (index 1) and σ23 (index 2) to the field
/// fluctuations: `s13 = A1 up + B1 up† + C1 uc + D1 uc† + f13`, and likewise
/// for `s23`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseCoefficients {
    pub a1: C64,
    pub b1: C64,
    pub c1: C64,
    pub d1: C64,
    pub a2: C64,
    pub b2: C64,
    pub c2: C64,
    pub d2: C64,
}

impl ResponseCoefficients {
    pub fn row1(&self) -> [C64; 4] {
        [self.a1, self.b1, self.c1, self.d1]
    }

    pub fn row2(&self) -> [C64; 4] {
        [self.a2, self.b2, self.c2, self.d2]
    }
}

/// Everything the fluctuation propagation needs at one point of the medium.
#[derive(Debug, Clone)]
pub struct ResponseBundle {
    pub state: AtomicState,
    pub m1: Mat9,
    /// `T = −M1⁻¹`.
    pub t: Mat9,
    pub m2: Mat9x4,
    pub d: Mat9,
    pub coeffs: ResponseCoefficients,
    /// Rows (T₉, −T₁, T₈, −T₂): maps the Langevin forces onto
    /// (f13, −f13†, f23, −f23†).
    pub v4x9: Mat4x9,
}

/// Stacks rows 9, 1, 8, 2 of `t` with the signs (+, −, +, −).
pub fn noise_mixing(t: &Mat9) -> Mat4x9 {
    let mut v = Mat4x9::zeros();
    v.set_row(0, &t.row(idx::S13));
    v.set_row(1, &(-t.row(idx::S31)));
    v.set_row(2, &t.row(idx::S23));
    v.set_row(3, &(-t.row(idx::S32)));
    v
}

pub(crate) fn bundle_from_local(params: &SystemParams, local: LocalSolution) -> ResponseBundle {
    let t = -local.factorized.inverse();
    let m2 = build_m2(&local.state);
    let tm2 = t * m2;
    let r1 = tm2.row(idx::S13);
    let r2 = tm2.row(idx::S23);
    let coeffs = ResponseCoefficients {
        a1: r1[0],
        b1: r1[1],
        c1: r1[2],
        d1: r1[3],
        a2: r2[0],
        b2: r2[1],
        c2: r2[2],
        d2: r2[3],
    };
    ResponseBundle {
        d: build_diffusion(&local.state, params),
        v4x9: noise_mixing(&t),
        state: local.state,
        m1: local.m1,
        t,
        m2,
        coeffs,
    }
}

pub fn response_coefficients(params: &SystemParams, omega_p: C64, omega_c: C64) -> Result<ResponseBundle> {
    let local = solve_local(params, omega_p, omega_c)?;
    Ok(bundle_from_local(params, local))
}
