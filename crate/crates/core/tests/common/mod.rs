//! Independent reference calculations shared by the integration tests.
#![allow(dead_code)]

use cpt_squeeze::{steady_state, SystemParams, C64};
use nalgebra::{Matrix3, SMatrix, SVector};

type Liouvillian = SMatrix<C64, 9, 9>;
type RhoVec = SVector<C64, 9>;

fn ket_bra(i: usize, j: usize) -> Matrix3<C64> {
    let mut m = Matrix3::zeros();
    m[(i, j)] = C64::from(1.0);
    m
}

/// Rotating-frame Hamiltonian of the Λ system with levels |1⟩, |2⟩, |3⟩
/// (indices 0, 1, 2), probe on 1–3 and coupling on 2–3.
fn hamiltonian(params: &SystemParams, omega_p: C64, omega_c: C64) -> Matrix3<C64> {
    let half = C64::from(0.5);
    -ket_bra(2, 2) * C64::from(params.delta_p()) - ket_bra(1, 1) * C64::from(params.delta())
        - (ket_bra(2, 0) * omega_p + ket_bra(0, 2) * omega_p.conj() + ket_bra(2, 1) * omega_c + ket_bra(1, 2) * omega_c.conj())
            * half
}

/// dρ/dt for the master equation with spontaneous decay |3⟩ → |1⟩, |2⟩ and
/// ground-coherence damping.
fn drho(params: &SystemParams, h: &Matrix3<C64>, rho: &Matrix3<C64>) -> Matrix3<C64> {
    let i = C64::new(0.0, 1.0);
    let mut out = -(h * rho - rho * h) * i;
    for (target, rate) in [(0usize, params.gamma1()), (1, params.gamma2())] {
        let l = ket_bra(target, 2) * C64::from(rate.sqrt());
        let ld = l.adjoint();
        out += l * rho * ld - (ld * l * rho + rho * ld * l) * C64::from(0.5);
    }
    out[(0, 1)] -= rho[(0, 1)] * params.gamma12();
    out[(1, 0)] -= rho[(1, 0)] * params.gamma12();
    out
}

fn liouvillian(params: &SystemParams, omega_p: C64, omega_c: C64) -> Liouvillian {
    let h = hamiltonian(params, omega_p, omega_c);
    let mut l = Liouvillian::zeros();
    for col in 0..9 {
        let basis = ket_bra(col / 3, col % 3);
        let d = drho(params, &h, &basis);
        for row in 0..9 {
            l[(row, col)] = d[(row / 3, row % 3)];
        }
    }
    l
}

/// Density-matrix elements in the ordering of the atomic state vector,
/// using ⟨σ_ij⟩ = ρ_ji.
pub fn to_state_order(rho: &Matrix3<C64>) -> [C64; 9] {
    [
        rho[(0, 2)],
        rho[(1, 2)],
        rho[(0, 1)],
        rho[(0, 0)],
        rho[(1, 1)],
        rho[(2, 2)],
        rho[(1, 0)],
        rho[(2, 1)],
        rho[(2, 0)],
    ]
}

/// Relaxes the master equation from ρ = |1⟩⟨1| with backward-Euler steps of
/// geometrically growing length until ‖dρ/dt‖ < 1e-12.
pub fn relaxation_steady_state(params: &SystemParams, omega_p: C64, omega_c: C64) -> [C64; 9] {
    let l = liouvillian(params, omega_p, omega_c);
    let mut rho = RhoVec::zeros();
    rho[0] = C64::from(1.0);
    let mut dt = 1e-2;
    for _ in 0..400 {
        let step = Liouvillian::identity() - l * C64::from(dt);
        rho = step.lu().solve(&rho).expect("backward Euler step is regular");
        let trace = rho[0] + rho[4] + rho[8];
        rho /= trace;
        let rate = (l * rho).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if rate < 1e-12 {
            break;
        }
        dt = (dt * 2.0).min(1e9);
    }
    let m = Matrix3::from_fn(|r, c| rho[3 * r + c]);
    to_state_order(&m)
}

/// Wirtinger derivatives of the steady-state σ13 (row 0) and σ23 (row 1)
/// with respect to (Ωp, Ωp*, Ωc, Ωc*) by central differences on the real and
/// imaginary parts of each field.
pub fn finite_difference_response(params: &SystemParams, omega_p: C64, omega_c: C64, step: f64) -> [[C64; 4]; 2] {
    let eval = |op: C64, oc: C64| {
        let s = steady_state(params, op, oc).expect("steady state");
        [s.s13(), s.s23()]
    };
    let mut out = [[C64::default(); 4]; 2];
    for field in 0..2 {
        let shift = |d: C64| if field == 0 { (omega_p + d, omega_c) } else { (omega_p, omega_c + d) };
        let partial = |d: C64| {
            let (a, b) = shift(d);
            let (c, e) = shift(-d);
            let (p, m) = (eval(a, b), eval(c, e));
            [(p[0] - m[0]) / (2.0 * step), (p[1] - m[1]) / (2.0 * step)]
        };
        let dx = partial(C64::from(step));
        let dy = partial(C64::new(0.0, step));
        let i = C64::new(0.0, 1.0);
        for row in 0..2 {
            // ∂/∂z = (∂x − i∂y)/2 and ∂/∂z* = (∂x + i∂y)/2
            out[row][2 * field] = (dx[row] - i * dy[row]) * 0.5;
            out[row][2 * field + 1] = (dx[row] + i * dy[row]) * 0.5;
        }
    }
    out
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
