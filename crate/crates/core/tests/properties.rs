mod common;

use std::f64::consts::PI;

use cpt_squeeze::correlations::{minimum_variance, propagate_correlations_matrix};
use cpt_squeeze::linalg::{hermitian_defect, min_hermitian_eigenvalue, Mat9};
use cpt_squeeze::model::to_db;
use cpt_squeeze::{
    local_matrices, propagate_correlations, quadrature_variance, response_coefficients, squeeze, steady_state,
    CorrelationState, SystemParams, C64,
};
use proptest::prelude::*;

fn field() -> impl Strategy<Value = C64> {
    (0.01f64..3.0, -PI..PI).prop_map(|(r, phi)| C64::from_polar(r, phi))
}

fn atomic_params() -> impl Strategy<Value = SystemParams> {
    (0.0f64..3000.0, -0.1f64..0.1, prop_oneof![Just(0.0), 0.0f64..0.05]).prop_map(|(alpha, delta, g12)| {
        SystemParams::new(alpha, 1.0, delta).unwrap().with_gamma12(g12).unwrap()
    })
}

/// Equal real input fields with the symmetric split. |ε| = |δ|/Ω² is kept
/// below 4α^(-3/4) (about twice the optimum), beyond which the fields can be
/// absorbed completely and the propagation legitimately fails.
fn propagation_params() -> impl Strategy<Value = SystemParams> {
    (0.0f64..3000.0, 0.3f64..3.0, -1.0f64..1.0).prop_map(|(alpha, omega, u)| {
        let eps_max = (4.0 * alpha.max(1.0).powf(-0.75)).min(0.1);
        let delta = u * eps_max * omega * omega;
        SystemParams::new(alpha, omega, delta).unwrap().with_xi_steps(200).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn steady_state_is_a_density_matrix(p in atomic_params(), op in field(), oc in field()) {
        let s = steady_state(&p, op, oc).unwrap();
        prop_assert!(s.check_invariants(1e-10, 1e-9).is_ok(), "{:?}", s.check_invariants(1e-10, 1e-9));
    }

    #[test]
    fn steady_state_matches_relaxation(p in atomic_params(), op in field(), oc in field()) {
        let s = steady_state(&p, op, oc).unwrap();
        let oracle = common::relaxation_steady_state(&p, op, oc);
        let err = s.x.iter().zip(oracle.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn common_phase_leaves_populations_and_moduli(p in atomic_params(), op in field(), oc in field(), phi in -PI..PI) {
        let rot = C64::from_polar(1.0, phi);
        let a = steady_state(&p, op, oc).unwrap();
        let b = steady_state(&p, op * rot, oc * rot).unwrap();
        for k in 0..9 {
            prop_assert!((a.x[k].norm() - b.x[k].norm()).abs() < 1e-10);
        }
        for k in 3..6 {
            prop_assert!((a.x[k] - b.x[k]).norm() < 1e-10);
        }
    }

    #[test]
    fn response_and_noise_matrices_are_consistent(p in atomic_params(), op in field(), oc in field()) {
        let b = response_coefficients(&p, op, oc).unwrap();
        let tm = b.t * b.m1 + Mat9::identity();
        prop_assert!(tm.iter().all(|z| z.norm() < 1e-9));
        prop_assert!(hermitian_defect(&b.d) < 1e-12);
        prop_assert!(min_hermitian_eigenvalue(&b.d) > -1e-9);
        let m = local_matrices(&p, op, oc).unwrap();
        prop_assert!(hermitian_defect(&m.z4) < 1e-12 * (1.0 + p.alpha()));
        prop_assert!(min_hermitian_eigenvalue(&m.z4) > -1e-9 * (1.0 + p.alpha()));
    }

    #[test]
    fn optimal_angle_beats_every_grid_angle(
        re in -1.0f64..1.0, im in -1.0f64..1.0, extra in 0.0f64..1.0,
    ) {
        let c_pp = C64::new(re, im);
        let corr = CorrelationState { c_pp, n_p: c_pp.norm() + extra, ..CorrelationState::default() };
        let (v, theta) = minimum_variance(&corr);
        prop_assert!((0.0..PI).contains(&theta));
        for k in 0..360 {
            let th = k as f64 * PI / 180.0;
            prop_assert!(v <= quadrature_variance(&corr, th) + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn propagation_invariants(p in propagation_params()) {
        let run = squeeze(&p).unwrap();
        let r = &run.result;
        prop_assert!(r.variance > 0.0);
        prop_assert!((10f64.powf(r.variance_db / 10.0) / r.variance - 1.0).abs() < 1e-12);
        prop_assert!((to_db(r.variance) - r.variance_db).abs() < 1e-12);
        // passivity
        let ip = p.omega_p0().norm_sqr();
        let ic = p.omega_c0().norm_sqr();
        prop_assert!(r.transmission_p * ip + r.transmission_c * ic <= ip + ic + 1e-9);
        prop_assert!(run.min_photon_number >= -1e-9);
        // uncertainty product of conjugate quadratures
        let v1 = quadrature_variance(&run.correlations, r.theta_opt);
        let v2 = quadrature_variance(&run.correlations, r.theta_opt + PI / 2.0);
        prop_assert!(v1 * v2 >= 1.0 - 1e-6, "product {}", v1 * v2);
        // probe/coupling exchange symmetry
        let vc = minimum_variance(&run.correlations.swapped()).0;
        prop_assert!((vc - r.variance).abs() < 1e-8);
    }

    #[test]
    fn dual_formulations_agree(p in propagation_params()) {
        let run = squeeze(&p).unwrap();
        let scalar = propagate_correlations(&p, &run.mean).unwrap();
        let matrix = propagate_correlations_matrix(&p, &run.mean).unwrap();
        prop_assert!(scalar.max_abs_diff(&matrix) < 1e-10);
    }
}
