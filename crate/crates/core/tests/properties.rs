use approx::assert_relative_eq;
use proptest::prelude::*;

use magsense::bounds::{cs_limit, cs_recursion, cs_recursion_iterated, BoundParams};
use magsense::cog::CogEngine;
use magsense::control::{are_residual, are_solution, lqr_gain, LqrWeights};
use magsense::harness::dt_guard;
use magsense::sme::{SensorParams, SmeEngine};
use magsense::spin::wigner::{multipoles, project_multipoles, wigner_sphere, SphereGrid};
use magsense::spin::{build_collective_operators, css_x, moments};
use magsense::stochastic::{wiener_increment, OuParams, RngStream};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sme_steps_keep_a_valid_density_matrix(
        n in 2usize..16,
        m in 0.1f64..2.0,
        kc in 0.0f64..0.5,
        omega in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let p = SensorParams::new(n as f64, m, 1.0, kc, 0.0).unwrap();
        let mut engine = SmeEngine::new(p).unwrap();
        let mut rho = css_x(n).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let dt = dt_guard(&p) / 2.0;
        for _ in 0..200 {
            let dw = wiener_increment(&mut rng, dt).unwrap();
            engine.step(&mut rho, omega, 0.0, dt, dw).unwrap();
        }
        let r = rho.report(true);
        prop_assert!(r.trace_error < 1e-10);
        prop_assert!(r.hermiticity < 1e-12);
        prop_assert!(r.min_eigenvalue.unwrap() > -1e-10);
        prop_assert!(rho.purity() <= 1.0 + 1e-10);
    }

    #[test]
    fn css_has_standard_quantum_limit_moments(n in 1usize..80) {
        let m = moments(&css_x(n).unwrap(), &build_collective_operators(n).unwrap()).unwrap();
        let nf = n as f64;
        assert_relative_eq!(m.mean[0], nf / 2.0, max_relative = 1e-10);
        assert_relative_eq!(m.var_y(), nf / 4.0, max_relative = 1e-10);
        assert_relative_eq!(m.var_z(), nf / 4.0, max_relative = 1e-10);
        prop_assert!(m.var_x().abs() < 1e-8 * nf);
        assert_relative_eq!(m.xi2_y(n).unwrap(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn recursion_closed_form_matches_iteration(
        q in 1e-3f64..1e3,
        kc in 1e-4f64..1.0,
        kl in 0.0f64..10.0,
        n in 1e2f64..1e8,
        sigma0 in 0.1f64..10.0,
        chi in 0.0f64..1.0,
        k in 1usize..3000,
    ) {
        let bp = BoundParams { q_omega: q, kappa_coll: kc, kappa_loc: kl, n_atoms: n, sigma0 };
        let dt = 1e-3 * (bp.kappa_q() / q).sqrt();
        let a = cs_recursion(k, dt, chi, &bp).unwrap();
        let b = cs_recursion_iterated(k, dt, chi, &bp).unwrap();
        prop_assert!((a / b - 1.0).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn bound_relaxes_monotonically_to_steady_state(
        q in 1e-3f64..1e3,
        kc in 1e-4f64..1.0,
        n in 1e2f64..1e8,
        sigma0 in 0.1f64..10.0,
        t in 1e-4f64..10.0,
    ) {
        let bp = BoundParams { q_omega: q, kappa_coll: kc, kappa_loc: 0.0, n_atoms: n, sigma0 };
        let v0 = cs_limit(0.0, &bp).unwrap().variance;
        assert_relative_eq!(v0, sigma0 * sigma0, max_relative = 1e-12);
        let vss = (q * bp.kappa_q()).sqrt();
        let v1 = cs_limit(t, &bp).unwrap().variance;
        let v2 = cs_limit(2.0 * t, &bp).unwrap().variance;
        let tol = 1e-9 * v0.max(vss);
        prop_assert!(v1 >= v0.min(vss) - tol && v1 <= v0.max(vss) + tol);
        prop_assert!((v2 - vss).abs() <= (v1 - vss).abs() + tol);
    }

    #[test]
    fn lqr_gain_solves_the_algebraic_riccati_equation(
        p_j in 1e-4f64..1e4,
        nu in 1e-4f64..1e4,
        j in 1.0f64..1e6,
        chi in 1e-3f64..1e3,
    ) {
        let w = LqrWeights::new(p_j, 0.0, nu).unwrap();
        let lam = are_solution(&w, j, chi).unwrap();
        let scale = lam.abs().max().max(1.0);
        prop_assert!(are_residual(&lam, &w, j, chi).abs().max() < 1e-9 * scale * scale);
        let g = lqr_gain(&w, j, chi).unwrap();
        prop_assert!(g.g_omega > 0.0 && g.g_omega <= 1.0);
        assert_relative_eq!(g.g_y, (p_j / nu).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn ou_variance_grows_to_the_stationary_value(chi in 1e-3f64..1e3, q in 1e-3f64..1e6, t in 1e-6f64..1e2) {
        let ou = OuParams::new(chi, q, 0.0).unwrap();
        let v = ou.variance_at(t);
        let stationary = q / (2.0 * chi);
        prop_assert!(v > 0.0 && v <= stationary * (1.0 + 1e-12));
        prop_assert!(ou.variance_at(2.0 * t) >= v);
        let (v_a, v_b) = (ou.transition(0.0, t).1, ou.transition(0.0, 2.0 * t).1);
        let composed = v_a * (-2.0 * chi * t).exp() + v_a;
        assert_relative_eq!(v_b, composed, max_relative = 1e-9);
    }

    #[test]
    fn cog_moments_stay_physical(
        n in 1e3f64..1e12,
        m in 1e-3f64..10.0,
        kc in 0.0f64..0.1,
        omega in -1.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let p = SensorParams::new(n, m, 1.0, kc, 0.0).unwrap();
        let mut engine = CogEngine::new(p).unwrap();
        let mut rng = RngStream::new(seed, 1);
        let dt = dt_guard(&p) / 2.0;
        for _ in 0..500 {
            let dw = wiener_increment(&mut rng, dt).unwrap();
            let rec = engine.step(omega, 0.0, dt, dw).unwrap();
            prop_assert!(rec.moments.var_y() > 0.0);
            prop_assert!(rec.moments.mean[0] > 0.0 && rec.moments.mean[0] <= n / 2.0 * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn wigner_quadrature_recovers_multipoles(n in 1usize..8, seed in any::<u64>()) {
        let p = SensorParams::new(n as f64, 1.0, 1.0, 0.1, 0.0).unwrap();
        let mut engine = SmeEngine::new(p).unwrap();
        let mut rho = css_x(n).unwrap();
        let mut rng = RngStream::new(seed, 2);
        for _ in 0..50 {
            let dw = wiener_increment(&mut rng, 1e-3).unwrap();
            engine.step(&mut rho, 0.5, 0.0, 1e-3, dw).unwrap();
        }
        let grid = SphereGrid::for_atoms(n);
        let field = wigner_sphere(&rho, &grid).unwrap();
        let back = project_multipoles(&field, &grid, n);
        for (a, b) in multipoles(&rho).iter().zip(&back) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }
}
