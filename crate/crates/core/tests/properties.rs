use std::f64::consts::PI;

use proptest::prelude::*;

use lvctl::comparison::{discrete_slack, monitor_constraints};
use lvctl::discretization::{apply_laplacian, principal_eigenvalue, Boundary, Grid};
use lvctl::elliptic::{
    barrier_guess, probe_uniqueness, solve_logistic_theta, solve_steady_system, SteadyClass,
};
use lvctl::model::{classify_regime, Params};
use lvctl::parabolic::{simulate, BcKind, ControlSet, Equation, SimOptions, StatePair, Stepper};

fn symmetric(a: f64, d: f64, length: f64) -> Params {
    Params {
        a1: a,
        a2: a,
        d1: d,
        d2: d,
        length,
        omega: (0.0, length),
        ..Params::coexistence_preset()
    }
}

#[test]
fn theta_converges_at_second_order() {
    let p = symmetric(10.0, 1.0, 1.0);
    let thetas: Vec<_> = [99, 199, 399]
        .iter()
        .map(|&n| solve_logistic_theta(&p, &Grid::new(1.0, n).unwrap()).unwrap())
        .collect();
    // node i of the n = 99 grid is node 2i+1 of n = 199 and 4i+3 of n = 399
    let e1 = (0..99)
        .map(|i| (thetas[0][i] - thetas[1][2 * i + 1]).abs())
        .fold(0.0, f64::max);
    let e2 = (0..99)
        .map(|i| (thetas[1][2 * i + 1] - thetas[2][4 * i + 3]).abs())
        .fold(0.0, f64::max);
    let ratio = e1 / e2;
    assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
}

#[test]
fn theta_is_reflection_symmetric() {
    let grid = Grid::new(1.0, 199).unwrap();
    let theta = solve_logistic_theta(&symmetric(10.0, 1.0, 1.0), &grid).unwrap();
    let n = grid.n();
    for i in 0..n {
        assert!((theta[i] - theta[n - 1 - i]).abs() < 1e-10);
    }
}

#[test]
fn subcritical_theta_is_zero() {
    let grid = Grid::new(1.0, 99).unwrap();
    let theta = solve_logistic_theta(&symmetric(5.0, 1.0, 1.0), &grid).unwrap();
    assert_eq!(theta.sup_abs(), 0.0);
}

#[test]
fn eigenvalue_approaches_continuum_under_refinement() {
    let errs: Vec<f64> = [49, 99, 199]
        .iter()
        .map(|&n| {
            let e = principal_eigenvalue(&Grid::new(1.0, n).unwrap()).unwrap();
            (e.lambda1_discrete - e.lambda1_analytic).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }
}

#[test]
fn extinction_boundary_state_is_steady_under_window_potential() {
    let p = Params::barrier_preset();
    let grid = Grid::new(p.length, 99).unwrap();
    let lambda1 = grid.closed_form_lambda1();
    let sigma = 0.5 * (-p.a1 + lambda1 * p.d1 - p.a1);
    let u0 = grid.constant(0.0);
    let v0 = grid.constant(p.cap_v());
    let s = solve_steady_system(&p, &grid, (0.0, p.cap_v()), (&u0, &v0), sigma).unwrap();
    assert_eq!(s.classification, SteadyClass::Trivial);
    assert!(s.u.sup_abs() < 1e-12);
    assert!(s.v.sup_distance(&v0) < 1e-12);
}

#[test]
fn barrier_pair_has_positive_interior_v() {
    let p = Params::barrier_preset();
    let grid = Grid::new(p.length, 199).unwrap();
    let (u0, v0) = barrier_guess(&p, &grid, 1.0);
    let s = solve_steady_system(&p, &grid, (1.0, 0.0), (&u0, &v0), 0.0).unwrap();
    assert_eq!(s.classification, SteadyClass::Barrier);
    assert!(s.v.min() > 0.0);
    assert!(s.v.max() > 1.0);
}

#[test]
fn extinction_setting_has_a_unique_steady_state() {
    let p = Params::barrier_preset();
    let grid = Grid::new(p.length, 99).unwrap();
    let lambda1 = grid.closed_form_lambda1();
    let sigma = 0.5 * (-p.a1 + lambda1 * p.d1 - p.a1);
    let r = probe_uniqueness(&p, &grid, (0.0, p.cap_v()), sigma, 20, 3).unwrap();
    assert_eq!(r.distinct.len(), 1, "{r:?}");
    assert!(r.distinct[0].u.sup_abs() < 1e-8);
}

#[test]
fn barrier_setting_has_several_steady_states() {
    let p = Params::barrier_preset();
    let grid = Grid::new(p.length, 99).unwrap();
    let r = probe_uniqueness(&p, &grid, (1.0, 0.0), 0.0, 20, 7).unwrap();
    assert!(r.distinct.len() >= 2, "{} distinct", r.distinct.len());
}

#[test]
fn converged_states_zero_independent_residual() {
    let p = Params::barrier_preset();
    let grid = Grid::new(p.length, 99).unwrap();
    let r = probe_uniqueness(&p, &grid, (1.0, 0.0), 0.0, 8, 11).unwrap();
    for s in &r.distinct {
        let lu = apply_laplacian(&grid, &s.u, Boundary::dirichlet(s.u_bc, s.u_bc));
        let lv = apply_laplacian(&grid, &s.v, Boundary::dirichlet(s.v_bc, s.v_bc));
        for i in 0..grid.n() {
            let (u, v) = (s.u[i], s.v[i]);
            let ru = p.d1 * lu[i] + u * (p.a1 - p.b1 * u - p.c1 * v);
            let rv = p.d2 * lv[i] + v * (p.a2 - p.b2 * u - p.c2 * v);
            assert!(ru.abs().max(rv.abs()) < 1e-9);
        }
    }
}

#[test]
fn halving_dt_is_first_order() {
    let p = Params::coexistence_preset();
    let grid = Grid::new(1.0, 49).unwrap();
    let init = StatePair::new(
        grid.sample(|x| 2.0 * (PI * x).sin()),
        grid.sample(|x| 3.0 * (PI * x).sin()),
        0.0,
    );
    let ctrl = ControlSet::zeros(1, grid.support(p.omega), Equation::First);
    let terminal = |dt: f64| {
        let t = simulate(&p, &grid, &init, &ctrl, 0.5, dt, SimOptions::default()).unwrap();
        t.terminal_state
    };
    let s: Vec<StatePair> = [0.01, 0.005, 0.0025].iter().map(|&dt| terminal(dt)).collect();
    let diff = |a: &StatePair, b: &StatePair| a.u.sup_distance(&b.u).max(a.v.sup_distance(&b.v));
    let ratio = diff(&s[0], &s[1]) / diff(&s[1], &s[2]);
    assert!(ratio > 1.7 && ratio < 2.3, "ratio {ratio}");
}

fn params_strategy() -> impl Strategy<Value = Params> {
    (
        (0.1f64..5.0, 0.1f64..5.0, 0.1f64..3.0, 0.1f64..3.0),
        (0.1f64..3.0, 0.1f64..3.0, 0.01f64..2.0, 0.01f64..2.0),
        0.5f64..20.0,
    )
        .prop_map(|((a1, a2, b1, b2), (c1, c2, d1, d2), length)| Params {
            a1,
            a2,
            b1,
            b2,
            c1,
            c2,
            d1,
            d2,
            length,
            omega: (0.0, length),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn regime_is_scale_consistent(p in params_strategy(), k in 0.25f64..4.0) {
        let n = 59;
        let base = principal_eigenvalue(&Grid::new(p.length, n).unwrap()).unwrap();
        let scaled_p = p.with_length(p.length * k);
        let scaled = principal_eigenvalue(&Grid::new(scaled_p.length, n).unwrap()).unwrap();
        let predicted = base.lambda1_discrete / (k * k);
        prop_assert!((scaled.lambda1_discrete - predicted).abs() <= 1e-9 * predicted);

        let direct = classify_regime(&scaled_p, scaled.lambda1_discrete);
        let via_scaling = classify_regime(&scaled_p, predicted);
        prop_assert_eq!(direct.tpao_case, via_scaling.tpao_case);
        prop_assert_eq!(direct.h12_satisfied, via_scaling.h12_satisfied);
        prop_assert_eq!(direct.dd_satisfied, via_scaling.dd_satisfied);
        let (lo_a, hi_a) = direct.sigma_window.unwrap();
        let (lo_b, hi_b) = via_scaling.sigma_window.unwrap();
        prop_assert_eq!(lo_a, -p.a1);
        prop_assert_eq!(lo_a, lo_b);
        prop_assert!((hi_a - hi_b).abs() <= 1e-9 * (1.0 + hi_a.abs()));
    }

    #[test]
    fn imex_step_preserves_order_with_frozen_v(
        base in prop::collection::vec(0.0f64..0.9, 49),
        gap in prop::collection::vec(0.0f64..0.1, 49),
        cu in 0.0f64..1.0,
        h in -1.0f64..0.0,
    ) {
        let p = Params::barrier_preset();
        let grid = Grid::new(p.length, 49).unwrap();
        let stepper = Stepper::new(&p, &grid, 0.01, BcKind::Dirichlet).unwrap();
        let ctrl = ControlSet::constant(1, grid.support(p.omega), (cu, 0.0), h, Equation::First);
        let mut lo = base.clone();
        let mut hi: Vec<f64> = base.iter().zip(&gap).map(|(b, g)| b + g).collect();
        let v = vec![0.0; grid.n()];
        let (mut lo_n, mut hi_n, mut v_n) = (vec![0.0; 49], vec![0.0; 49], vec![0.0; 49]);
        for step in 0..200 {
            stepper.step(&lo, &v, &ctrl, step, &mut lo_n, &mut v_n);
            prop_assert!(v_n.iter().all(|&x| x == 0.0));
            stepper.step(&hi, &v, &ctrl, step, &mut hi_n, &mut v_n);
            std::mem::swap(&mut lo, &mut lo_n);
            std::mem::swap(&mut hi, &mut hi_n);
            for i in 0..grid.n() {
                prop_assert!(lo[i] <= hi[i], "step {} node {}: {} > {}", step, i, lo[i], hi[i]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn admissible_runs_respect_comparison_bounds(
        cu in 0.0f64..10.0 / 1.8,
        cv in 0.0f64..10.0 / 1.4,
        h in -1.0f64..1.0,
        u0 in 0.0f64..10.0 / 1.8,
        v0 in 0.0f64..10.0 / 1.4,
    ) {
        let p = Params::coexistence_preset();
        let grid = Grid::new(1.0, 49).unwrap();
        let dt = 0.005;
        let init = StatePair::constant(&grid, u0, v0);
        let ctrl = ControlSet::constant(1, grid.support(p.omega), (cu, cv), h, Equation::First);
        let traj = simulate(&p, &grid, &init, &ctrl, 1.0, dt, SimOptions::default()).unwrap();
        let report = monitor_constraints(&traj, &p, ctrl.h_positive_sup(), discrete_slack(&grid, dt));
        for f in &report.steps {
            let u_upper = f.u_below_relaxed.unwrap_or(f.u_below_cap);
            prop_assert!(f.u_nonnegative && f.v_nonnegative && f.v_below_cap && u_upper, "{:?}", f);
        }
    }
}
