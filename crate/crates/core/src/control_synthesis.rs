//! Constructive control strategies: constant extinction controls, Neumann-trace
//! boundary controls, and the two-phase steering pipeline toward the
//! heterogeneous coexistence state.

use crate::discretization::Grid;
use crate::elliptic::{heterogeneous_target, SteadyPair};
use crate::error::{Error, Result};
use crate::model::{classify_regime, neumann_sigma_window, Params};
use crate::optimal_control::{solve_fixed_horizon, FreeDofs, OcProblem, OcResult};
use crate::parabolic::{
    run_until_near, simulate, BcKind, ControlSet, Equation, SimOptions, StatePair, Stepper,
    Trajectory,
};

/// Which species is kept at carrying capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Survivor {
    /// Target `(0, a2/c2)`, interior control on the `u`-equation.
    V,
    /// Target `(a1/b1, 0)`, interior control on the `v`-equation.
    U,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mt1Controls {
    /// Time-independent (one step) controls.
    pub controls: ControlSet,
    pub sigma: f64,
    /// `(-a, lambda1 d - a)` of the controlled species.
    pub window: (f64, f64),
    pub target: SteadyPair,
}

/// Constant boundary data at the surviving state and `h = sigma` on the whole interval.
///
/// `sigma` is the midpoint of the window, or `0` when diffusion alone
/// already dominates growth (`d lambda1 > a`).
pub fn mt1_controls(p: &Params, grid: &Grid, lambda1: f64, survivor: Survivor) -> Result<Mt1Controls> {
    if !(lambda1 > 0.0 && lambda1.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda1 must be positive, got {lambda1}")));
    }
    let (a, d, equation, bc, target) = match survivor {
        Survivor::V => (
            p.a1,
            p.d1,
            Equation::First,
            (0.0, p.cap_v()),
            SteadyPair::constant(grid, 0.0, p.cap_v()),
        ),
        Survivor::U => (
            p.a2,
            p.d2,
            Equation::Second,
            (p.cap_u(), 0.0),
            SteadyPair::constant(grid, p.cap_u(), 0.0),
        ),
    };
    let window = (-a, lambda1 * d - a);
    let sigma = if d * lambda1 > a {
        0.0
    } else {
        0.5 * (window.0 + window.1)
    };
    let controls = ControlSet::constant(1, 0..grid.n(), bc, sigma, equation);
    Ok(Mt1Controls {
        controls,
        sigma,
        window,
        target,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannTrace {
    /// Dirichlet controls (endpoint values of the zero-flux run, one per step)
    /// with `h = sigma` on the `u`-equation.
    pub controls: ControlSet,
    pub trajectory: Trajectory,
}

/// Runs the zero-flux system with growth `a1 + sigma` and returns its boundary
/// traces as time-dependent Dirichlet controls.
pub fn neumann_trace_controls(
    p: &Params,
    grid: &Grid,
    sigma: f64,
    init: &StatePair,
    t_final: f64,
    dt: f64,
) -> Result<NeumannTrace> {
    let (lo, hi) = neumann_sigma_window(p);
    if !(lo < sigma && sigma < hi) {
        return Err(Error::SigmaOutOfWindow { sigma, lo, hi });
    }
    init.check_admissible(p)?;
    let n = grid.n();
    let steps = crate::parabolic::step_count(t_final, dt)?;
    let neumann = ControlSet::neumann(1, 0..n, sigma, Equation::First);
    let trajectory = simulate(p, grid, init, &neumann, t_final, dt, SimOptions::default())?;

    // sample the traces at the left end of every step
    let stepper = Stepper::new(p, grid, dt, BcKind::Neumann)?;
    let mut u = init.u.0.clone();
    let mut v = init.v.0.clone();
    let mut un = vec![0.0; n];
    let mut vn = vec![0.0; n];
    let mut out = ControlSet::constant(steps, 0..n, (0.0, 0.0), sigma, Equation::First);
    for k in 0..steps {
        out.cu_left[k] = u[0];
        out.cu_right[k] = u[n - 1];
        out.cv_left[k] = v[0];
        out.cv_right[k] = v[n - 1];
        stepper.step(&u, &v, &neumann, k, &mut un, &mut vn);
        std::mem::swap(&mut u, &mut un);
        std::mem::swap(&mut v, &mut vn);
    }
    out.validate(p, grid)?;
    Ok(NeumannTrace {
        controls: out,
        trajectory,
    })
}

/// Settings for [`two_phase_mt3`] beyond the required arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhaseOptions {
    /// Exactness tolerance on the terminal sup distance.
    pub tolerance: f64,
    /// Phase-1 time cap.
    pub t_cap: f64,
    /// Interior-control support; defaults to `params.omega`.
    pub omega: Option<(f64, f64)>,
    pub max_iter: usize,
    pub w_reg: f64,
}

impl Default for TwoPhaseOptions {
    fn default() -> Self {
        TwoPhaseOptions {
            tolerance: 1e-2,
            t_cap: 500.0,
            omega: None,
            max_iter: 2000,
            w_reg: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhase {
    pub target: SteadyPair,
    /// End of phase 1.
    pub t1: f64,
    pub phase1_steps: usize,
    /// `(t, distance)` along phase 1 (sum of sup distances).
    pub phase1_distances: Vec<(f64, f64)>,
    pub phase2: OcResult,
    /// Phase 1 (`h = 0`) followed by the optimized phase 2, all at step `dt`.
    pub controls: ControlSet,
    /// Re-simulation of the full horizon under `controls`.
    pub trajectory: Trajectory,
    /// `max(sup|u - u**|, sup|v - v**|)` at the end of `trajectory`.
    pub terminal_distance: f64,
}

/// Free evolution toward `(u**, v**)` followed by interior-only steering on a horizon `t_tilde`.
///
/// `t_tilde` is rounded up to a whole number of steps.
#[allow(clippy::too_many_arguments)]
pub fn two_phase_mt3(
    p: &Params,
    grid: &Grid,
    init: &StatePair,
    eps: f64,
    t_tilde: f64,
    dt: f64,
    h_box: f64,
    opts: &TwoPhaseOptions,
) -> Result<TwoPhase> {
    let regime = classify_regime(p, grid.closed_form_lambda1());
    if regime.h12_satisfied != Some(true) {
        return Err(Error::RegimeViolated("d < a/lambda1 does not hold".into()));
    }
    if !regime.coexistence_admissible {
        return Err(Error::CoexistenceInadmissible);
    }
    if !(eps > 0.0 && h_box > 0.0 && t_tilde > 0.0 && dt > 0.0) {
        return Err(Error::InvalidInput("eps, h_box, t_tilde and dt must be positive".into()));
    }
    let target = heterogeneous_target(p, grid)?;
    let support = grid.support(opts.omega.unwrap_or(p.omega));

    let free = ControlSet::zeros(1, support.clone(), Equation::First);
    let near = run_until_near(p, grid, init, &free, &target, eps, dt, opts.t_cap, SimOptions::default())?;

    let steps2 = ((t_tilde / dt - 1e-9).ceil() as usize).max(1);
    let mut prob = OcProblem::new(
        *p,
        *grid,
        near.state.clone(),
        target.clone(),
        steps2 as f64 * dt,
        dt,
    );
    prob.free = FreeDofs::interior();
    prob.h_box = h_box;
    prob.tolerance = opts.tolerance;
    prob.max_iter = opts.max_iter;
    prob.w_reg = opts.w_reg;
    prob.support = support.clone();
    let phase2 = solve_fixed_horizon(&prob, None)?;
    if !phase2.converged {
        return Err(Error::SteeringFailed {
            distance: phase2.terminal_distance,
        });
    }

    let steps1 = near.steps;
    let total = steps1 + steps2;
    let mut controls = ControlSet::zeros(total, support, Equation::First);
    let m = controls.support_len();
    controls.h[steps1 * m..].copy_from_slice(&phase2.controls.h);

    let start = StatePair::new(init.u.clone(), init.v.clone(), 0.0);
    let trajectory = simulate(
        p,
        grid,
        &start,
        &controls,
        total as f64 * dt,
        dt,
        SimOptions {
            snapshot_stride: (total / 200).max(1),
        },
    )?;
    let terminal_distance = trajectory.terminal_state.sup_distance(&target);
    Ok(TwoPhase {
        target,
        t1: near.t1,
        phase1_steps: steps1,
        phase1_distances: near.distances,
        phase2,
        controls,
        trajectory,
        terminal_distance,
    })
}
