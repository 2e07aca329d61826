//! IMEX time integration of the controlled system.
//!
//! Each step solves `(I - dt d A) w^{n+1} = w^n + dt f(u^n, v^n) + ghost terms`
//! once per species, with `A` the second-difference matrix. Diffusion is
//! implicit, reaction and the multiplicative control explicit. Boundary
//! controls are sampled at the left end of each step and enter the implicit
//! solve as Dirichlet ghost values.

use std::ops::Range;

use crate::discretization::{laplacian_matrix, Field, Grid};
use crate::elliptic::SteadyPair;
use crate::error::{Error, Result};
use crate::linalg::{ThomasFactor, Tridiagonal};
use crate::model::Params;

/// Tolerance on the initial-state box check.
const INIT_TOL: f64 = 1e-12;
/// States beyond this magnitude count as blow-up.
const BLOW_UP: f64 = 1e12;

/// Which equation the multiplicative control acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// `h u` in the `u`-equation.
    First,
    /// `h v` in the `v`-equation.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// Boundary series (one value per time step) and the interior control on its support.
///
/// A set with a single step is treated as constant in time over any horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet {
    pub cu_left: Vec<f64>,
    pub cu_right: Vec<f64>,
    pub cv_left: Vec<f64>,
    pub cv_right: Vec<f64>,
    /// Row-major `n_steps x support.len()`.
    pub h: Vec<f64>,
    /// Interior node indices where `h` acts.
    pub support: Range<usize>,
    pub equation: Equation,
    pub bc_kind: BcKind,
}

impl ControlSet {
    /// Time-independent controls: boundary values `(c_u, c_v)` on both ends and `h` constant on the support.
    pub fn constant(
        n_steps: usize,
        support: Range<usize>,
        (cu, cv): (f64, f64),
        h: f64,
        equation: Equation,
    ) -> Self {
        let m = support.len();
        ControlSet {
            cu_left: vec![cu; n_steps],
            cu_right: vec![cu; n_steps],
            cv_left: vec![cv; n_steps],
            cv_right: vec![cv; n_steps],
            h: vec![h; n_steps * m],
            support,
            equation,
            bc_kind: BcKind::Dirichlet,
        }
    }

    pub fn zeros(n_steps: usize, support: Range<usize>, equation: Equation) -> Self {
        Self::constant(n_steps, support, (0.0, 0.0), 0.0, equation)
    }

    /// Zero-flux closure; boundary series are unused and kept at zero.
    pub fn neumann(n_steps: usize, support: Range<usize>, h: f64, equation: Equation) -> Self {
        ControlSet {
            bc_kind: BcKind::Neumann,
            ..Self::constant(n_steps, support, (0.0, 0.0), h, equation)
        }
    }

    pub fn n_steps(&self) -> usize {
        self.cu_left.len()
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    fn step_index(&self, step: usize) -> usize {
        if self.n_steps() == 1 {
            0
        } else {
            step
        }
    }

    /// `(cu_left, cu_right, cv_left, cv_right)` used during step `step`.
    pub fn boundary_at(&self, step: usize) -> (f64, f64, f64, f64) {
        let k = self.step_index(step);
        (
            self.cu_left[k],
            self.cu_right[k],
            self.cv_left[k],
            self.cv_right[k],
        )
    }

    pub fn h_at(&self, step: usize) -> &[f64] {
        let k = self.step_index(step);
        let m = self.support_len();
        &self.h[k * m..(k + 1) * m]
    }

    pub fn h_at_mut(&mut self, step: usize) -> &mut [f64] {
        let m = self.support_len();
        &mut self.h[step * m..(step + 1) * m]
    }

    /// `sup |h|`.
    pub fn h_sup(&self) -> f64 {
        self.h.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sup max(h, 0)`.
    pub fn h_positive_sup(&self) -> f64 {
        self.h.iter().fold(0.0, |m, v| m.max(*v))
    }

    /// Shape and (for Dirichlet) box checks.
    pub fn validate(&self, p: &Params, grid: &Grid) -> Result<()> {
        let n = self.n_steps();
        if n == 0 {
            return Err(Error::InvalidInput("control set has no steps".into()));
        }
        if self.cu_right.len() != n || self.cv_left.len() != n || self.cv_right.len() != n {
            return Err(Error::InvalidInput("boundary series lengths differ".into()));
        }
        if self.support.end > grid.n() {
            return Err(Error::InvalidInput("control support exceeds grid".into()));
        }
        if self.h.len() != n * self.support_len() {
            return Err(Error::InvalidInput(format!(
                "h has {} values, expected {}",
                self.h.len(),
                n * self.support_len()
            )));
        }
        if !self.h.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("h is not finite".into()));
        }
        if self.bc_kind == BcKind::Dirichlet {
            let series: [(&'static str, &Vec<f64>, f64); 4] = [
                ("cu_left", &self.cu_left, p.cap_u()),
                ("cu_right", &self.cu_right, p.cap_u()),
                ("cv_left", &self.cv_left, p.cap_v()),
                ("cv_right", &self.cv_right, p.cap_v()),
            ];
            for (which, s, cap) in series {
                for (step, &value) in s.iter().enumerate() {
                    if !(0.0..=cap).contains(&value) {
                        return Err(Error::ControlOutOfBounds {
                            which,
                            step,
                            value,
                            cap,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Discrete state `(u, v)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub u: Field,
    pub v: Field,
    pub t: f64,
}

impl StatePair {
    pub fn new(u: Field, v: Field, t: f64) -> Self {
        StatePair { u, v, t }
    }

    pub fn constant(grid: &Grid, u: f64, v: f64) -> Self {
        StatePair {
            u: grid.constant(u),
            v: grid.constant(v),
            t: 0.0,
        }
    }

    pub fn from_steady(s: &SteadyPair) -> Self {
        StatePair {
            u: s.u.clone(),
            v: s.v.clone(),
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// `max(sup|u - target.u|, sup|v - target.v|)`.
    pub fn sup_distance(&self, target: &SteadyPair) -> f64 {
        self.u.sup_distance(&target.u).max(self.v.sup_distance(&target.v))
    }

    /// `sup|u - target.u| + sup|v - target.v|`.
    pub fn distance_sum(&self, target: &SteadyPair) -> f64 {
        target.distance_sum(&self.u, &self.v)
    }

    /// Checks `0 <= u <= a1/b1`, `0 <= v <= a2/c2` up to 1e-12.
    pub fn check_admissible(&self, p: &Params) -> Result<()> {
        let (cu, cv) = (p.cap_u(), p.cap_v());
        for (i, (&u, &v)) in self.u.iter().zip(self.v.iter()).enumerate() {
            if !(u >= -INIT_TOL && u <= cu + INIT_TOL) {
                return Err(Error::InadmissibleInitialState {
                    node: i,
                    detail: format!("u = {u} outside [0, {cu}]"),
                });
            }
            if !(v >= -INIT_TOL && v <= cv + INIT_TOL) {
                return Err(Error::InadmissibleInitialState {
                    node: i,
                    detail: format!("v = {v} outside [0, {cv}]"),
                });
            }
        }
        Ok(())
    }
}

/// Nodewise extrema at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBounds {
    pub t: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
}

impl StepBounds {
    fn of(t: f64, u: &[f64], v: &[f64]) -> Self {
        let (min_u, max_u) = min_max(u);
        let (min_v, max_v) = min_max(v);
        StepBounds {
            t,
            min_u,
            max_u,
            min_v,
            max_v,
        }
    }
}

fn min_max(f: &[f64]) -> (f64, f64) {
    f.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StatePair>,
    /// One entry per step, including `t = 0`.
    pub constraint_report: Vec<StepBounds>,
    pub terminal_state: StatePair,
    pub dt: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Store a snapshot every `snapshot_stride` steps (the terminal state is always stored).
    pub snapshot_stride: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            snapshot_stride: 100,
        }
    }
}

/// Pre-factorized IMEX step for fixed `(params, grid, dt, bc kind)`.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: Params,
    n: usize,
    dt: f64,
    bc_kind: BcKind,
    factor_u: ThomasFactor,
    factor_v: ThomasFactor,
    ghost_u: f64,
    ghost_v: f64,
}

impl Stepper {
    pub fn new(params: &Params, grid: &Grid, dt: f64, bc_kind: BcKind) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        let lap = laplacian_matrix(grid, bc_kind == BcKind::Neumann);
        let implicit = |d: f64| -> Result<ThomasFactor> {
            Tridiagonal::new(
                lap.lower.iter().map(|l| -dt * d * l).collect(),
                lap.diag.iter().map(|l| 1.0 - dt * d * l).collect(),
                lap.upper.iter().map(|l| -dt * d * l).collect(),
            )
            .factorize()
        };
        let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
        Ok(Stepper {
            params: *params,
            n: grid.n(),
            dt,
            bc_kind,
            factor_u: implicit(params.d1)?,
            factor_v: implicit(params.d2)?,
            ghost_u: dt * params.d1 * inv_dx2,
            ghost_v: dt * params.d2 * inv_dx2,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn bc_kind(&self) -> BcKind {
        self.bc_kind
    }

    /// Coefficient multiplying a Dirichlet ghost value in the right-hand side
    /// of the `u` (`first = true`) or `v` solve.
    pub fn ghost_coefficient(&self, first: bool) -> f64 {
        if first {
            self.ghost_u
        } else {
            self.ghost_v
        }
    }

    pub fn factor(&self, first: bool) -> &ThomasFactor {
        if first {
            &self.factor_u
        } else {
            &self.factor_v
        }
    }

    /// Advances `(u, v)` by one step using the controls of step `step`.
    pub fn step(
        &self,
        u: &[f64],
        v: &[f64],
        ctrl: &ControlSet,
        step: usize,
        u_next: &mut [f64],
        v_next: &mut [f64],
    ) {
        let p = &self.params;
        let dt = self.dt;
        for i in 0..self.n {
            u_next[i] = u[i] + dt * u[i] * (p.a1 - p.b1 * u[i] - p.c1 * v[i]);
            v_next[i] = v[i] + dt * v[i] * (p.a2 - p.b2 * u[i] - p.c2 * v[i]);
        }
        let h = ctrl.h_at(step);
        let start = ctrl.support.start;
        match ctrl.equation {
            Equation::First => {
                for (k, hk) in h.iter().enumerate() {
                    u_next[start + k] += dt * hk * u[start + k];
                }
            }
            Equation::Second => {
                for (k, hk) in h.iter().enumerate() {
                    v_next[start + k] += dt * hk * v[start + k];
                }
            }
        }
        if self.bc_kind == BcKind::Dirichlet {
            let (cul, cur, cvl, cvr) = ctrl.boundary_at(step);
            let last = self.n - 1;
            u_next[0] += self.ghost_u * cul;
            u_next[last] += self.ghost_u * cur;
            v_next[0] += self.ghost_v * cvl;
            v_next[last] += self.ghost_v * cvr;
        }
        self.factor_u.solve_in_place(u_next);
        self.factor_v.solve_in_place(v_next);
    }
}

/// Number of whole steps of size `dt` in `[0, t_final]`.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final >= dt * (1.0 - 1e-12)) {
        return Err(Error::InvalidInput(format!(
            "need dt > 0 and T >= dt (T = {t_final}, dt = {dt})"
        )));
    }
    Ok(((t_final / dt).round() as usize).max(1))
}

fn check_coverage(ctrl: &ControlSet, steps: usize) -> Result<()> {
    if ctrl.n_steps() != 1 && ctrl.n_steps() < steps {
        return Err(Error::InvalidInput(format!(
            "controls cover {} steps, {} needed",
            ctrl.n_steps(),
            steps
        )));
    }
    Ok(())
}

fn stability_warning(p: &Params, ctrl: &ControlSet, dt: f64) -> Option<String> {
    let rate = p.a1.max(p.a2) + ctrl.h_sup();
    (dt * rate >= 1.0).then(|| {
        format!("dt * (a_max + |h|_max) = {} >= 1: explicit reaction may be unstable", dt * rate)
    })
}

fn blown_up(u: &[f64], v: &[f64]) -> bool {
    u.iter().chain(v).any(|x| !x.is_finite() || x.abs() > BLOW_UP)
}

/// Integrates from `init` over `[0, T]` with step `dt`.
///
/// States are never clipped; the per-step extrema are recorded in
/// [`Trajectory::constraint_report`].
pub fn simulate(
    p: &Params,
    grid: &Grid,
    init: &StatePair,
    ctrl: &ControlSet,
    t_final: f64,
    dt: f64,
    opts: SimOptions,
) -> Result<Trajectory> {
    init.check_admissible(p)?;
    ctrl.validate(p, grid)?;
    let steps = step_count(t_final, dt)?;
    check_coverage(ctrl, steps)?;
    let stepper = Stepper::new(p, grid, dt, ctrl.bc_kind)?;
    let stride = opts.snapshot_stride.max(1);

    let t0 = init.t;
    let mut u = init.u.0.clone();
    let mut v = init.v.0.clone();
    let mut un = vec![0.0; grid.n()];
    let mut vn = vec![0.0; grid.n()];
    let mut times = vec![t0];
    let mut states = vec![StatePair::new(init.u.clone(), init.v.clone(), t0)];
    let mut report = Vec::with_capacity(steps + 1);
    report.push(StepBounds::of(t0, &u, &v));
    for k in 0..steps {
        stepper.step(&u, &v, ctrl, k, &mut un, &mut vn);
        std::mem::swap(&mut u, &mut un);
        std::mem::swap(&mut v, &mut vn);
        let t = t0 + (k + 1) as f64 * dt;
        if blown_up(&u, &v) {
            return Err(Error::BlowUp { step: k + 1, t });
        }
        report.push(StepBounds::of(t, &u, &v));
        if (k + 1) % stride == 0 || k + 1 == steps {
            times.push(t);
            states.push(StatePair::new(u.clone().into(), v.clone().into(), t));
        }
    }
    let terminal_state = states.last().expect("at least the initial state").clone();
    Ok(Trajectory {
        times,
        states,
        constraint_report: report,
        terminal_state,
        dt,
        warnings: stability_warning(p, ctrl, dt).into_iter().collect(),
    })
}

/// Outcome of [`run_until_near`].
#[derive(Debug, Clone, PartialEq)]
pub struct NearOutcome {
    pub state: StatePair,
    /// First time with `sup|u - u_t| + sup|v - v_t| <= eps`.
    pub t1: f64,
    pub steps: usize,
    /// Snapshots every `snapshot_stride` steps, ending with `state`.
    pub snapshots: Vec<StatePair>,
    /// `(t, distance)` at each snapshot.
    pub distances: Vec<(f64, f64)>,
}

/// Integrates under time-independent controls until the state is within `eps`
/// of `target` (sum of the two sup distances), or fails with
/// [`Error::Stagnated`] at `t_cap`.
#[allow(clippy::too_many_arguments)]
pub fn run_until_near(
    p: &Params,
    grid: &Grid,
    init: &StatePair,
    ctrl: &ControlSet,
    target: &SteadyPair,
    eps: f64,
    dt: f64,
    t_cap: f64,
    opts: SimOptions,
) -> Result<NearOutcome> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    if ctrl.n_steps() != 1 {
        return Err(Error::InvalidInput(
            "run_until_near needs time-independent controls (one step)".into(),
        ));
    }
    init.check_admissible(p)?;
    ctrl.validate(p, grid)?;
    let max_steps = step_count(t_cap, dt)?;
    let stepper = Stepper::new(p, grid, dt, ctrl.bc_kind)?;
    let stride = opts.snapshot_stride.max(1);

    let t0 = init.t;
    let mut u = init.u.0.clone();
    let mut v = init.v.0.clone();
    let mut un = vec![0.0; grid.n()];
    let mut vn = vec![0.0; grid.n()];
    let mut snapshots = vec![init.clone()];
    let mut dist = target.distance_sum(&u, &v);
    let mut distances = vec![(t0, dist)];
    let mut k = 0;
    while dist > eps {
        if k == max_steps {
            return Err(Error::Stagnated {
                distance: dist,
                t: t0 + k as f64 * dt,
            });
        }
        stepper.step(&u, &v, ctrl, 0, &mut un, &mut vn);
        std::mem::swap(&mut u, &mut un);
        std::mem::swap(&mut v, &mut vn);
        k += 1;
        let t = t0 + k as f64 * dt;
        if blown_up(&u, &v) {
            return Err(Error::BlowUp { step: k, t });
        }
        dist = target.distance_sum(&u, &v);
        if k % stride == 0 {
            snapshots.push(StatePair::new(u.clone().into(), v.clone().into(), t));
            distances.push((t, dist));
        }
    }
    let t1 = t0 + k as f64 * dt;
    let state = StatePair::new(u.into(), v.into(), t1);
    if snapshots.last().map(|s| s.t) != Some(t1) {
        snapshots.push(state.clone());
        distances.push((t1, dist));
    }
    Ok(NearOutcome {
        state,
        t1,
        steps: k,
        snapshots,
        distances,
    })
}
