//! Fixed-horizon steering and minimum-time problems with box-constrained controls.
//!
//! Gradients are the exact discrete adjoint of the IMEX scheme in
//! [`crate::parabolic`]: one forward sweep storing every step, one backward
//! sweep through the transposed (symmetric) implicit solves.

use std::ops::Range;

use crate::discretization::Grid;
use crate::elliptic::SteadyPair;
use crate::error::{Error, Result};
use crate::model::Params;
use crate::parabolic::{
    simulate, BcKind, ControlSet, Equation, SimOptions, StatePair, Stepper, Trajectory,
};

/// Which control components the optimizer may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FreeDofs {
    pub cu_left: bool,
    pub cu_right: bool,
    pub cv_left: bool,
    pub cv_right: bool,
    pub h: bool,
}

impl FreeDofs {
    pub fn all() -> Self {
        FreeDofs {
            cu_left: true,
            cu_right: true,
            cv_left: true,
            cv_right: true,
            h: true,
        }
    }

    pub fn boundary() -> Self {
        FreeDofs {
            h: false,
            ..Self::all()
        }
    }

    pub fn interior() -> Self {
        FreeDofs {
            h: true,
            ..Self::none()
        }
    }

    pub fn none() -> Self {
        FreeDofs::default()
    }

    pub fn any(&self) -> bool {
        self.cu_left || self.cu_right || self.cv_left || self.cv_right || self.h
    }

    fn boundary_flags(&self) -> [bool; 4] {
        [self.cu_left, self.cu_right, self.cv_left, self.cv_right]
    }
}

/// Steering problem on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OcProblem {
    pub params: Params,
    pub grid: Grid,
    pub init: StatePair,
    pub target: SteadyPair,
    pub horizon: f64,
    /// Nominal step; the effective step is `horizon / ceil(horizon / dt)`.
    pub dt: f64,
    pub free: FreeDofs,
    /// `|h| <= h_box`.
    pub h_box: f64,
    pub w_terminal: f64,
    pub w_reg: f64,
    /// Success when the terminal sup distance drops to this value.
    pub tolerance: f64,
    pub max_iter: usize,
    pub equation: Equation,
    pub support: Range<usize>,
}

impl OcProblem {
    /// Defaults: all dofs free, `|h| <= 1`, `w_T = 1`, `w_R = 1e-6`,
    /// tolerance `1e-2`, 2000 iterations, `h` on the `u`-equation over `params.omega`.
    pub fn new(
        params: Params,
        grid: Grid,
        init: StatePair,
        target: SteadyPair,
        horizon: f64,
        dt: f64,
    ) -> Self {
        let support = grid.support(params.omega);
        OcProblem {
            params,
            grid,
            init,
            target,
            horizon,
            dt,
            free: FreeDofs::all(),
            h_box: 1.0,
            w_terminal: 1.0,
            w_reg: 1e-6,
            tolerance: 1e-2,
            max_iter: 2000,
            equation: Equation::First,
            support,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_terminal > 0.0) || !(self.w_reg >= 0.0) {
            return Err(Error::InvalidInput("need w_T > 0 and w_R >= 0".into()));
        }
        if !(self.h_box >= 0.0) {
            return Err(Error::InvalidInput("h_box must be nonnegative".into()));
        }
        if !(self.horizon > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidInput("horizon and dt must be positive".into()));
        }
        if self.target.u.len() != self.grid.n() || self.init.u.len() != self.grid.n() {
            return Err(Error::InvalidInput("state length does not match grid".into()));
        }
        self.init.check_admissible(&self.params)
    }

    pub fn n_steps(&self) -> usize {
        ((self.horizon / self.dt - 1e-9).ceil() as usize).max(1)
    }

    pub fn step_dt(&self) -> f64 {
        self.horizon / self.n_steps() as f64
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        OcProblem {
            horizon,
            ..self.clone()
        }
    }

    /// Zero controls of the right shape.
    pub fn zero_controls(&self) -> ControlSet {
        ControlSet::zeros(self.n_steps(), self.support.clone(), self.equation)
    }

    /// Clamps every free dof into its box; fixed dofs are left untouched.
    pub fn project(&self, ctrl: &mut ControlSet) {
        let caps = [
            self.params.cap_u(),
            self.params.cap_u(),
            self.params.cap_v(),
            self.params.cap_v(),
        ];
        let flags = self.free.boundary_flags();
        for (series, (free, cap)) in boundary_series_mut(ctrl).into_iter().zip(flags.into_iter().zip(caps)) {
            if free {
                for c in series.iter_mut() {
                    *c = c.clamp(0.0, cap);
                }
            }
        }
        if self.free.h {
            for h in ctrl.h.iter_mut() {
                *h = h.clamp(-self.h_box, self.h_box);
            }
        }
    }
}

fn boundary_series_mut(c: &mut ControlSet) -> [&mut Vec<f64>; 4] {
    [
        &mut c.cu_left,
        &mut c.cu_right,
        &mut c.cv_left,
        &mut c.cv_right,
    ]
}

fn boundary_series(c: &ControlSet) -> [&Vec<f64>; 4] {
    [&c.cu_left, &c.cu_right, &c.cv_left, &c.cv_right]
}

/// Objective value, its gradient (same layout as the controls) and the terminal state.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub terminal_term: f64,
    pub regularization_term: f64,
    pub gradient: ControlSet,
    pub terminal: StatePair,
    /// `max(sup|u(T) - u_t|, sup|v(T) - v_t|)`.
    pub terminal_distance: f64,
}

fn forward(prob: &OcProblem, stepper: &Stepper, ctrl: &ControlSet) -> Result<Vec<f64>> {
    let n = prob.grid.n();
    let steps = prob.n_steps();
    // layout per step: [u (n), v (n)]
    let mut states = vec![0.0; (steps + 1) * 2 * n];
    states[..n].copy_from_slice(&prob.init.u);
    states[n..2 * n].copy_from_slice(&prob.init.v);
    for k in 0..steps {
        let (done, rest) = states.split_at_mut((k + 1) * 2 * n);
        let cur = &done[k * 2 * n..];
        let (un, vn) = rest[..2 * n].split_at_mut(n);
        stepper.step(&cur[..n], &cur[n..2 * n], ctrl, k, un, vn);
        if un.iter().chain(vn.iter()).any(|x| !x.is_finite() || x.abs() > 1e12) {
            return Err(Error::BlowUp {
                step: k + 1,
                t: (k + 1) as f64 * stepper.dt(),
            });
        }
    }
    Ok(states)
}

fn terminal_parts(prob: &OcProblem, u: &[f64], v: &[f64]) -> (f64, f64) {
    let dx = prob.grid.dx();
    let tu = &prob.target.u;
    let tv = &prob.target.v;
    let mut sq = 0.0;
    let mut sup = 0.0f64;
    for i in 0..u.len() {
        let du = u[i] - tu[i];
        let dv = v[i] - tv[i];
        sq += du * du + dv * dv;
        sup = sup.max(du.abs()).max(dv.abs());
    }
    (prob.w_terminal * dx * sq, sup)
}

fn regularization(prob: &OcProblem, ctrl: &ControlSet) -> f64 {
    if prob.w_reg == 0.0 {
        return 0.0;
    }
    let dt = prob.step_dt();
    let mut r = 0.0;
    for (series, free) in boundary_series(ctrl).into_iter().zip(prob.free.boundary_flags()) {
        if free {
            r += dt * series.iter().map(|c| c * c).sum::<f64>();
        }
    }
    if prob.free.h {
        r += dt * prob.grid.dx() * ctrl.h.iter().map(|h| h * h).sum::<f64>();
    }
    prob.w_reg * r
}

fn check_shape(prob: &OcProblem, ctrl: &ControlSet) -> Result<()> {
    if ctrl.n_steps() != prob.n_steps() || ctrl.support != prob.support {
        return Err(Error::InvalidInput(format!(
            "controls have {} steps on {:?}, problem needs {} on {:?}",
            ctrl.n_steps(),
            ctrl.support,
            prob.n_steps(),
            prob.support
        )));
    }
    if ctrl.equation != prob.equation || ctrl.bc_kind != BcKind::Dirichlet {
        return Err(Error::InvalidInput("control equation or closure mismatch".into()));
    }
    Ok(())
}

/// Objective only (one forward sweep).
pub fn objective(prob: &OcProblem, ctrl: &ControlSet) -> Result<(f64, f64)> {
    check_shape(prob, ctrl)?;
    let stepper = Stepper::new(&prob.params, &prob.grid, prob.step_dt(), BcKind::Dirichlet)?;
    let states = forward(prob, &stepper, ctrl)?;
    let n = prob.grid.n();
    let last = &states[prob.n_steps() * 2 * n..];
    let (jt, sup) = terminal_parts(prob, &last[..n], &last[n..]);
    Ok((jt + regularization(prob, ctrl), sup))
}

/// `J = w_T |(u(T), v(T)) - target|^2 + w_R |controls|^2` (discrete L2) and its exact gradient.
pub fn objective_and_gradient(prob: &OcProblem, ctrl: &ControlSet) -> Result<Evaluation> {
    check_shape(prob, ctrl)?;
    let p = &prob.params;
    let n = prob.grid.n();
    let steps = prob.n_steps();
    let dt = prob.step_dt();
    let dx = prob.grid.dx();
    let stepper = Stepper::new(p, &prob.grid, dt, BcKind::Dirichlet)?;
    let states = forward(prob, &stepper, ctrl)?;

    let last = &states[steps * 2 * n..];
    let (u_t, v_t) = last.split_at(n);
    let (terminal_term, terminal_distance) = terminal_parts(prob, u_t, v_t);
    let regularization_term = regularization(prob, ctrl);

    let mut grad = ControlSet::zeros(steps, prob.support.clone(), prob.equation);
    let mut lam_u: Vec<f64> = (0..n)
        .map(|i| 2.0 * prob.w_terminal * dx * (u_t[i] - prob.target.u[i]))
        .collect();
    let mut lam_v: Vec<f64> = (0..n)
        .map(|i| 2.0 * prob.w_terminal * dx * (v_t[i] - prob.target.v[i]))
        .collect();
    let gu = stepper.ghost_coefficient(true);
    let gv = stepper.ghost_coefficient(false);
    let start = prob.support.start;
    let m = prob.support.len();
    let mut pot_u = vec![0.0; n];
    let mut pot_v = vec![0.0; n];
    for k in (0..steps).rev() {
        // p = M^{-T} lambda, M symmetric
        stepper.factor(true).solve_in_place(&mut lam_u);
        stepper.factor(false).solve_in_place(&mut lam_v);
        let (pu, pv) = (&lam_u, &lam_v);

        grad.cu_left[k] = gu * pu[0];
        grad.cu_right[k] = gu * pu[n - 1];
        grad.cv_left[k] = gv * pv[0];
        grad.cv_right[k] = gv * pv[n - 1];

        let cur = &states[k * 2 * n..(k + 1) * 2 * n];
        let (u, v) = cur.split_at(n);
        let h = ctrl.h_at(k);
        let gh = grad.h_at_mut(k);
        for j in 0..m {
            let i = start + j;
            gh[j] = match prob.equation {
                Equation::First => dt * pu[i] * u[i],
                Equation::Second => dt * pv[i] * v[i],
            };
        }

        for i in 0..n {
            pot_u[i] = p.a1 - 2.0 * p.b1 * u[i] - p.c1 * v[i];
            pot_v[i] = p.a2 - p.b2 * u[i] - 2.0 * p.c2 * v[i];
        }
        for j in 0..m {
            match prob.equation {
                Equation::First => pot_u[start + j] += h[j],
                Equation::Second => pot_v[start + j] += h[j],
            }
        }
        for i in 0..n {
            let (a, b) = (lam_u[i], lam_v[i]);
            let nu = a * (1.0 + dt * pot_u[i]) - b * dt * p.b2 * v[i];
            let nv = -a * dt * p.c1 * u[i] + b * (1.0 + dt * pot_v[i]);
            lam_u[i] = nu;
            lam_v[i] = nv;
        }
    }

    if prob.w_reg > 0.0 {
        let w = 2.0 * prob.w_reg * dt;
        let flags = prob.free.boundary_flags();
        let src = boundary_series(ctrl);
        for ((g, c), free) in boundary_series_mut(&mut grad).into_iter().zip(src).zip(flags) {
            if free {
                for (gi, ci) in g.iter_mut().zip(c.iter()) {
                    *gi += w * ci;
                }
            }
        }
        if prob.free.h {
            for (gi, hi) in grad.h.iter_mut().zip(&ctrl.h) {
                *gi += w * dx * hi;
            }
        }
    }

    Ok(Evaluation {
        objective: terminal_term + regularization_term,
        terminal_term,
        regularization_term,
        gradient: grad,
        terminal: StatePair::new(u_t.to_vec().into(), v_t.to_vec().into(), prob.horizon),
        terminal_distance,
    })
}

/// One row of the convergence log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iter: usize,
    pub objective: f64,
    pub terminal_distance: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcResult {
    pub controls: ControlSet,
    pub terminal_distance: f64,
    pub objective_history: Vec<f64>,
    pub log: Vec<IterationLog>,
    pub iterations: usize,
    pub converged: bool,
    pub trajectory: Trajectory,
}

/// Flattened view of the free dofs with their metric weights.
struct DofMap {
    weight_boundary: f64,
    weight_h: f64,
    free: FreeDofs,
}

impl DofMap {
    fn for_each(
        &self,
        a: &ControlSet,
        b: &ControlSet,
        mut f: impl FnMut(f64, f64, f64),
    ) {
        let (sa, sb) = (boundary_series(a), boundary_series(b));
        for ((x, y), free) in sa.into_iter().zip(sb).zip(self.free.boundary_flags()) {
            if free {
                for (xi, yi) in x.iter().zip(y.iter()) {
                    f(*xi, *yi, self.weight_boundary);
                }
            }
        }
        if self.free.h {
            for (xi, yi) in a.h.iter().zip(&b.h) {
                f(*xi, *yi, self.weight_h);
            }
        }
    }

    /// Euclidean `<g, a - b>` over the free dofs.
    fn pairing(&self, g: &ControlSet, a: &ControlSet, b: &ControlSet) -> f64 {
        let mut diff = Vec::new();
        self.for_each(a, b, |x, y, _| diff.push(x - y));
        let mut acc = 0.0;
        let mut k = 0;
        self.for_each(g, g, |gi, _, _| {
            acc += gi * diff[k];
            k += 1;
        });
        acc
    }

    /// `x + alpha * (-W^{-1} g)` on free dofs.
    fn descend(&self, x: &ControlSet, g: &ControlSet, alpha: f64) -> ControlSet {
        let mut out = x.clone();
        let flags = self.free.boundary_flags();
        for ((o, gs), free) in boundary_series_mut(&mut out)
            .into_iter()
            .zip(boundary_series(g))
            .zip(flags)
        {
            if free {
                for (oi, gi) in o.iter_mut().zip(gs.iter()) {
                    *oi -= alpha * gi / self.weight_boundary;
                }
            }
        }
        if self.free.h {
            for (oi, gi) in out.h.iter_mut().zip(&g.h) {
                *oi -= alpha * gi / self.weight_h;
            }
        }
        out
    }
}

/// Resamples a control series to `steps` steps by nearest normalized time.
pub fn rescale_controls(ctrl: &ControlSet, steps: usize) -> ControlSet {
    let old = ctrl.n_steps();
    let map = |k: usize| (((k as f64 + 0.5) * old as f64 / steps as f64) as usize).min(old - 1);
    let pick = |s: &Vec<f64>| (0..steps).map(|k| s[map(k)]).collect::<Vec<f64>>();
    let m = ctrl.support_len();
    let mut h = Vec::with_capacity(steps * m);
    for k in 0..steps {
        h.extend_from_slice(ctrl.h_at(map(k)));
    }
    ControlSet {
        cu_left: pick(&ctrl.cu_left),
        cu_right: pick(&ctrl.cu_right),
        cv_left: pick(&ctrl.cv_left),
        cv_right: pick(&ctrl.cv_right),
        h,
        support: ctrl.support.clone(),
        equation: ctrl.equation,
        bc_kind: ctrl.bc_kind,
    }
}

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACK: usize = 40;
const GRAD_TOL: f64 = 1e-8;

/// Projected gradient descent with Barzilai-Borwein trial steps and Armijo backtracking.
///
/// The descent direction is the discrete-L2 gradient (boundary dofs weighted
/// by `dt`, interior dofs by `dt dx`). Stops when the terminal sup distance
/// reaches `prob.tolerance`, the projected gradient vanishes, or the iteration cap.
pub fn solve_fixed_horizon(prob: &OcProblem, warm_start: Option<&ControlSet>) -> Result<OcResult> {
    prob.validate()?;
    let steps = prob.n_steps();
    let mut x = match warm_start {
        Some(w) if w.n_steps() == steps => w.clone(),
        Some(w) => rescale_controls(w, steps),
        None => prob.zero_controls(),
    };
    prob.project(&mut x);
    x.validate(&prob.params, &prob.grid)?;

    let dofs = DofMap {
        weight_boundary: prob.step_dt(),
        weight_h: prob.step_dt() * prob.grid.dx(),
        free: prob.free,
    };

    let mut eval = objective_and_gradient(prob, &x)?;
    let mut history = vec![eval.objective];
    let mut log = vec![IterationLog {
        iter: 0,
        objective: eval.objective,
        terminal_distance: eval.terminal_distance,
        step_size: 0.0,
    }];
    let mut iterations = 0;
    let mut alpha: Option<f64> = None;

    while prob.free.any() && eval.terminal_distance > prob.tolerance && iterations < prob.max_iter {
        // projected-gradient stationarity in the weighted norm
        let mut probe = dofs.descend(&x, &eval.gradient, 1.0);
        prob.project(&mut probe);
        let mut pg = 0.0;
        dofs.for_each(&probe, &x, |a, b, w| pg += w * (a - b) * (a - b));
        if pg.sqrt() < GRAD_TOL {
            break;
        }

        let mut step = alpha.unwrap_or_else(|| {
            // first step: move the largest free dof by a tenth of its box
            let mut gmax = 0.0f64;
            dofs.for_each(&eval.gradient, &eval.gradient, |g, _, w| gmax = gmax.max((g / w).abs()));
            let scale = 0.1 * prob.h_box.max(prob.params.cap_u().min(prob.params.cap_v()));
            if gmax > 0.0 {
                scale / gmax
            } else {
                1.0
            }
        });
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let mut trial = dofs.descend(&x, &eval.gradient, step);
            prob.project(&mut trial);
            let slope = dofs.pairing(&eval.gradient, &trial, &x);
            if slope >= 0.0 {
                step *= 0.5;
                continue;
            }
            let (jt, _) = objective(prob, &trial)?;
            if jt <= eval.objective + ARMIJO_C * slope {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        let Some(trial) = accepted else {
            break;
        };
        let next = objective_and_gradient(prob, &trial)?;
        iterations += 1;

        // Barzilai-Borwein step for the next iteration, in the weighted metric
        let mut sws = 0.0;
        dofs.for_each(&trial, &x, |a, b, w| sws += w * (a - b) * (a - b));
        let sy = dofs.pairing(&next.gradient, &trial, &x)
            - dofs.pairing(&eval.gradient, &trial, &x);
        alpha = Some(if sy > 0.0 {
            (sws / sy).clamp(1e-12, 1e12)
        } else {
            step * 2.0
        });

        history.push(next.objective);
        log.push(IterationLog {
            iter: iterations,
            objective: next.objective,
            terminal_distance: next.terminal_distance,
            step_size: step,
        });
        x = trial;
        eval = next;
    }

    let converged = eval.terminal_distance <= prob.tolerance;
    let trajectory = simulate(
        &prob.params,
        &prob.grid,
        &prob.init,
        &x,
        prob.horizon,
        prob.step_dt(),
        SimOptions {
            snapshot_stride: (steps / 50).max(1),
        },
    )?;
    Ok(OcResult {
        controls: x,
        terminal_distance: eval.terminal_distance,
        objective_history: history,
        log,
        iterations,
        converged,
        trajectory,
    })
}

/// One feasibility probe in the bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityProbe {
    pub horizon: f64,
    pub feasible: bool,
    pub terminal_distance: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinTimeResult {
    /// Midpoint of the final bracket.
    pub t_star: f64,
    pub bracket: (f64, f64),
    /// Feasible solve at the upper end of the bracket.
    pub result: OcResult,
    pub probes: Vec<FeasibilityProbe>,
}

/// Bisection on the horizon with feasibility = [`solve_fixed_horizon`] convergence.
///
/// Each solve is warm-started from the last feasible controls, rescaled in time.
pub fn minimum_time(template: &OcProblem, t_lo: f64, t_hi: f64, bisect_tol: f64) -> Result<MinTimeResult> {
    if !(t_lo > 0.0 && t_hi > t_lo && bisect_tol > 0.0) {
        return Err(Error::BracketInvalid(format!(
            "need 0 < T_lo < T_hi and tol > 0 (got {t_lo}, {t_hi}, {bisect_tol})"
        )));
    }
    let mut probes = Vec::new();
    let mut record = |r: &OcResult, horizon: f64| {
        probes.push(FeasibilityProbe {
            horizon,
            feasible: r.converged,
            terminal_distance: r.terminal_distance,
            iterations: r.iterations,
        })
    };

    let hi_res = solve_fixed_horizon(&template.with_horizon(t_hi), None)?;
    record(&hi_res, t_hi);
    if !hi_res.converged {
        return Err(Error::BracketInvalid(format!(
            "infeasible at T_hi = {t_hi} (distance {:.4e})",
            hi_res.terminal_distance
        )));
    }
    let lo_res = solve_fixed_horizon(&template.with_horizon(t_lo), Some(&hi_res.controls))?;
    record(&lo_res, t_lo);
    if lo_res.converged {
        return Err(Error::BracketInvalid(format!("feasible at T_lo = {t_lo}")));
    }

    let (mut lo, mut hi) = (t_lo, t_hi);
    let mut best = hi_res;
    while hi - lo > bisect_tol {
        let mid = 0.5 * (lo + hi);
        let res = solve_fixed_horizon(&template.with_horizon(mid), Some(&best.controls))?;
        record(&res, mid);
        if res.converged {
            hi = mid;
            best = res;
        } else {
            lo = mid;
        }
    }

    // every feasible horizon must exceed every infeasible one
    let max_infeasible = probes
        .iter()
        .filter(|p| !p.feasible)
        .map(|p| p.horizon)
        .fold(f64::NEG_INFINITY, f64::max);
    if let Some(bad) = probes
        .iter()
        .find(|p| p.feasible && p.horizon < max_infeasible)
    {
        return Err(Error::NonMonotoneFeasibility {
            feasible_at: bad.horizon,
            infeasible_at: max_infeasible,
        });
    }

    Ok(MinTimeResult {
        t_star: 0.5 * (lo + hi),
        bracket: (lo, hi),
        result: best,
        probes,
    })
}
