//! Sub/supersolution checks and constraint monitoring.
//!
//! Inequalities are evaluated with the operators of the time stepper: a
//! forward difference in time, the Dirichlet Laplacian at the new level and
//! the reaction (plus interior control) at the old level.

use crate::discretization::{apply_laplacian, Boundary, Field, Grid};
use crate::elliptic::SteadyPair;
use crate::model::Params;
use crate::parabolic::{ControlSet, Equation, StatePair, Trajectory};

/// Slack budget `5 (dx^2 + dt)` for discrete versions of continuum inequalities.
pub fn discrete_slack(grid: &Grid, dt: f64) -> f64 {
    5.0 * (grid.dx() * grid.dx() + dt)
}

/// Value of an envelope function at one time, with its boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeValue {
    pub u: Field,
    pub v: Field,
    /// `(left, right)`.
    pub u_bc: (f64, f64),
    pub v_bc: (f64, f64),
}

impl EnvelopeValue {
    pub fn constant(grid: &Grid, u: f64, v: f64) -> Self {
        EnvelopeValue {
            u: grid.constant(u),
            v: grid.constant(v),
            u_bc: (u, u),
            v_bc: (v, v),
        }
    }

    pub fn from_steady(s: &SteadyPair) -> Self {
        EnvelopeValue {
            u: s.u.clone(),
            v: s.v.clone(),
            u_bc: (s.u_bc, s.u_bc),
            v_bc: (s.v_bc, s.v_bc),
        }
    }
}

/// Which inequality a worst-case entry refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Inequality {
    UpperUPde,
    LowerVPde,
    UpperUInitial,
    LowerVInitial,
    UpperUBoundary,
    LowerVBoundary,
    LowerUPde,
    UpperVPde,
    LowerUInitial,
    UpperVInitial,
    LowerUBoundary,
    UpperVBoundary,
    OrderingU,
    OrderingV,
    Nonnegative,
}

impl Inequality {
    pub const ALL: [Inequality; 15] = [
        Inequality::UpperUPde,
        Inequality::LowerVPde,
        Inequality::UpperUInitial,
        Inequality::LowerVInitial,
        Inequality::UpperUBoundary,
        Inequality::LowerVBoundary,
        Inequality::LowerUPde,
        Inequality::UpperVPde,
        Inequality::LowerUInitial,
        Inequality::UpperVInitial,
        Inequality::LowerUBoundary,
        Inequality::UpperVBoundary,
        Inequality::OrderingU,
        Inequality::OrderingV,
        Inequality::Nonnegative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Inequality::UpperUPde => "upper_u_pde",
            Inequality::LowerVPde => "lower_v_pde",
            Inequality::UpperUInitial => "upper_u_initial",
            Inequality::LowerVInitial => "lower_v_initial",
            Inequality::UpperUBoundary => "upper_u_boundary",
            Inequality::LowerVBoundary => "lower_v_boundary",
            Inequality::LowerUPde => "lower_u_pde",
            Inequality::UpperVPde => "upper_v_pde",
            Inequality::LowerUInitial => "lower_u_initial",
            Inequality::UpperVInitial => "upper_v_initial",
            Inequality::LowerUBoundary => "lower_u_boundary",
            Inequality::UpperVBoundary => "upper_v_boundary",
            Inequality::OrderingU => "ordering_u",
            Inequality::OrderingV => "ordering_v",
            Inequality::Nonnegative => "nonnegative",
        }
    }
}

/// Worst signed violation of one inequality; positive means violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Worst {
    pub inequality: Inequality,
    pub value: f64,
    pub t: f64,
    /// Interior node, or `None` at a boundary point.
    pub node: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubSuperReport {
    pub worst: Vec<Worst>,
    pub notes: Vec<String>,
}

impl SubSuperReport {
    pub fn get(&self, which: Inequality) -> &Worst {
        self.worst
            .iter()
            .find(|w| w.inequality == which)
            .expect("every inequality is reported")
    }

    pub fn max_violation(&self) -> f64 {
        self.worst.iter().map(|w| w.value).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }

    pub fn ordering_violated(&self, tol: f64) -> bool {
        self.get(Inequality::OrderingU).value > tol || self.get(Inequality::OrderingV).value > tol
    }
}

struct Tracker(Vec<Worst>);

impl Tracker {
    fn new() -> Self {
        Tracker(
            Inequality::ALL
                .iter()
                .map(|&inequality| Worst {
                    inequality,
                    value: f64::NEG_INFINITY,
                    t: 0.0,
                    node: None,
                })
                .collect(),
        )
    }

    fn record(&mut self, which: Inequality, value: f64, t: f64, node: Option<usize>) {
        let w = &mut self.0[which as usize];
        if value > w.value || w.value == f64::NEG_INFINITY {
            *w = Worst {
                inequality: which,
                value,
                t,
                node,
            };
        }
    }
}

fn interior_control(ctrl: &ControlSet, dt: f64, t: f64, n: usize) -> (Vec<f64>, Equation) {
    let step = ((t / dt + 1e-9).floor() as usize).min(ctrl.n_steps().saturating_sub(1));
    let mut h = vec![0.0; n];
    for (k, hk) in ctrl.h_at(step).iter().enumerate() {
        h[ctrl.support.start + k] = *hk;
    }
    (h, ctrl.equation)
}

/// Checks the sub/supersolution inequalities for `(upper, lower)` at every listed time.
///
/// `(upper_u, lower_v)` must be a super/sub pair for the competition system
/// with controls `ctrl`, and `(lower_u, upper_v)` must satisfy the reversed set.
/// Boundary data come from `ctrl` at the step containing `t`.
#[allow(clippy::too_many_arguments)]
pub fn check_subsuper_pair(
    p: &Params,
    grid: &Grid,
    upper: &dyn Fn(f64) -> EnvelopeValue,
    lower: &dyn Fn(f64) -> EnvelopeValue,
    init: &StatePair,
    ctrl: &ControlSet,
    times: &[f64],
    dt: f64,
) -> SubSuperReport {
    let n = grid.n();
    let mut tr = Tracker::new();
    let mut notes = Vec::new();

    let (up0, lo0) = (upper(0.0), lower(0.0));
    for i in 0..n {
        tr.record(Inequality::UpperUInitial, init.u[i] - up0.u[i], 0.0, Some(i));
        tr.record(Inequality::LowerVInitial, lo0.v[i] - init.v[i], 0.0, Some(i));
        tr.record(Inequality::LowerUInitial, lo0.u[i] - init.u[i], 0.0, Some(i));
        tr.record(Inequality::UpperVInitial, init.v[i] - up0.v[i], 0.0, Some(i));
    }

    for &t in times {
        let (up, lo) = (upper(t), lower(t));
        let (up1, lo1) = (upper(t + dt), lower(t + dt));
        let step = ((t / dt + 1e-9).floor() as usize).min(ctrl.n_steps().saturating_sub(1));
        let (cul, cur, cvl, cvr) = ctrl.boundary_at(step);

        for (cu, cv, ub, lb) in [
            (cul, cvl, (up.u_bc.0, up.v_bc.0), (lo.u_bc.0, lo.v_bc.0)),
            (cur, cvr, (up.u_bc.1, up.v_bc.1), (lo.u_bc.1, lo.v_bc.1)),
        ] {
            tr.record(Inequality::UpperUBoundary, cu - ub.0, t, None);
            tr.record(Inequality::LowerVBoundary, lb.1 - cv, t, None);
            tr.record(Inequality::LowerUBoundary, lb.0 - cu, t, None);
            tr.record(Inequality::UpperVBoundary, cv - ub.1, t, None);
        }

        let lap = |f: &Field, bc: (f64, f64), d: f64| -> Vec<f64> {
            apply_laplacian(grid, f, Boundary::dirichlet(bc.0, bc.1))
                .into_iter()
                .map(|x| d * x)
                .collect()
        };
        let lap_uu = lap(&up1.u, up1.u_bc, p.d1);
        let lap_lv = lap(&lo1.v, lo1.v_bc, p.d2);
        let lap_lu = lap(&lo1.u, lo1.u_bc, p.d1);
        let lap_uv = lap(&up1.v, up1.v_bc, p.d2);
        let (h, eq) = interior_control(ctrl, dt, t, n);
        let (hu, hv) = match eq {
            Equation::First => (h, vec![0.0; n]),
            Equation::Second => (vec![0.0; n], h),
        };

        for i in 0..n {
            let f_u = |u: f64, v: f64| u * (p.a1 - p.b1 * u - p.c1 * v + hu[i]);
            let f_v = |u: f64, v: f64| v * (p.a2 - p.b2 * u - p.c2 * v + hv[i]);
            // residual r = D_t w - d w_xx - f; supersolution needs r >= 0
            let r_uu = (up1.u[i] - up.u[i]) / dt - lap_uu[i] - f_u(up.u[i], lo.v[i]);
            let r_lv = (lo1.v[i] - lo.v[i]) / dt - lap_lv[i] - f_v(up.u[i], lo.v[i]);
            let r_lu = (lo1.u[i] - lo.u[i]) / dt - lap_lu[i] - f_u(lo.u[i], up.v[i]);
            let r_uv = (up1.v[i] - up.v[i]) / dt - lap_uv[i] - f_v(lo.u[i], up.v[i]);
            tr.record(Inequality::UpperUPde, -r_uu, t, Some(i));
            tr.record(Inequality::LowerVPde, r_lv, t, Some(i));
            tr.record(Inequality::LowerUPde, r_lu, t, Some(i));
            tr.record(Inequality::UpperVPde, -r_uv, t, Some(i));

            tr.record(Inequality::OrderingU, lo.u[i] - up.u[i], t, Some(i));
            tr.record(Inequality::OrderingV, lo.v[i] - up.v[i], t, Some(i));
            tr.record(Inequality::Nonnegative, -lo.u[i].min(lo.v[i]), t, Some(i));
        }
    }

    let tol = 1e-12;
    for which in [
        Inequality::UpperUBoundary,
        Inequality::LowerVBoundary,
        Inequality::LowerUBoundary,
        Inequality::UpperVBoundary,
    ] {
        let w = tr.0[which as usize];
        if w.value.abs() <= tol {
            notes.push(format!(
                "{} holds only with equality (weakly admissible at t = {})",
                which.name(),
                w.t
            ));
        }
    }
    SubSuperReport {
        worst: tr.0,
        notes,
    }
}

/// Per-step flags from [`monitor_constraints`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintFlags {
    pub t: f64,
    pub u_nonnegative: bool,
    pub u_below_cap: bool,
    pub v_nonnegative: bool,
    pub v_below_cap: bool,
    /// `u <= (a1 + h_sup) / b1`; only checked when `h_sup > 0`.
    pub u_below_relaxed: Option<bool>,
}

impl ConstraintFlags {
    pub fn all_hold(&self) -> bool {
        self.u_nonnegative
            && self.u_below_cap
            && self.v_nonnegative
            && self.v_below_cap
            && self.u_below_relaxed.unwrap_or(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintViolation {
    pub t: f64,
    pub bound: &'static str,
    /// Amount by which the bound is exceeded (before slack).
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub steps: Vec<ConstraintFlags>,
    pub first_violation: Option<ConstraintViolation>,
    pub worst_negativity: f64,
    pub max_u: f64,
    pub max_v: f64,
    pub slack: f64,
}

impl ConstraintReport {
    pub fn ok(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks `0 <= u <= a1/b1`, `0 <= v <= a2/c2` (and the relaxed `u` bound) at every step.
pub fn monitor_constraints(traj: &Trajectory, p: &Params, h_sup: f64, slack: f64) -> ConstraintReport {
    let (cap_u, cap_v) = (p.cap_u(), p.cap_v());
    let relaxed = (h_sup > 0.0).then(|| (p.a1 + h_sup) / p.b1);
    let mut steps = Vec::with_capacity(traj.constraint_report.len());
    let mut first = None;
    let mut worst_neg = 0.0f64;
    let (mut max_u, mut max_v) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for b in &traj.constraint_report {
        worst_neg = worst_neg.max(-b.min_u).max(-b.min_v);
        max_u = max_u.max(b.max_u);
        max_v = max_v.max(b.max_v);
        let excess = [
            ("u >= 0", -b.min_u),
            ("u <= a1/b1", b.max_u - cap_u),
            ("v >= 0", -b.min_v),
            ("v <= a2/c2", b.max_v - cap_v),
        ];
        let relaxed_excess = relaxed.map(|r| b.max_u - r);
        let flags = ConstraintFlags {
            t: b.t,
            u_nonnegative: excess[0].1 <= slack,
            u_below_cap: excess[1].1 <= slack,
            v_nonnegative: excess[2].1 <= slack,
            v_below_cap: excess[3].1 <= slack,
            u_below_relaxed: relaxed_excess.map(|e| e <= slack),
        };
        if first.is_none() && !flags.all_hold() {
            let (bound, magnitude) = excess
                .iter()
                .copied()
                .chain(relaxed_excess.map(|e| ("u <= (a1+h)/b1", e)))
                .filter(|(_, e)| *e > slack)
                .fold(("", f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            first = Some(ConstraintViolation {
                t: b.t,
                bound,
                magnitude,
            });
        }
        steps.push(flags);
    }
    ConstraintReport {
        steps,
        first_violation: first,
        worst_negativity: worst_neg,
        max_u,
        max_v,
        slack,
    }
}
