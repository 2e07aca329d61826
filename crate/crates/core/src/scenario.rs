//! Named scenarios driven by a [`Config`], writing CSV files and a `summary.txt`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::comparison::{discrete_slack, monitor_constraints};
use crate::config::Config;
use crate::control_synthesis::{mt1_controls, two_phase_mt3, Survivor, TwoPhaseOptions};
use crate::discretization::{principal_eigenvalue, Grid};
use crate::elliptic::{barrier_guess, heterogeneous_target, probe_uniqueness, solve_steady_system, SteadyPair};
use crate::error::{Error, Result};
use crate::io::{
    boundary_control_table, constraint_table, convergence_table, interior_control_table,
    probe_table, steady_table, trajectory_table, Num, Table,
};
use crate::model::{classify_regime, Params};
use crate::optimal_control::{minimum_time, FreeDofs, OcProblem};
use crate::parabolic::{run_until_near, simulate, ControlSet, Equation, SimOptions, StatePair};

pub const PRESETS: [&str; 6] = [
    "mt1_stabilize",
    "barrier_cross",
    "two_phase",
    "min_time",
    "regime_report",
    "uniqueness_probe",
];

/// What a scenario produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
    summary: String,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Writer {
            dir,
            files: Vec::new(),
            summary: String::new(),
        })
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let path = self.dir.join(name);
        t.write(&path)?;
        self.files.push(path);
        Ok(())
    }

    fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.summary, "{key}={value}");
    }

    fn num(&mut self, key: &str, value: f64) {
        self.line(key, Num(value));
    }

    fn finish(mut self) -> Result<ScenarioOutput> {
        let path = self.dir.join("summary.txt");
        std::fs::write(&path, &self.summary).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(ScenarioOutput {
            summary: self.summary,
            files: self.files,
        })
    }
}

struct Setup {
    p: Params,
    grid: Grid,
    dt: f64,
    stride: usize,
    init: StatePair,
}

fn setup(cfg: &Config, params: Params, n: usize, dt: f64, init: (f64, f64)) -> Result<Setup> {
    let p = cfg.params_or(params)?;
    let grid = Grid::new(p.length, cfg.get_or("grid", "n", n)?)?;
    let dt = cfg.get_or("time", "dt", dt)?;
    let stride = cfg.get_or("output", "stride", 100usize)?;
    let u0 = cfg.get_or("init", "u0", init.0)?;
    let v0 = cfg.get_or("init", "v0", init.1)?;
    let init = StatePair::constant(&grid, u0, v0);
    init.check_admissible(&p)?;
    Ok(Setup {
        p,
        grid,
        dt,
        stride,
        init,
    })
}

fn preset_name(cfg: &Config) -> Result<String> {
    cfg.get_str("preset", "name")
        .map(str::to_string)
        .ok_or_else(|| Error::MissingKey("preset.name".into()))
}

/// Runs the scenario named in `[preset] name`, writing into `out_dir`.
///
/// With `[preset] sweep = section.key` and `values = a, b, ...` the scenario
/// is repeated once per value into `out_dir/job_<k>` on `jobs` threads.
pub fn run_scenario(cfg: &Config, out_dir: &Path, jobs: usize) -> Result<ScenarioOutput> {
    if let Some(target) = cfg.get_str("preset", "sweep") {
        let values = cfg
            .get_list("preset", "values")?
            .ok_or_else(|| Error::MissingKey("preset.values".into()))?;
        let (section, key) = target
            .split_once('.')
            .ok_or_else(|| Error::InvalidInput(format!("sweep target `{target}` is not section.key")))?;
        return run_sweep(cfg, section, key, &values, out_dir, jobs);
    }
    let name = preset_name(cfg)?;
    let w = Writer::new(out_dir)?;
    match name.as_str() {
        "mt1_stabilize" => mt1_stabilize(cfg, w),
        "barrier_cross" => barrier_cross(cfg, w),
        "two_phase" => two_phase(cfg, w),
        "min_time" => min_time(cfg, w),
        "regime_report" => regime_report(cfg, w),
        "uniqueness_probe" => uniqueness_probe(cfg, w),
        _ => Err(Error::UnknownPreset(name)),
    }
}

fn run_sweep(
    cfg: &Config,
    section: &str,
    key: &str,
    values: &[f64],
    out_dir: &Path,
    jobs: usize,
) -> Result<ScenarioOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let results: Vec<Result<ScenarioOutput>> = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(k, v)| {
                let mut job = cfg.clone();
                job.remove("preset", "sweep");
                job.set(section, key, &v.to_string());
                run_scenario(&job, &out_dir.join(format!("job_{k}")), 1)
            })
            .collect()
    });
    let mut w = Writer::new(out_dir)?;
    for (k, (v, r)) in values.iter().zip(results).enumerate() {
        let r = r?;
        let _ = writeln!(w.summary, "[job_{k}] {section}.{key}={v}");
        w.summary.push_str(&r.summary);
        w.files.extend(r.files);
    }
    w.finish()
}

fn mt1_stabilize(cfg: &Config, mut w: Writer) -> Result<ScenarioOutput> {
    let s = setup(cfg, Params::barrier_preset(), 199, 0.01, (0.5, 0.5))?;
    let eps = cfg.get_or("controls", "eps", 1e-2)?;
    let t_cap = cfg.get_or("time", "T_cap", 500.0)?;
    let survivor = match cfg.get_str("controls", "survivor").unwrap_or("V") {
        "V" | "v" => Survivor::V,
        "U" | "u" => Survivor::U,
        other => return Err(Error::InvalidInput(format!("survivor must be U or V, got `{other}`"))),
    };
    let eig = principal_eigenvalue(&s.grid)?;
    let regime = classify_regime(&s.p, eig.lambda1_discrete);
    let c = mt1_controls(&s.p, &s.grid, eig.lambda1_discrete, survivor)?;
    let near = run_until_near(&s.p, &s.grid, &s.init, &c.controls, &c.target, eps, s.dt, t_cap, SimOptions::default())?;
    let horizon = near.t1.max(s.dt);
    let traj = simulate(&s.p, &s.grid, &s.init, &c.controls, horizon, s.dt, SimOptions { snapshot_stride: s.stride })?;
    let report = monitor_constraints(&traj, &s.p, c.controls.h_positive_sup(), discrete_slack(&s.grid, s.dt));

    w.summary.push_str(&regime.to_string());
    w.num("sigma", c.sigma);
    w.num("T1", near.t1);
    w.line("constraints_ok", report.ok());
    w.num("worst_negativity", report.worst_negativity);
    w.table("trajectory.csv", &trajectory_table(&s.grid, &traj))?;
    w.table("constraints.csv", &constraint_table(&traj, &report))?;
    w.table("controls_boundary.csv", &boundary_control_table(&c.controls, 0.0, s.dt, None))?;
    w.table("controls_h.csv", &interior_control_table(&c.controls, &s.grid, 0.0, s.dt, None))?;
    w.finish()
}

fn barrier_cross(cfg: &Config, mut w: Writer) -> Result<ScenarioOutput> {
    let s = setup(cfg, Params::barrier_preset(), 199, 0.01, (0.5, 0.5))?;
    let cu = cfg.get_or("controls", "cu", s.p.cap_u())?;
    let cv = cfg.get_or("controls", "cv", 0.0)?;
    let h_bar = cfg.get_or("controls", "h_bar", -0.8)?;
    let t_blocked = cfg.get_or("time", "T", 500.0)?;
    let t_crossed = cfg.get_or("time", "T_cross", 300.0)?;

    let (u0, v0) = barrier_guess(&s.p, &s.grid, cu);
    let barrier = solve_steady_system(&s.p, &s.grid, (cu, cv), (&u0, &v0), 0.0)?;
    let goal = SteadyPair::constant(&s.grid, cu, cv);
    let opts = SimOptions {
        snapshot_stride: s.stride,
    };

    let free = ControlSet::constant(1, 0..s.grid.n(), (cu, cv), 0.0, Equation::First);
    let blocked = simulate(&s.p, &s.grid, &s.init, &free, t_blocked, s.dt, opts)?;
    let support = s.grid.support(s.p.omega);
    let pushed = ControlSet::constant(1, support, (cu, cv), h_bar, Equation::Second);
    let crossed = simulate(&s.p, &s.grid, &s.init, &pushed, t_crossed, s.dt, opts)?;

    let end = &blocked.terminal_state;
    w.line("barrier_class", barrier.classification);
    w.num("barrier_max_v", barrier.v.max());
    w.num("barrier_min_u", barrier.u.min());
    w.num("blocked_distance_to_target", goal.distance_sum(&end.u, &end.v));
    w.num(
        "blocked_distance_to_barrier",
        end.u.sup_distance(&barrier.u).max(end.v.sup_distance(&barrier.v)),
    );
    w.num("crossed_sup_v", crossed.terminal_state.v.sup_abs());
    w.num(
        "crossed_distance_to_target",
        goal.distance_sum(&crossed.terminal_state.u, &crossed.terminal_state.v),
    );
    w.table("barrier.csv", &steady_table(&s.grid, &barrier))?;
    w.table("blocked_traj.csv", &trajectory_table(&s.grid, &blocked))?;
    w.table("crossed_traj.csv", &trajectory_table(&s.grid, &crossed))?;
    w.finish()
}

fn two_phase(cfg: &Config, mut w: Writer) -> Result<ScenarioOutput> {
    let s = setup(cfg, Params::coexistence_preset(), 99, 0.005, (0.2, 0.3))?;
    let eps = cfg.get_or("controls", "eps", 0.05)?;
    let t_tilde = cfg.get_or("time", "T_tilde", 8.0)?;
    let h_box = cfg.get_or("controls", "h_box", 1.0)?;
    let opts = TwoPhaseOptions {
        tolerance: cfg.get_or("controls", "tol", 1e-2)?,
        t_cap: cfg.get_or("time", "T_cap", 500.0)?,
        ..TwoPhaseOptions::default()
    };
    let r = two_phase_mt3(&s.p, &s.grid, &s.init, eps, t_tilde, s.dt, h_box, &opts)?;
    let report = monitor_constraints(&r.trajectory, &s.p, r.controls.h_positive_sup(), discrete_slack(&s.grid, s.dt));
    let split = r.phase1_steps;
    let phase = move |k: usize| if k < split { 1u8 } else { 2u8 };

    w.num("T1", r.t1);
    w.num("T_final", r.trajectory.terminal_state.t);
    w.num("terminal_distance", r.terminal_distance);
    w.num("h_sup", r.controls.h_sup());
    w.line("phase2_iterations", r.phase2.iterations);
    w.num("worst_negativity", report.worst_negativity);
    w.table("trajectory.csv", &trajectory_table(&s.grid, &r.trajectory))?;
    w.table("constraints.csv", &constraint_table(&r.trajectory, &report))?;
    w.table("controls_boundary.csv", &boundary_control_table(&r.controls, 0.0, s.dt, Some(&phase)))?;
    w.table("controls_h.csv", &interior_control_table(&r.controls, &s.grid, 0.0, s.dt, Some(&phase)))?;
    w.table("convergence.csv", &convergence_table(&r.phase2.log))?;
    w.finish()
}

fn min_time(cfg: &Config, mut w: Writer) -> Result<ScenarioOutput> {
    let s = setup(cfg, Params::coexistence_preset(), 99, 0.005, (0.2, 0.3))?;
    let use_h = cfg.get_or("controls", "use_h", true)?;
    let target = heterogeneous_target(&s.p, &s.grid)?;
    let mut prob = OcProblem::new(s.p, s.grid, s.init.clone(), target, 1.0, s.dt);
    prob.free = if use_h { FreeDofs::all() } else { FreeDofs::boundary() };
    prob.h_box = cfg.get_or("controls", "h_box", 1.0)?;
    prob.tolerance = cfg.get_or("controls", "tol", 1e-2)?;
    prob.w_reg = cfg.get_or("controls", "w_reg", 1e-6)?;
    prob.max_iter = cfg.get_or("controls", "max_iter", 2000usize)?;
    let t_lo = cfg.get_or("time", "T_lo", 1.0)?;
    let t_hi = cfg.get_or("time", "T_hi", if use_h { 4.0 } else { 30.0 })?;
    let tol = cfg.get_or("time", "bisect_tol", 1e-2)?;
    let m = minimum_time(&prob, t_lo, t_hi, tol)?;
    let res = &m.result;
    let dt = res.trajectory.dt;

    w.num("T_star", m.t_star);
    w.num("bracket_lo", m.bracket.0);
    w.num("bracket_hi", m.bracket.1);
    w.line("use_h", use_h);
    w.num("terminal_distance", res.terminal_distance);
    w.num("h_sup", res.controls.h_sup());
    w.table("controls_boundary.csv", &boundary_control_table(&res.controls, 0.0, dt, None))?;
    w.table("controls_h.csv", &interior_control_table(&res.controls, &s.grid, 0.0, dt, None))?;
    w.table("trajectory.csv", &trajectory_table(&s.grid, &res.trajectory))?;
    w.table("probes.csv", &probe_table(&m.probes))?;
    w.table("convergence.csv", &convergence_table(&res.log))?;
    w.finish()
}

fn regime_report(cfg: &Config, mut w: Writer) -> Result<ScenarioOutput> {
    let p = cfg.params_or(Params::barrier_preset())?;
    let grid = Grid::new(p.length, cfg.get_or("grid", "n", 199usize)?)?;
    let eig = principal_eigenvalue(&grid)?;
    let regime = classify_regime(&p, eig.lambda1_discrete);
    w.num("lambda1_discrete", eig.lambda1_discrete);
    w.num("lambda1_analytic", eig.lambda1_analytic);
    w.summary.push_str(&regime.to_string());
    if let Some(needed) = regime.interior_control_needed() {
        w.line("interior_control_needed", needed);
    }
    let mut t = Table::new(&["x", "phi"]);
    for i in 0..grid.n() {
        t.push([Num(grid.x(i)), Num(eig.eigenfunction[i])]);
    }
    w.table("eigenfunction.csv", &t)?;
    w.finish()
}

fn uniqueness_probe(cfg: &Config, mut w: Writer) -> Result<ScenarioOutput> {
    let p = cfg.params_or(Params::barrier_preset())?;
    let grid = Grid::new(p.length, cfg.get_or("grid", "n", 99usize)?)?;
    let cu = cfg.get_or("controls", "cu", p.cap_u())?;
    let cv = cfg.get_or("controls", "cv", 0.0)?;
    let sigma = cfg.get_or("controls", "sigma", 0.0)?;
    let n_starts = cfg.get_or("preset", "n_starts", 16usize)?;
    let seed = cfg.get_or("preset", "seed", 0u64)?;
    let r = probe_uniqueness(&p, &grid, (cu, cv), sigma, n_starts, seed)?;

    w.line("n_starts", r.n_starts);
    w.line("distinct", r.distinct.len());
    w.line("converged", r.converged);
    w.line("diverged", r.diverged);
    w.line("negative", r.negative);
    let mut t = Table::new(&["state", "class", "x", "u", "v"]);
    for (k, s) in r.distinct.iter().enumerate() {
        let _ = writeln!(w.summary, "state_{k}={} max_u={} max_v={}", s.classification, Num(s.u.max()), Num(s.v.max()));
        for i in 0..grid.n() {
            t.push([
                k.to_string(),
                s.classification.to_string(),
                Num(grid.x(i)).to_string(),
                Num(s.u[i]).to_string(),
                Num(s.v[i]).to_string(),
            ]);
        }
    }
    w.table("states.csv", &t)?;
    w.finish()
}
