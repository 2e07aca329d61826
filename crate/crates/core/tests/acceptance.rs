//! End-to-end acceptance checks; prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lvctl::comparison::{check_subsuper_pair, discrete_slack, monitor_constraints, EnvelopeValue};
use lvctl::config::Config;
use lvctl::control_synthesis::{mt1_controls, two_phase_mt3, Survivor, TwoPhaseOptions};
use lvctl::discretization::{apply_laplacian, principal_eigenvalue, Boundary, Grid};
use lvctl::elliptic::{
    barrier_guess, coexistence_coefficients, heterogeneous_target, homogeneous_coexistence,
    solve_logistic_theta, solve_steady_system, SteadyPair,
};
use lvctl::model::Params;
use lvctl::optimal_control::{
    minimum_time, objective, objective_and_gradient, FreeDofs, OcProblem,
};
use lvctl::parabolic::{
    run_until_near, simulate, BcKind, ControlSet, Equation, SimOptions, StatePair, Stepper,
};
use lvctl::scenario::run_scenario;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: lvctl::Error) -> String {
    format!("error: {e}")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst_pi = 0.0f64;
    let mut worst_closed = 0.0f64;
    for length in [1.0, 10.0] {
        let grid = Grid::new(length, 199).map_err(err)?;
        let e = principal_eigenvalue(&grid).map_err(err)?;
        let pi2 = PI * PI / (length * length);
        let dx = grid.dx();
        let closed = 2.0 / (dx * dx) * (1.0 - (PI * dx / length).cos());
        worst_pi = worst_pi.max((e.lambda1_discrete - pi2).abs() / pi2);
        worst_closed = worst_closed.max((e.lambda1_discrete - closed).abs() / closed);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst_pi < 5e-3 && worst_closed < 1e-10 && secs < 1.0,
        format!("rel err vs pi^2/L^2 {worst_pi:.2e}, vs closed form {worst_closed:.2e}, {secs:.3}s"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let p = Params {
        a1: 10.0,
        a2: 10.0,
        d1: 1.0,
        d2: 1.0,
        length: 1.0,
        omega: (0.0, 1.0),
        ..Params::coexistence_preset()
    };
    let solve = |n: usize| -> Result<(Grid, Vec<f64>), String> {
        let grid = Grid::new(1.0, n).map_err(err)?;
        let theta = solve_logistic_theta(&p, &grid).map_err(err)?;
        Ok((grid, theta.into_inner()))
    };
    let (grid, theta) = solve(199)?;
    let lap = apply_laplacian(&grid, &theta, Boundary::dirichlet(0.0, 0.0));
    let residual = theta
        .iter()
        .zip(&lap)
        .map(|(t, l)| (l + t * (10.0 - t)).abs())
        .fold(0.0, f64::max);
    let bounded = theta.iter().all(|&t| t > 0.0 && t < 10.0);
    let n = theta.len();
    let asym = (0..n).map(|i| (theta[i] - theta[n - 1 - i]).abs()).fold(0.0, f64::max);
    let (_, coarse) = solve(99)?;
    let (_, fine) = solve(399)?;
    let e1 = (0..99).map(|i| (coarse[i] - theta[2 * i + 1]).abs()).fold(0.0, f64::max);
    let e2 = (0..99).map(|i| (theta[2 * i + 1] - fine[4 * i + 3]).abs()).fold(0.0, f64::max);
    let ratio = e1 / e2;
    let secs = start.elapsed().as_secs_f64();
    check(
        residual < 1e-10 && bounded && asym < 1e-10 && ratio > 3.5 && ratio < 4.5 && secs < 5.0,
        format!(
            "residual {residual:.2e}, 0<theta<10 {bounded}, asymmetry {asym:.2e}, refinement ratio {ratio:.3}, {secs:.3}s"
        ),
    )
}

fn criterion_3() -> Outcome {
    let p = Params::coexistence_preset();
    let (ku, kv) = coexistence_coefficients(&p);
    let h = homogeneous_coexistence(&p).map_err(err)?;
    let expected = [(ku, 1.2 / 2.32), (kv, 0.8 / 2.32), (h.u_star, 12.0 / 2.32), (h.v_star, 8.0 / 2.32)];
    let arith = expected.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let grid = Grid::new(1.0, 99).map_err(err)?;
    let t = heterogeneous_target(&p, &grid).map_err(err)?;
    let lu = apply_laplacian(&grid, &t.u, Boundary::dirichlet(0.0, 0.0));
    let lv = apply_laplacian(&grid, &t.v, Boundary::dirichlet(0.0, 0.0));
    let residual = (0..grid.n())
        .map(|i| {
            let (u, v) = (t.u[i], t.v[i]);
            let ru = p.d1 * lu[i] + u * (p.a1 - p.b1 * u - p.c1 * v);
            let rv = p.d2 * lv[i] + v * (p.a2 - p.b2 * u - p.c2 * v);
            ru.abs().max(rv.abs())
        })
        .fold(0.0, f64::max);
    check(
        arith < 1e-10 && residual < 1e-8,
        format!(
            "kappa_u {ku:.5}, kappa_v {kv:.5}, u* {:.4}, v* {:.4} (max err {arith:.1e}); target residual {residual:.2e}",
            h.u_star, h.v_star
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let p = Params::barrier_preset();
    let grid = Grid::new(p.length, 199).map_err(err)?;
    let dt = 0.01;
    let init = StatePair::constant(&grid, 0.5, 0.5);
    let (u0, v0) = barrier_guess(&p, &grid, 1.0);
    let barrier = solve_steady_system(&p, &grid, (1.0, 0.0), (&u0, &v0), 0.0).map_err(err)?;
    let goal = SteadyPair::constant(&grid, 1.0, 0.0);
    let opts = SimOptions { snapshot_stride: 1000 };

    let free = ControlSet::constant(1, 0..grid.n(), (1.0, 0.0), 0.0, Equation::First);
    let blocked = simulate(&p, &grid, &init, &free, 500.0, dt, opts).map_err(err)?;
    // distance to (1, 0) over the second half of the run
    let stagnation = blocked
        .states
        .iter()
        .filter(|s| s.t >= 250.0)
        .map(|s| s.u.sup_distance(&goal.u).max(s.v.sup_distance(&goal.v)))
        .fold(f64::INFINITY, f64::min);
    let end = &blocked.terminal_state;
    let to_barrier = end.u.sup_distance(&barrier.u).max(end.v.sup_distance(&barrier.v));

    let pushed = ControlSet::constant(1, grid.support(p.omega), (1.0, 0.0), -0.8, Equation::Second);
    let crossed = simulate(&p, &grid, &init, &pushed, 300.0, dt, opts).map_err(err)?;
    let sup_v = crossed.terminal_state.v.sup_abs();
    let secs = start.elapsed().as_secs_f64();
    check(
        stagnation > 0.05 && to_barrier < 1e-3 && sup_v < 1e-2 && secs < 60.0,
        format!(
            "min distance to (1,0) on [250,500] {stagnation:.4}, terminal distance to barrier {to_barrier:.2e}, crossed sup|v| {sup_v:.2e}, {secs:.1}s"
        ),
    )
}

fn criterion_5() -> Outcome {
    let p = Params::barrier_preset();
    let grid = Grid::new(p.length, 199).map_err(err)?;
    let dt = 0.01;
    let init = StatePair::constant(&grid, 0.5, 0.5);
    let lambda1 = principal_eigenvalue(&grid).map_err(err)?.lambda1_discrete;
    let c = mt1_controls(&p, &grid, lambda1, Survivor::V).map_err(err)?;
    let near = run_until_near(&p, &grid, &init, &c.controls, &c.target, 1e-2, dt, 500.0, SimOptions::default())
        .map_err(err)?;
    let traj = simulate(&p, &grid, &init, &c.controls, near.t1, dt, SimOptions::default()).map_err(err)?;
    let slack = discrete_slack(&grid, dt);
    let report = monitor_constraints(&traj, &p, c.controls.h_positive_sup(), slack);
    check(
        near.t1.is_finite() && near.t1 < 500.0 && report.ok(),
        format!(
            "sigma {:.4}, T1 {:.2}, constraint violation {:?}, worst negativity {:.1e} (slack {slack:.1e})",
            c.sigma, near.t1, report.first_violation, report.worst_negativity
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let p = Params::coexistence_preset();
    let grid = Grid::new(1.0, 49).map_err(err)?;
    let target = heterogeneous_target(&p, &grid).map_err(err)?;
    let init = StatePair::constant(&grid, 0.2, 0.3);
    let prob = OcProblem::new(p, grid, init, target, 0.25, 0.005);
    let steps = prob.n_steps();
    let mut base = ControlSet::constant(steps, prob.support.clone(), (0.4, 0.2), 0.1, Equation::First);
    for (i, h) in base.h.iter_mut().enumerate() {
        *h += 0.05 * (i as f64 * 0.7).sin();
    }
    let ev = objective_and_gradient(&prob, &base).map_err(err)?;
    let g = &ev.gradient;

    let mut worst = 0.0f64;
    let mut cases = 0;
    for (boundary, interior) in [(true, false), (false, true), (true, true)] {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100 * boundary as u64 + 1000 * interior as u64);
            let mut d = ControlSet::zeros(steps, prob.support.clone(), Equation::First);
            if boundary {
                for series in [&mut d.cu_left, &mut d.cu_right, &mut d.cv_left, &mut d.cv_right] {
                    series.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
                }
            }
            if interior {
                d.h.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
            }
            let shifted = |s: f64| {
                let mut c = base.clone();
                let pairs = [
                    (&mut c.cu_left, &d.cu_left),
                    (&mut c.cu_right, &d.cu_right),
                    (&mut c.cv_left, &d.cv_left),
                    (&mut c.cv_right, &d.cv_right),
                    (&mut c.h, &d.h),
                ];
                for (dst, dir) in pairs {
                    dst.iter_mut().zip(dir.iter()).for_each(|(x, y)| *x += s * y);
                }
                c
            };
            let eps = 1e-6;
            let jp = objective(&prob, &shifted(eps)).map_err(err)?.0;
            let jm = objective(&prob, &shifted(-eps)).map_err(err)?.0;
            let fd = (jp - jm) / (2.0 * eps);
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let ad = dot(&g.cu_left, &d.cu_left)
                + dot(&g.cu_right, &d.cu_right)
                + dot(&g.cv_left, &d.cv_left)
                + dot(&g.cv_right, &d.cv_right)
                + dot(&g.h, &d.h);
            worst = worst.max((fd - ad).abs() / ad.abs().max(1e-12));
            cases += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-4 && secs < 60.0,
        format!("{cases} directions, worst relative error {worst:.2e}, {secs:.1}s"),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let p = Params::coexistence_preset();
    let grid = Grid::new(1.0, 99).map_err(err)?;
    let target = heterogeneous_target(&p, &grid).map_err(err)?;
    let init = StatePair::constant(&grid, 0.2, 0.3);
    let template = OcProblem::new(p, grid, init, target, 1.0, 0.005);

    let mut with_h = template.clone();
    with_h.free = FreeDofs::all();
    let a = minimum_time(&with_h, 1.0, 4.0, 1e-2).map_err(err)?;
    let mut without_h = template;
    without_h.free = FreeDofs::boundary();
    let b = minimum_time(&without_h, 1.0, 30.0, 1e-2).map_err(err)?;

    let band_h = (1.625..=1.986).contains(&a.t_star);
    let band_0 = (1.807..=2.209).contains(&b.t_star);
    let ordered = a.t_star < b.t_star;
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "T*(h free) {:.4} in [1.625,1.986]: {}; T*(h=0) {:.4} in [1.807,2.209]: {}; ordering {}: {}; {secs:.0}s",
        a.t_star,
        pass(band_h),
        b.t_star,
        pass(band_0),
        if ordered { "T*(h free) < T*(h=0)" } else { "reversed" },
        pass(ordered),
    );
    check(band_h && band_0 && ordered && secs < 900.0, detail)
}

fn criterion_8() -> Outcome {
    let p = Params::coexistence_preset();
    let grid = Grid::new(1.0, 99).map_err(err)?;
    let dt = 0.005;
    let init = StatePair::constant(&grid, 0.2, 0.3);
    let slack = discrete_slack(&grid, dt);
    let mut ok = true;
    let mut h_sups = Vec::new();
    let mut parts = Vec::new();
    for eps in [0.2, 0.1, 0.05] {
        let r = two_phase_mt3(&p, &grid, &init, eps, 8.0, dt, 1.0, &TwoPhaseOptions::default()).map_err(err)?;
        let report = monitor_constraints(&r.trajectory, &p, r.controls.h_positive_sup(), slack);
        let h_sup = r.controls.h_sup();
        ok &= r.terminal_distance < 1e-2 && h_sup <= 1.0 && report.worst_negativity <= slack;
        parts.push(format!(
            "eps {eps}: dist {:.2e}, |h| {h_sup:.3}, neg {:.1e}",
            r.terminal_distance, report.worst_negativity
        ));
        h_sups.push(h_sup);
    }
    let monotone = h_sups.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    check(ok && monotone, format!("{}; non-increasing |h| {monotone}", parts.join("; ")))
}

fn criterion_9() -> Outcome {
    let p = Params::barrier_preset();
    let grid = Grid::new(p.length, 49).map_err(err)?;
    let dt = 0.01;
    let mut ctrl = ControlSet::constant(100, grid.support(p.omega), (0.5, 0.7), 0.0, Equation::First);
    for (i, h) in ctrl.h.iter_mut().enumerate() {
        *h = 0.8 * (i as f64 * 0.13).sin();
    }
    let a = p.a1 + ctrl.h_positive_sup();
    let init = StatePair::constant(&grid, 0.5, 0.5);
    let times: Vec<f64> = (0..100).map(|k| k as f64 * dt).collect();
    let up = |_t: f64| EnvelopeValue::constant(&grid, a / p.b1, p.cap_v());
    let lo = |_t: f64| EnvelopeValue::constant(&grid, 0.0, 0.0);
    let envelope = check_subsuper_pair(&p, &grid, &up, &lo, &init, &ctrl, &times, dt);
    let envelope_ok = envelope.holds(1e-12);

    let steady = SteadyPair::constant(&grid, 0.0, p.cap_v());
    let steady_ctrl = ControlSet::constant(1, 0..0, (0.0, p.cap_v()), 0.0, Equation::First);
    let env = |_t: f64| EnvelopeValue::from_steady(&steady);
    let r = check_subsuper_pair(&p, &grid, &env, &env, &StatePair::from_steady(&steady), &steady_ctrl, &times[..10], dt);
    let equality = r.worst.iter().map(|w| w.value.abs()).fold(0.0, f64::max);

    let stepper = Stepper::new(&p, &grid, dt, BcKind::Dirichlet).map_err(err)?;
    let n = grid.n();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ordered_pairs = 0;
    let mut violations = 0;
    for _ in 0..100 {
        let cu = rng.gen_range(0.0..=p.cap_u());
        let frozen = ControlSet::constant(1, grid.support(p.omega), (cu, 0.0), rng.gen_range(-1.0..0.0), Equation::First);
        let mut lo: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.9)).collect();
        let mut hi: Vec<f64> = lo.iter().map(|x| x + rng.gen_range(0.0..0.1)).collect();
        let v = vec![0.0; n];
        let (mut lo_n, mut hi_n, mut v_n) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut ok = true;
        for step in 0..200 {
            stepper.step(&lo, &v, &frozen, step, &mut lo_n, &mut v_n);
            stepper.step(&hi, &v, &frozen, step, &mut hi_n, &mut v_n);
            std::mem::swap(&mut lo, &mut lo_n);
            std::mem::swap(&mut hi, &mut hi_n);
            ok &= lo.iter().zip(&hi).all(|(a, b)| a <= b);
        }
        if ok {
            ordered_pairs += 1;
        } else {
            violations += 1;
        }
    }
    check(
        envelope_ok && equality <= 1e-12 && violations == 0,
        format!(
            "constant envelope max violation {:.1e}; steady equality {equality:.1e}; ordering kept in {ordered_pairs}/100 pairs",
            envelope.max_violation()
        ),
    )
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn csv_bytes(dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            csv_bytes(&path, out);
        } else if path.extension().is_some_and(|e| e == "csv") {
            let rel = path.strip_prefix(dir).unwrap().to_path_buf();
            out.push((rel, fs::read(&path).unwrap()));
        }
    }
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut names: Vec<String> = fs::read_dir(config_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.ends_with(".cfg") && n != "min_time_no_h.cfg")
        .collect();
    names.sort();
    let mut files = 0;
    let mut differing = Vec::new();
    for name in &names {
        let cfg = Config::from_path(&config_dir().join(name)).map_err(err)?;
        let mut runs = Vec::new();
        for k in 0..2 {
            let out = tmp.path().join(format!("{name}.{k}"));
            run_scenario(&cfg, &out, 1 + 2 * k).map_err(err)?;
            let mut bytes = Vec::new();
            csv_bytes(&out, &mut bytes);
            runs.push(bytes);
        }
        files += runs[0].len();
        if runs[0].is_empty() || runs[0] != runs[1] {
            differing.push(name.clone());
        }
    }
    check(
        differing.is_empty(),
        format!("{} configs, {files} CSVs compared byte-for-byte; differing: {differing:?}", names.len()),
    )
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("eigenvalue", criterion_1),
        ("logistic theta", criterion_2),
        ("coexistence targets", criterion_3),
        ("barrier", criterion_4),
        ("constructive stabilization", criterion_5),
        ("adjoint gradient", criterion_6),
        ("minimum time", criterion_7),
        ("two-phase steering", criterion_8),
        ("comparison suite", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let (ok, detail) = match run() {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!("criterion {} ({name}): {} | {detail}", k + 1, pass(ok));
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
