//! Steady states: the logistic profile, the heterogeneous and homogeneous
//! coexistence targets, and Newton solves of the coupled steady system used
//! for uniqueness probing and barrier detection.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::discretization::{apply_laplacian, laplacian_matrix, Boundary, Field, Grid};
use crate::error::{Error, Result};
use crate::linalg::{BandedMatrix, Tridiagonal};
use crate::model::Params;

/// Newton stops once the sup norm of the discrete residual drops below this.
pub const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 200;
const MAX_HALVINGS: usize = 30;
/// Converged states below this are reported as negative rather than clipped.
const NEGATIVITY_TOL: f64 = 1e-8;
/// Relative nodewise distance under which two steady states are the same.
pub const DEDUP_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyClass {
    /// Zero, or equal to the constant boundary state.
    Trivial,
    /// The heterogeneous coexistence target.
    Target,
    /// Nontrivial solution whose constant boundary state is itself an equilibrium.
    Barrier,
    Other,
}

impl std::fmt::Display for SteadyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SteadyClass::Trivial => "Trivial",
            SteadyClass::Target => "Target",
            SteadyClass::Barrier => "Barrier",
            SteadyClass::Other => "Other",
        };
        f.write_str(s)
    }
}

/// A steady pair `(u_s, v_s)` with its boundary data and residual.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyPair {
    pub u: Field,
    pub v: Field,
    pub u_bc: f64,
    pub v_bc: f64,
    pub residual_inf: f64,
    pub classification: SteadyClass,
}

impl SteadyPair {
    /// Constant pair (used for homogeneous targets like `(0, a2/c2)` or `(1, 0)`).
    pub fn constant(grid: &Grid, u: f64, v: f64) -> Self {
        SteadyPair {
            u: grid.constant(u),
            v: grid.constant(v),
            u_bc: u,
            v_bc: v,
            residual_inf: 0.0,
            classification: SteadyClass::Trivial,
        }
    }

    /// `sup|u - other.u| + sup|v - other.v|`.
    pub fn distance_sum(&self, u: &[f64], v: &[f64]) -> f64 {
        self.u.sup_distance(u) + self.v.sup_distance(v)
    }
}

/// Steady problem `d1 u'' + u(a1 - b1 u - c1 v) + sigma_u u = 0`,
/// `d2 v'' + v(a2 - b2 u - c2 v) + sigma_v v = 0` with constant Dirichlet data.
#[derive(Debug, Clone, Copy)]
pub struct SteadySystem<'a> {
    pub params: &'a Params,
    pub grid: &'a Grid,
    pub u_bc: f64,
    pub v_bc: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
}

impl<'a> SteadySystem<'a> {
    pub fn new(params: &'a Params, grid: &'a Grid, (u_bc, v_bc): (f64, f64)) -> Self {
        SteadySystem {
            params,
            grid,
            u_bc,
            v_bc,
            sigma_u: 0.0,
            sigma_v: 0.0,
        }
    }

    pub fn with_sigma_u(mut self, sigma: f64) -> Self {
        self.sigma_u = sigma;
        self
    }

    pub fn with_sigma_v(mut self, sigma: f64) -> Self {
        self.sigma_v = sigma;
        self
    }

    /// Residual evaluated with [`apply_laplacian`]; independent of the Newton assembly.
    pub fn residual(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.params;
        let lu = apply_laplacian(self.grid, u, Boundary::dirichlet(self.u_bc, self.u_bc));
        let lv = apply_laplacian(self.grid, v, Boundary::dirichlet(self.v_bc, self.v_bc));
        let ru = (0..u.len())
            .map(|i| p.d1 * lu[i] + u[i] * (p.a1 + self.sigma_u - p.b1 * u[i] - p.c1 * v[i]))
            .collect();
        let rv = (0..v.len())
            .map(|i| p.d2 * lv[i] + v[i] * (p.a2 + self.sigma_v - p.b2 * u[i] - p.c2 * v[i]))
            .collect();
        (ru, rv)
    }

    pub fn residual_inf(&self, u: &[f64], v: &[f64]) -> f64 {
        let (ru, rv) = self.residual(u, v);
        ru.iter().chain(&rv).fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Interleaved residual `[ru_0, rv_0, ru_1, rv_1, ...]` for Newton.
    fn interleaved_residual(&self, z: &[f64]) -> Vec<f64> {
        let p = self.params;
        let n = self.grid.n();
        let inv = 1.0 / (self.grid.dx() * self.grid.dx());
        let mut r = vec![0.0; 2 * n];
        for i in 0..n {
            let u = z[2 * i];
            let v = z[2 * i + 1];
            let (ul, vl) = if i == 0 {
                (self.u_bc, self.v_bc)
            } else {
                (z[2 * i - 2], z[2 * i - 1])
            };
            let (ur, vr) = if i + 1 == n {
                (self.u_bc, self.v_bc)
            } else {
                (z[2 * i + 2], z[2 * i + 3])
            };
            r[2 * i] = p.d1 * (ul - 2.0 * u + ur) * inv
                + u * (p.a1 + self.sigma_u - p.b1 * u - p.c1 * v);
            r[2 * i + 1] = p.d2 * (vl - 2.0 * v + vr) * inv
                + v * (p.a2 + self.sigma_v - p.b2 * u - p.c2 * v);
        }
        r
    }

    /// Block-tridiagonal Jacobian in interleaved ordering (band 2 either side).
    fn jacobian(&self, z: &[f64]) -> BandedMatrix {
        let p = self.params;
        let n = self.grid.n();
        let inv = 1.0 / (self.grid.dx() * self.grid.dx());
        let mut j = BandedMatrix::zeros(2 * n, 2, 2);
        for i in 0..n {
            let (ru, rv) = (2 * i, 2 * i + 1);
            let u = z[ru];
            let v = z[rv];
            j.add(ru, ru, -2.0 * p.d1 * inv + p.a1 + self.sigma_u - 2.0 * p.b1 * u - p.c1 * v);
            j.add(ru, rv, -p.c1 * u);
            j.add(rv, ru, -p.b2 * v);
            j.add(rv, rv, -2.0 * p.d2 * inv + p.a2 + self.sigma_v - p.b2 * u - 2.0 * p.c2 * v);
            if i > 0 {
                j.add(ru, ru - 2, p.d1 * inv);
                j.add(rv, rv - 2, p.d2 * inv);
            }
            if i + 1 < n {
                j.add(ru, ru + 2, p.d1 * inv);
                j.add(rv, rv + 2, p.d2 * inv);
            }
        }
        j
    }

    /// Damped Newton from `(u0, v0)`.
    pub fn solve(&self, u0: &[f64], v0: &[f64]) -> Result<SteadyPair> {
        let n = self.grid.n();
        if u0.len() != n || v0.len() != n {
            return Err(Error::InvalidInput("initial guess length does not match grid".into()));
        }
        if !u0.iter().chain(v0).all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("initial guess is not finite".into()));
        }
        let mut z = Vec::with_capacity(2 * n);
        for i in 0..n {
            z.push(u0[i]);
            z.push(v0[i]);
        }
        let z = damped_newton(
            z,
            |z| self.interleaved_residual(z),
            |z, r| self.jacobian(z).solve(r),
            "steady-state Newton",
        )?;
        let u: Field = z.iter().step_by(2).copied().collect::<Vec<_>>().into();
        let v: Field = z.iter().skip(1).step_by(2).copied().collect::<Vec<_>>().into();
        let min = u.min().min(v.min());
        if min < -NEGATIVITY_TOL {
            return Err(Error::NegativeSteadyState { min });
        }
        let residual_inf = self.residual_inf(&u, &v);
        let classification = self.classify(&u, &v);
        Ok(SteadyPair {
            u,
            v,
            u_bc: self.u_bc,
            v_bc: self.v_bc,
            residual_inf,
            classification,
        })
    }

    fn classify(&self, u: &[f64], v: &[f64]) -> SteadyClass {
        let p = self.params;
        let (su, sv) = (p.cap_u(), p.cap_v());
        let sup = |f: &[f64], c: f64| f.iter().fold(0.0f64, |m, x| m.max((x - c).abs()));
        let zero = sup(u, 0.0) < 1e-8 * su && sup(v, 0.0) < 1e-8 * sv;
        let boundary_state = sup(u, self.u_bc) < 1e-8 * su && sup(v, self.v_bc) < 1e-8 * sv;
        if zero || boundary_state {
            return SteadyClass::Trivial;
        }
        let ku = self.u_bc * (p.a1 + self.sigma_u - p.b1 * self.u_bc - p.c1 * self.v_bc);
        let kv = self.v_bc * (p.a2 + self.sigma_v - p.b2 * self.u_bc - p.c2 * self.v_bc);
        let scale = p.a1.max(p.a2) * su.max(sv);
        if ku.abs().max(kv.abs()) <= 1e-12 * scale {
            SteadyClass::Barrier
        } else {
            SteadyClass::Other
        }
    }
}

/// Newton with backtracking on the Euclidean residual norm (halving, up to 30 times).
fn damped_newton(
    mut z: Vec<f64>,
    residual: impl Fn(&[f64]) -> Vec<f64>,
    solve_jacobian: impl Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
    what: &'static str,
) -> Result<Vec<f64>> {
    let norm2 = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let inf = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut r = residual(&z);
    for _ in 0..NEWTON_MAX_ITER {
        if inf(&r) < NEWTON_TOL {
            return Ok(z);
        }
        let delta = solve_jacobian(&z, &r)?;
        let base = norm2(&r);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| a - step * d).collect();
            let rt = residual(&trial);
            let nt = norm2(&rt);
            if nt.is_finite() && nt <= (1.0 - 1e-4 * step) * base {
                accepted = Some((trial, rt));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((zt, rt)) => {
                z = zt;
                r = rt;
            }
            None => {
                // a full Newton step that cannot reduce the norm at roundoff level still counts
                if inf(&r) < 10.0 * NEWTON_TOL {
                    return Ok(z);
                }
                return Err(Error::NotConverged {
                    what,
                    iterations: 0,
                    residual: inf(&r),
                });
            }
        }
    }
    if inf(&r) < NEWTON_TOL {
        return Ok(z);
    }
    Err(Error::NotConverged {
        what,
        iterations: NEWTON_MAX_ITER,
        residual: inf(&r),
    })
}

/// Positive solution of `d theta'' + theta (a - theta) = 0`, `theta = 0` at both ends.
///
/// Returns the zero field when `a <= lambda1 d` (with the discrete `lambda1`
/// of this grid), where zero is the only nonnegative solution.
pub fn solve_logistic_theta(p: &Params, grid: &Grid) -> Result<Field> {
    if !p.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let (a, d) = (p.a1, p.d1);
    let lambda1 = grid.closed_form_lambda1();
    if a <= lambda1 * d {
        return Ok(grid.constant(0.0));
    }
    let lap = laplacian_matrix(grid, false);
    let residual = |th: &[f64]| -> Vec<f64> {
        let l = lap.mul_vec(th);
        th.iter().zip(&l).map(|(t, lt)| d * lt + t * (a - t)).collect()
    };
    let solve_jac = |th: &[f64], r: &[f64]| -> Result<Vec<f64>> {
        let diag = lap
            .diag
            .iter()
            .zip(th)
            .map(|(l, t)| d * l + a - 2.0 * t)
            .collect();
        let lower = lap.lower.iter().map(|l| d * l).collect();
        let upper = lap.upper.iter().map(|l| d * l).collect();
        Ok(Tridiagonal::new(lower, diag, upper).factorize()?.solve(r))
    };
    let length = grid.length();
    // second guess: one-mode Galerkin amplitude (a - lambda1 d) * 3 pi / 8
    let amplitudes = [a / 2.0, (a - lambda1 * d) * 3.0 * PI / 8.0];
    let mut last_err = None;
    for kappa in amplitudes {
        let guess = grid.sample(|x| kappa * (PI * x / length).sin());
        match damped_newton(guess.0, residual, solve_jac, "logistic Newton") {
            Ok(theta) => {
                let theta = Field(theta);
                if theta.min() > 0.0 && theta.max() < a {
                    return Ok(theta);
                }
                last_err = Some(Error::NotConverged {
                    what: "logistic Newton (wrong branch)",
                    iterations: NEWTON_MAX_ITER,
                    residual: 0.0,
                });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Heterogeneous coexistence state `(kappa_u theta, kappa_v theta)`.
pub fn coexistence_target(p: &Params, grid: &Grid, theta: &[f64]) -> Result<SteadyPair> {
    if !p.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    if !p.coexistence_admissible() {
        return Err(Error::CoexistenceInadmissible);
    }
    let det = p.b1 * p.c2 - p.c1 * p.b2;
    if det <= 0.0 {
        return Err(Error::DegenerateDenominator(det));
    }
    let (ku, kv) = coexistence_coefficients(p);
    let u: Field = theta.iter().map(|t| ku * t).collect::<Vec<_>>().into();
    let v: Field = theta.iter().map(|t| kv * t).collect::<Vec<_>>().into();
    let sys = SteadySystem::new(p, grid, (0.0, 0.0));
    let residual_inf = sys.residual_inf(&u, &v);
    if residual_inf > 1e-8 {
        return Err(Error::NotConverged {
            what: "coexistence target residual check",
            iterations: 0,
            residual: residual_inf,
        });
    }
    Ok(SteadyPair {
        u,
        v,
        u_bc: 0.0,
        v_bc: 0.0,
        residual_inf,
        classification: SteadyClass::Target,
    })
}

/// `((c2 - c1) / D, (b1 - b2) / D)` with `D = b1 c2 - c1 b2`.
pub fn coexistence_coefficients(p: &Params) -> (f64, f64) {
    let det = p.b1 * p.c2 - p.c1 * p.b2;
    ((p.c2 - p.c1) / det, (p.b1 - p.b2) / det)
}

/// Convenience: logistic profile followed by [`coexistence_target`].
pub fn heterogeneous_target(p: &Params, grid: &Grid) -> Result<SteadyPair> {
    let theta = solve_logistic_theta(p, grid)?;
    coexistence_target(p, grid, &theta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousCoexistence {
    pub u_star: f64,
    pub v_star: f64,
    /// `0 < u* < a1/b1`
    pub u_admissible: bool,
    /// `0 < v* < a2/c2`
    pub v_admissible: bool,
}

pub fn homogeneous_coexistence(p: &Params) -> Result<HomogeneousCoexistence> {
    let det = p.competition_det();
    let scale = (p.b1 * p.c2).abs().max((p.b2 * p.c1).abs());
    if det == 0.0 || det.abs() <= 1e-14 * scale {
        return Err(Error::DegenerateDenominator(det));
    }
    let u_star = (p.a1 * p.c2 - p.a2 * p.c1) / det;
    let v_star = (p.a2 * p.b1 - p.a1 * p.b2) / det;
    Ok(HomogeneousCoexistence {
        u_star,
        v_star,
        u_admissible: 0.0 < u_star && u_star < p.cap_u(),
        v_admissible: 0.0 < v_star && v_star < p.cap_v(),
    })
}

/// Solves the coupled steady system with constant Dirichlet data and an
/// interior potential `sigma` on the `u`-equation.
pub fn solve_steady_system(
    p: &Params,
    grid: &Grid,
    bc: (f64, f64),
    init: (&[f64], &[f64]),
    sigma: f64,
) -> Result<SteadyPair> {
    SteadySystem::new(p, grid, bc).with_sigma_u(sigma).solve(init.0, init.1)
}

/// Initial guess aimed at the nontrivial branch: `u` dips by half its boundary
/// value in the middle, `v` is a sine hump of height `0.9 a2/c2`.
pub fn barrier_guess(p: &Params, grid: &Grid, u_bc: f64) -> (Field, Field) {
    let l = grid.length();
    let u = grid.sample(|x| u_bc * (1.0 - 0.5 * (PI * x / l).sin()));
    let v = grid.sample(|x| 0.9 * p.cap_v() * (PI * x / l).sin());
    (u, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub n_starts: usize,
    /// Distinct admissible states, sorted canonically.
    pub distinct: Vec<SteadyPair>,
    pub converged: usize,
    pub diverged: usize,
    /// Starts that converged to a state with negative entries.
    pub negative: usize,
}

/// Multi-start Newton probe of the steady system.
///
/// Starts are smooth random profiles inside the carrying-capacity box; each
/// start uses its own ChaCha stream so results do not depend on scheduling.
pub fn probe_uniqueness(
    p: &Params,
    grid: &Grid,
    bc: (f64, f64),
    sigma: f64,
    n_starts: usize,
    seed: u64,
) -> Result<UniquenessReport> {
    if n_starts == 0 {
        return Err(Error::InvalidInput("probe_uniqueness needs at least one start".into()));
    }
    let sys = SteadySystem::new(p, grid, bc).with_sigma_u(sigma);
    let outcomes: Vec<Result<SteadyPair>> = (0..n_starts)
        .into_par_iter()
        .map(|k| {
            let (u0, v0) = random_guess(p, grid, seed, k as u64);
            sys.solve(&u0, &v0)
        })
        .collect();

    let mut report = UniquenessReport {
        n_starts,
        distinct: Vec::new(),
        converged: 0,
        diverged: 0,
        negative: 0,
    };
    let (tu, tv) = (DEDUP_RTOL * p.cap_u(), DEDUP_RTOL * p.cap_v());
    for outcome in outcomes {
        match outcome {
            Ok(pair) => {
                report.converged += 1;
                let seen = report
                    .distinct
                    .iter()
                    .any(|q| q.u.sup_distance(&pair.u) <= tu && q.v.sup_distance(&pair.v) <= tv);
                if !seen {
                    report.distinct.push(pair);
                }
            }
            Err(Error::NegativeSteadyState { .. }) => report.negative += 1,
            Err(_) => report.diverged += 1,
        }
    }
    report.distinct.sort_by(canonical_cmp);
    Ok(report)
}

fn canonical_cmp(a: &SteadyPair, b: &SteadyPair) -> std::cmp::Ordering {
    a.u.iter()
        .chain(a.v.iter())
        .zip(b.u.iter().chain(b.v.iter()))
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn random_guess(p: &Params, grid: &Grid, seed: u64, stream: u64) -> (Field, Field) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let l = grid.length();
    let mut profile = |cap: f64| {
        let base: f64 = rng.gen_range(0.0..=1.0);
        let modes: [f64; 3] = [
            rng.gen_range(-0.5..=0.5),
            rng.gen_range(-0.5..=0.5),
            rng.gen_range(-0.5..=0.5),
        ];
        grid.sample(|x| {
            let s: f64 = modes
                .iter()
                .enumerate()
                .map(|(m, c)| c * ((m + 1) as f64 * PI * x / l).sin())
                .sum();
            (cap * (base + s)).clamp(0.0, cap)
        })
    };
    let u = profile(p.cap_u());
    let v = profile(p.cap_v());
    (u, v)
}
