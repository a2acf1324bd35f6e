//! Minimization, adiabatic continuation and the iterative compression loop.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, EvolutionKind};
use crate::circuit::Ansatz;
use crate::error::{Error, Result};
use crate::loss::{LossContext, LossKind};
use crate::par::{self, Execution};
use crate::pauli::PauliSum;
use crate::seed;
use crate::state::{fidelity, StateVector};

/// Something [`minimize`] can work on.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl Objective for LossContext {
    fn dim(&self) -> usize {
        self.num_params()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.loss(x)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        LossContext::gradient(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    GradientDescent,
    QuasiNewton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Stop once `||grad||_inf < grad_tol`.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub method: Method,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo_c1: f64,
    /// Backtracking contraction factor.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Initial step for gradient descent.
    pub learning_rate: f64,
    /// Cap on `||step||_inf` per iteration.
    pub max_step: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            grad_tol: 1e-8,
            max_iters: 500,
            method: Method::QuasiNewton,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 50,
            learning_rate: 0.5,
            max_step: 1.0,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::invalid("grad_tol must be > 0"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0)
            || !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0)
        {
            return Err(Error::invalid("line-search constants must lie in (0, 1)"));
        }
        if !(self.max_step > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::invalid("max_step and learning_rate must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIters,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub theta: Vec<f64>,
    pub loss: f64,
    /// `||grad||_inf` at `theta`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: Status,
    /// Every accepted iterate, starting with the initial point.
    pub trajectory: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `obj` from `x0`. Quasi-Newton keeps a BFGS inverse-Hessian
/// approximation, skipping updates with `s^T y <= 0` so it stays positive
/// definite. Each line search tries the full step and the minimizer of the
/// quadratic through `f(x)`, `f'(x)` and `f(x + p)`, keeping the better one
/// that passes the Armijo test, and backtracks otherwise.
pub fn minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    opts: &OptimizerOptions,
) -> Result<Minimum> {
    opts.validate()?;
    if x0.len() != obj.dim() {
        return Err(Error::LengthMismatch {
            expected: obj.dim(),
            got: x0.len(),
        });
    }
    let m = x0.len();
    let mut x = x0.to_vec();
    let mut f = obj.value(&x)?;
    let mut g = obj.gradient(&x)?;
    let mut trajectory = vec![x.clone()];
    let mut losses = vec![f];
    let mut hinv = DMatrix::<f64>::identity(m, m);
    let mut lr = opts.learning_rate;
    let mut status = Status::MaxIters;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        if inf_norm(&g) < opts.grad_tol {
            status = Status::Converged;
            break;
        }
        let gv = DVector::from_column_slice(&g);
        let mut p: Vec<f64> = match opts.method {
            Method::QuasiNewton => (-(&hinv * &gv)).iter().copied().collect(),
            Method::GradientDescent => g.iter().map(|x| -lr * x).collect(),
        };
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            // not a descent direction; fall back to steepest descent
            hinv = DMatrix::identity(m, m);
            p = g.iter().map(|x| -x).collect();
            slope = dot(&g, &p);
        }
        let pn = inf_norm(&p);
        if pn > opts.max_step {
            let c = opts.max_step / pn;
            p.iter_mut().for_each(|x| *x *= c);
            slope *= c;
        }
        let trial = |alpha: f64| -> Result<(Vec<f64>, f64)> {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
            let fv = obj.value(&xn)?;
            Ok((xn, fv))
        };
        let armijo = |alpha: f64, fv: f64| fv <= f + opts.armijo_c1 * alpha * slope;
        let mut accepted: Option<(f64, Vec<f64>, f64, Option<Vec<f64>>)> = None;
        // below this predicted decrease, loss values are rounding noise
        let band = 64.0 * f64::EPSILON * f.abs().max(1.0);
        if -slope < band {
            let mut alpha = 1.0;
            for _ in 0..10 {
                let (xn, fv) = trial(alpha)?;
                let gn = obj.gradient(&xn)?;
                if inf_norm(&gn) < inf_norm(&g) && fv <= f + band {
                    accepted = Some((alpha, xn, fv, Some(gn)));
                    break;
                }
                alpha *= 0.5;
            }
        } else {
            let (x1, f1) = trial(1.0)?;
            let curv = f1 - f - slope;
            if curv > 0.0 {
                let aq = -slope / (2.0 * curv);
                if aq.is_finite()
                    && aq > 1e-3
                    && (aq - 1.0).abs() > 1e-12
                    && aq * pn <= 4.0 * opts.max_step.max(pn)
                {
                    let (xq, fq) = trial(aq)?;
                    if armijo(aq, fq) {
                        accepted = Some((aq, xq, fq, None));
                    }
                }
            }
            if armijo(1.0, f1) && accepted.as_ref().is_none_or(|a| f1 < a.2) {
                accepted = Some((1.0, x1, f1, None));
            }
            if accepted.is_none() {
                let mut alpha = 1.0;
                let mut prev_f = f1;
                for _ in 0..opts.max_backtracks {
                    // safeguarded quadratic interpolation
                    let denom = 2.0 * (prev_f - f - slope * alpha);
                    let mut next = if denom > 0.0 {
                        -slope * alpha * alpha / denom
                    } else {
                        alpha * opts.backtrack
                    };
                    next = next.clamp(0.1 * alpha, opts.backtrack * alpha);
                    alpha = next;
                    let (xn, fv) = trial(alpha)?;
                    if armijo(alpha, fv) {
                        accepted = Some((alpha, xn, fv, None));
                        break;
                    }
                    prev_f = fv;
                }
            }
        }
        let Some((alpha, xn, fnew, gn)) = accepted else {
            if opts.method == Method::QuasiNewton && hinv != DMatrix::identity(m, m) {
                hinv = DMatrix::identity(m, m);
                continue;
            }
            status = Status::LineSearchFailed;
            break;
        };
        let gn = match gn {
            Some(gn) => gn,
            None => obj.gradient(&xn)?,
        };
        match opts.method {
            Method::QuasiNewton => {
                let s = DVector::from_iterator(m, p.iter().map(|v| alpha * v));
                let y = DVector::from_iterator(m, gn.iter().zip(&g).map(|(a, b)| a - b));
                let sy = s.dot(&y);
                if sy > 1e-14 * s.norm() * y.norm() && sy > 0.0 {
                    let rho = 1.0 / sy;
                    let hy = &hinv * &y;
                    let yhy = y.dot(&hy);
                    // H+ = H - rho (H y s^T + s y^T H) + (rho^2 y^T H y + rho) s s^T
                    hinv -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
                    hinv += (&s * s.transpose()) * (rho * rho * yhy + rho);
                }
            }
            Method::GradientDescent => {
                lr = if alpha == 1.0 { lr * 1.5 } else { lr * alpha };
            }
        }
        x = xn;
        f = fnew;
        g = gn;
        iterations += 1;
        trajectory.push(x.clone());
        losses.push(f);
    }
    if status == Status::MaxIters && inf_norm(&g) < opts.grad_tol {
        status = Status::Converged;
    }
    Ok(Minimum {
        grad_norm: inf_norm(&g),
        theta: x,
        loss: f,
        iterations,
        status,
        trajectory,
        losses,
    })
}

/// `x^T A x / 2 - b^T x` for a symmetric positive-definite `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let x = DVector::from_column_slice(x);
        Ok(0.5 * x.dot(&(&self.a * &x)) - self.b.dot(&x))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = DVector::from_column_slice(x);
        Ok((&self.a * x - &self.b).iter().copied().collect())
    }
}

/// Two-parameter double well `w (x^2 - 1)^2 + y^2 + tilt x`. For small
/// positive `tilt` the left well (`x ~ -1`) is lower, for negative `tilt` the
/// right one.
#[derive(Debug, Clone, Copy)]
pub struct DoubleWell {
    pub wall: f64,
    pub tilt: f64,
}

impl Objective for DoubleWell {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.wall * (x[0] * x[0] - 1.0).powi(2) + x[1] * x[1] + self.tilt * x[0])
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![
            4.0 * self.wall * x[0] * (x[0] * x[0] - 1.0) + self.tilt,
            2.0 * x[1],
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub dt: f64,
    pub theta: Vec<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub converged: bool,
    /// `||theta_A(dt) - theta*||_inf`.
    pub shift_inf: f64,
    /// `||theta_A(dt) - theta*||_2`.
    pub shift_l2: f64,
    pub beta_a: Option<f64>,
    pub continuity_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticTrack {
    pub samples: Vec<TrackSample>,
    /// Set when a grid point failed to converge and the track stopped there.
    pub halted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackOptions {
    pub dt_max: f64,
    pub n_steps: usize,
    /// Largest `||theta_A(dt_j) - theta_A(dt_{j-1})||_inf` still counted as continuous.
    pub jump_guard: f64,
    pub compute_beta: bool,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions {
            dt_max: 0.2,
            n_steps: 50,
            jump_guard: 0.3,
            compute_beta: true,
        }
    }
}

/// Follows the minimum from `theta*` (the context's center, at `dt = 0`) as
/// the time step grows on a uniform grid, warm-starting every minimization
/// from the previous point.
pub fn adiabatic_track(
    ctx: &LossContext,
    track: &TrackOptions,
    opts: &OptimizerOptions,
) -> Result<AdiabaticTrack> {
    if !(track.dt_max >= 0.0) || (track.dt_max > 0.0 && track.n_steps == 0) {
        return Err(Error::invalid("need dt_max >= 0 and n_steps >= 1"));
    }
    let mut local = ctx.clone();
    local.set_dt(0.0)?;
    let star = ctx.theta_star().to_vec();
    let g0 = local.gradient(&star)?;
    if inf_norm(&g0) >= opts.grad_tol {
        return Err(Error::invalid(format!(
            "theta* is not a minimum at dt = 0 (|grad|_inf = {:e})",
            inf_norm(&g0)
        )));
    }
    let shift = |theta: &[f64]| {
        let d: Vec<f64> = theta.iter().zip(&star).map(|(a, b)| a - b).collect();
        (inf_norm(&d), dot(&d, &d).sqrt())
    };
    let mut samples = vec![TrackSample {
        dt: 0.0,
        theta: star.clone(),
        loss: local.loss(&star)?,
        grad_norm: inf_norm(&g0),
        converged: true,
        shift_inf: 0.0,
        shift_l2: 0.0,
        beta_a: None,
        continuity_ok: true,
    }];
    let mut halted = false;
    let steps = if track.dt_max == 0.0 {
        0
    } else {
        track.n_steps
    };
    for j in 1..=steps {
        let dt = track.dt_max * j as f64 / steps as f64;
        local.set_dt(dt)?;
        let prev = samples.last().expect("nonempty").theta.clone();
        let res = minimize(&local, &prev, opts)?;
        let (si, s2) = shift(&res.theta);
        let jump = inf_norm(
            &res.theta
                .iter()
                .zip(&prev)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        let converged = res.converged();
        samples.push(TrackSample {
            dt,
            theta: res.theta,
            loss: res.loss,
            grad_norm: res.grad_norm,
            converged,
            shift_inf: si,
            shift_l2: s2,
            beta_a: None,
            continuity_ok: jump < track.jump_guard,
        });
        if !converged {
            halted = true;
            break;
        }
    }
    let mut out = AdiabaticTrack { samples, halted };
    if track.compute_beta {
        for i in 0..out.samples.len() {
            out.samples[i].beta_a = beta_a(ctx, &out, i)?;
        }
    }
    Ok(out)
}

/// `beta_A = v^T (Hess L) v / ||v||^2` at sample `index`, with `v` the
/// finite-difference velocity of the track (central inside, one-sided at
/// the ends). `None` when the track does not move.
pub fn beta_a(ctx: &LossContext, track: &AdiabaticTrack, index: usize) -> Result<Option<f64>> {
    let s = &track.samples;
    if index >= s.len() {
        return Err(Error::invalid(format!("sample {index} out of range")));
    }
    if s.len() < 2 {
        return Ok(None);
    }
    let lo = index.saturating_sub(1);
    let hi = (index + 1).min(s.len() - 1);
    let h = s[hi].dt - s[lo].dt;
    let v: Vec<f64> = s[hi]
        .theta
        .iter()
        .zip(&s[lo].theta)
        .map(|(a, b)| (a - b) / h)
        .collect();
    let vn2 = dot(&v, &v);
    if vn2.sqrt() < 1e-10 {
        return Ok(None);
    }
    let mut local = ctx.clone();
    local.set_dt(s[index].dt)?;
    let hess = local.hessian(&s[index].theta)?;
    let vv = DVector::from_column_slice(&v);
    Ok(Some(vv.dot(&(&hess * &vv)) / vn2))
}

/// The running bound `int_0^dt 2 sqrt(M) lambda / beta_A(tau) dtau` at each
/// track sample (trapezoid rule). `None` once a non-positive or missing
/// curvature has been crossed.
pub fn cumulative_shift_bounds(track: &AdiabaticTrack, m: usize, lambda: f64) -> Vec<Option<f64>> {
    let s = &track.samples;
    let rate = |i: usize| -> Option<f64> {
        let b = s[i].beta_a?;
        bounds::adiabatic_shift_bound(m, lambda, 1.0, b, EvolutionKind::RealTime)
            .ok()
            .flatten()
    };
    let mut out = Vec::with_capacity(s.len());
    let mut acc = Some(0.0);
    for i in 0..s.len() {
        if i > 0 {
            acc = match (acc, rate(i - 1), rate(i)) {
                (Some(a), Some(r0), Some(r1)) => {
                    Some(a + 0.5 * (r0 + r1) * (s[i].dt - s[i - 1].dt))
                }
                _ => None,
            };
        }
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoundMinimum {
    pub start: Vec<f64>,
    pub theta: Vec<f64>,
    pub loss: f64,
    pub converged: bool,
    /// `||theta - theta_adiabatic||_inf`, wrapped by the parameter period when known.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    pub adiabatic: FoundMinimum,
    pub minima: Vec<FoundMinimum>,
    /// Index into `minima` of the best minimum that counts as a jump.
    pub jump: Option<usize>,
}

impl JumpReport {
    pub fn jumped(&self) -> bool {
        self.jump.is_some()
    }

    pub fn jump_distance(&self) -> Option<f64> {
        self.jump.map(|j| self.minima[j].distance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpOptions {
    pub n_restarts: usize,
    pub seed: u64,
    pub jump_threshold: f64,
    pub loss_margin: f64,
    /// Every parameter is periodic with this period (distances are wrapped).
    pub period: Option<f64>,
}

fn wrapped_distance(a: &[f64], b: &[f64], period: Option<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            match period {
                Some(p) => (d - p * (d / p).round()).abs(),
                None => d.abs(),
            }
        })
        .fold(0.0, f64::max)
}

/// Minimizes from `adiabatic_start` and from `n_restarts` uniform points in
/// `[-pi, pi]^M`. A jump is reported when some minimum lies farther than
/// `jump_threshold` (infinity norm) from the adiabatic one and is lower by
/// more than `loss_margin`; the lowest such minimum is selected.
pub fn detect_minima_jump<O: Objective + ?Sized>(
    obj: &O,
    adiabatic_start: &[f64],
    jump: &JumpOptions,
    opts: &OptimizerOptions,
    exec: Execution,
) -> Result<JumpReport> {
    if jump.n_restarts == 0 {
        return Err(Error::invalid("need at least one restart"));
    }
    let m = obj.dim();
    let adi = minimize(obj, adiabatic_start, opts)?;
    let adiabatic = FoundMinimum {
        start: adiabatic_start.to_vec(),
        theta: adi.theta.clone(),
        loss: adi.loss,
        converged: adi.converged(),
        distance: 0.0,
    };
    let found = par::map_indices(exec, jump.n_restarts, |i| -> Result<FoundMinimum> {
        let mut rng = seed::rng(seed::derive(jump.seed, i as u64));
        let start: Vec<f64> = (0..m)
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let res = minimize(obj, &start, opts)?;
        Ok(FoundMinimum {
            distance: wrapped_distance(&res.theta, &adi.theta, jump.period),
            converged: res.converged(),
            start,
            theta: res.theta,
            loss: res.loss,
        })
    });
    let minima = found.into_iter().collect::<Result<Vec<_>>>()?;
    let jump_idx = minima
        .iter()
        .enumerate()
        .filter(|(_, f)| {
            f.distance > jump.jump_threshold && f.loss < adiabatic.loss - jump.loss_margin
        })
        .min_by(|a, b| a.1.loss.total_cmp(&b.1.loss))
        .map(|(i, _)| i);
    Ok(JumpReport {
        adiabatic,
        minima,
        jump: jump_idx,
    })
}

/// Period shared by every parameter of `ansatz`: `pi` when all rotation
/// scales are `+-1` (a shift by `pi` only flips global signs).
pub fn parameter_period(ansatz: &Ansatz) -> Option<f64> {
    (0..ansatz.num_rotations())
        .all(|k| ansatz.rotation(k).2.abs() == 1.0)
        .then_some(std::f64::consts::PI)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// One compression step per listed time step.
    Fixed(Vec<f64>),
    /// Halve the step after a failure, double it (up to `dt_max`) after a
    /// success, until `t_final` is reached.
    Adaptive {
        t_final: f64,
        dt_init: f64,
        dt_max: f64,
        dt_min: f64,
        threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressOptions {
    /// Initial jitter half-width around the previous optimum.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for CompressOptions {
    fn default() -> Self {
        CompressOptions {
            jitter: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionRecord {
    pub k: usize,
    pub dt: f64,
    pub t: f64,
    pub theta: Vec<f64>,
    pub final_loss: f64,
    /// `|<psi_exact(t)|U(theta_k)|psi0>|^2`.
    pub cumulative_fidelity: f64,
    pub iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionLog {
    pub records: Vec<CompressionRecord>,
    /// False when an adaptive run gave up after its step underflowed.
    pub completed: bool,
}

/// Iterative compression of `exp(-iHt)|psi0>` into `U(theta)|psi0>`.
/// Training starts from `theta = 0`; every later step starts from the
/// previous optimum (optionally jittered).
pub fn compress_run(
    ansatz: &Ansatz,
    h: &PauliSum,
    psi0: &StateVector,
    schedule: &Schedule,
    opts: &OptimizerOptions,
    copts: &CompressOptions,
) -> Result<CompressionLog> {
    let mut ctx = LossContext::new(ansatz.clone(), h.clone(), psi0.clone(), LossKind::RealTime)?;
    let mut theta = vec![0.0; ansatz.num_params()];
    let mut records = Vec::new();
    let mut t = 0.0;
    let mut exact = psi0.clone();
    let mut rng = seed::rng(copts.seed);
    let mut step = |dt: f64,
                    theta: &[f64],
                    rng: &mut rand_chacha::ChaCha8Rng|
     -> Result<(Vec<f64>, Minimum)> {
        ctx.set_theta_star(theta.to_vec())?;
        ctx.set_dt(dt)?;
        let start: Vec<f64> = if copts.jitter > 0.0 {
            theta
                .iter()
                .map(|x| x + rng.random_range(-copts.jitter..=copts.jitter))
                .collect()
        } else {
            theta.to_vec()
        };
        let res = minimize(&ctx, &start, opts)?;
        Ok((res.theta.clone(), res))
    };
    let record = |k: usize,
                  dt: f64,
                  t: f64,
                  exact: &StateVector,
                  res: &Minimum|
     -> Result<CompressionRecord> {
        let approx = ansatz.apply(&res.theta, psi0)?;
        Ok(CompressionRecord {
            k,
            dt,
            t,
            theta: res.theta.clone(),
            final_loss: res.loss,
            cumulative_fidelity: fidelity(exact, &approx)?,
            iters: res.iterations,
        })
    };
    match schedule {
        Schedule::Fixed(dts) => {
            for (k, &dt) in dts.iter().enumerate() {
                let (next, res) = step(dt, &theta, &mut rng)?;
                t += dt;
                exact = exact.evolve_real(h, dt)?;
                records.push(record(k + 1, dt, t, &exact, &res)?);
                theta = next;
            }
            Ok(CompressionLog {
                records,
                completed: true,
            })
        }
        Schedule::Adaptive {
            t_final,
            dt_init,
            dt_max,
            dt_min,
            threshold,
        } => {
            if !(*dt_init > 0.0 && *dt_max >= *dt_init && *dt_min > 0.0 && *t_final >= 0.0) {
                return Err(Error::invalid(
                    "adaptive schedule needs 0 < dt_min, 0 < dt_init <= dt_max, t_final >= 0",
                ));
            }
            let mut dt = *dt_init;
            let mut k = 0;
            while t < t_final - 1e-12 {
                let this = dt.min(t_final - t);
                let (next, res) = step(this, &theta, &mut rng)?;
                if res.loss > *threshold {
                    dt = this / 2.0;
                    if dt < *dt_min {
                        return Ok(CompressionLog {
                            records,
                            completed: false,
                        });
                    }
                    continue;
                }
                k += 1;
                t += this;
                exact = exact.evolve_real(h, this)?;
                records.push(record(k, this, t, &exact, &res)?);
                theta = next;
                dt = (2.0 * this).min(*dt_max);
            }
            Ok(CompressionLog {
                records,
                completed: true,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_hva;
    use approx::assert_abs_diff_eq;

    fn x_ctx(h: &str) -> LossContext {
        let a = Ansatz::parse("ROT 0 X").unwrap();
        let h: PauliSum = h.parse().unwrap();
        LossContext::new(a, h, StateVector::zero(1).unwrap(), LossKind::RealTime).unwrap()
    }

    #[test]
    fn already_at_minimum() {
        let ctx = x_ctx("0 X");
        let res = minimize(&ctx, &[0.0], &OptimizerOptions::default()).unwrap();
        assert_eq!(res.iterations, 0);
        assert!(res.converged());
    }

    #[test]
    fn single_qubit_sin2() {
        let ctx = x_ctx("0 X");
        for method in [Method::QuasiNewton, Method::GradientDescent] {
            let opts = OptimizerOptions {
                method,
                max_iters: 2000,
                ..Default::default()
            };
            let res = minimize(&ctx, &[0.3], &opts).unwrap();
            assert!(res.converged(), "{method:?}");
            assert!(res.loss <= 1e-12);
            assert!(res.theta[0].abs() < 1e-6);
            assert!(res
                .losses
                .windows(2)
                .all(|w| w[1] <= w[0] + 64.0 * f64::EPSILON));
        }
    }

    #[test]
    fn quadratic_finite_termination() {
        for m in [2usize, 5, 10] {
            let mut rng = seed::rng(m as u64);
            let q = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
            let a = &q * q.transpose() + DMatrix::identity(m, m) * 0.5;
            let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let obj = Quadratic { a, b };
            let opts = OptimizerOptions {
                max_step: f64::INFINITY,
                grad_tol: 1e-8,
                ..Default::default()
            };
            let res = minimize(&obj, &vec![0.0; m], &opts).unwrap();
            assert!(res.converged());
            assert!(
                res.iterations <= m + 2,
                "m = {m}: {} iterations",
                res.iterations
            );
        }
    }

    #[test]
    fn stationary_track() {
        // H = Z commutes with nothing that moves |0>: loss is dt-independent
        let a = Ansatz::parse("ROT 0 X").unwrap();
        let h: PauliSum = "1 Z".parse().unwrap();
        let ctx =
            LossContext::new(a, h, StateVector::zero(1).unwrap(), LossKind::RealTime).unwrap();
        let tr = adiabatic_track(
            &ctx,
            &TrackOptions {
                dt_max: 0.2,
                n_steps: 5,
                ..Default::default()
            },
            &Default::default(),
        )
        .unwrap();
        assert!(tr
            .samples
            .iter()
            .all(|s| s.theta == vec![0.0] && s.beta_a.is_none()));
        let single = adiabatic_track(
            &ctx,
            &TrackOptions {
                dt_max: 0.0,
                n_steps: 5,
                ..Default::default()
            },
            &Default::default(),
        )
        .unwrap();
        assert_eq!(single.samples.len(), 1);
    }

    #[test]
    fn one_qubit_track_and_beta() {
        let ctx = x_ctx("1 X");
        let tr = adiabatic_track(
            &ctx,
            &TrackOptions {
                dt_max: 0.2,
                n_steps: 10,
                ..Default::default()
            },
            &Default::default(),
        )
        .unwrap();
        for s in &tr.samples {
            assert!(s.grad_norm < 1e-8);
            assert_abs_diff_eq!(s.theta[0], s.dt, epsilon = 1e-7);
            assert_abs_diff_eq!(s.beta_a.unwrap(), 2.0, epsilon = 1e-6);
            assert!(s.continuity_ok);
        }
        let b = cumulative_shift_bounds(&tr, 1, 1.0);
        for (s, bound) in tr.samples.iter().zip(b) {
            assert!(s.shift_l2 <= bound.unwrap() + 1e-9);
        }
    }

    fn grid_scan(w: &DoubleWell, n: usize) -> (f64, f64) {
        let pi = std::f64::consts::PI;
        let mut best = (0.0, f64::INFINITY);
        for i in 0..n {
            let x = -pi + 2.0 * pi * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let y = -pi + 2.0 * pi * j as f64 / (n - 1) as f64;
                let v = w.value(&[x, y]).unwrap();
                if v < best.1 {
                    best = (x, v);
                }
            }
        }
        best
    }

    #[test]
    fn double_well_jump_matches_grid_scan() {
        let jopts = JumpOptions {
            n_restarts: 16,
            seed: 3,
            jump_threshold: 0.5,
            loss_margin: 1e-3,
            period: None,
        };
        for tilt in [0.3, 0.1, 0.0, -0.1, -0.3] {
            let w = DoubleWell { wall: 1.0, tilt };
            let rep = detect_minima_jump(
                &w,
                &[-1.0, 0.0],
                &jopts,
                &Default::default(),
                Execution::Sequential,
            )
            .unwrap();
            let (gx, gv) = grid_scan(&w, 401);
            let oracle_jump = gx > 0.0 && gv < rep.adiabatic.loss - jopts.loss_margin;
            assert_eq!(rep.jumped(), oracle_jump, "tilt {tilt}");
            if let Some(j) = rep.jump {
                assert!((rep.minima[j].theta[0] - gx).abs() < 2.0 * std::f64::consts::PI / 400.0);
            }
        }
    }

    #[test]
    fn no_jump_at_zero_dt() {
        let h = PauliSum::xx_chain(3).unwrap();
        let a = build_hva(&h, 1).unwrap();
        let ctx = LossContext::new(
            a.clone(),
            h,
            StateVector::zero(3).unwrap(),
            LossKind::RealTime,
        )
        .unwrap();
        let jopts = JumpOptions {
            n_restarts: 4,
            seed: 1,
            jump_threshold: 0.5,
            loss_margin: 1e-6,
            period: parameter_period(&a),
        };
        let rep = detect_minima_jump(
            &ctx,
            &[0.0, 0.0],
            &jopts,
            &Default::default(),
            Execution::Parallel,
        )
        .unwrap();
        assert!(!rep.jumped());
    }

    #[test]
    fn wrapping() {
        assert_abs_diff_eq!(
            wrapped_distance(&[3.0], &[0.0], Some(std::f64::consts::PI)),
            std::f64::consts::PI - 3.0
        );
        assert_eq!(wrapped_distance(&[3.0], &[0.0], None), 3.0);
    }

    #[test]
    fn compress_trivial_and_exact() {
        let a = Ansatz::parse("ROT 0 X").unwrap();
        let h: PauliSum = "1 X".parse().unwrap();
        let psi0 = StateVector::zero(1).unwrap();
        let log = compress_run(
            &a,
            &h,
            &psi0,
            &Schedule::Fixed(vec![0.0]),
            &Default::default(),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(log.records.len(), 1);
        assert!(log.records[0].final_loss < 1e-15);
        assert_abs_diff_eq!(log.records[0].cumulative_fidelity, 1.0, epsilon = 1e-15);

        let log = compress_run(
            &a,
            &h,
            &psi0,
            &Schedule::Fixed(vec![0.1; 10]),
            &Default::default(),
            &Default::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(log.records.last().unwrap().t, 1.0, epsilon = 1e-12);
        for r in &log.records {
            assert!(r.final_loss <= 1e-10);
            assert!(r.cumulative_fidelity >= 1.0 - 1e-8);
        }

        let adaptive = Schedule::Adaptive {
            t_final: 1.0,
            dt_init: 0.3,
            dt_max: 0.5,
            dt_min: 1e-3,
            threshold: 1e-10,
        };
        let log = compress_run(
            &a,
            &h,
            &psi0,
            &adaptive,
            &Default::default(),
            &Default::default(),
        )
        .unwrap();
        assert!(log.completed);
        assert_abs_diff_eq!(log.records.last().unwrap().t, 1.0, epsilon = 1e-12);
        assert!(log.records.iter().all(|r| r.final_loss <= 1e-10));
    }

    #[test]
    fn adaptive_gives_up_when_inexpressible() {
        // Z rotations cannot follow X dynamics from |0>
        let a = Ansatz::parse("ROT 0 Z").unwrap();
        let h: PauliSum = "1 X".parse().unwrap();
        let psi0 = StateVector::zero(1).unwrap();
        let adaptive = Schedule::Adaptive {
            t_final: 1.0,
            dt_init: 0.5,
            dt_max: 0.5,
            dt_min: 1e-2,
            threshold: 1e-10,
        };
        let log = compress_run(
            &a,
            &h,
            &psi0,
            &adaptive,
            &Default::default(),
            &Default::default(),
        )
        .unwrap();
        assert!(!log.completed);
    }
}
