//! Hypercube sampling, Monte Carlo variance, power-law fits and landscape cuts.
//!
//! Sample `i` of a run with master seed `s` is drawn from its own ChaCha8
//! stream seeded with `seed::derive(s, i)`, so results do not depend on how
//! the samples are spread across threads. All reductions use
//! [`par::pairwise_sum`].

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossContext;
use crate::par::{self, pairwise_sum};
use crate::seed;

/// `V(center, r)`: the box of half-width `r` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypercubeRegion {
    pub center: Vec<f64>,
    pub r: f64,
}

impl HypercubeRegion {
    pub fn new(center: Vec<f64>, r: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::invalid(format!(
                "half-width must be finite and >= 0, got {r}"
            )));
        }
        Ok(HypercubeRegion { center, r })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// The `index`-th sample of the stream seeded by `seed_`.
    pub fn sample_at(&self, seed_: u64, index: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed::derive(seed_, index));
        self.center
            .iter()
            .map(|&c| {
                if self.r == 0.0 {
                    c
                } else {
                    c + rng.random_range(-self.r..=self.r)
                }
            })
            .collect()
    }
}

/// `k` independent uniform samples from `region`.
pub fn sample_hypercube(region: &HypercubeRegion, seed_: u64, k: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    Ok((0..k as u64).map(|i| region.sample_at(seed_, i)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub mean: f64,
    pub variance: f64,
    pub n_samples: usize,
    pub std_error_of_variance: f64,
    pub seed: u64,
}

/// Mean, unbiased variance and the standard error of the variance,
/// `sqrt((m4 - s^4 (n-3)/(n-1)) / n)` with `m4` the fourth central moment.
pub fn summarize(values: &[f64], seed_: u64) -> Result<VarianceEstimate> {
    let n = values.len();
    if n < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite sample {bad}")));
    }
    let nf = n as f64;
    let mean = pairwise_sum(values) / nf;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let variance = pairwise_sum(&sq) / (nf - 1.0);
    let m4 = pairwise_sum(&sq.iter().map(|s| s * s).collect::<Vec<_>>()) / nf;
    let var_of_var = (m4 - variance * variance * (nf - 3.0) / (nf - 1.0)) / nf;
    Ok(VarianceEstimate {
        mean,
        variance,
        n_samples: n,
        std_error_of_variance: var_of_var.max(0.0).sqrt(),
        seed: seed_,
    })
}

/// Monte Carlo estimate of `Var[L]` over `region`.
pub fn estimate_variance(
    ctx: &LossContext,
    region: &HypercubeRegion,
    n_samples: usize,
    seed_: u64,
) -> Result<VarianceEstimate> {
    if region.dim() != ctx.num_params() {
        return Err(Error::LengthMismatch {
            expected: ctx.num_params(),
            got: region.dim(),
        });
    }
    if n_samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let values = par::map_indices(ctx.execution(), n_samples, |i| {
        ctx.loss(&region.sample_at(seed_, i as u64))
    });
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    summarize(&values, seed_)
}

/// Mean loss on `center + r d` over `directions` random `d` with `||d||_inf = 1`.
pub fn directional_mean_loss(
    ctx: &LossContext,
    center: &[f64],
    r: f64,
    directions: usize,
    seed_: u64,
) -> Result<f64> {
    if directions == 0 {
        return Err(Error::invalid("need at least one direction"));
    }
    let values = par::map_indices(ctx.execution(), directions, |i| {
        let mut rng = seed::rng(seed::derive(seed_, i as u64));
        let d: Vec<f64> = center
            .iter()
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let theta: Vec<f64> = center
            .iter()
            .zip(&d)
            .map(|(c, x)| c + r * x / scale)
            .collect();
        ctx.loss(&theta)
    });
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&values) / directions as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub mean_loss: f64,
    pub variance: f64,
    pub var_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSweep {
    pub rows: Vec<SweepRow>,
    pub r_max: f64,
    pub variance_max: f64,
    /// `mean_loss` at `r_max`.
    pub mean_loss_at_max: f64,
    /// Vertex of the parabola through the peak and its two neighbours in `log r`.
    pub r_peak: f64,
    /// `mean_loss` interpolated (linearly in `log r`) at `r_peak`.
    pub mean_loss_at_peak: f64,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::invalid(format!(
            "bad log grid [{lo}, {hi}] with {n} points"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// The default radius grid: 40 log-spaced points in `[1e-3, pi]`.
pub fn default_r_grid() -> Vec<f64> {
    log_grid(1e-3, std::f64::consts::PI, 40).expect("constant grid")
}

/// Variance over `V(theta*, r)` for each `r`, with the mean loss averaged
/// over `directions` points at `||theta - theta*||_inf = r`.
pub fn variance_sweep_r(
    ctx: &LossContext,
    r_grid: &[f64],
    n_samples: usize,
    directions: usize,
    seed_: u64,
) -> Result<VarianceSweep> {
    if r_grid.is_empty() {
        return Err(Error::invalid("empty radius grid"));
    }
    let center = ctx.theta_star().to_vec();
    let var_seed = seed::derive_named(seed_, "variance");
    let dir_seed = seed::derive_named(seed_, "directions");
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let est = estimate_variance(
            ctx,
            &HypercubeRegion::new(center.clone(), r)?,
            n_samples,
            var_seed,
        )?;
        let mean_loss = directional_mean_loss(ctx, &center, r, directions, dir_seed)?;
        rows.push(SweepRow {
            r,
            mean_loss,
            variance: est.variance,
            var_stderr: est.std_error_of_variance,
        });
    }
    let best = argmax(rows.iter().map(|row| row.variance));
    let rs: Vec<f64> = rows.iter().map(|row| row.r).collect();
    let r_peak = refine_log_peak(
        &rs,
        &rows.iter().map(|row| row.variance).collect::<Vec<_>>(),
        best,
    );
    let mean_loss_at_peak = interp_log(
        &rs,
        &rows.iter().map(|row| row.mean_loss).collect::<Vec<_>>(),
        r_peak,
    );
    Ok(VarianceSweep {
        r_peak,
        mean_loss_at_peak,
        r_max: rows[best].r,
        variance_max: rows[best].variance,
        mean_loss_at_max: rows[best].mean_loss,
        rows,
    })
}

/// Refines a grid maximum at index `i` with a parabola in `log x`; falls back
/// to `xs[i]` at the grid ends or when the three points are not concave.
pub fn refine_log_peak(xs: &[f64], ys: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= xs.len() || xs[i - 1] <= 0.0 {
        return xs[i];
    }
    let (a, b, c) = (xs[i - 1].ln(), xs[i].ln(), xs[i + 1].ln());
    let (ya, yb, yc) = (ys[i - 1], ys[i], ys[i + 1]);
    let d1 = (yb - ya) / (b - a);
    let d2 = (yc - yb) / (c - b);
    let curv = (d2 - d1) / (c - a);
    if !(curv < 0.0) {
        return xs[i];
    }
    // vertex of the interpolating parabola
    let v = 0.5 * (a + b) - d1 / (2.0 * curv);
    v.clamp(a, c).exp()
}

/// Piecewise-linear interpolation of `ys` in `log x` (clamped at the ends).
pub fn interp_log(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    for k in 1..xs.len() {
        if x <= xs[k] {
            let t = (x.ln() - xs[k - 1].ln()) / (xs[k].ln() - xs[k - 1].ln());
            return ys[k - 1] + t * (ys[k] - ys[k - 1]);
        }
    }
    ys[ys.len() - 1]
}

fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in it.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtRow {
    pub dt: f64,
    pub mean_loss: f64,
    pub variance: f64,
    pub var_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtSweep {
    pub rows: Vec<DtRow>,
    pub dt_peak: f64,
    pub variance_peak: f64,
    /// Parabolic refinement of `dt_peak` in `log dt` (needs positive grid points).
    pub dt_peak_refined: f64,
}

/// Variance on `V(theta*, r)` as the time step grows. Every grid point reuses
/// the same sample stream.
pub fn variance_vs_dt(
    ctx: &LossContext,
    dt_grid: &[f64],
    r: f64,
    n_samples: usize,
    seed_: u64,
) -> Result<DtSweep> {
    if dt_grid.is_empty() {
        return Err(Error::invalid("empty time-step grid"));
    }
    let region = HypercubeRegion::new(ctx.theta_star().to_vec(), r)?;
    let var_seed = seed::derive_named(seed_, "variance");
    let mut local = ctx.clone();
    let mut rows = Vec::with_capacity(dt_grid.len());
    for &dt in dt_grid {
        local.set_dt(dt)?;
        let est = estimate_variance(&local, &region, n_samples, var_seed)?;
        rows.push(DtRow {
            dt,
            mean_loss: est.mean,
            variance: est.variance,
            var_stderr: est.std_error_of_variance,
        });
    }
    let best = argmax(rows.iter().map(|row| row.variance));
    let dts: Vec<f64> = rows.iter().map(|row| row.dt).collect();
    let dt_peak_refined = refine_log_peak(
        &dts,
        &rows.iter().map(|row| row.variance).collect::<Vec<_>>(),
        best,
    );
    Ok(DtSweep {
        dt_peak: rows[best].dt,
        variance_peak: rows[best].variance,
        dt_peak_refined,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::invalid("need at least two points"));
    }
    let n = xs.len() as f64;
    let mx = pairwise_sum(xs) / n;
    let my = pairwise_sum(ys) / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("all x values coincide"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Fits `y = prefactor x^exponent` by least squares in log-log space.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() < 3 {
        return Err(Error::invalid("power-law fit needs at least three points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("power-law fit needs positive finite data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let f = linear_fit(&lx, &ly)?;
    Ok(PowerLawFit {
        exponent: f.slope,
        prefactor: f.intercept.exp(),
        r_squared: f.r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRow {
    pub dt: f64,
    pub s: f64,
    /// Signed `||theta(s) - theta_a||_inf`.
    pub theta_inf: f64,
    pub loss: f64,
}

/// Loss along `theta(s) = theta_a + s (theta_b - theta_a)` for
/// `s in [-margin, 1 + margin]`, once per time step.
pub fn cut_1d(
    ctx: &LossContext,
    dts: &[f64],
    theta_a: &[f64],
    theta_b: &[f64],
    grid_points: usize,
    margin: f64,
) -> Result<Vec<CutRow>> {
    let m = ctx.num_params();
    if theta_a.len() != m || theta_b.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: theta_a.len().min(theta_b.len()),
        });
    }
    let dir: Vec<f64> = theta_b.iter().zip(theta_a).map(|(b, a)| b - a).collect();
    let span = dir.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    if span == 0.0 {
        return Err(Error::invalid("cut endpoints coincide"));
    }
    if grid_points < 2 || !(margin >= 0.0) {
        return Err(Error::invalid("cut needs >= 2 grid points and margin >= 0"));
    }
    let ss: Vec<f64> = (0..grid_points)
        .map(|i| -margin + (1.0 + 2.0 * margin) * i as f64 / (grid_points - 1) as f64)
        .collect();
    let mut local = ctx.clone();
    let mut rows = Vec::with_capacity(dts.len() * grid_points);
    for &dt in dts {
        local.set_dt(dt)?;
        let losses = par::map_slice(local.execution(), &ss, |&s| {
            let theta: Vec<f64> = theta_a.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            local.loss(&theta)
        });
        for (&s, l) in ss.iter().zip(losses) {
            rows.push(CutRow {
                dt,
                s,
                theta_inf: s * span,
                loss: l?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaPlane {
    pub mean: Vec<f64>,
    pub axes: [Vec<f64>; 2],
    pub explained: [f64; 2],
    /// Set when the trajectory spans fewer than two directions and the
    /// second axis was completed arbitrarily.
    pub rank_deficient: bool,
}

impl PcaPlane {
    /// `(u, v)` coordinates of `theta` relative to the trajectory mean.
    pub fn project(&self, theta: &[f64]) -> (f64, f64) {
        let d: Vec<f64> = theta.iter().zip(&self.mean).map(|(t, m)| t - m).collect();
        let dot = |a: &[f64]| a.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>();
        (dot(&self.axes[0]), dot(&self.axes[1]))
    }
}

fn sign_normalize(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Top two principal directions of a parameter trajectory.
pub fn pca_plane(trajectory: &[Vec<f64>]) -> Result<PcaPlane> {
    if trajectory.len() < 3 {
        return Err(Error::invalid("PCA needs at least three points"));
    }
    let m = trajectory[0].len();
    if m < 2 {
        return Err(Error::invalid("PCA plane needs at least two parameters"));
    }
    if let Some(bad) = trajectory.iter().find(|p| p.len() != m) {
        return Err(Error::LengthMismatch {
            expected: m,
            got: bad.len(),
        });
    }
    let k = trajectory.len() as f64;
    let mean: Vec<f64> = (0..m)
        .map(|j| trajectory.iter().map(|p| p[j]).sum::<f64>() / k)
        .collect();
    let centered = DMatrix::from_fn(trajectory.len(), m, |i, j| trajectory[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / (k - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::invalid("trajectory has no spread"));
    }
    let col =
        |i: usize| -> Vec<f64> { eig.eigenvectors.column(order[i]).iter().copied().collect() };
    let mut a0 = col(0);
    let mut a1 = col(1);
    let l0 = eig.eigenvalues[order[0]].max(0.0);
    let l1 = eig.eigenvalues[order[1]].max(0.0);
    let rank_deficient = l1 <= 1e-12 * l0;
    sign_normalize(&mut a0);
    sign_normalize(&mut a1);
    Ok(PcaPlane {
        mean,
        axes: [a0, a1],
        explained: [l0 / total, l1 / total],
        rank_deficient,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub u: f64,
    pub v: f64,
    pub loss: f64,
}

/// Loss on the lattice `origin + u axes[0] + v axes[1]`, `u` in the outer
/// loop. `extents = (u_min, u_max, v_min, v_max)`.
pub fn grid_2d(
    ctx: &LossContext,
    origin: &[f64],
    axes: [&[f64]; 2],
    extents: (f64, f64, f64, f64),
    resolution: (usize, usize),
) -> Result<Vec<GridRow>> {
    let m = ctx.num_params();
    for v in [origin, axes[0], axes[1]] {
        if v.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                got: v.len(),
            });
        }
    }
    let (nu, nv) = resolution;
    if nu < 1 || nv < 1 {
        return Err(Error::invalid("grid resolution must be positive"));
    }
    let lin = |lo: f64, hi: f64, n: usize, i: usize| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let cells: Vec<(f64, f64)> = (0..nu)
        .flat_map(|i| {
            (0..nv).map(move |j| {
                (
                    lin(extents.0, extents.1, nu, i),
                    lin(extents.2, extents.3, nv, j),
                )
            })
        })
        .collect();
    let losses = par::map_slice(ctx.execution(), &cells, |&(u, v)| {
        let theta: Vec<f64> = (0..m)
            .map(|k| origin[k] + u * axes[0][k] + v * axes[1][k])
            .collect();
        ctx.loss(&theta)
    });
    cells
        .iter()
        .zip(losses)
        .map(|(&(u, v), l)| Ok(GridRow { u, v, loss: l? }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub arclength: f64,
    pub loss: f64,
    pub directional_gradient: f64,
}

/// Loss and gradient projected on the path's unit tangent at each point.
/// The tangent is a central difference inside the path and one-sided at
/// the ends; where it vanishes the directional gradient is 0.
pub fn gradient_along_path(ctx: &LossContext, path: &[Vec<f64>]) -> Result<Vec<PathRow>> {
    if path.is_empty() {
        return Err(Error::invalid("empty path"));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>();
    let mut rows = Vec::with_capacity(path.len());
    let mut s = 0.0;
    for i in 0..path.len() {
        if i > 0 {
            s += norm(&diff(&path[i], &path[i - 1]));
        }
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(path.len() - 1);
        let t = diff(&path[hi], &path[lo]);
        let tn = norm(&t);
        let (loss, grad) = ctx.value_and_gradient(&path[i])?;
        let dg = if tn > 0.0 {
            grad.iter().zip(&t).map(|(g, x)| g * x).sum::<f64>() / tn
        } else {
            0.0
        };
        rows.push(PathRow {
            arclength: s,
            loss,
            directional_gradient: dg,
        });
    }
    Ok(rows)
}

/// Euclidean gradient norms at `k` uniform points of `region`.
pub fn gradient_norm_samples(
    ctx: &LossContext,
    region: &HypercubeRegion,
    k: usize,
    seed_: u64,
) -> Result<Vec<f64>> {
    let pts = sample_hypercube(region, seed_, k)?;
    pts.iter()
        .map(|p| Ok(ctx.gradient(p)?.iter().map(|g| g * g).sum::<f64>().sqrt()))
        .collect()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
