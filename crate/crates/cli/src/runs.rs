//! One function per subcommand. Defaults follow the reference experiments;
//! every knob can be overridden from the config.

use std::f64::consts::PI;

use rand::Rng;
use serde_json::json;

use warmstart::bounds::{self, EvolutionKind, R0Factor};
use warmstart::circuit::Ansatz;
use warmstart::landscape::{self, HypercubeRegion};
use warmstart::loss::{self, LossContext, LossKind, StabilizerDataset};
use warmstart::optimize::{self, JumpOptions, Method, OptimizerOptions, Schedule, TrackOptions};
use warmstart::table::Table;
use warmstart::{seed, PauliSum, SpectralMode, StateVector};

use crate::config::{Config, Layers};
use crate::output::Report;
use crate::CliError;

type Res<T> = Result<T, CliError>;

pub struct RunContext<'a> {
    pub cfg: &'a Config,
    pub seed: u64,
    pub long_run: bool,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn optimizer(cfg: &Config) -> Res<OptimizerOptions> {
    let o = &cfg.optimizer;
    let d = OptimizerOptions::default();
    let method = match o.method.as_deref() {
        None | Some("quasi_newton") => Method::QuasiNewton,
        Some("gradient_descent") => Method::GradientDescent,
        Some(other) => {
            return Err(invalid(format!(
                "optimizer.method: unknown method \"{other}\" (expected quasi_newton or gradient_descent)"
            )))
        }
    };
    let opts = OptimizerOptions {
        grad_tol: o.grad_tol.unwrap_or(d.grad_tol),
        max_iters: o.max_iters.unwrap_or(d.max_iters),
        method,
        max_step: o.max_step.unwrap_or(d.max_step),
        learning_rate: o.learning_rate.unwrap_or(d.learning_rate),
        ..d
    };
    opts.validate()?;
    Ok(opts)
}

/// `theta*` for instance `index`: zero, or uniform in `[-w, w]^M`.
fn center(cfg: &Config, m: usize, default: &str, master: u64, index: u64) -> Res<Vec<f64>> {
    match cfg.loss.center.as_deref().unwrap_or(default) {
        "zero" => Ok(vec![0.0; m]),
        "random" => {
            let w = cfg.loss.center_width.unwrap_or(PI);
            if !(w > 0.0 && w.is_finite()) {
                return Err(invalid("loss.center_width must be > 0"));
            }
            let mut rng = seed::rng(seed::derive(seed::derive_named(master, "center"), index));
            Ok((0..m).map(|_| rng.random_range(-w..=w)).collect())
        }
        other => Err(invalid(format!(
            "loss.center: unknown center \"{other}\" (expected zero or random)"
        ))),
    }
}

struct Instance {
    n: usize,
    h: PauliSum,
    ansatz: Ansatz,
    ctx: LossContext,
}

/// Builds the loss context for `n` qubits from the config and the given defaults.
fn instance(
    rc: &RunContext,
    n: usize,
    defaults: (&str, &str, Layers, &str, &str),
    dt: f64,
    index: u64,
) -> Res<Instance> {
    let (model, family, layers, kind, center_kind) = defaults;
    let cfg = rc.cfg;
    let h = cfg.hamiltonian(n, model)?;
    let ansatz = cfg.ansatz(n, &h, family, layers)?;
    let psi0 = cfg.initial_state(n)?;
    let kind = cfg.loss_kind(n, kind, seed::derive_named(rc.seed, "dataset"))?;
    let star = center(cfg, ansatz.num_params(), center_kind, rc.seed, index)?;
    let ctx = LossContext::with_center(ansatz.clone(), h.clone(), psi0, kind, star, dt)?;
    Ok(Instance { n, h, ansatz, ctx })
}

fn log_grid(
    lo: Option<f64>,
    hi: Option<f64>,
    pts: Option<usize>,
    d: (f64, f64, usize),
) -> Res<Vec<f64>> {
    Ok(landscape::log_grid(
        lo.unwrap_or(d.0),
        hi.unwrap_or(d.1),
        pts.unwrap_or(d.2),
    )?)
}

fn sizes(rc: &RunContext, short: &[usize], long: &[usize]) -> Res<Vec<usize>> {
    rc.cfg.qubits(if rc.long_run { long } else { short })
}

fn energy_spread(h: &PauliSum, psi: &StateVector) -> Res<f64> {
    let e = h.expectation(psi)?;
    let h2: f64 = h.matvec(psi)?.iter().map(|z| z.norm_sqr()).sum();
    Ok((h2 - e * e).max(0.0).sqrt())
}

pub fn variance_sweep(rc: &RunContext) -> Res<Report> {
    let cfg = rc.cfg;
    let ns = sizes(rc, &[4, 6, 8, 10], &[4, 6, 8, 10, 12])?;
    let s = &cfg.sampling;
    let grid = log_grid(s.r_min, s.r_max, s.r_points, (1e-3, PI, 40))?;
    let samples = s.n_samples.unwrap_or(20_000);
    let directions = s.directions.unwrap_or(500);
    let dt = cfg.loss.dt.unwrap_or(0.01);
    let mut main = Table::new(["n", "M", "r", "mean_loss", "variance", "var_stderr"]);
    let mut peaks = Table::new([
        "n",
        "M",
        "r_max",
        "r_peak",
        "variance_max",
        "mean_loss_at_peak",
    ]);
    let (mut ms, mut rpeaks) = (vec![], vec![]);
    for &n in &ns {
        let inst = instance(
            rc,
            n,
            (
                "xz_chain",
                "hea",
                Layers::PerQubit("n".into()),
                "real_time",
                "zero",
            ),
            dt,
            n as u64,
        )?;
        let m = inst.ansatz.num_params();
        let sweep = landscape::variance_sweep_r(
            &inst.ctx,
            &grid,
            samples,
            directions,
            seed::derive(rc.seed, n as u64),
        )?;
        for row in &sweep.rows {
            main.push(vec![
                n as f64,
                m as f64,
                row.r,
                row.mean_loss,
                row.variance,
                row.var_stderr,
            ])?;
        }
        peaks.push(vec![
            n as f64,
            m as f64,
            sweep.r_max,
            sweep.r_peak,
            sweep.variance_max,
            sweep.mean_loss_at_peak,
        ])?;
        ms.push(m as f64);
        rpeaks.push(sweep.r_peak);
    }
    let mut report = Report::default();
    report.table("", main);
    report.table("_peaks", peaks);
    if ms.len() >= 3 {
        let fit = landscape::fit_power_law(&ms, &rpeaks)?;
        let mut t = Table::new(["exponent", "prefactor", "r_squared"]);
        t.push(vec![fit.exponent, fit.prefactor, fit.r_squared])?;
        report.table("_fit", t);
        report.note("r_peak_exponent", fit.exponent);
        report.note("r_peak_fit_r_squared", fit.r_squared);
    }
    report.note("qubits", ns);
    Ok(report)
}

pub fn variance_vs_dt(rc: &RunContext) -> Res<Report> {
    let cfg = rc.cfg;
    let ns = sizes(rc, &[4, 6, 8], &[4, 6, 8, 10, 12])?;
    let s = &cfg.sampling;
    let grid = log_grid(s.dt_min, s.dt_max, s.dt_points, (1e-2, 1.0, 40))?;
    let r = s.r.unwrap_or(0.05);
    let samples = s.n_samples.unwrap_or(20_000);
    let mut main = Table::new(["n", "M", "dt", "mean_loss", "variance", "var_stderr"]);
    let mut peaks = Table::new([
        "n",
        "M",
        "lambda_max",
        "energy_spread",
        "dt_peak",
        "dt_peak_refined",
        "variance_peak",
    ]);
    let (mut lams, mut spreads, mut dts) = (vec![], vec![], vec![]);
    for &n in &ns {
        let inst = instance(
            rc,
            n,
            (
                "xz_chain",
                "hea",
                Layers::PerQubit("n".into()),
                "real_time",
                "zero",
            ),
            0.0,
            n as u64,
        )?;
        let m = inst.ansatz.num_params();
        let lam = inst.h.spectral_bound(SpectralMode::Exact)?;
        let start = inst.ansatz.apply(inst.ctx.theta_star(), inst.ctx.psi0())?;
        let spread = energy_spread(&inst.h, &start)?;
        let sweep = landscape::variance_vs_dt(
            &inst.ctx,
            &grid,
            r,
            samples,
            seed::derive(rc.seed, n as u64),
        )?;
        for row in &sweep.rows {
            main.push(vec![
                n as f64,
                m as f64,
                row.dt,
                row.mean_loss,
                row.variance,
                row.var_stderr,
            ])?;
        }
        peaks.push(vec![
            n as f64,
            m as f64,
            lam,
            spread,
            sweep.dt_peak,
            sweep.dt_peak_refined,
            sweep.variance_peak,
        ])?;
        lams.push(lam);
        spreads.push(spread);
        dts.push(sweep.dt_peak_refined);
    }
    let mut report = Report::default();
    report.table("", main);
    report.table("_peaks", peaks);
    if ns.len() >= 3 {
        let vs_lambda = landscape::fit_power_law(&lams, &dts)?;
        let mut t = Table::new([
            "exponent_lambda",
            "r_squared_lambda",
            "exponent_spread",
            "r_squared_spread",
        ]);
        // the spread is zero when the initial state is an eigenstate; skip that fit then
        let vs_spread = landscape::fit_power_law(&spreads, &dts).ok();
        t.push(vec![
            vs_lambda.exponent,
            vs_lambda.r_squared,
            vs_spread.as_ref().map_or(0.0, |f| f.exponent),
            vs_spread.as_ref().map_or(0.0, |f| f.r_squared),
        ])?;
        report.table("_fit", t);
        report.note("dt_peak_exponent_lambda", vs_lambda.exponent);
        if let Some(f) = vs_spread {
            report.note("dt_peak_exponent_spread", f.exponent);
        }
    }
    report.note("qubits", ns);
    report.note("r", r);
    Ok(report)
}

fn describe(out: &mut String, r: &bounds::BoundReport) {
    out.push_str(&format!("{:<30}{:.6e}\n", r.bound, r.value));
    out.push_str(&format!(
        "{:<30}{}\n",
        format!("{}.valid", r.bound),
        r.valid
    ));
    for c in &r.conditions {
        out.push_str(&format!(
            "  {:<28}{} (margin {:.3e})\n",
            c.name,
            if c.satisfied { "ok" } else { "violated" },
            c.margin
        ));
    }
}

pub fn bounds(rc: &RunContext) -> Res<Report> {
    let b = &rc.cfg.bounds;
    let r = b.r.unwrap_or(0.1);
    let r0 = b.r0.unwrap_or(bounds::R0_DEFAULT);
    let m = b.m.unwrap_or(20);
    let lambda = b.lambda.unwrap_or(3.0);
    let dt = b.dt.unwrap_or(0.0);
    let delta = b.delta.unwrap_or(1.0);
    let f_target = b.f_target.unwrap_or(1.0);
    let mu = b.mu.unwrap_or(0.1);
    let eps = b.eps.unwrap_or(0.05);
    let beta = b.beta.unwrap_or(1.0);
    let eta0 = b.eta0.unwrap_or(bounds::ETA0_DEFAULT);
    let dtau = b.dtau.unwrap_or(dt);
    let factor = match b.factor.as_deref() {
        None | Some("derived") => R0Factor::Derived,
        Some("stated") => R0Factor::Stated,
        Some(other) => {
            return Err(invalid(format!(
                "bounds.factor: unknown factor \"{other}\" (expected derived or stated)"
            )))
        }
    };

    let k = bounds::k_plus(r)?;
    let c = bounds::c_plus(r)?;
    let prop1 = bounds::prop1_bound(r, m, delta)?;
    let thm5 = bounds::thm5_bound(r, r0, m, lambda, dt, factor)?;
    let thm4 = bounds::thm4_bound(r, r0, m, f_target)?;
    let conv = bounds::convexity_radius(mu, eps, m, lambda, dt)?;
    let shift = bounds::adiabatic_shift_bound(m, lambda, dt, beta, EvolutionKind::RealTime)?;
    // the step-size limits and the imaginary-time set need lambda > 0 and beta > 0
    let limits = if lambda > 0.0 && beta > 0.0 {
        Some(bounds::adiabatic_dt_limits(m, lambda, beta, eta0, mu, eps)?)
    } else {
        None
    };
    let ite = if lambda > 0.0 && beta > 0.0 {
        Some(bounds::ite_bounds(
            r, r0, m, lambda, dtau, mu, eps, beta, eta0,
        )?)
    } else {
        None
    };

    let mut t = Table::new([
        "r",
        "r0",
        "M",
        "lambda_max",
        "dt",
        "k_plus",
        "c_plus",
        "prop1",
        "thm5",
        "thm5_valid",
        "thm4",
        "thm4_valid",
        "convexity_radius",
        "convexity_valid",
        "shift_bound",
        "shift_defined",
        "dt_grad",
        "dt_convex",
        "limits_defined",
        "ite_variance",
        "ite_variance_valid",
        "ite_convexity_radius",
        "ite_convexity_valid",
        "dtau_grad",
        "dtau_convex",
        "ite_defined",
    ]);
    let (dg, dc) = limits.unwrap_or((0.0, 0.0));
    let ite_row = ite.as_ref().map_or([0.0; 6], |i| {
        [
            i.variance.value,
            flag(i.variance.valid),
            i.convexity.value,
            flag(i.convexity.valid),
            i.dtau_grad,
            i.dtau_convex,
        ]
    });
    let mut row = vec![
        r,
        r0,
        m as f64,
        lambda,
        dt,
        k,
        c,
        prop1,
        thm5.value,
        flag(thm5.valid),
        thm4.value,
        flag(thm4.valid),
        conv.value,
        flag(conv.valid),
        shift.unwrap_or(0.0),
        flag(shift.is_some()),
        dg,
        dc,
        flag(limits.is_some()),
    ];
    row.extend(ite_row);
    row.push(flag(ite.is_some()));
    t.push(row)?;

    let mut text = String::new();
    for (key, v) in [
        ("r", r),
        ("r0", r0),
        ("M", m as f64),
        ("lambda_max", lambda),
        ("dt", dt),
    ] {
        text.push_str(&format!("{key:<30}{v}\n"));
    }
    text.push_str(&format!("{:<30}{:?}\n", "r0_factor", factor));
    text.push_str(&format!(
        "{:<30}{k:.6e}\n{:<30}{c:.6e}\n",
        "k_plus", "c_plus"
    ));
    text.push_str(&format!("{:<30}{prop1:.6e}\n", "prop1"));
    describe(&mut text, &thm5);
    describe(&mut text, &thm4);
    describe(&mut text, &conv);
    match shift {
        Some(s) => text.push_str(&format!("{:<30}{s:.6e}\n", "adiabatic_shift")),
        None => text.push_str(&format!(
            "{:<30}undefined (beta_A <= 0)\n",
            "adiabatic_shift"
        )),
    }
    if let Some((g, cv)) = limits {
        text.push_str(&format!(
            "{:<30}{g:.6e}\n{:<30}{cv:.6e}\n",
            "dt_grad", "dt_convex"
        ));
    }
    if let Some(i) = &ite {
        describe(&mut text, &i.variance);
        describe(&mut text, &i.convexity);
        describe(&mut text, &i.adiabatic);
    }

    let json = json!({
        "inputs": {
            "r": r, "r0": r0, "M": m, "lambda_max": lambda, "dt": dt, "delta": delta,
            "f_target": f_target, "mu_min": mu, "eps": eps, "beta_a": beta, "eta0": eta0,
            "dtau": dtau, "r0_factor": factor,
        },
        "k_plus": k,
        "c_plus": c,
        "prop1": prop1,
        "thm5": thm5,
        "thm4": thm4,
        "convexity_radius": conv,
        "adiabatic_shift": shift,
        "adiabatic_dt_limits": limits.map(|(g, c)| json!({"dt_grad": g, "dt_convex": c})),
        "ite": ite,
    });
    let mut report = Report::default();
    report.table("", t);
    report.json.push((String::new(), json));
    report.note("thm5", thm5.value);
    report.note("thm5_valid", thm5.valid);
    report.text = Some(text);
    Ok(report)
}

pub fn adiabatic_track(rc: &RunContext) -> Res<Report> {
    let cfg = rc.cfg;
    let ns = sizes(rc, &[4, 6], &[4, 6, 8])?;
    let instances = cfg.track.instances.unwrap_or(10);
    let topts = track_options(cfg, 0.2, 50)?;
    let opts = optimizer(cfg)?;
    let mut t = Table::new([
        "instance",
        "n",
        "M",
        "lambda_max",
        "dt",
        "loss",
        "grad_norm",
        "converged",
        "shift_inf",
        "shift_l2",
        "beta_a",
        "beta_defined",
        "continuity_ok",
        "shift_bound",
        "shift_bound_defined",
        "bound_ok",
    ]);
    let (mut checked, mut violations, mut halted) = (0usize, 0usize, 0usize);
    for &n in &ns {
        for i in 0..instances {
            let index = (n * 100_000 + i) as u64;
            let inst = instance(
                rc,
                n,
                ("xz_chain", "hva", Layers::Count(2), "real_time", "random"),
                0.0,
                index,
            )?;
            let m = inst.ansatz.num_params();
            let lam = inst.h.spectral_bound(SpectralMode::Exact)?;
            let track = optimize::adiabatic_track(&inst.ctx, &topts, &opts)?;
            halted += usize::from(track.halted);
            let bounds = optimize::cumulative_shift_bounds(&track, m, lam);
            for (s, b) in track.samples.iter().zip(&bounds) {
                let ok = match b {
                    Some(b) => {
                        checked += 1;
                        let ok = s.shift_l2 <= b * (1.0 + 1e-9) + 1e-12;
                        violations += usize::from(!ok);
                        ok
                    }
                    None => true,
                };
                t.push(vec![
                    i as f64,
                    inst.n as f64,
                    m as f64,
                    lam,
                    s.dt,
                    s.loss,
                    s.grad_norm,
                    flag(s.converged),
                    s.shift_inf,
                    s.shift_l2,
                    s.beta_a.unwrap_or(0.0),
                    flag(s.beta_a.is_some()),
                    flag(s.continuity_ok),
                    b.unwrap_or(0.0),
                    flag(b.is_some()),
                    flag(ok),
                ])?;
            }
        }
    }
    let mut report = Report::default();
    report.table("", t);
    report.note("qubits", ns);
    report.note("instances", instances);
    report.note("bound_checks", checked);
    report.note("bound_violations", violations);
    report.note("halted_tracks", halted);
    Ok(report)
}

fn track_options(cfg: &Config, dt_max: f64, n_steps: usize) -> Res<TrackOptions> {
    let d = TrackOptions::default();
    Ok(TrackOptions {
        dt_max: cfg.track.dt_max.unwrap_or(dt_max),
        n_steps: cfg.track.n_steps.unwrap_or(n_steps),
        jump_guard: cfg.track.jump_guard.unwrap_or(d.jump_guard),
        compute_beta: true,
    })
}

fn single_size(rc: &RunContext) -> Res<usize> {
    let ns = sizes(rc, &[6], &[10])?;
    match ns.as_slice() {
        [n] => Ok(*n),
        _ => Err(invalid(
            "this subcommand runs one system size; give system.qubits as a single integer",
        )),
    }
}

fn jump_instance(rc: &RunContext, dt: f64) -> Res<Instance> {
    let n = single_size(rc)?;
    let index = rc.cfg.jump.instance.unwrap_or(0) as u64;
    instance(
        rc,
        n,
        ("xx_chain", "hva", Layers::Count(2), "real_time", "random"),
        dt,
        index,
    )
}

pub fn minima_cut(rc: &RunContext) -> Res<Report> {
    let cfg = rc.cfg;
    let inst = jump_instance(rc, 0.0)?;
    let opts = optimizer(cfg)?;
    let mut topts = track_options(cfg, 0.2, 20)?;
    topts.compute_beta = false;
    let track = optimize::adiabatic_track(&inst.ctx, &topts, &opts)?;
    let moved: Vec<_> = track.samples.iter().filter(|s| s.dt > 0.0).collect();
    if moved.is_empty() {
        return Err(invalid("track.dt_max must be > 0"));
    }
    // each requested dt starts from the nearest tracked sample
    let picks: Vec<(f64, &optimize::TrackSample)> = match &cfg.jump.dts {
        Some(list) => list
            .iter()
            .map(|&dt| {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(invalid(format!(
                        "jump.dts: {dt} is not a positive time step"
                    )));
                }
                let s = moved
                    .iter()
                    .min_by(|a, b| (a.dt - dt).abs().total_cmp(&(b.dt - dt).abs()))
                    .expect("nonempty");
                Ok((dt, *s))
            })
            .collect::<Res<_>>()?,
        None => moved.iter().map(|s| (s.dt, *s)).collect(),
    };
    let jo = |k: usize| JumpOptions {
        n_restarts: cfg.jump.restarts.unwrap_or(30),
        seed: seed::derive(seed::derive_named(rc.seed, "restarts"), k as u64),
        jump_threshold: cfg.jump.threshold.unwrap_or(0.5),
        loss_margin: cfg.jump.loss_margin.unwrap_or(1e-4),
        period: optimize::parameter_period(&inst.ansatz),
    };
    let mut minima = Table::new(["dt", "restart", "loss", "distance", "converged", "is_jump"]);
    let mut jumps = Table::new([
        "dt",
        "adiabatic_loss",
        "best_loss",
        "jumped",
        "jump_distance",
    ]);
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, f64)> = None;
    for (k, (dt, start)) in picks.iter().enumerate() {
        let mut ctx = inst.ctx.clone();
        ctx.set_dt(*dt)?;
        let rep = optimize::detect_minima_jump(&ctx, &start.theta, &jo(k), &opts, ctx.execution())?;
        minima.push(vec![
            *dt,
            -1.0,
            rep.adiabatic.loss,
            0.0,
            flag(rep.adiabatic.converged),
            0.0,
        ])?;
        for (i, f) in rep.minima.iter().enumerate() {
            minima.push(vec![
                *dt,
                i as f64,
                f.loss,
                f.distance,
                flag(f.converged),
                flag(rep.jump == Some(i)),
            ])?;
        }
        let best_loss = rep
            .minima
            .iter()
            .map(|f| f.loss)
            .fold(rep.adiabatic.loss, f64::min);
        jumps.push(vec![
            *dt,
            rep.adiabatic.loss,
            best_loss,
            flag(rep.jumped()),
            rep.jump_distance().unwrap_or(0.0),
        ])?;
        if let Some(j) = rep.jump {
            let d = rep.minima[j].distance;
            if best.as_ref().is_none_or(|b| d > b.3) {
                best = Some((
                    *dt,
                    rep.adiabatic.theta.clone(),
                    rep.minima[j].theta.clone(),
                    d,
                ));
            }
        }
    }
    // the cut joins the two minima of the widest jump, or theta* and the last tracked minimum
    let (theta_a, theta_b) = match &best {
        Some((_, a, b, _)) => (a.clone(), b.clone()),
        None => (
            inst.ctx.theta_star().to_vec(),
            moved.last().expect("nonempty").theta.clone(),
        ),
    };
    let mut cut_dts = vec![0.0];
    cut_dts.extend(picks.iter().map(|p| p.0));
    let rows = landscape::cut_1d(
        &inst.ctx,
        &cut_dts,
        &theta_a,
        &theta_b,
        cfg.jump.cut_points.unwrap_or(201),
        cfg.jump.cut_margin.unwrap_or(0.5),
    )?;
    let mut cut = Table::new(["dt", "s", "theta_inf", "loss"]);
    for r in rows {
        cut.push(vec![r.dt, r.s, r.theta_inf, r.loss])?;
    }
    let mut report = Report::default();
    report.table("", cut);
    report.table("_minima", minima);
    report.table("_jumps", jumps);
    report.note("n", inst.n);
    report.note("M", inst.ansatz.num_params());
    report.note("track_halted", track.halted);
    match best {
        Some((dt, _, _, d)) => {
            report.note("jump_dt", dt);
            report.note("jump_distance", d);
        }
        None => report.note("jump_distance", serde_json::Value::Null),
    }
    Ok(report)
}

/// Optimizer run from `theta*` at the configured time step.
fn trajectory(rc: &RunContext) -> Res<(Instance, optimize::Minimum)> {
    let dt = rc.cfg.loss.dt.unwrap_or(0.04);
    let inst = jump_instance(rc, dt)?;
    let res = optimize::minimize(&inst.ctx, inst.ctx.theta_star(), &optimizer(rc.cfg)?)?;
    Ok((inst, res))
}

pub fn landscape_2d(rc: &RunContext) -> Res<Report> {
    let (inst, res) = trajectory(rc)?;
    let plane = landscape::pca_plane(&res.trajectory)?;
    let pts: Vec<(f64, f64)> = res.trajectory.iter().map(|p| plane.project(p)).collect();
    let span = |f: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let pad = rc.cfg.grid2d.padding.unwrap_or(0.5);
    if !(pad >= 0.0) {
        return Err(invalid("grid2d.padding must be >= 0"));
    }
    let widen = |(lo, hi): (f64, f64)| {
        let w = ((hi - lo) * pad).max(0.05);
        (lo - w, hi + w)
    };
    let (umin, umax) = widen(span(|p| p.0));
    let (vmin, vmax) = widen(span(|p| p.1));
    let res_n = rc.cfg.grid2d.resolution.unwrap_or(41);
    let rows = landscape::grid_2d(
        &inst.ctx,
        &plane.mean,
        [&plane.axes[0], &plane.axes[1]],
        (umin, umax, vmin, vmax),
        (res_n, res_n),
    )?;
    let mut grid = Table::new(["u", "v", "loss"]);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for r in &rows {
        grid.push(vec![r.u, r.v, r.loss])?;
        if r.loss < best.0 {
            best = (r.loss, r.u, r.v);
        }
    }
    let mut path = Table::new(["step", "u", "v", "loss"]);
    for (k, ((u, v), l)) in pts.iter().zip(&res.losses).enumerate() {
        path.push(vec![k as f64, *u, *v, *l])?;
    }
    let mut report = Report::default();
    report.table("", grid);
    report.table("_path", path);
    report.table("_trajectory", trajectory_table(&res));
    report.note("n", inst.n);
    report.note("explained", plane.explained.to_vec());
    report.note("rank_deficient", plane.rank_deficient);
    report.note("final_loss", res.loss);
    report.note(
        "final_uv",
        vec![pts.last().unwrap().0, pts.last().unwrap().1],
    );
    report.note("grid_min", vec![best.0, best.1, best.2]);
    Ok(report)
}

fn trajectory_table(res: &optimize::Minimum) -> Table {
    let m = res.theta.len();
    let mut header = vec!["step".to_string(), "loss".to_string()];
    header.extend((0..m).map(|i| format!("theta_{i}")));
    let mut t = Table::new(header);
    for (k, (p, l)) in res.trajectory.iter().zip(&res.losses).enumerate() {
        let mut row = vec![k as f64, *l];
        row.extend(p);
        t.push(row).expect("fixed width");
    }
    t
}

pub fn grad_path(rc: &RunContext) -> Res<Report> {
    let (inst, res) = trajectory(rc)?;
    let rows = landscape::gradient_along_path(&inst.ctx, &res.trajectory)?;
    let m = inst.ansatz.num_params();
    let k = rc.cfg.jump.random_points.unwrap_or(200);
    let region = HypercubeRegion::new(vec![0.0; m], PI)?;
    let random = landscape::gradient_norm_samples(
        &inst.ctx,
        &region,
        k,
        seed::derive_named(rc.seed, "random-points"),
    )?;
    let mut path = Table::new(["arclength", "loss", "directional_gradient"]);
    for r in &rows {
        path.push(vec![r.arclength, r.loss, r.directional_gradient])?;
    }
    let mut rand_t = Table::new(["sample", "grad_norm"]);
    for (i, g) in random.iter().enumerate() {
        rand_t.push(vec![i as f64, *g])?;
    }
    let path_mean = rows
        .iter()
        .map(|r| r.directional_gradient.abs())
        .sum::<f64>()
        / rows.len().max(1) as f64;
    let median = landscape::median(&random).unwrap_or(0.0);
    let mut report = Report::default();
    report.table("", path);
    report.table("_random", rand_t);
    report.note("n", inst.n);
    report.note("path_mean_abs_gradient", path_mean);
    report.note("random_median_gradient", median);
    if median > 0.0 {
        report.note("ratio", path_mean / median);
    }
    Ok(report)
}

pub fn compress(rc: &RunContext) -> Res<Report> {
    let cfg = rc.cfg;
    let n = match cfg.qubits(&[4])?.as_slice() {
        [n] => *n,
        _ => {
            return Err(invalid(
                "compress runs one system size; give system.qubits as a single integer",
            ))
        }
    };
    let h = cfg.hamiltonian(n, "xz_chain")?;
    let ansatz = cfg.ansatz(n, &h, "hva", Layers::Count(2))?;
    let psi0 = cfg.initial_state(n)?;
    let c = &cfg.compress;
    let schedule = match c.schedule.as_deref().unwrap_or("fixed") {
        "fixed" => match &c.dts {
            Some(list) => Schedule::Fixed(list.clone()),
            None => Schedule::Fixed(vec![c.dt.unwrap_or(0.05); c.steps.unwrap_or(10)]),
        },
        "adaptive" => {
            let dt_init = c.dt_init.unwrap_or(0.05);
            Schedule::Adaptive {
                t_final: c.t_final.unwrap_or(0.5),
                dt_init,
                dt_max: c.dt_max.unwrap_or(4.0 * dt_init),
                dt_min: c.dt_min.unwrap_or(1e-4),
                threshold: c.threshold.unwrap_or(1e-4),
            }
        }
        other => {
            return Err(invalid(format!(
                "compress.schedule: unknown schedule \"{other}\" (expected fixed or adaptive)"
            )))
        }
    };
    let copts = optimize::CompressOptions {
        jitter: c.jitter.unwrap_or(0.0),
        seed: seed::derive_named(rc.seed, "jitter"),
    };
    let log = optimize::compress_run(&ansatz, &h, &psi0, &schedule, &optimizer(cfg)?, &copts)?;
    let mut report = Report::default();
    report.table("", log.to_table());
    report.note("n", n);
    report.note("M", ansatz.num_params());
    report.note("steps", log.records.len());
    report.note("completed", log.completed);
    if let Some(last) = log.records.last() {
        report.note("t_final", last.t);
        report.note("final_cumulative_fidelity", last.cumulative_fidelity);
    }
    Ok(report)
}

pub fn ite_suite(rc: &RunContext) -> Res<Report> {
    let cfg = rc.cfg;
    let ns = sizes(rc, &[2, 4, 6], &[2, 4, 6, 8])?;
    let s = &cfg.sampling;
    let grid = log_grid(s.dt_min, s.dt_max, s.dt_points, (1e-3, 0.5, 20))?;
    let r = s.r.unwrap_or(0.1);
    let samples = s.n_samples.unwrap_or(20_000);
    let r0 = cfg.bounds.r0.unwrap_or(bounds::R0_DEFAULT);
    let eps = cfg.bounds.eps.unwrap_or(1e-3);
    let eta0 = cfg.bounds.eta0.unwrap_or(bounds::ETA0_DEFAULT);
    let opts = optimizer(cfg)?;
    let mut t = Table::new([
        "n",
        "M",
        "lambda_max",
        "dtau",
        "r",
        "mean_loss",
        "variance",
        "var_stderr",
        "variance_bound",
        "bound_valid",
        "bound_holds",
        "convexity_radius",
        "convexity_valid",
        "dtau_grad",
        "dtau_convex",
        "beta_defined",
    ]);
    let mut violations = 0usize;
    for &n in &ns {
        let inst = instance(
            rc,
            n,
            (
                "xz_chain",
                "hea",
                Layers::Count(1),
                "imaginary_time",
                "random",
            ),
            0.0,
            n as u64,
        )?;
        let m = inst.ansatz.num_params();
        let lam = inst.h.spectral_bound(SpectralMode::Exact)?;
        let mu = inst.ctx.mu_min()?;
        // smallest curvature met along a short imaginary-time track
        let track = optimize::adiabatic_track(
            &inst.ctx,
            &TrackOptions {
                dt_max: grid[grid.len() - 1].min(0.05),
                n_steps: 10,
                ..TrackOptions::default()
            },
            &opts,
        )?;
        let beta = track
            .samples
            .iter()
            .filter_map(|s| s.beta_a)
            .fold(None, |acc: Option<f64>, b| {
                Some(acc.map_or(b, |a| a.min(b)))
            });
        let limits = match beta {
            Some(b) if b > 0.0 && lam > 0.0 => {
                Some(bounds::ite_adiabatic_limits(m, lam, b, eta0, mu, eps)?)
            }
            _ => None,
        };
        let region = HypercubeRegion::new(inst.ctx.theta_star().to_vec(), r)?;
        let mut ctx = inst.ctx.clone();
        for &dtau in &grid {
            ctx.set_dt(dtau)?;
            let est = landscape::estimate_variance(
                &ctx,
                &region,
                samples,
                seed::derive(rc.seed, n as u64),
            )?;
            let vb = bounds::ite_variance_bound(r, r0, m, lam, dtau)?;
            let cb = bounds::ite_convexity_radius(mu, eps, m, lam, dtau)?;
            let holds = !vb.valid || vb.value <= est.variance + 3.0 * est.std_error_of_variance;
            violations += usize::from(!holds);
            let (g, c) = limits.unwrap_or((0.0, 0.0));
            t.push(vec![
                n as f64,
                m as f64,
                lam,
                dtau,
                r,
                est.mean,
                est.variance,
                est.std_error_of_variance,
                vb.value,
                flag(vb.valid),
                flag(holds),
                cb.value,
                flag(cb.valid),
                g,
                c,
                flag(limits.is_some()),
            ])?;
        }
    }
    let mut report = Report::default();
    report.table("", t);
    report.note("qubits", ns);
    report.note("bound_violations", violations);
    Ok(report)
}

fn orthogonal_dataset(n: usize, n_s: usize, master: u64) -> Res<StabilizerDataset> {
    for k in 0..10_000u64 {
        let d = StabilizerDataset::sample(n, n_s, seed::derive(master, k))?;
        if d.is_pairwise_orthogonal() {
            return Ok(d);
        }
    }
    Err(invalid(format!(
        "no mutually orthogonal dataset of size {n_s} found on {n} qubits"
    )))
}

pub fn unitary_suite(rc: &RunContext) -> Res<Report> {
    let u = &rc.cfg.unitary;
    let max_n = u.max_qubits.unwrap_or(3);
    if max_n == 0 || 2 * max_n > 12 {
        return Err(invalid("unitary.max_qubits must lie in 1..=6"));
    }
    let comparisons = u.comparisons.unwrap_or(20);
    let dt = rc.cfg.loss.dt.unwrap_or(0.2);
    let n_s_qml = rc.cfg.loss.dataset_size.unwrap_or(2);
    let mut rng = seed::rng(seed::derive_named(rc.seed, "unitary"));
    let mut eq = Table::new([
        "n",
        "M",
        "comparisons",
        "max_hst_bell_diff",
        "max_qml_mixed_diff",
    ]);
    let (mut worst_hst, mut worst_qml) = (0.0f64, 0.0f64);
    for n in 1..=max_n {
        let h = PauliSum::random(n, 2 * n, &mut rng);
        let a = if n == 1 {
            Ansatz::parse("ROT 0 Y\nROT 1 Z\nROT 2 X")?
        } else {
            warmstart::circuit::build_hea(n, 2, None)?
        };
        let m = a.num_params();
        let star: Vec<f64> = (0..m).map(|_| rng.random_range(-PI..PI)).collect();
        let psi0 = StateVector::zero(n)?;
        let hst = LossContext::with_center(
            a.clone(),
            h.clone(),
            psi0.clone(),
            LossKind::UnitaryHst,
            star.clone(),
            dt,
        )?;
        let bell = LossContext::with_center(
            a.clone(),
            h.clone(),
            psi0.clone(),
            LossKind::UnitaryBell,
            star.clone(),
            dt,
        )?;
        let data = orthogonal_dataset(n, n_s_qml.min(1 << n), seed::derive(rc.seed, n as u64))?;
        let qml = LossContext::with_center(
            a.clone(),
            h.clone(),
            psi0,
            LossKind::Qml(data.clone()),
            star.clone(),
            dt,
        )?;
        let (mut d_hst, mut d_qml) = (0.0f64, 0.0f64);
        for _ in 0..comparisons {
            let th: Vec<f64> = (0..m).map(|_| rng.random_range(-PI..PI)).collect();
            d_hst = d_hst.max((hst.loss(&th)? - bell.loss(&th)?).abs());
            let mixed = loss::qml_mixed_form_loss(&a, &h, &data, &star, dt, &th)?;
            d_qml = d_qml.max((qml.loss(&th)? - mixed).abs());
        }
        eq.push(vec![n as f64, m as f64, comparisons as f64, d_hst, d_qml])?;
        worst_hst = worst_hst.max(d_hst);
        worst_qml = worst_qml.max(d_qml);
    }

    let draws = u.draws.unwrap_or(1000);
    let sizes_s = u.dataset_sizes.clone().unwrap_or_else(|| vec![1, 4, 16]);
    let mut orth = Table::new([
        "n",
        "N_s",
        "draws",
        "orthogonal_fraction",
        "lower_bound",
        "binomial_slack",
        "holds",
    ]);
    let mut all_hold = true;
    for n in 2..=6usize {
        let sigma = warmstart::PauliString::from_axes(&vec![warmstart::Axis::X; n])?;
        for &n_s in &sizes_s {
            let master = seed::derive_named(rc.seed, &format!("orthogonality-{n}-{n_s}"));
            let mut zeros = 0usize;
            for k in 0..draws {
                let d = StabilizerDataset::sample(n, n_s, seed::derive(master, k as u64))?;
                zeros += usize::from(d.orthogonality(&sigma)? == 0.0);
            }
            let frac = zeros as f64 / draws.max(1) as f64;
            let lb = 1.0 - n_s as f64 / 3f64.powi(n as i32);
            let p = lb.clamp(0.0, 1.0);
            let slack = 3.0 * (p * (1.0 - p) / draws.max(1) as f64).sqrt();
            let holds = frac >= lb - slack;
            all_hold &= holds;
            orth.push(vec![
                n as f64,
                n_s as f64,
                draws as f64,
                frac,
                lb,
                slack,
                flag(holds),
            ])?;
        }
    }
    let mut report = Report::default();
    report.table("", eq);
    report.table("_orthogonality", orth);
    report.note("max_hst_bell_diff", worst_hst);
    report.note("max_qml_mixed_diff", worst_qml);
    report.note("orthogonality_bound_holds", all_hold);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Config {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn optimizer_overrides_and_rejects_unknown_methods() {
        let o = optimizer(&cfg(
            "[optimizer]\ngrad_tol = 1e-6\nmethod = \"gradient_descent\"\n",
        ))
        .unwrap();
        assert_eq!(o.grad_tol, 1e-6);
        assert_eq!(o.method, Method::GradientDescent);
        assert!(optimizer(&cfg("[optimizer]\nmethod = \"newton\"\n")).is_err());
        assert!(optimizer(&cfg("[optimizer]\ngrad_tol = 0.0\n")).is_err());
    }

    #[test]
    fn random_centers_depend_on_seed_and_index_only() {
        let c = cfg("[loss]\ncenter_width = 0.5\n");
        let a = center(&c, 6, "random", 3, 0).unwrap();
        assert_eq!(a, center(&c, 6, "random", 3, 0).unwrap());
        assert_ne!(a, center(&c, 6, "random", 3, 1).unwrap());
        assert_ne!(a, center(&c, 6, "random", 4, 0).unwrap());
        assert!(a.iter().all(|x| x.abs() <= 0.5));
        assert_eq!(center(&c, 3, "zero", 3, 0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn energy_spread_matches_the_single_qubit_value() {
        // <0|X|0> = 0 and <0|X^2|0> = 1
        let h = PauliSum::parse("1 X").unwrap();
        let s = energy_spread(&h, &StateVector::zero(1).unwrap()).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        let z = PauliSum::parse("1 Z").unwrap();
        assert_eq!(
            energy_spread(&z, &StateVector::zero(1).unwrap()).unwrap(),
            0.0
        );
    }

    #[test]
    fn bounds_row_has_one_value_per_column() {
        let c = Config::default();
        let rc = RunContext {
            cfg: &c,
            seed: 0,
            long_run: false,
        };
        let r = bounds(&rc).unwrap();
        let t = &r.tables[0].1;
        assert_eq!(t.len(), 1);
        assert_eq!(t.rows()[0].len(), t.header().len());
        assert_eq!(t.column("thm5_valid").unwrap(), vec![1.0]);
    }
}
