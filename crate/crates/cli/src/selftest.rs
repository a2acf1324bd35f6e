//! Oracle checks on one and two qubits, each against a closed form or an
//! independent numerical route.

use rand::Rng;

use warmstart::bounds::{self, R0Factor};
use warmstart::circuit::{build_hea, Ansatz};
use warmstart::landscape::{self, HypercubeRegion};
use warmstart::loss::{LossContext, LossKind};
use warmstart::optimize::{self, CompressOptions, OptimizerOptions, Schedule};
use warmstart::table::Table;
use warmstart::{fidelity, seed, PauliSum, StateVector, C64};

use crate::output::Report;
use crate::runs::RunContext;
use crate::CliError;

struct Check {
    name: &'static str,
    /// Deviation from the oracle, or a signed slack where `<= tol` means pass.
    value: f64,
    tol: f64,
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn checks(master: u64) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    let mut rng = seed::rng(seed::derive_named(master, "selftest"));

    let ry = Ansatz::parse("ROT 0 Y")?;
    let z = PauliSum::parse("1 Z")?;
    let zero1 = StateVector::zero(1)?;
    let ctx = LossContext::with_center(
        ry.clone(),
        z.clone(),
        zero1.clone(),
        LossKind::RealTime,
        vec![0.0],
        0.0,
    )?;
    out.push(Check {
        name: "one-qubit loss equals sin^2(theta)",
        value: (ctx.loss(&[0.3])? - 0.3f64.sin().powi(2)).abs(),
        tol: 1e-12,
    });

    let x = PauliSum::parse("1 X")?;
    let t = 0.7f64;
    let evolved = zero1.evolve_real(&x, t)?;
    let expect = [C64::new(t.cos(), 0.0), C64::new(0.0, -t.sin())];
    let dev = evolved
        .amplitudes()
        .iter()
        .zip(&expect)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    out.push(Check {
        name: "exp(-iXt)|0> closed form",
        value: dev,
        tol: 1e-12,
    });

    let tau = 0.4f64;
    let cooled = StateVector::plus(1)?.evolve_imaginary(&z, tau)?;
    let norm = ((-2.0 * tau).exp() + (2.0 * tau).exp()).sqrt();
    let target = StateVector::normalized(
        1,
        vec![
            C64::new((-tau).exp() / norm, 0.0),
            C64::new(tau.exp() / norm, 0.0),
        ],
    )?;
    out.push(Check {
        name: "exp(-Z tau)|+> closed form",
        value: 1.0 - fidelity(&cooled, &target)?,
        tol: 1e-12,
    });

    let h2 = PauliSum::xz_chain(2)?;
    let hea = build_hea(2, 2, None)?;
    let m = hea.num_params();
    let star: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let theta: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let zero2 = StateVector::zero(2)?;
    let rt = LossContext::with_center(
        hea.clone(),
        h2.clone(),
        zero2.clone(),
        LossKind::RealTime,
        star.clone(),
        0.1,
    )?;
    let g = rt.gradient(&theta)?;
    let eps = 1e-5;
    let fd = (0..m)
        .map(|i| {
            let mut p = theta.clone();
            let mut q = theta.clone();
            p[i] += eps;
            q[i] -= eps;
            Ok((rt.loss(&p)? - rt.loss(&q)?) / (2.0 * eps))
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    out.push(Check {
        name: "parameter shift matches central differences",
        value: max_abs(&g, &fd),
        tol: 1e-6,
    });

    let at_center = LossContext::with_center(
        hea.clone(),
        h2.clone(),
        zero2.clone(),
        LossKind::RealTime,
        star.clone(),
        0.0,
    )?;
    let hess = at_center.hessian(&star)?;
    let qfi = at_center.qfi(&star)?;
    out.push(Check {
        name: "hessian at the center equals half the QFI",
        value: (&hess - &qfi * 0.5).amax(),
        tol: 1e-8,
    });

    let hst = LossContext::with_center(
        hea.clone(),
        h2.clone(),
        zero2.clone(),
        LossKind::UnitaryHst,
        star.clone(),
        0.3,
    )?;
    let bell = LossContext::with_center(hea, h2, zero2, LossKind::UnitaryBell, star, 0.3)?;
    out.push(Check {
        name: "HST loss equals the Bell-pair form",
        value: (hst.loss(&theta)? - bell.loss(&theta)?).abs(),
        tol: 1e-10,
    });

    // sin^2 over a full period: E[sin^4] - E[sin^2]^2 = 3/8 - 1/4
    let est = landscape::estimate_variance(
        &ctx,
        &HypercubeRegion::new(vec![0.0], std::f64::consts::PI)?,
        20_000,
        seed::derive_named(master, "selftest-variance"),
    )?;
    out.push(Check {
        name: "full-period variance of sin^2 is 1/8 (4 standard errors)",
        value: (est.variance - 0.125).abs() - 4.0 * est.std_error_of_variance,
        tol: 0.0,
    });

    let thm5 = bounds::thm5_bound(0.1, 0.5, 20, 3.0, 0.0, R0Factor::Derived)?;
    out.push(Check {
        name: "variance bound sits below the sharper bound",
        value: thm5.value - bounds::prop1_bound(0.1, 20, 1.0)?,
        tol: 0.0,
    });

    let r = 1e-3f64;
    out.push(Check {
        name: "k_plus small-r expansion",
        value: (bounds::k_plus(r)? - (1.0 - r * r / 3.0)).abs(),
        tol: 1e-10,
    });

    let log = optimize::compress_run(
        &Ansatz::parse("ROT 0 X")?,
        &x,
        &zero1,
        &Schedule::Fixed(vec![0.1; 10]),
        &OptimizerOptions::default(),
        &CompressOptions::default(),
    )?;
    let worst = log
        .records
        .iter()
        .map(|r| r.final_loss.max(1.0 - r.cumulative_fidelity))
        .fold(0.0, f64::max);
    out.push(Check {
        name: "exactly expressible compression stays exact",
        value: worst,
        tol: 1e-8,
    });
    Ok(out)
}

pub fn run(rc: &RunContext) -> Result<Report, CliError> {
    let list = checks(rc.seed)?;
    let mut t = Table::new(["check", "value", "tolerance", "passed"]);
    let mut text = String::new();
    let mut failed = Vec::new();
    for (i, c) in list.iter().enumerate() {
        let pass = c.value <= c.tol;
        t.push(vec![i as f64, c.value, c.tol, if pass { 1.0 } else { 0.0 }])?;
        text.push_str(&format!(
            "{} {:>2} {:<58} {:.3e}\n",
            if pass { "PASS" } else { "FAIL" },
            i,
            c.name,
            c.value
        ));
        if !pass {
            failed.push(c.name);
        }
    }
    let mut report = Report::default();
    report.table("", t);
    report.note("checks", list.iter().map(|c| c.name).collect::<Vec<_>>());
    report.note("failed", failed.clone());
    report.text = Some(text);
    if !failed.is_empty() {
        report.failure = Some(format!("selftest failed: {}", failed.join("; ")));
    }
    Ok(report)
}
