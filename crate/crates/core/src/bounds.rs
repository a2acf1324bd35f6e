//! Closed-form variance, convexity and adiabatic bounds.
//!
//! Functions returning a [`BoundReport`] never refuse inputs that merely
//! violate a theorem's preconditions; they report each condition with its
//! margin (`rhs - lhs`, non-negative when satisfied) and set `valid`
//! accordingly. Inputs outside a formula's domain (negative radii, `r0`
//! outside `(0, 1)`, ...) are errors.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const R0_DEFAULT: f64 = 0.5;
pub const ETA0_DEFAULT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub satisfied: bool,
    pub margin: f64,
}

impl Condition {
    /// `lhs <= rhs`, with a relative slack of a few ulps so that boundary
    /// cases computed two ways still count as satisfied.
    fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        let slack = 4.0 * f64::EPSILON * lhs.abs().max(rhs.abs());
        Condition {
            name: name.to_string(),
            satisfied: lhs <= rhs + slack,
            margin: rhs - lhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: String,
    pub value: f64,
    pub valid: bool,
    pub conditions: Vec<Condition>,
}

impl BoundReport {
    fn new(bound: &str, value: f64, conditions: Vec<Condition>) -> Self {
        let valid = conditions.iter().all(|c| c.satisfied);
        BoundReport {
            bound: bound.to_string(),
            value,
            valid,
            conditions,
        }
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .conditions
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(0)
            .max(5);
        writeln!(f, "{:<width$}  {}", "bound", self.bound)?;
        writeln!(f, "{:<width$}  {:.6e}", "value", self.value)?;
        writeln!(f, "{:<width$}  {}", "valid", self.valid)?;
        for c in &self.conditions {
            writeln!(
                f,
                "{:<width$}  {} (margin {:.6e})",
                c.name,
                if c.satisfied { "ok" } else { "VIOLATED" },
                c.margin
            )?;
        }
        Ok(())
    }
}

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::invalid(format!(
            "{name} must be finite and >= 0, got {x}"
        )));
    }
    Ok(())
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("M must be >= 1"));
    }
    Ok(())
}

fn check_r0(r0: f64) -> Result<()> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::invalid(format!("r0 must lie in (0, 1), got {r0}")));
    }
    Ok(())
}

/// `E[cos^2 a]` for `a ~ U(-r, r)`.
pub fn k_plus(r: f64) -> Result<f64> {
    check_nonneg("r", r)?;
    if r == 0.0 {
        return Ok(1.0);
    }
    Ok(0.5 + (2.0 * r).sin() / (4.0 * r))
}

/// `E[cos^4 a]` for `a ~ U(-r, r)`.
pub fn c_plus(r: f64) -> Result<f64> {
    check_nonneg("r", r)?;
    if r == 0.0 {
        return Ok(1.0);
    }
    Ok(3.0 / 8.0 + (2.0 * r).sin() / (4.0 * r) + (4.0 * r).sin() / (32.0 * r))
}

/// `min over x in [-1, 1] of (k^{M-1} delta + (1 - k^{M-1}) x)^2`, by the
/// clamped stationary point.
fn min_over_xi(kpow: f64, delta: f64) -> f64 {
    let a = kpow * delta;
    let b = 1.0 - kpow;
    if b <= 0.0 {
        return a * a;
    }
    if a.abs() <= b {
        0.0
    } else {
        let d = a.abs() - b;
        d * d
    }
}

/// Variance lower bound `(c+ - k+^2) min_xi (k+^{M-1} Delta + (1 - k+^{M-1}) xi)^2`.
pub fn prop1_bound(r: f64, m: usize, delta: f64) -> Result<f64> {
    check_m(m)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("r must be > 0, got {r}")));
    }
    if !(delta.abs() <= 1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "Delta must lie in [-1, 1], got {delta}"
        )));
    }
    let k = k_plus(r)?;
    let spread = c_plus(r)? - k * k;
    Ok(spread.max(0.0) * min_over_xi(k.powi(m as i32 - 1), delta.clamp(-1.0, 1.0)))
}

/// Which `r0` factor the variance value carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum R0Factor {
    /// `(1 - r0^2)`, as derived.
    #[default]
    Derived,
    /// `(1 - r0)`, as stated in the theorem's headline.
    Stated,
}

impl R0Factor {
    fn apply(self, r0: f64) -> f64 {
        match self {
            R0Factor::Derived => 1.0 - r0 * r0,
            R0Factor::Stated => 1.0 - r0,
        }
    }
}

fn poly_r(r: f64) -> f64 {
    (4.0 * r.powi(4) / 45.0) * (1.0 - 4.0 * r * r / 7.0)
}

/// `3 r0^2 num / (2 (M - 1) den)`, infinite for `M = 1`.
fn region_rhs(r0: f64, m: usize, num: f64, den: f64) -> f64 {
    if m == 1 {
        f64::INFINITY
    } else {
        3.0 * r0 * r0 * num / (2.0 * (m as f64 - 1.0) * den)
    }
}

/// Real-time variance lower bound on `V(theta*, r)`.
pub fn thm5_bound(
    r: f64,
    r0: f64,
    m: usize,
    lambda: f64,
    dt: f64,
    factor: R0Factor,
) -> Result<BoundReport> {
    check_nonneg("r", r)?;
    check_r0(r0)?;
    check_m(m)?;
    check_nonneg("lambda_max", lambda)?;
    check_nonneg("dt", dt)?;
    let x = (lambda * dt).powi(2);
    let dt_limit = if lambda == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (2.0 * lambda)
    };
    let conditions = vec![
        Condition::le("dt <= 1/(2 lambda)", dt, dt_limit),
        Condition::le(
            "r^2 <= region",
            r * r,
            region_rhs(r0, m, 1.0 - 4.0 * x, 1.0 - 2.0 * x),
        ),
    ];
    let inner = factor.apply(r0) * (1.0 - 4.0 * x).max(0.0);
    Ok(BoundReport::new(
        "thm5",
        poly_r(r) * inner * inner,
        conditions,
    ))
}

/// General fidelity-type variance lower bound from the target overlap
/// `F_target(theta*)`.
pub fn thm4_bound(r: f64, r0: f64, m: usize, f_target: f64) -> Result<BoundReport> {
    check_nonneg("r", r)?;
    check_r0(r0)?;
    check_m(m)?;
    if !(0.0..=1.0 + 1e-12).contains(&f_target) {
        return Err(Error::invalid(format!(
            "F_target must lie in [0, 1], got {f_target}"
        )));
    }
    let region = if f_target > 0.0 {
        (1.0 + 2.0 * f_target) / (2.0 * f_target) * region_rhs(r0, m, 1.0, 1.0)
    } else {
        0.0
    };
    let conditions = vec![
        Condition::le("F_target >= 1/2", 0.5, f_target),
        Condition::le("r^2 <= region", r * r, region),
    ];
    let inner = (1.0 - r0 * r0) * (2.0 * f_target - 1.0);
    let value = if f_target >= 0.5 {
        poly_r(r) * inner * inner
    } else {
        0.0
    };
    Ok(BoundReport::new("thm4", value, conditions))
}

/// Real-time epsilon-convexity radius around `theta*`.
pub fn convexity_radius(
    mu_min: f64,
    eps: f64,
    m: usize,
    lambda: f64,
    dt: f64,
) -> Result<BoundReport> {
    convexity_common("convexity_radius", mu_min, eps, m, lambda * dt, 16.0)
}

fn convexity_common(
    name: &str,
    mu_min: f64,
    eps: f64,
    m: usize,
    ldt: f64,
    dt_den: f64,
) -> Result<BoundReport> {
    check_m(m)?;
    check_nonneg("lambda dt", ldt)?;
    if !mu_min.is_finite() || !eps.is_finite() {
        return Err(Error::invalid("mu_min and eps must be finite"));
    }
    let mf = m as f64;
    let gap = mu_min + 2.0 * eps.abs();
    // the step condition: lambda dt <= gap / (dt_den M)
    let conditions = vec![Condition::le("dt condition", ldt, gap / (dt_den * mf))];
    let shrink = ldt * dt_den / 16.0;
    let value = ((gap / (16.0 * mf) - shrink) / mf).max(0.0);
    Ok(BoundReport::new(name, value, conditions))
}

/// Bound on `||theta_A(dt) - theta*||_2` from one curvature value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvolutionKind {
    RealTime,
    ImaginaryTime,
}

/// `2 sqrt(M) lambda dt / beta_A` (real time) or `4 sqrt(M) lambda dtau / beta_A`
/// (imaginary time). `None` when `beta_A <= 0`, where the bound is void.
pub fn adiabatic_shift_bound(
    m: usize,
    lambda: f64,
    dt: f64,
    beta_a: f64,
    kind: EvolutionKind,
) -> Result<Option<f64>> {
    check_m(m)?;
    check_nonneg("lambda_max", lambda)?;
    check_nonneg("dt", dt)?;
    if beta_a.is_nan() {
        return Err(Error::invalid("beta_A is NaN"));
    }
    if beta_a <= 0.0 {
        return Ok(None);
    }
    let c = match kind {
        EvolutionKind::RealTime => 2.0,
        EvolutionKind::ImaginaryTime => 4.0,
    };
    Ok(Some(c * (m as f64).sqrt() * lambda * dt / beta_a))
}

/// `(dt_grad, dt_convex)`: the step sizes up to which the adiabatic minimum
/// stays within the small-gradient and the convex region respectively.
pub fn adiabatic_dt_limits(
    m: usize,
    lambda: f64,
    beta_a: f64,
    eta0: f64,
    mu_min: f64,
    eps: f64,
) -> Result<(f64, f64)> {
    adiabatic_limits_common(m, lambda, beta_a, eta0, mu_min, eps, 2.0, 32.0, 0.5)
}

#[allow(clippy::too_many_arguments)]
fn adiabatic_limits_common(
    m: usize,
    lambda: f64,
    beta_a: f64,
    eta0: f64,
    mu_min: f64,
    eps: f64,
    grad_den: f64,
    convex_den: f64,
    beta_coeff: f64,
) -> Result<(f64, f64)> {
    check_m(m)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "lambda_max must be > 0, got {lambda}"
        )));
    }
    if !(beta_a > 0.0) {
        return Err(Error::invalid(format!("beta_A must be > 0, got {beta_a}")));
    }
    if !(eta0 > 0.0) {
        return Err(Error::invalid(format!("eta0 must be > 0, got {eta0}")));
    }
    let mf = m as f64;
    let grad = eta0 * beta_a / (grad_den * mf * lambda);
    let m32 = mf.powf(1.5);
    let convex = (beta_a * (mu_min + 2.0 * eps.abs())
        / (convex_den * lambda * mf.powf(2.5) * (1.0 + beta_coeff * beta_a / m32)))
        .max(0.0);
    Ok((grad, convex))
}

/// The imaginary-time counterparts of the variance, convexity and
/// adiabatic statements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IteBounds {
    pub variance: BoundReport,
    pub convexity: BoundReport,
    pub dtau_grad: f64,
    pub dtau_convex: f64,
    pub adiabatic: BoundReport,
}

/// Imaginary-time variance lower bound.
pub fn ite_variance_bound(
    r: f64,
    r0: f64,
    m: usize,
    lambda: f64,
    dtau: f64,
) -> Result<BoundReport> {
    check_nonneg("r", r)?;
    check_r0(r0)?;
    check_m(m)?;
    check_nonneg("lambda_max", lambda)?;
    check_nonneg("dtau", dtau)?;
    let x = (lambda * dtau).powi(2);
    let limit = if lambda == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (24f64.sqrt() * lambda)
    };
    let conditions = vec![
        Condition::le("dtau <= 1/(sqrt(24) lambda)", dtau, limit),
        Condition::le(
            "r^2 <= region",
            r * r,
            region_rhs(r0, m, 1.0 - 24.0 * x, 1.0 - 12.0 * x),
        ),
    ];
    let inner = (1.0 - r0 * r0) * (1.0 - 24.0 * x).max(0.0);
    Ok(BoundReport::new(
        "ite_variance",
        poly_r(r) * inner * inner,
        conditions,
    ))
}

/// Imaginary-time epsilon-convexity radius.
pub fn ite_convexity_radius(
    mu_min: f64,
    eps: f64,
    m: usize,
    lambda: f64,
    dtau: f64,
) -> Result<BoundReport> {
    convexity_common("ite_convexity_radius", mu_min, eps, m, lambda * dtau, 48.0)
}

/// Imaginary-time `(dtau_grad, dtau_convex)`.
pub fn ite_adiabatic_limits(
    m: usize,
    lambda: f64,
    beta_a: f64,
    eta0: f64,
    mu_min: f64,
    eps: f64,
) -> Result<(f64, f64)> {
    adiabatic_limits_common(m, lambda, beta_a, eta0, mu_min, eps, 4.0, 64.0, 0.75)
}

#[allow(clippy::too_many_arguments)]
pub fn ite_bounds(
    r: f64,
    r0: f64,
    m: usize,
    lambda: f64,
    dtau: f64,
    mu_min: f64,
    eps: f64,
    beta_a: f64,
    eta0: f64,
) -> Result<IteBounds> {
    let variance = ite_variance_bound(r, r0, m, lambda, dtau)?;
    let convexity = ite_convexity_radius(mu_min, eps, m, lambda, dtau)?;
    let (dtau_grad, dtau_convex) = ite_adiabatic_limits(m, lambda, beta_a, eta0, mu_min, eps)?;
    let adiabatic = BoundReport::new(
        "ite_adiabatic",
        dtau_grad.min(dtau_convex),
        vec![
            Condition::le("dtau <= dtau_grad", dtau, dtau_grad),
            Condition::le("dtau <= dtau_convex", dtau, dtau_convex),
        ],
    );
    Ok(IteBounds {
        variance,
        convexity,
        dtau_grad,
        dtau_convex,
        adiabatic,
    })
}

/// Maximum absolute row sum, which bounds every eigenvalue's magnitude.
pub fn gershgorin_row_bound(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::invalid(format!(
            "matrix is {}x{}, not square",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn moments_at_edges() {
        assert_eq!(k_plus(0.0).unwrap(), 1.0);
        assert_eq!(c_plus(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(k_plus(1e-9).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k_plus(std::f64::consts::PI).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            c_plus(std::f64::consts::PI).unwrap(),
            0.375,
            epsilon = 1e-15
        );
        assert!(k_plus(-0.1).is_err());
    }

    #[test]
    fn moment_identity() {
        for r in [0.1, 0.5, 1.0, std::f64::consts::PI] {
            let lhs = c_plus(r).unwrap() - k_plus(r).unwrap().powi(2);
            let rhs = (-1.0 + 4.0 * r * r + (4.0 * r).cos() + r * (4.0 * r).sin()) / (32.0 * r * r);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn prop1_special_cases() {
        let r = 0.3;
        let spread = c_plus(r).unwrap() - k_plus(r).unwrap().powi(2);
        assert_abs_diff_eq!(
            prop1_bound(r, 1, 0.7).unwrap(),
            spread * 0.49,
            epsilon = 1e-16
        );
        assert_eq!(prop1_bound(r, 10, 0.0).unwrap(), 0.0);
        let b = prop1_bound(0.1, 20, 1.0).unwrap();
        let k19 = k_plus(0.1).unwrap().powi(19);
        let spread = c_plus(0.1).unwrap() - k_plus(0.1).unwrap().powi(2);
        assert_abs_diff_eq!(b, spread * (2.0 * k19 - 1.0).powi(2), epsilon = 1e-18);
        assert!(b > 0.0);
    }

    #[test]
    fn thm5_values() {
        let rep = thm5_bound(0.1, 0.5, 20, 3.0, 0.0, R0Factor::Derived).unwrap();
        let want = (4e-4 / 45.0) * (1.0 - 0.04 / 7.0) * 0.75f64.powi(2);
        assert_abs_diff_eq!(rep.value, want, epsilon = 1e-18);
        assert_abs_diff_eq!(rep.value, 4.970e-6, epsilon = 5e-9);
        assert!(rep.valid);
        let edge = thm5_bound(0.01, 0.5, 20, 2.0, 0.25, R0Factor::Derived).unwrap();
        assert_eq!(edge.value, 0.0);
        assert!(edge.conditions[0].satisfied);
        assert_abs_diff_eq!(edge.conditions[0].margin, 0.0, epsilon = 1e-15);
        let stated = thm5_bound(0.1, 0.5, 20, 3.0, 0.0, R0Factor::Stated).unwrap();
        assert_abs_diff_eq!(stated.value, want / 0.5625 * 0.25, epsilon = 1e-18);
        assert!(thm5_bound(0.1, 1.0, 20, 1.0, 0.0, R0Factor::Derived).is_err());
    }

    #[test]
    fn thm4_values() {
        let a = thm4_bound(0.1, 0.5, 20, 1.0).unwrap();
        let b = thm5_bound(0.1, 0.5, 20, 1.0, 0.0, R0Factor::Derived).unwrap();
        assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-20);
        let half = thm4_bound(0.1, 0.5, 20, 0.5).unwrap();
        assert_eq!(half.value, 0.0);
        let low = thm4_bound(0.1, 0.5, 20, 0.4).unwrap();
        assert!(!low.valid);
        assert_eq!(low.value, 0.0);
        let mid = thm4_bound(0.1, 0.5, 20, 0.75).unwrap();
        assert_abs_diff_eq!(mid.value, b.value * 0.25, epsilon = 1e-20);
    }

    #[test]
    fn convexity_values() {
        let rep = convexity_radius(0.1, 0.05, 20, 1.0, 1e-4).unwrap();
        assert_abs_diff_eq!(rep.value, 2.625e-5, epsilon = 1e-15);
        assert!(rep.valid);
        let limit = 0.2 / (16.0 * 20.0);
        let edge = convexity_radius(0.1, 0.05, 20, 1.0, limit).unwrap();
        assert_abs_diff_eq!(edge.value, 0.0, epsilon = 1e-18);
        assert!(edge.valid);
        assert!(
            !convexity_radius(0.1, 0.05, 20, 1.0, 2.0 * limit)
                .unwrap()
                .valid
        );
    }

    #[test]
    fn ite_reduces_to_real_time_at_zero() {
        let v = ite_variance_bound(0.1, 0.5, 20, 1.0, 0.0).unwrap();
        let r = thm5_bound(0.1, 0.5, 20, 1.0, 0.0, R0Factor::Derived).unwrap();
        assert_eq!(v.value, r.value);
        let c = ite_convexity_radius(0.1, 0.05, 20, 1.0, 0.0).unwrap();
        let rc = convexity_radius(0.1, 0.05, 20, 1.0, 0.0).unwrap();
        assert_eq!(c.value, rc.value);
        let edge = ite_variance_bound(0.1, 0.5, 20, 1.0, 1.0 / 24f64.sqrt()).unwrap();
        assert_abs_diff_eq!(edge.value, 0.0, epsilon = 1e-30);
        let spot = ite_bounds(0.1, 0.5, 20, 1.0, 0.05, 0.1, 0.05, 1.0, 0.5).unwrap();
        assert!(spot.variance.value > 0.0 && spot.variance.value.is_finite());
        assert!(spot.variance.conditions[0].satisfied);
    }

    #[test]
    fn ite_convexity_uses_three_lambda() {
        let rep = ite_convexity_radius(0.1, 0.05, 20, 1.0, 1e-4).unwrap();
        assert_abs_diff_eq!(rep.value, (0.2 / 320.0 - 3e-4) / 20.0, epsilon = 1e-15);
        let limit = 0.2 / (48.0 * 20.0);
        assert!(
            ite_convexity_radius(0.1, 0.05, 20, 1.0, limit)
                .unwrap()
                .valid
        );
        assert!(
            !ite_convexity_radius(0.1, 0.05, 20, 1.0, limit * 1.01)
                .unwrap()
                .valid
        );
    }

    #[test]
    fn adiabatic_values() {
        assert_eq!(
            adiabatic_shift_bound(4, 2.0, 0.0, 0.5, EvolutionKind::RealTime).unwrap(),
            Some(0.0)
        );
        let b = adiabatic_shift_bound(4, 2.0, 0.05, 0.5, EvolutionKind::RealTime)
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(b, 0.8, epsilon = 1e-15);
        let i = adiabatic_shift_bound(4, 2.0, 0.05, 0.5, EvolutionKind::ImaginaryTime)
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(i, 1.6, epsilon = 1e-15);
        assert_eq!(
            adiabatic_shift_bound(4, 2.0, 0.05, -0.1, EvolutionKind::RealTime).unwrap(),
            None
        );

        let (g, c) = adiabatic_dt_limits(4, 1.0, 1.0, 0.5, 0.3, 0.01).unwrap();
        assert_abs_diff_eq!(g, 0.0625, epsilon = 1e-15);
        assert_abs_diff_eq!(
            c,
            0.32 / (32.0 * 32.0 * (1.0 + 1.0 / 16.0)),
            epsilon = 1e-15
        );
        assert_eq!(
            adiabatic_dt_limits(4, 1.0, 1.0, 0.5, 0.0, 0.0).unwrap().1,
            0.0
        );
        let (_, c2) = adiabatic_dt_limits(4, 2.0, 1.0, 0.5, 0.3, 0.01).unwrap();
        assert_abs_diff_eq!(c2, c / 2.0, epsilon = 1e-15);

        let (g, c) = ite_adiabatic_limits(4, 1.0, 1.0, 0.5, 0.3, 0.01).unwrap();
        assert_abs_diff_eq!(g, 0.5 / 16.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            c,
            0.32 / (64.0 * 32.0 * (1.0 + 0.75 / 8.0)),
            epsilon = 1e-15
        );
    }

    #[test]
    fn gershgorin() {
        assert_eq!(gershgorin_row_bound(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        assert_eq!(
            gershgorin_row_bound(&DMatrix::from_diagonal(&nalgebra::dvector![1.0, -5.0])).unwrap(),
            5.0
        );
        assert!(gershgorin_row_bound(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn report_serializes() {
        let rep = thm5_bound(0.1, 0.5, 20, 1.0, 0.01, R0Factor::Derived).unwrap();
        let text = rep.to_string();
        assert!(text.contains("dt <= 1/(2 lambda)"));
        assert!(text.lines().count() >= 5);
    }

    proptest! {
        #[test]
        fn gershgorin_dominates_spectrum(vals in proptest::collection::vec(-2.0f64..2.0, 100)) {
            let a = DMatrix::from_vec(10, 10, vals);
            let s = (&a + a.transpose()) * 0.5;
            let eig = nalgebra::SymmetricEigen::new(s.clone()).eigenvalues;
            let bound = gershgorin_row_bound(&s).unwrap();
            prop_assert!(eig.iter().all(|l| l.abs() <= bound + 1e-12));
        }

        #[test]
        fn bounds_are_nonnegative(r in 0.001f64..1.0, r0 in 0.01f64..0.99, m in 1usize..64,
                                  lambda in 0.0f64..5.0, dt in 0.0f64..1.0, delta in -1.0f64..1.0) {
            prop_assert!(thm5_bound(r, r0, m, lambda, dt, R0Factor::Derived).unwrap().value >= 0.0);
            prop_assert!(ite_variance_bound(r, r0, m, lambda, dt).unwrap().value >= 0.0);
            prop_assert!(prop1_bound(r, m, delta).unwrap() >= 0.0);
        }

        #[test]
        fn thm5_below_prop1_when_valid(r in 0.001f64..0.5, r0 in 0.05f64..0.95, m in 2usize..40,
                                       lambda in 0.1f64..3.0, frac in 0.0f64..1.0) {
            let dt = frac / (2.0 * lambda);
            let rep = thm5_bound(r, r0, m, lambda, dt, R0Factor::Derived).unwrap();
            prop_assume!(rep.valid);
            // the smallest Delta compatible with the time step
            let delta = 1.0 - 4.0 * (lambda * dt).powi(2);
            prop_assert!(rep.value <= prop1_bound(r, m, delta).unwrap() * (1.0 + 1e-9) + 1e-300);
        }
    }
}
