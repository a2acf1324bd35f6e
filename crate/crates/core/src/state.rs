//! Normalized statevectors and exact real/imaginary time evolution.
//!
//! Evolution never forms a matrix: `exp(zH) v` is built from repeated
//! [`PauliSum::matvec_raw`] calls in a scaled truncated Taylor series, so
//! memory stays at a few copies of the `2^n` amplitude vector.

use std::io::Write;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pauli::{dot_raw, norm_raw, normalize_raw, PauliSum, MAX_QUBITS};

/// Tolerance on `|norm - 1|` for states handed in from outside.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Largest register accepted for Bell-pair constructions (`2n` qubits).
pub const BELL_MAX_QUBITS: usize = 12;

const SERIES_RTOL: f64 = 1e-14;
const SERIES_MAX_ORDER: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::ResourceGuard(format!(
            "qubit count {n} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(n: usize) -> Result<Self> {
        StateVector::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        if index >= dim {
            return Err(Error::invalid(format!(
                "basis index {index} out of range for {n} qubits"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    /// `|+>^n`.
    pub fn plus(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        let a = 1.0 / (dim as f64).sqrt();
        Ok(StateVector {
            n,
            amps: vec![C64::new(a, 0.0); dim],
        })
    }

    /// Haar-random state (normalized complex Gaussian vector).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        check_qubits(n)?;
        let amps: Vec<C64> = (0..1usize << n)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        StateVector::normalized(n, amps)
    }

    /// Normalizes `amps`; fails on a zero or non-finite vector.
    pub fn normalized(n: usize, mut amps: Vec<C64>) -> Result<Self> {
        check_qubits(n)?;
        if amps.len() != 1usize << n {
            return Err(Error::LengthMismatch {
                expected: 1usize << n,
                got: amps.len(),
            });
        }
        let nrm = norm_raw(&amps);
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::Numeric(format!(
                "cannot normalize vector with norm {nrm}"
            )));
        }
        amps.iter_mut().for_each(|a| *a /= nrm);
        Ok(StateVector { n, amps })
    }

    /// Accepts amplitudes that are already normalized to [`NORM_TOLERANCE`].
    pub fn from_amplitudes(n: usize, amps: Vec<C64>) -> Result<Self> {
        check_qubits(n)?;
        if amps.len() != 1usize << n {
            return Err(Error::LengthMismatch {
                expected: 1usize << n,
                got: amps.len(),
            });
        }
        let nrm = norm_raw(&amps);
        if (nrm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::invalid(format!(
                "amplitudes have norm {nrm}, expected 1"
            )));
        }
        Ok(StateVector { n, amps })
    }

    /// Tensor product of single-qubit states, qubit 0 first.
    pub fn product(factors: &[[C64; 2]]) -> Result<Self> {
        check_qubits(factors.len())?;
        let mut amps = vec![C64::new(1.0, 0.0)];
        for f in factors {
            let mut next = Vec::with_capacity(amps.len() * 2);
            for a in &amps {
                next.push(a * f[0]);
                next.push(a * f[1]);
            }
            amps = next;
        }
        StateVector::normalized(factors.len(), amps)
    }

    pub(crate) fn from_raw_unchecked(n: usize, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), 1usize << n);
        StateVector { n, amps }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_raw(&self.amps)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.n != other.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(dot_raw(&self.amps, &other.amps))
    }

    /// `|self> (x) |other>`, `self` on the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        check_qubits(self.n + other.n)?;
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector {
            n: self.n + other.n,
            amps,
        })
    }

    /// `exp(-i H t) |self>`.
    pub fn evolve_real(&self, h: &PauliSum, t: f64) -> Result<StateVector> {
        if !t.is_finite() {
            return Err(Error::invalid(format!(
                "evolution time must be finite, got {t}"
            )));
        }
        check_same(self, h)?;
        let mut amps = self.amps.clone();
        expm_action(h, C64::new(0.0, -t), &mut amps, false)?;
        let nrm = normalize_raw(&mut amps);
        if (nrm - 1.0).abs() > 1e-10 {
            return Err(Error::Numeric(format!(
                "real-time evolution drifted to norm {nrm}"
            )));
        }
        Ok(StateVector { n: self.n, amps })
    }

    /// `exp(-tau H) |self> / ||exp(-tau H) |self>||`.
    pub fn evolve_imaginary(&self, h: &PauliSum, tau: f64) -> Result<StateVector> {
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::invalid(format!(
                "imaginary time must be finite and >= 0, got {tau}"
            )));
        }
        check_same(self, h)?;
        let mut amps = self.amps.clone();
        expm_action(h, C64::new(-tau, 0.0), &mut amps, true)?;
        normalize_raw(&mut amps);
        Ok(StateVector { n: self.n, amps })
    }

    /// Writes `basis_index,re,im` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "basis_index,re,im")?;
        for (i, a) in self.amps.iter().enumerate() {
            writeln!(w, "{i},{},{}", a.re, a.im)?;
        }
        Ok(())
    }
}

fn check_same(v: &StateVector, h: &PauliSum) -> Result<()> {
    if v.n != h.n() {
        return Err(Error::QubitMismatch {
            expected: v.n,
            got: h.n(),
        });
    }
    Ok(())
}

/// `|<u|v>|^2`.
pub fn fidelity(u: &StateVector, v: &StateVector) -> Result<f64> {
    Ok(u.inner(v)?.norm_sqr().min(1.0))
}

/// `prod_j |phi+>_{A_j B_j}` on `2n` qubits ordered `A_1..A_n B_1..B_n`:
/// amplitude `2^{-n/2}` on every index `x * 2^n + x`.
pub fn bell_pair_state(n: usize) -> Result<StateVector> {
    if n == 0 || 2 * n > BELL_MAX_QUBITS {
        return Err(Error::ResourceGuard(format!(
            "Bell construction needs 1 <= n and 2n <= {BELL_MAX_QUBITS}, got n = {n}"
        )));
    }
    let half = 1usize << n;
    let mut amps = vec![C64::new(0.0, 0.0); half * half];
    let a = 1.0 / (half as f64).sqrt();
    for x in 0..half {
        amps[x * half + x] = C64::new(a, 0.0);
    }
    Ok(StateVector { n: 2 * n, amps })
}

/// In-place `v <- exp(z H) v` by scaling-and-squaring the Taylor series:
/// the interval is split so `|z| * ||H||_1 <= 1` per substep and each
/// substep's series stops once a term falls below `1e-14` of the sum.
/// With `renormalize` the vector is rescaled after every substep, which keeps
/// imaginary-time runs away from overflow.
pub(crate) fn expm_action(h: &PauliSum, z: C64, v: &mut Vec<C64>, renormalize: bool) -> Result<()> {
    let scale = h.triangle_norm() * z.norm();
    if scale == 0.0 {
        return Ok(());
    }
    let steps = scale.ceil().max(1.0) as usize;
    let zs = z / steps as f64;
    let dim = v.len();
    let mut term = vec![C64::new(0.0, 0.0); dim];
    let mut next = vec![C64::new(0.0, 0.0); dim];
    for _ in 0..steps {
        term.copy_from_slice(v);
        let mut converged = false;
        for k in 1..=SERIES_MAX_ORDER {
            h.matvec_raw(&term, &mut next);
            let f = zs / k as f64;
            for (t, nx) in term.iter_mut().zip(&next) {
                *t = nx * f;
            }
            for (a, t) in v.iter_mut().zip(&term) {
                *a += t;
            }
            if norm_raw(&term) <= SERIES_RTOL * norm_raw(v) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numeric("Taylor series did not converge".into()));
        }
        if renormalize {
            let nrm = normalize_raw(v);
            if !(nrm.is_finite() && nrm > 0.0) {
                return Err(Error::Numeric(format!(
                    "evolution underflow: substep norm {nrm}"
                )));
            }
        }
    }
    if v.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::Numeric(
            "non-finite amplitude after evolution".into(),
        ));
    }
    Ok(())
}
