//! Pauli strings and real-weighted Pauli sums.
//!
//! Qubit 0 is the most significant bit of a basis index: on `n` qubits the
//! basis state `|b_0 b_1 ... b_{n-1}>` has index `sum_q b_q 2^(n-1-q)`. The
//! text format labels qubits left to right in the same order.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::state::StateVector;

pub type C64 = Complex64;

/// Largest register the exact spectral routine accepts.
pub const EXACT_SPECTRAL_MAX_QUBITS: usize = 12;

/// Largest register any statevector routine accepts.
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    I,
    X,
    Y,
    Z,
}

impl Axis {
    pub fn from_char(c: char) -> Option<Axis> {
        match c {
            'I' | 'i' => Some(Axis::I),
            'X' | 'x' => Some(Axis::X),
            'Y' | 'y' => Some(Axis::Y),
            'Z' | 'z' => Some(Axis::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Axis::I => 'I',
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

/// A tensor product of single-qubit Paulis with no global phase.
///
/// Stored as X and Z bit masks in basis-index order; `Y` sets both bits.
/// Acting on a basis state, `P|b> = i^{#Y} (-1)^{|b & z|} |b ^ x>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString { n, x: 0, z: 0 }
    }

    pub fn from_axes(axes: &[Axis]) -> Result<Self> {
        let n = axes.len();
        if n == 0 || n > 63 {
            return Err(Error::invalid(format!(
                "pauli string length {n} out of range 1..=63"
            )));
        }
        let mut p = PauliString::identity(n);
        for (q, &a) in axes.iter().enumerate() {
            p.set(q, a);
        }
        Ok(p)
    }

    /// Single non-identity factor `axis` on qubit `q`.
    pub fn single(n: usize, q: usize, axis: Axis) -> Result<Self> {
        if q >= n {
            return Err(Error::invalid(format!(
                "qubit {q} out of range for {n} qubits"
            )));
        }
        let mut p = PauliString::identity(n);
        p.set(q, axis);
        Ok(p)
    }

    /// `a` on qubit `q` and `b` on qubit `r`.
    pub fn pair(n: usize, q: usize, a: Axis, r: usize, b: Axis) -> Result<Self> {
        if q >= n || r >= n || q == r {
            return Err(Error::invalid(format!(
                "bad qubit pair ({q}, {r}) on {n} qubits"
            )));
        }
        let mut p = PauliString::identity(n);
        p.set(q, a);
        p.set(r, b);
        Ok(p)
    }

    /// Uniformly random string (identity allowed) on `n` qubits.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let axes: Vec<Axis> = (0..n)
            .map(|_| [Axis::I, Axis::X, Axis::Y, Axis::Z][rng.random_range(0..4)])
            .collect();
        PauliString::from_axes(&axes).expect("n in range")
    }

    fn bit(&self, q: usize) -> u64 {
        1u64 << (self.n - 1 - q)
    }

    fn set(&mut self, q: usize, a: Axis) {
        let b = self.bit(q);
        self.x &= !b;
        self.z &= !b;
        match a {
            Axis::I => {}
            Axis::X => self.x |= b,
            Axis::Y => {
                self.x |= b;
                self.z |= b;
            }
            Axis::Z => self.z |= b,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn axis(&self, q: usize) -> Axis {
        let b = self.bit(q);
        match (self.x & b != 0, self.z & b != 0) {
            (false, false) => Axis::I,
            (true, false) => Axis::X,
            (true, true) => Axis::Y,
            (false, true) => Axis::Z,
        }
    }

    pub fn axes(&self) -> Vec<Axis> {
        (0..self.n).map(|q| self.axis(q)).collect()
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub(crate) fn x_mask(&self) -> usize {
        self.x as usize
    }

    /// Sequence of non-identity axes, left to right (`X_2 Z_3` gives `"XZ"`).
    pub fn pattern(&self) -> String {
        self.axes()
            .into_iter()
            .filter(|a| *a != Axis::I)
            .map(Axis::as_char)
            .collect()
    }

    /// The phase `c` with `P|b> = c |b ^ x>`.
    #[inline]
    pub(crate) fn phase(&self, b: usize) -> C64 {
        let ny = (self.x & self.z).count_ones();
        let sign = if ((b as u64) & self.z).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        match ny % 4 {
            0 => C64::new(sign, 0.0),
            1 => C64::new(0.0, sign),
            2 => C64::new(-sign, 0.0),
            _ => C64::new(0.0, -sign),
        }
    }

    /// Places this string on qubits `offset..offset + n` of a `total`-qubit register.
    pub fn embed(&self, total: usize, offset: usize) -> Result<Self> {
        if offset + self.n > total || total > 63 {
            return Err(Error::invalid(format!(
                "cannot embed {} qubits at offset {offset} into {total}",
                self.n
            )));
        }
        let shift = total - offset - self.n;
        Ok(PauliString {
            n: total,
            x: self.x << shift,
            z: self.z << shift,
        })
    }

    /// Whether the two strings commute.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = (self.x & other.z).count_ones() + (self.z & other.x).count_ones();
        anti % 2 == 0
    }

    /// `out = P v` on raw amplitudes.
    pub fn apply_raw(&self, v: &[C64], out: &mut [C64]) {
        debug_assert_eq!(v.len(), out.len());
        let x = self.x_mask();
        for (b, &amp) in v.iter().enumerate() {
            out[b ^ x] = self.phase(b) * amp;
        }
    }

    /// `acc += coeff * P v` on raw amplitudes.
    pub fn accumulate_raw(&self, coeff: C64, v: &[C64], acc: &mut [C64]) {
        let x = self.x_mask();
        for (b, &amp) in v.iter().enumerate() {
            acc[b ^ x] += coeff * self.phase(b) * amp;
        }
    }

    /// In-place `e^{-i angle P}` using `cos(angle) 1 - i sin(angle) P`.
    pub fn rotate_raw(&self, angle: f64, v: &mut [C64]) {
        let (s, c) = angle.sin_cos();
        let x = self.x_mask();
        let mis = C64::new(0.0, -s);
        if x == 0 {
            for (b, amp) in v.iter_mut().enumerate() {
                *amp *= C64::new(c, 0.0) + mis * self.phase(b);
            }
            return;
        }
        // pair (b, b ^ x) with b the member whose highest x bit is clear
        let top = 1usize << (usize::BITS - 1 - x.leading_zeros());
        for b in 0..v.len() {
            if b & top != 0 {
                continue;
            }
            let bp = b ^ x;
            let (vb, vbp) = (v[b], v[bp]);
            // (P v)[b] = phase(bp) v[bp], (P v)[bp] = phase(b) v[b]
            v[b] = c * vb + mis * self.phase(bp) * vbp;
            v[bp] = c * vbp + mis * self.phase(b) * vb;
        }
    }

    /// `P v` as a new state. Pauli strings are unitary so the norm is preserved.
    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.n() != self.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                got: v.n(),
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); v.dim()];
        self.apply_raw(v.amplitudes(), &mut out);
        Ok(StateVector::from_raw_unchecked(self.n, out))
    }

    /// `<v| P |v>`, always real.
    pub fn expectation(&self, v: &StateVector) -> Result<f64> {
        let pv = self.apply(v)?;
        Ok(v.inner(&pv)?.re)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.axes() {
            write!(f, "{}", a.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .trim()
            .chars()
            .map(|c| {
                Axis::from_char(c)
                    .ok_or_else(|| Error::invalid(format!("bad pauli axis '{c}' in \"{s}\"")))
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::from_axes(&axes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMode {
    /// Lanczos estimate of `max |eigenvalue|`.
    Exact,
    /// `sum |coefficient|`, an upper bound on the exact value.
    Triangle,
}

/// A Hermitian operator `sum_k c_k P_k` with real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn new(n: usize) -> Self {
        PauliSum {
            n,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(n: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let mut h = PauliSum::new(n);
        for (c, p) in terms {
            h.push(c, p)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, coeff: f64, p: PauliString) -> Result<()> {
        if p.n() != self.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                got: p.n(),
            });
        }
        if !coeff.is_finite() {
            return Err(Error::invalid("non-finite Pauli coefficient"));
        }
        self.terms.push((coeff, p));
        Ok(())
    }

    /// Open-boundary chain `coupling * sum_q A_q B_{q+1} + field * sum_q F_q`.
    pub fn chain(
        n: usize,
        pair: (Axis, Axis),
        coupling: f64,
        field_axis: Axis,
        field: f64,
    ) -> Result<Self> {
        let mut h = PauliSum::new(n);
        for q in 0..n.saturating_sub(1) {
            h.push(coupling, PauliString::pair(n, q, pair.0, q + 1, pair.1)?)?;
        }
        if field != 0.0 {
            for q in 0..n {
                h.push(field, PauliString::single(n, q, field_axis)?)?;
            }
        }
        Ok(h)
    }

    /// `sum X_q Z_{q+1} - 0.95 sum Y_q`, the model behind the adiabatic-tracking runs.
    pub fn xz_chain(n: usize) -> Result<Self> {
        PauliSum::chain(n, (Axis::X, Axis::Z), 1.0, Axis::Y, -0.95)
    }

    /// `sum X_q X_{q+1} - 0.95 sum Y_q`, the model behind the minima-jump runs.
    pub fn xx_chain(n: usize) -> Result<Self> {
        PauliSum::chain(n, (Axis::X, Axis::X), 1.0, Axis::Y, -0.95)
    }

    /// Random sum of `k` non-identity strings with coefficients in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Self {
        let mut h = PauliSum::new(n);
        while h.terms.len() < k {
            let p = PauliString::random(n, rng);
            if p.is_identity() {
                continue;
            }
            h.terms.push((rng.random_range(-1.0..1.0), p));
        }
        h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn scaled(&self, factor: f64) -> PauliSum {
        PauliSum {
            n: self.n,
            terms: self.terms.iter().map(|(c, p)| (c * factor, *p)).collect(),
        }
    }

    /// Places the sum on qubits `offset..offset + n` of a `total`-qubit register.
    pub fn embed(&self, total: usize, offset: usize) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|(c, p)| Ok((*c, p.embed(total, offset)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliSum { n: total, terms })
    }

    /// `sum |c_k|`.
    pub fn triangle_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    /// `out = H v` on raw amplitudes.
    pub fn matvec_raw(&self, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        for (c, p) in &self.terms {
            p.accumulate_raw(C64::new(*c, 0.0), v, out);
        }
    }

    /// `H v`, unnormalized.
    pub fn matvec(&self, v: &StateVector) -> Result<Vec<C64>> {
        if v.n() != self.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                got: v.n(),
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); v.dim()];
        self.matvec_raw(v.amplitudes(), &mut out);
        Ok(out)
    }

    /// `<v| H |v>`.
    pub fn expectation(&self, v: &StateVector) -> Result<f64> {
        let hv = self.matvec(v)?;
        Ok(v.amplitudes()
            .iter()
            .zip(&hv)
            .map(|(a, b)| (a.conj() * b).re)
            .sum())
    }

    /// The constant `lambda_max` used by every time-step condition: the
    /// spectral norm `max |eigenvalue|` in exact mode, or `sum |c_k|`.
    pub fn spectral_bound(&self, mode: SpectralMode) -> Result<f64> {
        match mode {
            SpectralMode::Triangle => Ok(self.triangle_norm()),
            SpectralMode::Exact => {
                if self.n > EXACT_SPECTRAL_MAX_QUBITS {
                    return Err(Error::ResourceGuard(format!(
                        "exact spectral bound limited to {EXACT_SPECTRAL_MAX_QUBITS} qubits, got {}",
                        self.n
                    )));
                }
                let (lo, hi) = self.extremal_eigenvalues()?;
                Ok(lo.abs().max(hi.abs()))
            }
        }
    }

    /// Smallest and largest eigenvalue via Lanczos with full reorthogonalization.
    pub fn extremal_eigenvalues(&self) -> Result<(f64, f64)> {
        if self.n > EXACT_SPECTRAL_MAX_QUBITS {
            return Err(Error::ResourceGuard(format!(
                "{} qubits exceeds eigen-solver limit",
                self.n
            )));
        }
        let scale = self.triangle_norm();
        if scale == 0.0 {
            return Ok((0.0, 0.0));
        }
        let dim = self.dim();
        let max_steps = dim.min(400);
        let mut rng = crate::seed::rng(0x1A2C_205F);
        let mut q: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        normalize_raw(&mut q);

        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_steps);
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![C64::new(0.0, 0.0); dim];
        let mut result = (0.0, 0.0);
        for step in 0..max_steps {
            self.matvec_raw(&q, &mut w);
            let alpha = dot_raw(&q, &w).re;
            basis.push(q.clone());
            alphas.push(alpha);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for b in &basis {
                    let proj = dot_raw(b, &w);
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi -= proj * bi;
                    }
                }
            }
            let beta = norm_raw(&w);

            let check = step + 1 == max_steps || beta <= 1e-12 * scale || step % 5 == 4;
            if check {
                let (lo, hi, res_lo, res_hi) = tridiagonal_extremes(&alphas, &betas, beta);
                result = (lo, hi);
                let tol = 1e-12 * scale;
                if beta <= 1e-12 * scale
                    || (res_lo <= tol && res_hi <= tol)
                    || step + 1 == max_steps
                {
                    break;
                }
            }
            betas.push(beta);
            q = w.iter().map(|a| a / beta).collect();
        }
        if !(result.0.is_finite() && result.1.is_finite()) {
            return Err(Error::Numeric(
                "Lanczos produced non-finite eigenvalues".into(),
            ));
        }
        Ok(result)
    }

    /// One term per line: `<coeff> <axes>`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (c, p) in &self.terms {
            s.push_str(&format!("{c} {p}\n"));
        }
        s
    }

    /// Parses the line format of [`to_text`](Self::to_text). `#` starts a comment,
    /// blank lines are skipped and a Unicode minus sign is accepted.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let coeff_str = fields.next().unwrap_or("").replace('\u{2212}', "-");
            let axes = fields.next().ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "expected `<coeff> <axes>`".into(),
            })?;
            if fields.next().is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "trailing fields".into(),
                });
            }
            let coeff: f64 = coeff_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad coefficient '{coeff_str}'"),
            })?;
            if !coeff.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "non-finite coefficient".into(),
                });
            }
            let p: PauliString = axes.parse().map_err(|e: Error| Error::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
            match n {
                None => n = Some(p.n()),
                Some(m) if m != p.n() => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("term has {} qubits, earlier terms have {m}", p.n()),
                    })
                }
                _ => {}
            }
            terms.push((coeff, p));
        }
        let n = n.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "no terms".into(),
        })?;
        Ok(PauliSum { n, terms })
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for PauliSum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PauliSum::parse(s)
    }
}

pub(crate) fn dot_raw(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_raw(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn normalize_raw(a: &mut [C64]) -> f64 {
    let nrm = norm_raw(a);
    if nrm > 0.0 {
        a.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

/// Extreme Ritz values of the Lanczos tridiagonal and their residual estimates.
fn tridiagonal_extremes(alphas: &[f64], betas: &[f64], next_beta: f64) -> (f64, f64, f64, f64) {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (mut imin, mut imax) = (0, 0);
    for i in 0..m {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    let res = |i: usize| (next_beta * eig.eigenvectors[(m - 1, i)]).abs();
    (
        eig.eigenvalues[imin],
        eig.eigenvalues[imax],
        res(imin),
        res(imax),
    )
}
