//! Ansatze built from fixed gates and Pauli rotations `exp(-i phi sigma)`.
//!
//! A rotation gate's angle is `phi = scale * theta[param]`, so several gates
//! may share one logical parameter (as in the Hamiltonian variational
//! ansatz). Gates are listed in application order: `gates()[0]` acts first.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::pauli::{Axis, PauliString, PauliSum, C64};
use crate::seed;
use crate::state::StateVector;

#[derive(Debug, Clone, PartialEq)]
pub enum FixedGate {
    /// Controlled-Z between two qubits.
    Cz(usize, usize),
    /// `exp(-i angle P)` with a fixed angle.
    PauliExp { generator: PauliString, angle: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Rotation {
        generator: PauliString,
        param: usize,
        scale: f64,
    },
    Fixed(FixedGate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ansatz {
    n: usize,
    gates: Vec<Gate>,
    n_params: usize,
    rotations: Vec<usize>,
}

impl Ansatz {
    /// Validates qubit counts and requires the parameter indices used by
    /// rotations to be exactly `0..M`.
    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self> {
        if n == 0 || n > crate::pauli::MAX_QUBITS {
            return Err(Error::ResourceGuard(format!(
                "qubit count {n} out of range"
            )));
        }
        let mut used = Vec::new();
        let mut rotations = Vec::new();
        for (i, g) in gates.iter().enumerate() {
            match g {
                Gate::Rotation {
                    generator,
                    param,
                    scale,
                } => {
                    if generator.n() != n {
                        return Err(Error::QubitMismatch {
                            expected: n,
                            got: generator.n(),
                        });
                    }
                    if generator.is_identity() {
                        return Err(Error::invalid(format!("gate {i}: identity generator")));
                    }
                    if !scale.is_finite() || *scale == 0.0 {
                        return Err(Error::invalid(format!("gate {i}: bad scale {scale}")));
                    }
                    if *param >= used.len() {
                        used.resize(param + 1, false);
                    }
                    used[*param] = true;
                    rotations.push(i);
                }
                Gate::Fixed(FixedGate::Cz(a, b)) => {
                    if *a >= n || *b >= n || a == b {
                        return Err(Error::invalid(format!("gate {i}: bad CZ pair ({a}, {b})")));
                    }
                }
                Gate::Fixed(FixedGate::PauliExp { generator, angle }) => {
                    if generator.n() != n {
                        return Err(Error::QubitMismatch {
                            expected: n,
                            got: generator.n(),
                        });
                    }
                    if !angle.is_finite() {
                        return Err(Error::invalid(format!("gate {i}: non-finite angle")));
                    }
                }
            }
        }
        if let Some(p) = used.iter().position(|u| !u) {
            return Err(Error::invalid(format!(
                "parameter {p} is not used by any rotation"
            )));
        }
        Ok(Ansatz {
            n,
            gates,
            n_params: used.len(),
            rotations,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Number of independent parameters `M`.
    pub fn num_params(&self) -> usize {
        self.n_params
    }

    /// Number of rotation gates (at least `M`).
    pub fn num_rotations(&self) -> usize {
        self.rotations.len()
    }

    /// `(generator, param, scale)` of the `k`-th rotation gate.
    pub fn rotation(&self, k: usize) -> (&PauliString, usize, f64) {
        match &self.gates[self.rotations[k]] {
            Gate::Rotation {
                generator,
                param,
                scale,
            } => (generator, *param, *scale),
            Gate::Fixed(_) => unreachable!("rotation index points at a fixed gate"),
        }
    }

    /// Generator of the first rotation applied to the input.
    pub fn first_generator(&self) -> Option<&PauliString> {
        self.rotations.first().map(|&k| match &self.gates[k] {
            Gate::Rotation { generator, .. } => generator,
            Gate::Fixed(_) => unreachable!(),
        })
    }

    pub fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::LengthMismatch {
                expected: self.n_params,
                got: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(())
    }

    /// Per-rotation-gate angles `scale * theta[param]`.
    pub fn gate_angles(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_params(theta)?;
        Ok((0..self.num_rotations())
            .map(|k| {
                let (_, p, s) = self.rotation(k);
                s * theta[p]
            })
            .collect())
    }

    /// Applies gates `range` (indices into `gates()`), with rotation angles
    /// taken from `angles` (indexed by rotation number).
    pub(crate) fn apply_gates_raw(
        &self,
        angles: &[f64],
        range: std::ops::Range<usize>,
        v: &mut [C64],
    ) {
        let mut k = self.rotations.partition_point(|&g| g < range.start);
        for gate in &self.gates[range] {
            match gate {
                Gate::Rotation { generator, .. } => {
                    generator.rotate_raw(angles[k], v);
                    k += 1;
                }
                Gate::Fixed(f) => apply_fixed(self.n, f, v, false),
            }
        }
    }

    /// `v <- U v` for per-gate angles.
    pub(crate) fn apply_angles_raw(&self, angles: &[f64], v: &mut [C64]) {
        self.apply_gates_raw(angles, 0..self.gates.len(), v);
    }

    /// `v <- U^dagger v` for per-gate angles.
    pub(crate) fn apply_adjoint_angles_raw(&self, angles: &[f64], v: &mut [C64]) {
        let mut k = self.rotations.len();
        for gate in self.gates.iter().rev() {
            match gate {
                Gate::Rotation { generator, .. } => {
                    k -= 1;
                    generator.rotate_raw(-angles[k], v);
                }
                Gate::Fixed(f) => apply_fixed(self.n, f, v, true),
            }
        }
    }

    /// `U(theta) |v>`.
    pub fn apply(&self, theta: &[f64], v: &StateVector) -> Result<StateVector> {
        if v.n() != self.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                got: v.n(),
            });
        }
        let angles = self.gate_angles(theta)?;
        let mut amps = v.amplitudes().to_vec();
        self.apply_angles_raw(&angles, &mut amps);
        Ok(StateVector::from_raw_unchecked(self.n, amps))
    }

    /// `U(theta)^dagger |v>`.
    pub fn apply_adjoint(&self, theta: &[f64], v: &StateVector) -> Result<StateVector> {
        if v.n() != self.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                got: v.n(),
            });
        }
        let angles = self.gate_angles(theta)?;
        let mut amps = v.amplitudes().to_vec();
        self.apply_adjoint_angles_raw(&angles, &mut amps);
        Ok(StateVector::from_raw_unchecked(self.n, amps))
    }

    /// `Tr[rho0 sigma_1 rho0 sigma_1] = |<psi0|sigma_1|psi0>|^2` for the first
    /// rotation generator.
    pub fn first_gate_orthogonality(&self, psi0: &StateVector) -> Result<f64> {
        let s1 = self
            .first_generator()
            .ok_or_else(|| Error::invalid("ansatz has no rotation gates"))?;
        let e = s1.expectation(psi0)?;
        Ok(e * e)
    }

    /// The same circuit acting on qubits `offset..offset + n` of a larger register.
    pub fn embed(&self, total: usize, offset: usize) -> Result<Ansatz> {
        let gates = self
            .gates
            .iter()
            .map(|g| {
                Ok(match g {
                    Gate::Rotation {
                        generator,
                        param,
                        scale,
                    } => Gate::Rotation {
                        generator: generator.embed(total, offset)?,
                        param: *param,
                        scale: *scale,
                    },
                    Gate::Fixed(FixedGate::Cz(a, b)) => {
                        Gate::Fixed(FixedGate::Cz(a + offset, b + offset))
                    }
                    Gate::Fixed(FixedGate::PauliExp { generator, angle }) => {
                        Gate::Fixed(FixedGate::PauliExp {
                            generator: generator.embed(total, offset)?,
                            angle: *angle,
                        })
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ansatz::new(total, gates)
    }

    /// Serializes to the line-oriented circuit format (see [`Ansatz::parse`]).
    pub fn to_text(&self) -> String {
        let mut out = format!("QUBITS {}\n", self.n);
        for g in &self.gates {
            match g {
                Gate::Rotation {
                    generator,
                    param,
                    scale,
                } => {
                    if *scale == 1.0 {
                        out.push_str(&format!("ROT {param} {generator}\n"));
                    } else {
                        out.push_str(&format!("ROT {param} {generator} {scale:?}\n"));
                    }
                }
                Gate::Fixed(FixedGate::Cz(a, b)) => out.push_str(&format!("FIXED CZ {a} {b}\n")),
                Gate::Fixed(FixedGate::PauliExp { generator, angle }) => {
                    out.push_str(&format!("FIXED EXP {angle:?} {generator}\n"))
                }
            }
        }
        out
    }

    /// Parses one gate per line:
    ///
    /// ```text
    /// QUBITS 3              # optional, otherwise taken from the first Pauli string
    /// ROT 0 YII             # exp(-i theta_0 Y_0)
    /// ROT 1 XZI -1.0        # exp(-i (-1.0) theta_1 X_0 Z_1)
    /// FIXED CZ 0 1
    /// FIXED EXP 0.25 ZZI
    /// ```
    ///
    /// Qubits and parameters are 0-based.
    pub fn parse(text: &str) -> Result<Ansatz> {
        let mut n: Option<usize> = None;
        let mut gates = Vec::new();
        let err = |line: usize, msg: String| Error::Parse { line, msg };
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let tok: Vec<&str> = body.split_whitespace().collect();
            let pauli = |s: &str, n: &mut Option<usize>| -> Result<PauliString> {
                let p = PauliString::from_str(s).map_err(|e| err(line_no, e.to_string()))?;
                match n {
                    Some(k) if *k != p.n() => {
                        Err(err(line_no, format!("expected {k} qubits, got {}", p.n())))
                    }
                    Some(_) => Ok(p),
                    None => {
                        *n = Some(p.n());
                        Ok(p)
                    }
                }
            };
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| err(line_no, format!("bad number '{s}'")))
            };
            let int = |s: &str| -> Result<usize> {
                s.parse::<usize>()
                    .map_err(|_| err(line_no, format!("bad index '{s}'")))
            };
            match tok.as_slice() {
                ["QUBITS", k] => {
                    if n.is_some() || !gates.is_empty() {
                        return Err(err(line_no, "QUBITS must come first".into()));
                    }
                    n = Some(int(k)?);
                }
                ["ROT", p, axes] | ["ROT", p, axes, _] => {
                    let scale = if tok.len() == 4 { num(tok[3])? } else { 1.0 };
                    gates.push(Gate::Rotation {
                        generator: pauli(axes, &mut n)?,
                        param: int(p)?,
                        scale,
                    });
                }
                ["FIXED", "CZ", a, b] => gates.push(Gate::Fixed(FixedGate::Cz(int(a)?, int(b)?))),
                ["FIXED", "EXP", angle, axes] => {
                    let angle = num(angle)?;
                    gates.push(Gate::Fixed(FixedGate::PauliExp {
                        generator: pauli(axes, &mut n)?,
                        angle,
                    }));
                }
                _ => return Err(err(line_no, format!("unrecognized gate '{body}'"))),
            }
        }
        let n = n.ok_or_else(|| err(0, "cannot determine qubit count".into()))?;
        Ansatz::new(n, gates)
    }
}

impl fmt::Display for Ansatz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Ansatz {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ansatz::parse(s)
    }
}

fn apply_fixed(n: usize, gate: &FixedGate, v: &mut [C64], adjoint: bool) {
    match gate {
        FixedGate::Cz(a, b) => {
            let mask = (1usize << (n - 1 - a)) | (1usize << (n - 1 - b));
            for (i, amp) in v.iter_mut().enumerate() {
                if i & mask == mask {
                    *amp = -*amp;
                }
            }
        }
        FixedGate::PauliExp { generator, angle } => {
            generator.rotate_raw(if adjoint { -angle } else { *angle }, v)
        }
    }
}

/// Hardware-efficient ansatz: each layer applies `RY` then `RZ` on every
/// qubit, then a CZ chain `(0,1), (1,2), ...`. `M = 2 n layers`.
///
/// With `shuffle = Some(seed)` the order of the two rotations on each qubit is
/// randomized per layer, except that the very first gate stays `Y_0` so that
/// `|0...0>` satisfies the first-gate orthogonality condition.
pub fn build_hea(n: usize, layers: usize, shuffle: Option<u64>) -> Result<Ansatz> {
    if n < 2 || layers == 0 {
        return Err(Error::invalid(format!(
            "HEA needs n >= 2 and layers >= 1, got n = {n}, layers = {layers}"
        )));
    }
    let mut rng = shuffle.map(seed::rng);
    let mut gates = Vec::with_capacity(layers * 3 * n);
    let mut param = 0;
    for layer in 0..layers {
        for q in 0..n {
            let mut pair = [Axis::Y, Axis::Z];
            if let Some(r) = rng.as_mut() {
                if !(layer == 0 && q == 0) && r.random_bool(0.5) {
                    pair.swap(0, 1);
                }
            }
            for a in pair {
                gates.push(Gate::Rotation {
                    generator: PauliString::single(n, q, a)?,
                    param,
                    scale: 1.0,
                });
                param += 1;
            }
        }
        for q in 0..n - 1 {
            gates.push(Gate::Fixed(FixedGate::Cz(q, q + 1)));
        }
    }
    Ansatz::new(n, gates)
}

/// Hamiltonian variational ansatz. Terms of `h` are grouped by their axis
/// pattern (e.g. all `XZ` couplings, all `Y` fields) in order of first
/// appearance. Each layer gives every group one parameter, applied as a
/// sequence of single-term rotations `exp(-i theta sign(alpha_k) P_k)`.
pub fn build_hva(h: &PauliSum, layers: usize) -> Result<Ansatz> {
    let groups = term_groups(h);
    if groups.is_empty() {
        return Err(Error::invalid(
            "HVA needs a Hamiltonian with non-identity terms",
        ));
    }
    if layers == 0 {
        return Err(Error::invalid("HVA needs layers >= 1"));
    }
    let mut gates = Vec::new();
    for layer in 0..layers {
        for (g, members) in groups.iter().enumerate() {
            let param = layer * groups.len() + g;
            for &(coeff, p) in members {
                gates.push(Gate::Rotation {
                    generator: p,
                    param,
                    scale: coeff.signum(),
                });
            }
        }
    }
    Ansatz::new(h.n(), gates)
}

/// Non-identity, nonzero terms of `h` grouped by axis pattern.
pub fn term_groups(h: &PauliSum) -> Vec<Vec<(f64, PauliString)>> {
    let mut keys: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<(f64, PauliString)>> = Vec::new();
    for &(c, p) in h.terms() {
        if p.is_identity() || c == 0.0 {
            continue;
        }
        let key = p.pattern();
        match keys.iter().position(|k| *k == key) {
            Some(i) => groups[i].push((c, p)),
            None => {
                keys.push(key);
                groups.push(vec![(c, p)]);
            }
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use approx::assert_abs_diff_eq;

    fn random_ansatz(n: usize, gates: usize, seed_: u64) -> Ansatz {
        let mut rng = seed::rng(seed_);
        let mut out = Vec::new();
        let mut param = 0;
        for _ in 0..gates {
            match rng.random_range(0..3) {
                0 => {
                    let a = rng.random_range(0..n);
                    let b = (a + 1 + rng.random_range(0..n - 1)) % n;
                    out.push(Gate::Fixed(FixedGate::Cz(a, b)));
                }
                1 => {
                    let mut p = PauliString::random(n, &mut rng);
                    while p.is_identity() {
                        p = PauliString::random(n, &mut rng);
                    }
                    out.push(Gate::Fixed(FixedGate::PauliExp {
                        generator: p,
                        angle: rng.random_range(-1.0..1.0),
                    }));
                }
                _ => {
                    let mut p = PauliString::random(n, &mut rng);
                    while p.is_identity() {
                        p = PauliString::random(n, &mut rng);
                    }
                    out.push(Gate::Rotation {
                        generator: p,
                        param,
                        scale: 1.0,
                    });
                    param += 1;
                }
            }
        }
        out.push(Gate::Rotation {
            generator: PauliString::single(n, 0, Axis::X).unwrap(),
            param,
            scale: -0.5,
        });
        Ansatz::new(n, out).unwrap()
    }

    #[test]
    fn single_x_rotation_at_half_pi() {
        let a = Ansatz::parse("ROT 0 X").unwrap();
        let out = a
            .apply(
                &[std::f64::consts::FRAC_PI_2],
                &StateVector::zero(1).unwrap(),
            )
            .unwrap();
        assert_abs_diff_eq!(out.amplitudes()[0].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitudes()[1].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitudes()[1].im, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn random_circuit_matches_dense_product() {
        for s in 0..5 {
            let a = random_ansatz(3, 12, s);
            let mut rng = seed::rng(100 + s);
            let theta: Vec<f64> = (0..a.num_params())
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            let v = StateVector::random(3, &mut rng).unwrap();
            let got = a.apply(&theta, &v).unwrap();
            let want = dense::matvec(&dense::ansatz_unitary(&a, &theta), v.amplitudes());
            for (g, w) in got.amplitudes().iter().zip(&want) {
                assert!((g - w).norm() < 1e-12);
            }
            let back = a.apply_adjoint(&theta, &got).unwrap();
            for (g, w) in back.amplitudes().iter().zip(v.amplitudes()) {
                assert!((g - w).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hea_counts_and_first_gate() {
        let a = build_hea(4, 4, None).unwrap();
        assert_eq!(a.num_params(), 32);
        let z = StateVector::zero(4).unwrap();
        assert_eq!(a.first_generator().unwrap().to_string(), "YIII");
        assert_abs_diff_eq!(
            a.first_gate_orthogonality(&z).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        let shuffled = build_hea(4, 4, Some(9)).unwrap();
        assert_eq!(shuffled.first_generator().unwrap().to_string(), "YIII");
        assert_eq!(shuffled.num_params(), 32);
    }

    #[test]
    fn hea_at_zero_is_entangler_chain() {
        let a = build_hea(3, 2, None).unwrap();
        let v = StateVector::plus(3).unwrap();
        let got = a.apply(&vec![0.0; a.num_params()], &v).unwrap();
        // two CZ chains cancel
        for (g, w) in got.amplitudes().iter().zip(v.amplitudes()) {
            assert!((g - w).norm() < 1e-15);
        }
        let one = build_hea(3, 1, None).unwrap();
        let got = one.apply(&vec![0.0; 6], &v).unwrap();
        let cz = dense::cz_matrix(3, 1, 2) * dense::cz_matrix(3, 0, 1);
        let want = dense::matvec(&cz, v.amplitudes());
        for (g, w) in got.amplitudes().iter().zip(&want) {
            assert!((g - w).norm() < 1e-14);
        }
    }

    #[test]
    fn hva_parameter_count_for_xz_chain() {
        let h = PauliSum::xz_chain(10).unwrap();
        let a = build_hva(&h, 2).unwrap();
        assert_eq!(a.num_params(), 4);
        let v = StateVector::random(10, &mut seed::rng(1)).unwrap();
        assert_eq!(a.apply(&[0.0; 4], &v).unwrap(), v);
    }

    #[test]
    fn hva_single_term_equals_evolution() {
        let h: PauliSum = "1.0 Z".parse().unwrap();
        let a = build_hva(&h, 1).unwrap();
        let v = StateVector::plus(1).unwrap();
        let got = a.apply(&[0.37], &v).unwrap();
        let want = v.evolve_real(&h, 0.37).unwrap();
        for (g, w) in got.amplitudes().iter().zip(want.amplitudes()) {
            assert!((g - w).norm() < 1e-12);
        }
    }

    #[test]
    fn orthogonality_values() {
        let z = StateVector::zero(3).unwrap();
        for (axes, want) in [("XII", 0.0), ("ZII", 1.0), ("YII", 0.0)] {
            let a = Ansatz::parse(&format!("ROT 0 {axes}")).unwrap();
            assert_abs_diff_eq!(
                a.first_gate_orthogonality(&z).unwrap(),
                want,
                epsilon = 1e-15
            );
        }
        let fixed_only = Ansatz::parse("QUBITS 2\nFIXED CZ 0 1").unwrap();
        assert!(fixed_only
            .first_gate_orthogonality(&StateVector::zero(2).unwrap())
            .is_err());
    }

    #[test]
    fn shifted_parameters_compose() {
        let a = build_hea(3, 2, None).unwrap();
        let mut rng = seed::rng(5);
        let star: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let alpha: Vec<f64> = (0..12).map(|_| rng.random_range(-0.2..0.2)).collect();
        let sum: Vec<f64> = star.iter().zip(&alpha).map(|(s, a)| s + a).collect();
        let v = StateVector::zero(3).unwrap();
        let direct = a.apply(&sum, &v).unwrap();
        // per-gate decomposition: exp(-i(s+a)P) = exp(-i a P) exp(-i s P)
        let mut amps = v.amplitudes().to_vec();
        for (k, gate) in a.gates().iter().enumerate() {
            match gate {
                Gate::Rotation {
                    generator, param, ..
                } => {
                    generator.rotate_raw(star[*param], &mut amps);
                    generator.rotate_raw(alpha[*param], &mut amps);
                }
                Gate::Fixed(f) => apply_fixed(3, f, &mut amps, false),
            }
            let _ = k;
        }
        for (g, w) in direct.amplitudes().iter().zip(&amps) {
            assert!((g - w).norm() < 1e-12);
        }
    }

    #[test]
    fn text_round_trip() {
        let a = random_ansatz(4, 20, 3);
        let back = Ansatz::parse(&a.to_text()).unwrap();
        assert_eq!(a, back);
        let hva = build_hva(&PauliSum::xx_chain(4).unwrap(), 2).unwrap();
        assert_eq!(Ansatz::parse(&hva.to_text()).unwrap(), hva);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match Ansatz::parse("ROT 0 XI\nROT 1 XYZ") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Ansatz::parse("ROT 1 X"),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            Ansatz::parse("QUBITS 2\nFIXED CZ 0 0"),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn embed_acts_on_subsystem() {
        let a = build_hea(2, 1, None).unwrap();
        let big = a.embed(4, 0).unwrap();
        let theta = [0.1, 0.2, 0.3, 0.4];
        let bell = crate::state::bell_pair_state(2).unwrap();
        let got = big.apply(&theta, &bell).unwrap();
        let u = dense::ansatz_unitary(&a, &theta).kronecker(&dense::identity(4));
        let want = dense::matvec(&u, bell.amplitudes());
        for (g, w) in got.amplitudes().iter().zip(&want) {
            assert!((g - w).norm() < 1e-13);
        }
    }
}
