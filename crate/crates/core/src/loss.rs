//! Fidelity-type losses and their exact derivatives.
//!
//! Every loss here is, as a function of a single rotation angle `phi`, of the
//! form `a + b cos 2phi + c sin 2phi`. Shifting one gate by `+-pi/4` therefore
//! gives its exact derivative, and shifting by `+-pi/2` its exact second
//! derivative. Parameters shared between gates pick up one term per gate,
//! weighted by that gate's scale.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::circuit::Ansatz;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::pauli::{dot_raw, PauliString, PauliSum, C64};
use crate::seed;
use crate::state::{bell_pair_state, StateVector, BELL_MAX_QUBITS};

/// Largest `n` for the column-by-column trace loss.
pub const HST_MAX_QUBITS: usize = 6;

/// Largest parameter count for dense eigensolves of the Fisher matrix.
pub const MAX_EIGEN_PARAMS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    /// `1 - |<psi0|U(theta)^dag e^{-iH dt} U(theta*)|psi0>|^2`.
    RealTime,
    /// As `RealTime` with the normalized `e^{-H dtau}` in place of `e^{-iH dt}`.
    ImaginaryTime,
    /// `1 - |Tr[U(theta)^dag e^{-iH dt} U(theta*)]|^2 / 4^n`, column by column.
    UnitaryHst,
    /// The same loss as a fidelity with `n` Bell pairs on `2n` qubits.
    UnitaryBell,
    /// `1 - (1/N_s) sum_j |<psi_j|U(theta)^dag e^{-iH dt} U(theta*)|psi_j>|^2`.
    Qml(StabilizerDataset),
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::RealTime => "real_time",
            LossKind::ImaginaryTime => "imaginary_time",
            LossKind::UnitaryHst => "unitary_hst",
            LossKind::UnitaryBell => "unitary_bell",
            LossKind::Qml(_) => "qml",
        }
    }
}

/// Precomputed targets for fast loss evaluation.
#[derive(Debug, Clone)]
enum Target {
    /// `1 - w sum_j |<target_j| U in_j>|^2` with `circuit` acting on `in_j`.
    States {
        circuit: Ansatz,
        inputs: Vec<Vec<C64>>,
        targets: Vec<Vec<C64>>,
        weight: f64,
    },
    /// `1 - |sum_j <j| U^dag target_j>|^2 / 4^n`.
    Trace { targets: Vec<Vec<C64>> },
}

/// Everything needed to evaluate one loss landscape `L(theta)`.
///
/// The target state(s) are cached and rebuilt by every setter.
#[derive(Debug, Clone)]
pub struct LossContext {
    ansatz: Ansatz,
    theta_star: Vec<f64>,
    h: PauliSum,
    dt: f64,
    psi0: StateVector,
    kind: LossKind,
    exec: Execution,
    target: Target,
}

impl LossContext {
    /// Context with `theta* = 0` and `dt = 0`.
    pub fn new(ansatz: Ansatz, h: PauliSum, psi0: StateVector, kind: LossKind) -> Result<Self> {
        let theta_star = vec![0.0; ansatz.num_params()];
        LossContext::with_center(ansatz, h, psi0, kind, theta_star, 0.0)
    }

    pub fn with_center(
        ansatz: Ansatz,
        h: PauliSum,
        psi0: StateVector,
        kind: LossKind,
        theta_star: Vec<f64>,
        dt: f64,
    ) -> Result<Self> {
        let n = ansatz.n();
        if h.n() != n {
            return Err(Error::QubitMismatch {
                expected: n,
                got: h.n(),
            });
        }
        if psi0.n() != n {
            return Err(Error::QubitMismatch {
                expected: n,
                got: psi0.n(),
            });
        }
        ansatz.check_params(&theta_star)?;
        let target = build_target(&ansatz, &h, &psi0, &kind, &theta_star, dt)?;
        Ok(LossContext {
            ansatz,
            theta_star,
            h,
            dt,
            psi0,
            kind,
            exec: Execution::default(),
            target,
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn set_execution(&mut self, exec: Execution) {
        self.exec = exec;
    }

    pub fn set_theta_star(&mut self, theta_star: Vec<f64>) -> Result<()> {
        self.ansatz.check_params(&theta_star)?;
        self.target = build_target(
            &self.ansatz,
            &self.h,
            &self.psi0,
            &self.kind,
            &theta_star,
            self.dt,
        )?;
        self.theta_star = theta_star;
        Ok(())
    }

    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        self.target = build_target(
            &self.ansatz,
            &self.h,
            &self.psi0,
            &self.kind,
            &self.theta_star,
            dt,
        )?;
        self.dt = dt;
        Ok(())
    }

    pub fn set_kind(&mut self, kind: LossKind) -> Result<()> {
        self.target = build_target(
            &self.ansatz,
            &self.h,
            &self.psi0,
            &kind,
            &self.theta_star,
            self.dt,
        )?;
        self.kind = kind;
        Ok(())
    }

    pub fn ansatz(&self) -> &Ansatz {
        &self.ansatz
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn hamiltonian(&self) -> &PauliSum {
        &self.h
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn psi0(&self) -> &StateVector {
        &self.psi0
    }

    pub fn kind(&self) -> &LossKind {
        &self.kind
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn num_params(&self) -> usize {
        self.ansatz.num_params()
    }

    pub fn loss(&self, theta: &[f64]) -> Result<f64> {
        let angles = self.ansatz.gate_angles(theta)?;
        Ok(self.loss_at_angles(&angles))
    }

    /// Loss with explicit per-rotation angles.
    pub(crate) fn loss_at_angles(&self, angles: &[f64]) -> f64 {
        let overlap = match &self.target {
            Target::States {
                circuit,
                inputs,
                targets,
                weight,
            } => {
                let mut acc = 0.0;
                let mut buf = Vec::new();
                for (inp, tgt) in inputs.iter().zip(targets) {
                    buf.clear();
                    buf.extend_from_slice(inp);
                    circuit.apply_angles_raw(angles, &mut buf);
                    acc += dot_raw(&buf, tgt).norm_sqr();
                }
                weight * acc
            }
            Target::Trace { targets } => {
                let mut tr = C64::new(0.0, 0.0);
                let mut buf = Vec::new();
                for (j, tgt) in targets.iter().enumerate() {
                    buf.clear();
                    buf.extend_from_slice(tgt);
                    self.ansatz.apply_adjoint_angles_raw(angles, &mut buf);
                    tr += buf[j];
                }
                let d = targets.len() as f64;
                tr.norm_sqr() / (d * d)
            }
        };
        (1.0 - overlap).clamp(0.0, 1.0)
    }

    /// Exact gradient with respect to each rotation gate's angle.
    pub fn gate_gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let angles = self.ansatz.gate_angles(theta)?;
        Ok(par::map_indices(self.exec, angles.len(), |k| {
            let mut a = angles.clone();
            a[k] = angles[k] + FRAC_PI_4;
            let plus = self.loss_at_angles(&a);
            a[k] = angles[k] - FRAC_PI_4;
            plus - self.loss_at_angles(&a)
        }))
    }

    /// Parameter-shift gradient, summed over gates sharing a parameter.
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let g = self.gate_gradient(theta)?;
        let mut out = vec![0.0; self.num_params()];
        for (k, gk) in g.iter().enumerate() {
            let (_, p, s) = self.ansatz.rotation(k);
            out[p] += s * gk;
        }
        Ok(out)
    }

    /// Loss and gradient together.
    pub fn value_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.loss(theta)?, self.gradient(theta)?))
    }

    /// Exact Hessian over gate angles.
    pub fn gate_hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let angles = self.ansatz.gate_angles(theta)?;
        let g = angles.len();
        let l0 = self.loss_at_angles(&angles);
        let pairs: Vec<(usize, usize)> = (0..g).flat_map(|k| (k..g).map(move |l| (k, l))).collect();
        let vals = par::map_slice(self.exec, &pairs, |&(k, l)| {
            let mut a = angles.clone();
            if k == l {
                a[k] = angles[k] + FRAC_PI_2;
                let p = self.loss_at_angles(&a);
                a[k] = angles[k] - FRAC_PI_2;
                let m = self.loss_at_angles(&a);
                p - 2.0 * l0 + m
            } else {
                let mut eval = |sk: f64, sl: f64| {
                    a[k] = angles[k] + sk;
                    a[l] = angles[l] + sl;
                    self.loss_at_angles(&a)
                };
                eval(FRAC_PI_4, FRAC_PI_4)
                    - eval(FRAC_PI_4, -FRAC_PI_4)
                    - eval(-FRAC_PI_4, FRAC_PI_4)
                    + eval(-FRAC_PI_4, -FRAC_PI_4)
            }
        });
        let mut m = DMatrix::zeros(g, g);
        for (&(k, l), v) in pairs.iter().zip(vals) {
            m[(k, l)] = v;
            m[(l, k)] = v;
        }
        Ok(m)
    }

    /// Parameter-shift Hessian over the `M` logical parameters.
    pub fn hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let hg = self.gate_hessian(theta)?;
        Ok(self.contract_gates(&hg))
    }

    fn contract_gates(&self, hg: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.num_params();
        let mut out = DMatrix::zeros(m, m);
        for k in 0..hg.nrows() {
            let (_, p, sp) = self.ansatz.rotation(k);
            for l in 0..hg.ncols() {
                let (_, q, sq) = self.ansatz.rotation(l);
                out[(p, q)] += sp * sq * hg[(k, l)];
            }
        }
        out
    }

    /// Fisher information of the loss's input ensemble at `theta`: the
    /// weighted mean of pure-state QFIs of `U(theta)|in_j>`. At
    /// `theta = theta*`, `dt = 0` the loss Hessian equals half of this.
    pub fn qfi(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        match &self.target {
            Target::States {
                circuit,
                inputs,
                weight,
                ..
            } => {
                let mut acc = DMatrix::zeros(self.num_params(), self.num_params());
                for inp in inputs {
                    let v = StateVector::from_raw_unchecked(circuit.n(), inp.clone());
                    acc += qfi(circuit, theta, &v)? * *weight;
                }
                Ok(acc)
            }
            Target::Trace { .. } => {
                let n = self.ansatz.n();
                qfi(&self.ansatz.embed(2 * n, 0)?, theta, &bell_pair_state(n)?)
            }
        }
    }

    /// `Delta_{theta*} = Tr[(rho0 - sigma_1 rho0 sigma_1) U^dag(theta*) rho_target U(theta*)]`.
    pub fn delta_theta_star(&self) -> Result<f64> {
        let (circuit, input, target) = match (&self.kind, &self.target) {
            (LossKind::Qml(_), _) => {
                return Err(Error::invalid(
                    "Delta_theta* is defined here for pure inputs only",
                ))
            }
            (
                _,
                Target::States {
                    circuit,
                    inputs,
                    targets,
                    ..
                },
            ) => (circuit.clone(), inputs[0].clone(), targets[0].clone()),
            (_, Target::Trace { .. }) => {
                let n = self.ansatz.n();
                let lifted = self.ansatz.embed(2 * n, 0)?;
                let bell = bell_pair_state(n)?;
                let hl = self.h.embed(2 * n, 0)?;
                let tgt = lifted
                    .apply(&self.theta_star, &bell)?
                    .evolve_real(&hl, self.dt)?;
                (lifted, bell.into_amplitudes(), tgt.into_amplitudes())
            }
        };
        let sigma = *circuit
            .first_generator()
            .ok_or_else(|| Error::invalid("ansatz has no rotation gates"))?;
        let angles = circuit.gate_angles(&self.theta_star)?;
        let mut back = target;
        circuit.apply_adjoint_angles_raw(&angles, &mut back);
        let mut flipped = vec![C64::new(0.0, 0.0); input.len()];
        sigma.apply_raw(&input, &mut flipped);
        Ok(dot_raw(&input, &back).norm_sqr() - dot_raw(&flipped, &back).norm_sqr())
    }

    /// `F_target(theta*) = 1 - L(theta*)`.
    pub fn target_fidelity(&self) -> Result<f64> {
        Ok(1.0 - self.loss(&self.theta_star)?)
    }

    /// Smallest eigenvalue of the Fisher matrix at `theta*`.
    pub fn mu_min(&self) -> Result<f64> {
        min_eigenvalue(&self.qfi(&self.theta_star)?)
    }
}

fn build_target(
    ansatz: &Ansatz,
    h: &PauliSum,
    psi0: &StateVector,
    kind: &LossKind,
    theta_star: &[f64],
    dt: f64,
) -> Result<Target> {
    if !dt.is_finite() {
        return Err(Error::invalid(format!(
            "time step must be finite, got {dt}"
        )));
    }
    let n = ansatz.n();
    let state_target =
        |circuit: &Ansatz, h: &PauliSum, v: &StateVector, imaginary: bool| -> Result<Vec<C64>> {
            let prepared = circuit.apply(theta_star, v)?;
            let evolved = if imaginary {
                prepared.evolve_imaginary(h, dt)?
            } else {
                prepared.evolve_real(h, dt)?
            };
            Ok(evolved.into_amplitudes())
        };
    match kind {
        LossKind::RealTime | LossKind::ImaginaryTime => {
            let imaginary = matches!(kind, LossKind::ImaginaryTime);
            Ok(Target::States {
                circuit: ansatz.clone(),
                inputs: vec![psi0.amplitudes().to_vec()],
                targets: vec![state_target(ansatz, h, psi0, imaginary)?],
                weight: 1.0,
            })
        }
        LossKind::UnitaryBell => {
            if 2 * n > BELL_MAX_QUBITS {
                return Err(Error::ResourceGuard(format!(
                    "Bell loss needs 2n <= {BELL_MAX_QUBITS}, got n = {n}"
                )));
            }
            let lifted = ansatz.embed(2 * n, 0)?;
            let hl = h.embed(2 * n, 0)?;
            let bell = bell_pair_state(n)?;
            let target = state_target(&lifted, &hl, &bell, false)?;
            Ok(Target::States {
                circuit: lifted,
                inputs: vec![bell.into_amplitudes()],
                targets: vec![target],
                weight: 1.0,
            })
        }
        LossKind::UnitaryHst => {
            if n > HST_MAX_QUBITS {
                return Err(Error::ResourceGuard(format!(
                    "trace loss needs n <= {HST_MAX_QUBITS}, got {n}"
                )));
            }
            let targets = (0..1usize << n)
                .map(|j| state_target(ansatz, h, &StateVector::basis(n, j)?, false))
                .collect::<Result<Vec<_>>>()?;
            Ok(Target::Trace { targets })
        }
        LossKind::Qml(data) => {
            if data.is_empty() {
                return Err(Error::invalid("QML loss needs a non-empty dataset"));
            }
            if data.n() != n {
                return Err(Error::QubitMismatch {
                    expected: n,
                    got: data.n(),
                });
            }
            let states = data.states()?;
            let targets = states
                .iter()
                .map(|s| state_target(ansatz, h, s, false))
                .collect::<Result<Vec<_>>>()?;
            Ok(Target::States {
                circuit: ansatz.clone(),
                inputs: states
                    .into_iter()
                    .map(StateVector::into_amplitudes)
                    .collect(),
                targets,
                weight: 1.0 / data.len() as f64,
            })
        }
    }
}

/// Pure-state quantum Fisher information of `U(theta)|psi0>`,
/// `F_ij = 4 Re[<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>]`, with each
/// `|d_i psi>` obtained by inserting `-i sigma` after the differentiated gate.
pub fn qfi(ansatz: &Ansatz, theta: &[f64], psi0: &StateVector) -> Result<DMatrix<f64>> {
    if psi0.n() != ansatz.n() {
        return Err(Error::QubitMismatch {
            expected: ansatz.n(),
            got: psi0.n(),
        });
    }
    let angles = ansatz.gate_angles(theta)?;
    let m = ansatz.num_params();
    let dim = psi0.dim();
    let mut derivs = vec![vec![C64::new(0.0, 0.0); dim]; m];
    let mut state = psi0.amplitudes().to_vec();
    let mut k = 0;
    let minus_i = C64::new(0.0, -1.0);
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    for (gi, gate) in ansatz.gates().iter().enumerate() {
        ansatz.apply_gates_raw(&angles, gi..gi + 1, &mut state);
        if let crate::circuit::Gate::Rotation {
            generator,
            param,
            scale,
        } = gate
        {
            generator.apply_raw(&state, &mut buf);
            ansatz.apply_gates_raw(&angles, gi + 1..ansatz.gates().len(), &mut buf);
            let f = minus_i * *scale;
            for (d, b) in derivs[*param].iter_mut().zip(&buf) {
                *d += f * b;
            }
            k += 1;
        }
    }
    debug_assert_eq!(k, angles.len());
    let proj: Vec<C64> = derivs.iter().map(|d| dot_raw(&state, d)).collect();
    let mut f = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = 4.0 * (dot_raw(&derivs[i], &derivs[j]) - proj[i].conj() * proj[j]).re;
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
    }
    Ok(f)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() > MAX_EIGEN_PARAMS {
        return Err(Error::ResourceGuard(format!(
            "dense eigensolve limited to {MAX_EIGEN_PARAMS} parameters, got {}",
            m.nrows()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    Ok(SymmetricEigen::new(m.clone()).eigenvalues.min())
}

/// Smallest eigenvalue of the Fisher matrix of `U(theta*)|psi0>`.
pub fn mu_min(ansatz: &Ansatz, theta_star: &[f64], psi0: &StateVector) -> Result<f64> {
    if ansatz.num_params() > MAX_EIGEN_PARAMS {
        return Err(Error::ResourceGuard(format!(
            "dense eigensolve limited to {MAX_EIGEN_PARAMS} parameters, got {}",
            ansatz.num_params()
        )));
    }
    min_eigenvalue(&qfi(ansatz, theta_star, psi0)?)
}

/// Training inputs for the QML loss: products of single-qubit stabilizer
/// states. Factor codes `0..6` stand for `|0>, |1>, |+>, |->, |y+>, |y->`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizerDataset {
    n: usize,
    factors: Vec<Vec<u8>>,
}

impl StabilizerDataset {
    pub fn sample(n: usize, n_s: usize, seed_: u64) -> Result<Self> {
        let mut rng = seed::rng(seed_);
        StabilizerDataset::sample_with(n, n_s, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(n: usize, n_s: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || n_s == 0 {
            return Err(Error::invalid(format!(
                "dataset needs n >= 1 and N_s >= 1, got {n}, {n_s}"
            )));
        }
        let factors = (0..n_s)
            .map(|_| (0..n).map(|_| rng.random_range(0..6u8)).collect())
            .collect();
        Ok(StabilizerDataset { n, factors })
    }

    pub fn from_factors(n: usize, factors: Vec<Vec<u8>>) -> Result<Self> {
        if factors
            .iter()
            .any(|f| f.len() != n || f.iter().any(|&c| c > 5))
        {
            return Err(Error::invalid(
                "factor codes must be 0..6 with one per qubit",
            ));
        }
        Ok(StabilizerDataset { n, factors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[Vec<u8>] {
        &self.factors
    }

    pub fn factor_state(code: u8) -> [C64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        match code {
            0 => [o, z],
            1 => [z, o],
            2 => [C64::new(s, 0.0), C64::new(s, 0.0)],
            3 => [C64::new(s, 0.0), C64::new(-s, 0.0)],
            4 => [C64::new(s, 0.0), C64::new(0.0, s)],
            _ => [C64::new(s, 0.0), C64::new(0.0, -s)],
        }
    }

    pub fn states(&self) -> Result<Vec<StateVector>> {
        self.factors
            .iter()
            .map(|f| {
                StateVector::product(&f.iter().map(|&c| Self::factor_state(c)).collect::<Vec<_>>())
            })
            .collect()
    }

    /// `Tr[rho0 sigma rho0 sigma] = (1/N_s^2) sum_j |<psi_j|sigma|psi_j>|^2`,
    /// the form that holds for mutually orthogonal inputs. Each factor
    /// contributes `|<s|P|s>|^2`, which is 1 when `s` is an eigenstate of `P`
    /// and 0 otherwise, so this is evaluated exactly from the codes.
    pub fn orthogonality(&self, sigma: &PauliString) -> Result<f64> {
        if sigma.n() != self.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                got: sigma.n(),
            });
        }
        let axes = sigma.axes();
        let hits = self
            .factors
            .iter()
            .filter(|f| {
                f.iter().zip(&axes).all(|(&c, a)| match a {
                    crate::pauli::Axis::I => true,
                    crate::pauli::Axis::Z => c < 2,
                    crate::pauli::Axis::X => c == 2 || c == 3,
                    crate::pauli::Axis::Y => c >= 4,
                })
            })
            .count();
        let ns = self.len() as f64;
        Ok(hits as f64 / (ns * ns))
    }

    /// Whether `<psi_j|psi_k> = 0` for all `j != k`.
    pub fn is_pairwise_orthogonal(&self) -> bool {
        let orth = |a: u8, b: u8| a != b && a / 2 == b / 2;
        for j in 0..self.len() {
            for k in j + 1..self.len() {
                if !self.factors[j]
                    .iter()
                    .zip(&self.factors[k])
                    .any(|(&a, &b)| orth(a, b))
                {
                    return false;
                }
            }
        }
        true
    }
}

/// The QML loss in its `2n`-qubit mixed-state form,
/// `1 - N_s Tr[U~ rho0 U~^dag e^{-i dt H x 1} U~* rho0 U~*^dag e^{i dt H x 1}]`
/// with `rho0 = (1/N_s) sum_j |psi_j><psi_j| x |psi_j><psi_j|` and
/// `U~ = U x 1`. Agrees with [`LossKind::Qml`] when the inputs are mutually
/// orthogonal.
pub fn qml_mixed_form_loss(
    ansatz: &Ansatz,
    h: &PauliSum,
    data: &StabilizerDataset,
    theta_star: &[f64],
    dt: f64,
    theta: &[f64],
) -> Result<f64> {
    let n = ansatz.n();
    if 2 * n > BELL_MAX_QUBITS {
        return Err(Error::ResourceGuard(format!(
            "mixed form needs 2n <= {BELL_MAX_QUBITS}"
        )));
    }
    let lifted = ansatz.embed(2 * n, 0)?;
    let hl = h.embed(2 * n, 0)?;
    let doubled: Vec<StateVector> = data
        .states()?
        .iter()
        .map(|s| s.tensor(s))
        .collect::<Result<_>>()?;
    let a: Vec<StateVector> = doubled
        .iter()
        .map(|s| lifted.apply(theta, s))
        .collect::<Result<_>>()?;
    let b: Vec<StateVector> = doubled
        .iter()
        .map(|s| lifted.apply(theta_star, s)?.evolve_real(&hl, dt))
        .collect::<Result<_>>()?;
    let mut tr = 0.0;
    for aj in &a {
        for bk in &b {
            tr += aj.inner(bk)?.norm_sqr();
        }
    }
    let ns = data.len() as f64;
    Ok(1.0 - tr / ns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_hea, build_hva};
    use crate::dense;
    use approx::assert_abs_diff_eq;

    fn one_qubit_x() -> LossContext {
        let a = Ansatz::parse("ROT 0 X").unwrap();
        let h = PauliSum::new(1);
        LossContext::new(a, h, StateVector::zero(1).unwrap(), LossKind::RealTime).unwrap()
    }

    fn fd_gradient(ctx: &LossContext, theta: &[f64], h: f64) -> Vec<f64> {
        (0..theta.len())
            .map(|i| {
                let mut p = theta.to_vec();
                p[i] += h;
                let mut m = theta.to_vec();
                m[i] -= h;
                (ctx.loss(&p).unwrap() - ctx.loss(&m).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn single_qubit_values() {
        let ctx = one_qubit_x();
        assert_abs_diff_eq!(
            ctx.loss(&[0.3]).unwrap(),
            0.3f64.sin().powi(2),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            ctx.gradient(&[0.3]).unwrap()[0],
            0.6f64.sin(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(ctx.hessian(&[0.0]).unwrap()[(0, 0)], 2.0, epsilon = 1e-14);
        let f = ctx.qfi(&[0.0]).unwrap();
        assert_abs_diff_eq!(f[(0, 0)], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ctx.mu_min().unwrap(), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_at_center_for_every_kind() {
        let h = PauliSum::xx_chain(2).unwrap();
        let a = build_hea(2, 2, None).unwrap();
        let star: Vec<f64> = (0..a.num_params()).map(|i| 0.1 * i as f64).collect();
        let psi0 = StateVector::zero(2).unwrap();
        let kinds = [
            LossKind::RealTime,
            LossKind::ImaginaryTime,
            LossKind::UnitaryHst,
            LossKind::UnitaryBell,
            LossKind::Qml(StabilizerDataset::sample(2, 3, 1).unwrap()),
        ];
        for kind in kinds {
            let ctx = LossContext::with_center(
                a.clone(),
                h.clone(),
                psi0.clone(),
                kind,
                star.clone(),
                0.0,
            )
            .unwrap();
            assert!(ctx.loss(&star).unwrap() < 1e-14, "{}", ctx.kind().name());
            assert!(ctx.gradient(&star).unwrap().iter().all(|g| g.abs() < 1e-12));
        }
    }

    #[test]
    fn shift_rule_matches_finite_differences_for_all_kinds() {
        let h = PauliSum::xz_chain(3).unwrap();
        let mut rng = seed::rng(12);
        let psi0 = StateVector::zero(3).unwrap();
        for ansatz in [build_hea(3, 1, None).unwrap(), build_hva(&h, 2).unwrap()] {
            let m = ansatz.num_params();
            let star: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..0.5)).collect();
            let theta: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            for kind in [
                LossKind::RealTime,
                LossKind::ImaginaryTime,
                LossKind::UnitaryHst,
                LossKind::UnitaryBell,
                LossKind::Qml(StabilizerDataset::sample(3, 4, 2).unwrap()),
            ] {
                let ctx = LossContext::with_center(
                    ansatz.clone(),
                    h.clone(),
                    psi0.clone(),
                    kind,
                    star.clone(),
                    0.1,
                )
                .unwrap();
                let g = ctx.gradient(&theta).unwrap();
                let fd = fd_gradient(&ctx, &theta, 1e-5);
                for (a, b) in g.iter().zip(&fd) {
                    assert!((a - b).abs() < 1e-6, "{}: {a} vs {b}", ctx.kind().name());
                }
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let h = PauliSum::xx_chain(3).unwrap();
        let a = build_hva(&h, 2).unwrap();
        let ctx = LossContext::with_center(
            a,
            h,
            StateVector::zero(3).unwrap(),
            LossKind::RealTime,
            vec![0.1; 4],
            0.2,
        )
        .unwrap();
        let theta = [0.3, -0.2, 0.5, 0.05];
        let hs = ctx.hessian(&theta).unwrap();
        assert_eq!(hs, hs.transpose());
        let e = 1e-4;
        for i in 0..4 {
            let mut p = theta.to_vec();
            p[i] += e;
            let mut m = theta.to_vec();
            m[i] -= e;
            let gp = ctx.gradient(&p).unwrap();
            let gm = ctx.gradient(&m).unwrap();
            for j in 0..4 {
                assert!((hs[(i, j)] - (gp[j] - gm[j]) / (2.0 * e)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn hessian_is_half_qfi_at_minimum() {
        let h = PauliSum::xz_chain(3).unwrap();
        let a = build_hea(3, 1, None).unwrap();
        let star: Vec<f64> = (0..6).map(|i| 0.3 - 0.1 * i as f64).collect();
        for kind in [
            LossKind::RealTime,
            LossKind::UnitaryBell,
            LossKind::UnitaryHst,
        ] {
            let ctx = LossContext::with_center(
                a.clone(),
                h.clone(),
                StateVector::zero(3).unwrap(),
                kind,
                star.clone(),
                0.0,
            )
            .unwrap();
            let diff = ctx.hessian(&star).unwrap() - ctx.qfi(&star).unwrap() * 0.5;
            assert!(diff.amax() < 1e-10);
        }
    }

    #[test]
    fn qfi_matches_finite_difference_states() {
        let a = build_hea(2, 2, None).unwrap();
        let theta: Vec<f64> = (0..8).map(|i| 0.2 * i as f64 - 0.5).collect();
        let psi0 = StateVector::zero(2).unwrap();
        let f = qfi(&a, &theta, &psi0).unwrap();
        // finite-difference derivative states
        let e = 1e-6;
        let d: Vec<Vec<C64>> = (0..8)
            .map(|i| {
                let mut p = theta.clone();
                p[i] += e;
                let mut m = theta.clone();
                m[i] -= e;
                let up = a.apply(&p, &psi0).unwrap();
                let dn = a.apply(&m, &psi0).unwrap();
                up.amplitudes()
                    .iter()
                    .zip(dn.amplitudes())
                    .map(|(u, v)| (u - v) / (2.0 * e))
                    .collect()
            })
            .collect();
        let psi = a.apply(&theta, &psi0).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = 4.0
                    * (dot_raw(&d[i], &d[j])
                        - dot_raw(&d[i], psi.amplitudes()) * dot_raw(psi.amplitudes(), &d[j]))
                    .re;
                assert!((f[(i, j)] - want).abs() < 1e-6);
            }
        }
        assert!(SymmetricEigen::new(f).eigenvalues.min() > -1e-10);
    }

    #[test]
    fn redundant_generator_has_zero_mu() {
        let a = Ansatz::parse("ROT 0 X\nROT 1 X").unwrap();
        let mu = mu_min(&a, &[0.0, 0.0], &StateVector::zero(1).unwrap()).unwrap();
        assert_abs_diff_eq!(mu, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn mu_min_matches_dense_oracle() {
        let h = PauliSum::xz_chain(3).unwrap();
        let a = build_hva(&h, 2).unwrap();
        let theta = [0.4, -0.3, 0.2, 0.7];
        let psi0 = StateVector::zero(3).unwrap();
        // oracle: Jacobian of the dense statevector map
        let e = 1e-6;
        let col = |t: &[f64]| dense::matvec(&dense::ansatz_unitary(&a, t), psi0.amplitudes());
        let psi = col(&theta);
        let d: Vec<Vec<C64>> = (0..4)
            .map(|i| {
                let mut p = theta.to_vec();
                p[i] += e;
                let mut m = theta.to_vec();
                m[i] -= e;
                col(&p)
                    .iter()
                    .zip(col(&m))
                    .map(|(u, v)| (u - v) / (2.0 * e))
                    .collect()
            })
            .collect();
        let f = DMatrix::from_fn(4, 4, |i, j| {
            4.0 * (dot_raw(&d[i], &d[j]) - dot_raw(&d[i], &psi) * dot_raw(&psi, &d[j])).re
        });
        let want = SymmetricEigen::new(f).eigenvalues.min();
        assert!((mu_min(&a, &theta, &psi0).unwrap() - want).abs() < 1e-6);
    }

    #[test]
    fn hst_equals_bell() {
        let h = PauliSum::xx_chain(3).unwrap();
        let a = build_hea(3, 1, None).unwrap();
        let mut rng = seed::rng(8);
        let star: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let psi0 = StateVector::zero(3).unwrap();
        let hst = LossContext::with_center(
            a.clone(),
            h.clone(),
            psi0.clone(),
            LossKind::UnitaryHst,
            star.clone(),
            0.3,
        )
        .unwrap();
        let bell = LossContext::with_center(a, h, psi0, LossKind::UnitaryBell, star, 0.3).unwrap();
        for _ in 0..10 {
            let theta: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert!((hst.loss(&theta).unwrap() - bell.loss(&theta).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn qml_mixed_form_on_orthogonal_data() {
        let h = PauliSum::xz_chain(2).unwrap();
        let a = build_hea(2, 1, None).unwrap();
        let data =
            StabilizerDataset::from_factors(2, vec![vec![0, 2], vec![1, 4], vec![0, 3]]).unwrap();
        assert!(data.is_pairwise_orthogonal());
        let star = [0.1, 0.2, -0.3, 0.4];
        let ctx = LossContext::with_center(
            a.clone(),
            h.clone(),
            StateVector::zero(2).unwrap(),
            LossKind::Qml(data.clone()),
            star.to_vec(),
            0.25,
        )
        .unwrap();
        let theta = [0.5, -0.1, 0.3, 0.9];
        let direct = ctx.loss(&theta).unwrap();
        let mixed = qml_mixed_form_loss(&a, &h, &data, &star, 0.25, &theta).unwrap();
        assert!((direct - mixed).abs() < 1e-10);
        let overlapping = StabilizerDataset::from_factors(2, vec![vec![0, 0], vec![0, 2]]).unwrap();
        assert!(!overlapping.is_pairwise_orthogonal());
    }

    #[test]
    fn dataset_codes_and_orthogonality() {
        let d = StabilizerDataset::sample(1, 6, 3).unwrap();
        assert!(d.factors().iter().all(|f| f.len() == 1 && f[0] < 6));
        let x = PauliString::single(1, 0, crate::pauli::Axis::X).unwrap();
        for c in 0..6u8 {
            let one = StabilizerDataset::from_factors(1, vec![vec![c]]).unwrap();
            let s = &one.states().unwrap()[0];
            let e = x.expectation(s).unwrap();
            assert_abs_diff_eq!(one.orthogonality(&x).unwrap(), e * e, epsilon = 1e-15);
        }
    }

    #[test]
    fn delta_values() {
        let h = PauliSum::xz_chain(3).unwrap();
        let psi0 = StateVector::zero(3).unwrap();
        let hea = build_hea(3, 1, None).unwrap();
        let ctx = LossContext::new(hea, h.clone(), psi0.clone(), LossKind::RealTime).unwrap();
        assert_abs_diff_eq!(ctx.delta_theta_star().unwrap(), 1.0, epsilon = 1e-14);
        let z_first = Ansatz::parse("ROT 0 ZII\nROT 1 XII").unwrap();
        let ctx = LossContext::new(z_first, h, psi0, LossKind::RealTime).unwrap();
        assert_abs_diff_eq!(ctx.delta_theta_star().unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn setters_rebuild_target() {
        let mut ctx = one_qubit_x();
        ctx.set_theta_star(vec![0.4]).unwrap();
        assert!(ctx.loss(&[0.4]).unwrap() < 1e-15);
        assert_abs_diff_eq!(
            ctx.loss(&[0.0]).unwrap(),
            0.4f64.sin().powi(2),
            epsilon = 1e-14
        );
        assert!(ctx.set_theta_star(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn guards() {
        let a = build_hea(7, 1, None).unwrap();
        let h = PauliSum::xx_chain(7).unwrap();
        let z = StateVector::zero(7).unwrap();
        assert!(matches!(
            LossContext::new(a.clone(), h.clone(), z.clone(), LossKind::UnitaryHst),
            Err(Error::ResourceGuard(_))
        ));
        assert!(matches!(
            LossContext::new(a, h, z, LossKind::UnitaryBell),
            Err(Error::ResourceGuard(_))
        ));
        let one = Ansatz::parse("ROT 0 X").unwrap();
        let empty = StabilizerDataset {
            n: 1,
            factors: vec![],
        };
        assert!(LossContext::new(
            one,
            PauliSum::new(1),
            StateVector::zero(1).unwrap(),
            LossKind::Qml(empty)
        )
        .is_err());
    }
}
