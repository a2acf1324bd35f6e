//! Dense reference matrices for small registers.
//!
//! Everything here is built from Kronecker products of 2x2 matrices and
//! nalgebra eigensolvers, sharing no code with the bitmask kernels. Tests and
//! the `selftest` subcommand use it as an oracle; it is O(4^n) and only meant
//! for `n <= 6` or so.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::circuit::{Ansatz, FixedGate, Gate};
use crate::pauli::{Axis, PauliString, PauliSum};

pub type CMatrix = DMatrix<C64>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn axis_matrix(a: Axis) -> CMatrix {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    match a {
        Axis::I => CMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        Axis::X => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        Axis::Y => CMatrix::from_row_slice(2, 2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]),
        Axis::Z => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

pub fn pauli_string_matrix(p: &PauliString) -> CMatrix {
    p.axes()
        .into_iter()
        .fold(CMatrix::identity(1, 1), |acc, a| {
            acc.kronecker(&axis_matrix(a))
        })
}

pub fn pauli_sum_matrix(h: &PauliSum) -> CMatrix {
    let dim = 1usize << h.n();
    let mut m = CMatrix::zeros(dim, dim);
    for (coeff, p) in h.terms() {
        m += pauli_string_matrix(p) * c(*coeff, 0.0);
    }
    m
}

pub fn matvec(m: &CMatrix, v: &[C64]) -> Vec<C64> {
    let col = nalgebra::DVector::from_column_slice(v);
    (m * col).iter().copied().collect()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// `exp(z H)` for Hermitian `H` by eigendecomposition.
pub fn exp_hermitian(h: &CMatrix, z: C64) -> CMatrix {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let u = &eig.eigenvectors;
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| (z * l).exp()),
    ));
    u * d * u.adjoint()
}

/// Controlled-Z between qubits `a` and `b` of an `n`-qubit register, built
/// as `|0><0| x 1 + |1><1| x Z` in tensor form.
pub fn cz_matrix(n: usize, a: usize, b: usize) -> CMatrix {
    let p0 = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    let p1 = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    let term = |ctrl: &CMatrix, target: &CMatrix| {
        (0..n).fold(CMatrix::identity(1, 1), |acc, q| {
            let f = if q == a {
                ctrl.clone()
            } else if q == b {
                target.clone()
            } else {
                axis_matrix(Axis::I)
            };
            acc.kronecker(&f)
        })
    };
    term(&p0, &axis_matrix(Axis::I)) + term(&p1, &axis_matrix(Axis::Z))
}

/// The full unitary `U(theta)` as an ordered matrix product.
pub fn ansatz_unitary(ansatz: &Ansatz, theta: &[f64]) -> CMatrix {
    let n = ansatz.n();
    let dim = 1usize << n;
    let mut u = identity(dim);
    for gate in ansatz.gates() {
        let g = match gate {
            Gate::Rotation {
                generator,
                param,
                scale,
            } => {
                let angle = scale * theta[*param];
                identity(dim) * c(angle.cos(), 0.0)
                    - pauli_string_matrix(generator) * c(0.0, angle.sin())
            }
            Gate::Fixed(FixedGate::Cz(a, b)) => cz_matrix(n, *a, *b),
            Gate::Fixed(FixedGate::PauliExp { generator, angle }) => {
                identity(dim) * c(angle.cos(), 0.0)
                    - pauli_string_matrix(generator) * c(0.0, angle.sin())
            }
        };
        u = g * u;
    }
    u
}
