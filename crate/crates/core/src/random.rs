//! Seeded random test matrices. The same seed gives the same matrix on every
//! platform (ChaCha stream).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use num_complex::Complex64;

use crate::linalg::CMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn entry(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Complex Hermitian with entries uniform in the unit box.
pub fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
        for j in i + 1..dim {
            let z = entry(rng);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Orthogonal projector onto a random rank-`rank` subspace.
pub fn random_projector(dim: usize, rank: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    assert!(rank <= dim);
    if rank == 0 {
        return CMatrix::zeros(dim, dim);
    }
    let a = CMatrix::from_fn(dim, rank, |_, _| entry(rng));
    let q = a.qr().q();
    let q = q.columns(0, rank);
    let p = q * q.adjoint();
    (&p + p.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `S diag(E) S⁻¹` with a well-conditioned real `S` and real sorted `E`.
/// Returns the matrix and the energies.
pub fn random_real_spectrum(dim: usize, rng: &mut ChaCha8Rng) -> (CMatrix, Vec<f64>) {
    let mut energies: Vec<f64> = (0..dim).map(|k| k as f64 + rng.random_range(0.1..0.9)).collect();
    energies.sort_by(f64::total_cmp);
    let s = CMatrix::from_fn(dim, dim, |i, j| {
        let base = if i == j { 1.0 } else { 0.0 };
        Complex64::new(base + 0.4 * rng.random_range(-1.0..1.0), 0.0)
    });
    let inv = s
        .clone()
        .try_inverse()
        .expect("diagonally dominated matrix is invertible");
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        dim,
        energies.iter().map(|&e| Complex64::new(e, 0.0)),
    ));
    (&s * d * inv, energies)
}
