//! Dense complex and real symmetric tridiagonal eigen-machinery shared by the
//! solver, the bi-orthogonal basis construction and the metric checks.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Smallest |left·right| (unit-norm left and right) before a pair is declared defective.
pub const DEFECTIVE_OVERLAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is not diagonalizable: eigenpair {index} has left/right overlap {overlap:e}")]
    NonDiagonalizable { index: usize, overlap: f64 },
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("singular linear system")]
    Singular,
}

/// One eigen-triple. `left` holds the components of a co-vector, so the
/// pairing with a ket is the plain sum `Σ left_i right_i` (no conjugation).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: Complex64,
    pub right: CVector,
    pub left: CVector,
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn from_real(m: &DMatrix<f64>) -> CMatrix {
    m.map(c)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Bilinear pairing of a co-vector with a ket.
pub fn pair(left: &CVector, right: &CVector) -> Complex64 {
    left.iter().zip(right.iter()).map(|(l, r)| l * r).sum()
}

/// `ket · bra` as a dense outer product, with `bra` given by its co-vector components.
pub fn ket_bra(ket: &CVector, bra: &CVector) -> CMatrix {
    ket * bra.transpose()
}

pub fn ensure_square(m: &CMatrix) -> Result<usize, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// 2-norm condition number; infinite for a singular matrix.
pub fn condition_number(m: &CMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}

/// Solves `a · x = b` for a square `a` by LU with partial pivoting.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, LinalgError> {
    ensure_square(a)?;
    a.clone().lu().solve(b).ok_or(LinalgError::Singular)
}

/// Unit 2-norm, with the phase fixed so that the first component of largest
/// modulus is real and positive.
pub fn normalize_phase(mut v: CVector) -> CVector {
    let norm = v.norm();
    if norm == 0.0 {
        return v;
    }
    let mut pivot = Complex64::new(0.0, 0.0);
    let mut best = -1.0;
    for z in v.iter() {
        // 1e-12 relative slack keeps ties on the first index
        if z.norm() > best * (1.0 + 1e-12) {
            best = z.norm();
            pivot = *z;
        }
    }
    let phase = pivot.conj() / pivot.norm();
    v *= phase / c(norm);
    v
}

fn sort_key(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Full eigendecomposition of a Hermitian matrix, ascending eigenvalues,
/// `left = conj(right)`.
pub fn hermitian_eigen(m: &CMatrix) -> Result<Vec<EigenPair>, LinalgError> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let sym = (m + m.adjoint()) * c(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0).ok_or(LinalgError::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Ok(order
        .into_iter()
        .map(|i| {
            let right = normalize_phase(eig.eigenvectors.column(i).into_owned());
            let left = right.map(|z| z.conj());
            EigenPair {
                value: c(eig.eigenvalues[i]),
                right,
                left,
            }
        })
        .collect())
}

/// Full eigendecomposition of a general complex matrix through the complex
/// Schur form. Right vectors have unit norm; left co-vectors are the rows of
/// the inverse eigenvector matrix, so `left_i · right_j = δ_ij`.
pub fn general_eigen(m: &CMatrix) -> Result<Vec<EigenPair>, LinalgError> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 0).ok_or(LinalgError::NoConvergence)?;
    let (q, t) = schur.unpack();
    let scale = max_abs(&t).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;

    let mut values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut rights = Vec::with_capacity(n);
    for i in 0..n {
        // back substitution on (T - t_ii) y = 0 with y_i = 1
        let lambda = t[(i, i)];
        let mut y = CVector::zeros(n);
        y[i] = c(1.0);
        for j in (0..i).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in (j + 1)..=i {
                acc += t[(j, k)] * y[k];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < small {
                denom = c(small);
            }
            y[j] = -acc / denom;
        }
        rights.push(normalize_phase(&q * y));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sort_key(&values[a], &values[b]));
    values = order.iter().map(|&i| values[i]).collect();
    let rights: Vec<CVector> = order.iter().map(|&i| rights[i].clone()).collect();

    let phi = CMatrix::from_columns(&rights);
    let inv = phi
        .clone()
        .try_inverse()
        .ok_or(LinalgError::NonDiagonalizable { index: 0, overlap: 0.0 })?;
    let mut pairs = Vec::with_capacity(n);
    for (i, right) in rights.into_iter().enumerate() {
        let left: CVector = inv.row(i).transpose();
        // for a unit-norm left vector the pairing with its right partner is 1/‖row‖
        let overlap = 1.0 / left.norm();
        if !overlap.is_finite() || overlap < DEFECTIVE_OVERLAP {
            return Err(LinalgError::NonDiagonalizable { index: i, overlap });
        }
        pairs.push(EigenPair {
            value: values[i],
            right,
            left,
        });
    }
    Ok(pairs)
}

/// Real symmetric tridiagonal matrix: `diag` has length n, `off` has length n-1.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1), "off-diagonal length mismatch");
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c(self.diag[i]);
            if i + 1 < n {
                m[(i, i + 1)] = c(self.off[i]);
                m[(i + 1, i)] = c(self.off[i]);
            }
        }
        m
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.dim() {
            let b2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            d = self.diag[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (self.diag[i].abs() + x.abs() + f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by Sturm bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let pad = f64::EPSILON * (lo.abs().max(hi.abs()) + 1.0);
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for an (already accurate) eigenvalue by inverse iteration.
    pub fn eigenvector(&self, lambda: f64) -> DVector<f64> {
        let n = self.dim();
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(0.0_f64, |a, v| a.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let shift = lambda + 1e2 * f64::EPSILON * scale;
        let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.01 * ((i * 7919) % 101) as f64 / 101.0);
        x /= x.norm();
        for _ in 0..4 {
            x = self.shifted_solve(shift, &x);
            let norm = x.norm();
            if norm == 0.0 || !norm.is_finite() {
                break;
            }
            x /= norm;
        }
        // deterministic sign: largest component positive
        let mut pivot = 0.0_f64;
        for v in x.iter() {
            if v.abs() > pivot.abs() * (1.0 + 1e-12) {
                pivot = *v;
            }
        }
        if pivot < 0.0 {
            x = -x;
        }
        x
    }

    /// Solves `(T - shift) x = b` by Gaussian elimination with partial pivoting
    /// on the tridiagonal band.
    fn shifted_solve(&self, shift: f64, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let tiny = f64::EPSILON * 1e-3;
        if n == 1 {
            let d = self.diag[0] - shift;
            return DVector::from_element(1, b[0] / if d.abs() < tiny { tiny } else { d });
        }
        // rows hold (sub, diag, sup, sup2) after pivoting
        let mut dl: Vec<f64> = self.off.clone();
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - shift).collect();
        let mut du: Vec<f64> = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut rhs: Vec<f64> = b.iter().copied().collect();
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                let piv = if d[i] == 0.0 { tiny } else { d[i] };
                d[i] = piv;
                let f = dl[i] / piv;
                dl[i] = f;
                d[i + 1] -= f * du[i];
                rhs[i + 1] -= f * rhs[i];
                if i + 2 < n {
                    du2[i] = 0.0;
                }
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = f;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -f;
                }
                rhs.swap(i, i + 1);
                rhs[i + 1] -= f * rhs[i];
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = rhs[n - 1] / d[n - 1];
        x[n - 2] = (rhs[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (rhs[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
        }
        DVector::from_vec(x)
    }

    /// The `count` lowest eigenpairs (all of them when `count >= dim`).
    pub fn lowest(&self, count: usize) -> Vec<(f64, DVector<f64>)> {
        (0..count.min(self.dim()))
            .map(|k| {
                let lambda = self.eigenvalue(k);
                (lambda, self.eigenvector(lambda))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
        from_real(&DMatrix::from_row_slice(rows, cols, data))
    }

    #[test]
    fn hermitian_eigen_of_swap_matrix() {
        let m = real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let pairs = hermitian_eigen(&m).unwrap();
        assert!((pairs[0].value.re + 1.0).abs() < 1e-14);
        assert!((pairs[1].value.re - 1.0).abs() < 1e-14);
        let s = 1.0 / 2f64.sqrt();
        assert!((pairs[0].right[0].re - s).abs() < 1e-14);
        assert!((pairs[0].right[1].re + s).abs() < 1e-14);
    }

    #[test]
    fn general_eigen_upper_triangular_binormalized() {
        let m = real(2, 2, &[1.0, 1.0, 0.0, 2.0]);
        let pairs = general_eigen(&m).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((pairs[0].value - c(1.0)).norm() < 1e-14);
        assert!((pairs[1].value - c(2.0)).norm() < 1e-14);
        assert!((&pairs[0].right - CVector::from_vec(vec![c(1.0), c(0.0)])).norm() < 1e-14);
        assert!((&pairs[1].right - CVector::from_vec(vec![c(s), c(s)])).norm() < 1e-14);
        assert!((&pairs[0].left - CVector::from_vec(vec![c(1.0), c(-1.0)])).norm() < 1e-14);
        assert!((&pairs[1].left - CVector::from_vec(vec![c(0.0), c(2f64.sqrt())])).norm() < 1e-14);
    }

    #[test]
    fn jordan_block_is_defective() {
        let m = real(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(general_eigen(&m), Err(LinalgError::NonDiagonalizable { .. })));
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let t = SymTridiagonal::new(vec![2.0, -1.0, 0.5, 3.0, 1.0], vec![1.0, 0.3, -0.7, 2.0]);
        let dense = hermitian_eigen(&t.to_dense()).unwrap();
        for (k, (lambda, v)) in t.lowest(5).into_iter().enumerate() {
            assert!((lambda - dense[k].value.re).abs() < 1e-13);
            let vc = v.map(c);
            let residual = (t.to_dense() * &vc - &vc * c(lambda)).norm();
            assert!(residual < 1e-12, "k={k} residual={residual}");
        }
    }

    #[test]
    fn condition_of_singular_matrix_is_infinite() {
        let m = real(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(condition_number(&m) > 1e15);
    }
}
