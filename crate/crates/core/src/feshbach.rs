//! Exact energy-dependent reduction of a Hermitian Hamiltonian onto the range
//! of an orthogonal projector:
//!
//! `H_eff(E) = H_PP + H_PQ (E − H_QQ)⁻¹ H_QP`
//!
//! Every eigenvalue of the full Hamiltonian whose eigenvector has a nonzero
//! P-component, and which does not sit on a pole `eig(H_QQ)`, is a
//! self-consistent eigenvalue of `H_eff`.

use serde::Serialize;

use crate::linalg::{self, c, CMatrix, LinalgError};
use crate::models::{EdHamiltonian, ModelError, ModelMatrix, ZDomain, HERMITIAN_TOL};

pub const DEFAULT_POLE_TOL: f64 = 1e-8;
pub const DEFAULT_PROJECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeshbachError {
    #[error("full Hamiltonian is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("P is not an orthogonal projector (‖P²−P‖ = {idempotency:e}, ‖P−P†‖ = {hermiticity:e})")]
    NotProjector { idempotency: f64, hermiticity: f64 },
    #[error("H_R is {h}x{h} but P is {p}x{p}")]
    Dimension { h: usize, p: usize },
    #[error("projector has rank 0")]
    EmptyRange,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeshbachModel {
    pub h_r: CMatrix,
    pub p: CMatrix,
    pub q: CMatrix,
    /// D×k, orthonormal columns spanning range(P).
    pub p_basis: CMatrix,
    /// D×(D−k), orthonormal columns spanning range(Q).
    pub q_basis: CMatrix,
    pub pole_tol: f64,
    pub projection_tol: f64,
    h_pp: CMatrix,
    h_pq: CMatrix,
    h_qq: CMatrix,
    poles: Vec<f64>,
}

impl FeshbachModel {
    pub fn new(h_r: CMatrix, p: CMatrix) -> Result<Self, FeshbachError> {
        Self::with_tolerances(h_r, p, DEFAULT_POLE_TOL, DEFAULT_PROJECTION_TOL)
    }

    pub fn with_tolerances(
        h_r: CMatrix,
        p: CMatrix,
        pole_tol: f64,
        projection_tol: f64,
    ) -> Result<Self, FeshbachError> {
        let d = linalg::ensure_square(&h_r)?;
        if linalg::ensure_square(&p)? != d {
            return Err(FeshbachError::Dimension { h: d, p: p.nrows() });
        }
        let defect = linalg::hermiticity_defect(&h_r);
        if defect > HERMITIAN_TOL {
            return Err(FeshbachError::NotHermitian(defect));
        }
        let idempotency = linalg::max_abs_diff(&(&p * &p), &p);
        let hermiticity = linalg::hermiticity_defect(&p);
        if idempotency > HERMITIAN_TOL || hermiticity > HERMITIAN_TOL {
            return Err(FeshbachError::NotProjector {
                idempotency,
                hermiticity,
            });
        }
        // eigenvalues of a projector are 0 or 1
        let pairs = linalg::hermitian_eigen(&p)?;
        let (ones, zeros): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|e| e.value.re > 0.5);
        if ones.is_empty() {
            return Err(FeshbachError::EmptyRange);
        }
        let p_basis = CMatrix::from_columns(&ones.iter().map(|e| e.right.clone()).collect::<Vec<_>>());
        let q_basis = if zeros.is_empty() {
            CMatrix::zeros(d, 0)
        } else {
            CMatrix::from_columns(&zeros.iter().map(|e| e.right.clone()).collect::<Vec<_>>())
        };
        let q = CMatrix::identity(d, d) - &p;
        let h_pp = p_basis.adjoint() * &h_r * &p_basis;
        let h_pq = p_basis.adjoint() * &h_r * &q_basis;
        let h_qq = q_basis.adjoint() * &h_r * &q_basis;
        let poles = linalg::hermitian_eigen(&h_qq)?
            .into_iter()
            .map(|e| e.value.re)
            .collect();
        Ok(Self {
            h_r,
            p,
            q,
            p_basis,
            q_basis,
            pole_tol,
            projection_tol,
            h_pp: (&h_pp + h_pp.adjoint()) * c(0.5),
            h_pq,
            h_qq: (&h_qq + h_qq.adjoint()) * c(0.5),
            poles,
        })
    }

    pub fn rank(&self) -> usize {
        self.p_basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.h_r.nrows()
    }

    /// Eigenvalues of `H_QQ`, ascending.
    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    pub fn h_qq(&self) -> &CMatrix {
        &self.h_qq
    }
}

/// `H_eff(E)` in `p_basis` coordinates.
pub fn feshbach_reduce(m: &FeshbachModel, e: f64) -> Result<CMatrix, FeshbachError> {
    if let Some(&pole) = m.poles.iter().find(|&&p| (e - p).abs() < m.pole_tol) {
        return Err(ModelError::Pole {
            z: e,
            pole,
            gap: (e - pole).abs(),
        }
        .into());
    }
    if m.q_basis.ncols() == 0 {
        return Ok(m.h_pp.clone());
    }
    let qd = m.q_basis.ncols();
    let shifted = CMatrix::identity(qd, qd) * c(e) - &m.h_qq;
    let x = linalg::solve(&shifted, &m.h_pq.adjoint())?;
    let h = &m.h_pp + &m.h_pq * x;
    Ok((&h + h.adjoint()) * c(0.5))
}

/// The reduction as an energy-dependent Hamiltonian on the k-dimensional P-space.
pub fn feshbach_model_as_ed(m: &FeshbachModel) -> EdHamiltonian {
    let model = m.clone();
    let domain = ZDomain::reals().with_excluded(m.poles.clone(), m.pole_tol);
    EdHamiltonian::custom(
        format!("feshbach(D={}, k={})", m.dim(), m.rank()),
        m.rank(),
        domain,
        true,
        move |z| {
            feshbach_reduce(&model, z).map(ModelMatrix::Dense).map_err(|e| match e {
                FeshbachError::Model(me) => me,
                other => ModelError::Config(other.to_string()),
            })
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Recoverability {
    Ok,
    ZeroProjection,
    PoleCollision,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub eigenvalue: f64,
    pub recoverable: bool,
    pub reason: Recoverability,
    pub projection_norm: f64,
    pub pole_gap: f64,
}

/// Which eigenvalues of `H_R` the reduced problem can reproduce.
pub fn recoverable_spectrum(m: &FeshbachModel) -> Result<Vec<SpectrumEntry>, FeshbachError> {
    Ok(linalg::hermitian_eigen(&m.h_r)?
        .into_iter()
        .map(|e| {
            let energy = e.value.re;
            let projection_norm = (&m.p * &e.right).norm();
            let pole_gap = m.poles.iter().map(|p| (energy - p).abs()).fold(f64::INFINITY, f64::min);
            let reason = if projection_norm <= m.projection_tol {
                Recoverability::ZeroProjection
            } else if pole_gap <= m.pole_tol {
                Recoverability::PoleCollision
            } else {
                Recoverability::Ok
            };
            SpectrumEntry {
                eigenvalue: energy,
                recoverable: reason == Recoverability::Ok,
                reason,
                projection_norm,
                pole_gap,
            }
        })
        .collect())
}

/// Orthogonal projector onto the span of the given coordinate axes.
pub fn axis_projector(dim: usize, axes: &[usize]) -> CMatrix {
    let mut p = CMatrix::zeros(dim, dim);
    for &a in axes {
        p[(a, a)] = c(1.0);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::real_matrix;

    fn swap() -> FeshbachModel {
        FeshbachModel::new(real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]), axis_projector(2, &[0])).unwrap()
    }

    #[test]
    fn swap_reduces_to_inverse_energy() {
        let m = swap();
        for e in [-3.0, -0.5, 0.25, 2.0] {
            let h = feshbach_reduce(&m, e).unwrap();
            assert!((h[(0, 0)] - c(1.0 / e)).norm() < 1e-15);
        }
        let ed = feshbach_model_as_ed(&m);
        assert!((ed.eval(2.0).unwrap()[(0, 0)] - c(0.5)).norm() < 1e-15);
        assert!(matches!(ed.eval(0.0), Err(ModelError::Pole { .. })));
        assert!(matches!(
            feshbach_reduce(&m, 5e-9),
            Err(FeshbachError::Model(ModelError::Pole { .. }))
        ));
    }

    #[test]
    fn uncoupled_diagonal() {
        let m = FeshbachModel::new(real_matrix(2, 2, &[1.0, 0.0, 0.0, 2.0]), axis_projector(2, &[0])).unwrap();
        for e in [-1.0, 0.0, 1.5, 7.0] {
            assert!((feshbach_reduce(&m, e).unwrap()[(0, 0)] - c(1.0)).norm() < 1e-15);
        }
        let spec = recoverable_spectrum(&m).unwrap();
        assert!(spec[0].recoverable);
        assert_eq!(spec[1].reason, Recoverability::ZeroProjection);
    }

    #[test]
    fn full_projector_is_identity_map() {
        let h = real_matrix(3, 3, &[1.0, 0.5, 0.0, 0.5, 2.0, 0.3, 0.0, 0.3, -1.0]);
        let m = FeshbachModel::new(h.clone(), CMatrix::identity(3, 3)).unwrap();
        let reduced = feshbach_reduce(&m, 0.7).unwrap();
        let back = &m.p_basis * reduced * m.p_basis.adjoint();
        assert!(linalg::max_abs_diff(&back, &h) < 1e-14);
        assert!(m.poles().is_empty());
    }

    #[test]
    fn swap_spectrum_is_fully_recoverable() {
        let spec = recoverable_spectrum(&swap()).unwrap();
        assert_eq!(spec.len(), 2);
        assert!((spec[0].eigenvalue + 1.0).abs() < 1e-15);
        assert!(spec.iter().all(|s| s.recoverable));
    }

    #[test]
    fn degenerate_eigenbasis_flags_follow_the_chosen_vectors() {
        // diag(1, 1, 3) with P onto the first axis: H_QQ = diag(1, 3) puts a
        // pole on every eigenvalue, so only the reasons differ
        let h = real_matrix(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 3.0]);
        let m = FeshbachModel::new(h.clone(), axis_projector(3, &[0])).unwrap();
        let spec = recoverable_spectrum(&m).unwrap();
        let pairs = linalg::hermitian_eigen(&h).unwrap();
        for (entry, pair) in spec.iter().zip(&pairs) {
            let expected = if pair.right[0].norm() <= 1e-10 {
                Recoverability::ZeroProjection
            } else {
                Recoverability::PoleCollision
            };
            assert_eq!(entry.reason, expected);
            assert!(!entry.recoverable);
        }
    }

    #[test]
    fn invalid_inputs() {
        let h = real_matrix(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            FeshbachModel::new(h, axis_projector(2, &[0])),
            Err(FeshbachError::NotHermitian(_))
        ));
        let not_projector = real_matrix(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert!(matches!(
            FeshbachModel::new(CMatrix::identity(2, 2), not_projector),
            Err(FeshbachError::NotProjector { .. })
        ));
        assert!(matches!(
            FeshbachModel::new(CMatrix::identity(2, 2), CMatrix::zeros(2, 2)),
            Err(FeshbachError::EmptyRange)
        ));
    }
}
