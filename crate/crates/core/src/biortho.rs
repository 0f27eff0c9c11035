//! Overlap (Gram-type) matrix of self-consistent states, the dual basis that
//! restores the Kronecker-delta rule, and the resulting unit projector.
//!
//! Two indexing schemes are supported. In the Hermitian one the bra of a state
//! is the conjugate of its ket and `R_{αβ} = ⟨φ_α|φ_β⟩`. In the non-Hermitian
//! one kets `|φ^α⟩` and bras `⟨φ_α|` are independent and `R_α^β = ⟨φ_α|φ^β⟩`.

use serde::{Deserialize, Serialize};

use crate::linalg::{self, c, CMatrix, CVector, LinalgError};
use crate::nlevp::BoundState;

/// Default upper bound on `cond(R)` before the state set counts as redundant.
pub const DEFAULT_MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Hermitian,
    NonHermitian,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BiorthoError {
    #[error("no states given")]
    Empty,
    #[error("state {index} has dimension {found}, expected {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{count} states in dimension {dim} cannot have an invertible overlap matrix")]
    TooManyStates { count: usize, dim: usize },
    #[error(
        "overlap matrix is rank deficient: condition {condition:e} exceeds {limit:e}, smallest singular value {smallest_singular_value:e}"
    )]
    RankDeficient {
        smallest_singular_value: f64,
        condition: f64,
        limit: f64,
    },
    #[error("dual basis has {duals} entries for {states} states")]
    Mismatch { states: usize, duals: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    pub entries: CMatrix,
    pub scheme: Scheme,
    pub condition: f64,
    pub smallest_singular_value: f64,
}

/// `bras[α]` are the co-vectors `⟨⟨φ_α|`, `kets[β]` the kets `|φ^β⟩⟩`
/// (in the Hermitian scheme `kets[β]` is the conjugate of `bras[β]`).
#[derive(Debug, Clone, PartialEq)]
pub struct DualBasis {
    pub bras: Vec<CVector>,
    pub kets: Vec<CVector>,
    pub scheme: Scheme,
}

/// The bra paired with each state under `scheme`.
pub fn state_bras(states: &[BoundState], scheme: Scheme) -> Vec<CVector> {
    states
        .iter()
        .map(|s| match scheme {
            Scheme::Hermitian => s.right.map(|z| z.conj()),
            Scheme::NonHermitian => s.left.clone(),
        })
        .collect()
}

/// Columns are the state kets (dim × |A|).
pub fn ket_matrix(states: &[BoundState]) -> CMatrix {
    CMatrix::from_columns(&states.iter().map(|s| s.right.clone()).collect::<Vec<_>>())
}

/// Rows are the co-vector components of the given bras (|A| × dim).
pub fn bra_matrix(bras: &[CVector]) -> CMatrix {
    CMatrix::from_columns(bras).transpose()
}

fn validate(states: &[BoundState]) -> Result<usize, BiorthoError> {
    let first = states.first().ok_or(BiorthoError::Empty)?;
    let dim = first.right.len();
    for (index, s) in states.iter().enumerate() {
        if s.right.len() != dim || s.left.len() != dim {
            return Err(BiorthoError::Dimension {
                index,
                expected: dim,
                found: s.right.len().max(s.left.len()),
            });
        }
    }
    if states.len() > dim {
        return Err(BiorthoError::TooManyStates {
            count: states.len(),
            dim,
        });
    }
    Ok(dim)
}

pub fn overlap_matrix(states: &[BoundState], scheme: Scheme) -> Result<OverlapMatrix, BiorthoError> {
    validate(states)?;
    let bras = bra_matrix(&state_bras(states, scheme));
    let mut entries = bras * ket_matrix(states);
    if scheme == Scheme::Hermitian {
        entries = (&entries + entries.adjoint()) * c(0.5);
    }
    let s = linalg::singular_values(&entries);
    let smallest = s.last().copied().unwrap_or(0.0);
    let condition = if smallest > 0.0 { s[0] / smallest } else { f64::INFINITY };
    Ok(OverlapMatrix {
        entries,
        scheme,
        condition,
        smallest_singular_value: smallest,
    })
}

/// `⟨⟨φ_α| = Σ_β (R⁻¹)_{αβ} ⟨φ_β|` and `|φ^β⟩⟩ = Σ_α |φ^α⟩ (R⁻¹)_{αβ}`,
/// both by linear solves against `R`.
pub fn dual_basis(
    states: &[BoundState],
    overlap: &OverlapMatrix,
    max_condition: f64,
) -> Result<DualBasis, BiorthoError> {
    validate(states)?;
    if states.len() != overlap.entries.nrows() {
        return Err(BiorthoError::Mismatch {
            states: states.len(),
            duals: overlap.entries.nrows(),
        });
    }
    if !(overlap.condition <= max_condition) {
        return Err(BiorthoError::RankDeficient {
            smallest_singular_value: overlap.smallest_singular_value,
            condition: overlap.condition,
            limit: max_condition,
        });
    }
    let r = &overlap.entries;
    let bras = bra_matrix(&state_bras(states, overlap.scheme));
    let dual_bras = linalg::solve(r, &bras)?;
    // X R = Φ  ⇔  Rᵀ Xᵀ = Φᵀ
    let dual_kets = linalg::solve(&r.transpose(), &ket_matrix(states).transpose())?.transpose();
    Ok(DualBasis {
        bras: dual_bras.row_iter().map(|row| row.transpose()).collect(),
        kets: dual_kets.column_iter().map(|col| col.into_owned()).collect(),
        scheme: overlap.scheme,
    })
}

fn check_pair(states: &[BoundState], duals: &DualBasis) -> Result<(), BiorthoError> {
    if states.len() != duals.bras.len() || states.len() != duals.kets.len() {
        return Err(BiorthoError::Mismatch {
            states: states.len(),
            duals: duals.bras.len(),
        });
    }
    Ok(())
}

/// `Π = Σ_α |φ_α⟩⟨⟨φ_α|`; the identity when the states span the space.
pub fn completeness_projector(states: &[BoundState], duals: &DualBasis) -> Result<CMatrix, BiorthoError> {
    validate(states)?;
    check_pair(states, duals)?;
    Ok(ket_matrix(states) * bra_matrix(&duals.bras))
}

/// `max_{α,β} |⟨⟨φ_α|φ_β⟩ − δ_{αβ}|`.
pub fn biorthonormality_residual(states: &[BoundState], duals: &DualBasis) -> Result<f64, BiorthoError> {
    check_pair(states, duals)?;
    let mut worst = 0.0_f64;
    for (a, bra) in duals.bras.iter().enumerate() {
        for (b, s) in states.iter().enumerate() {
            let delta = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((linalg::pair(bra, &s.right) - c(delta)).norm());
        }
    }
    Ok(worst)
}

/// `‖Π² − Π‖_max`
pub fn idempotency_defect(projector: &CMatrix) -> f64 {
    linalg::max_abs_diff(&(projector * projector), projector)
}

pub fn projector_action(states: &[BoundState], duals: &DualBasis, projector: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for (s, bra) in states.iter().zip(&duals.bras) {
        worst = worst.max((projector * &s.right - &s.right).norm());
        worst = worst.max((projector.transpose() * bra - bra).norm());
    }
    worst
}

/// Diagnostics of one bi-orthogonal construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiorthoSummary {
    pub scheme: Scheme,
    pub size: usize,
    pub dim: usize,
    pub condition: f64,
    pub smallest_singular_value: f64,
    pub biorthonormality_residual: f64,
    pub projector_idempotency: f64,
    /// `max_α max(‖Π φ_α − φ_α‖, ‖⟨⟨φ_α|Π − ⟨⟨φ_α|‖)`
    pub projector_action: f64,
    /// `‖Π − I‖_max` when the states span the space.
    pub identity_residual: Option<f64>,
}

pub struct Biortho {
    pub overlap: OverlapMatrix,
    pub duals: DualBasis,
    pub projector: CMatrix,
    pub summary: BiorthoSummary,
}

/// Overlap, duals, projector and their diagnostics in one pass.
pub fn build(states: &[BoundState], scheme: Scheme, max_condition: f64) -> Result<Biortho, BiorthoError> {
    let dim = validate(states)?;
    let overlap = overlap_matrix(states, scheme)?;
    let duals = dual_basis(states, &overlap, max_condition)?;
    let projector = completeness_projector(states, &duals)?;
    let identity_residual =
        (states.len() == dim).then(|| linalg::max_abs_diff(&projector, &CMatrix::identity(dim, dim)));
    let summary = BiorthoSummary {
        scheme,
        size: states.len(),
        dim,
        condition: overlap.condition,
        smallest_singular_value: overlap.smallest_singular_value,
        biorthonormality_residual: biorthonormality_residual(states, &duals)?,
        // Π² = Φ (D Φ) D keeps the product low-rank
        projector_idempotency: linalg::max_abs_diff(
            &(ket_matrix(states) * (bra_matrix(&duals.bras) * ket_matrix(states)) * bra_matrix(&duals.bras)),
            &projector,
        ),
        projector_action: projector_action(states, &duals, &projector),
        identity_residual,
    };
    Ok(Biortho {
        overlap,
        duals,
        projector,
        summary,
    })
}

/// Wraps plain vectors as states (energy 0, trivially bi-normalized in the
/// Hermitian sense). Mostly useful for tests and for external state sets.
pub fn states_from_kets(kets: &[CVector]) -> Vec<BoundState> {
    kets.iter()
        .enumerate()
        .map(|(j, v)| {
            let right = v.normalize();
            BoundState {
                alpha: crate::nlevp::Alpha { n: 0, j },
                energy: 0.0,
                left: right.map(|z| z.conj()),
                right,
                residual_right: 0.0,
                residual_left: 0.0,
                fixed_point_residual: 0.0,
                match_quality: 1.0,
            }
        })
        .collect()
}
