//! Energy-independent representatives of an energy-dependent Hamiltonian.
//!
//! From self-consistent states `φ_α` with energies `E_α` and their duals:
//!
//! * `K = Σ_α |φ_α⟩ E_α ⟨⟨φ_α|` acts like `H(E)` to the right,
//! * `L = Σ_β |φ_β⟩⟩ E_β ⟨φ_β|` acts like `H(E)` to the left,
//!
//! together with the metrics intertwining them with their conjugates. Both
//! matrices are emitted on the full space and annihilate the complement of
//! the state span.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::biortho::{self, bra_matrix, ket_matrix, BiorthoError, DualBasis, Scheme};
use crate::linalg::{self, c, CMatrix, LinalgError};
use crate::nlevp::{Alpha, BoundState};

/// Bi-orthonormality residual accepted as input to K and L.
pub const INPUT_BIORTHO_TOL: f64 = 1e-8;
/// Largest imaginary part of an eigenvalue treated as real.
pub const REAL_SPECTRUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinearizeError {
    #[error("states and duals are inconsistent (bi-orthonormality residual {0:e})")]
    Inconsistent(f64),
    #[error("spectrum is not real: eigenvalue {index} has imaginary part {imag:e}")]
    UnsupportedSpectrum { index: usize, imag: f64 },
    #[error(transparent)]
    Biortho(#[from] BiorthoError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn energies(states: &[BoundState]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        states.len(),
        states.iter().map(|s| c(s.energy)),
    ))
}

fn check(states: &[BoundState], duals: &DualBasis) -> Result<(), LinearizeError> {
    let res = biortho::biorthonormality_residual(states, duals)?;
    if !(res <= INPUT_BIORTHO_TOL) {
        return Err(LinearizeError::Inconsistent(res));
    }
    Ok(())
}

pub fn build_k(states: &[BoundState], duals: &DualBasis) -> Result<CMatrix, LinearizeError> {
    check(states, duals)?;
    Ok(ket_matrix(states) * energies(states) * bra_matrix(&duals.bras))
}

pub fn build_l(states: &[BoundState], duals: &DualBasis) -> Result<CMatrix, LinearizeError> {
    check(states, duals)?;
    let kets = CMatrix::from_columns(&duals.kets);
    let bras = bra_matrix(&biortho::state_bras(states, duals.scheme));
    Ok(kets * energies(states) * bras)
}

/// `ξ = Σ |φ_α⟩⟨φ_α|` and `ξ⁻¹ = Σ |φ_α⟩⟩⟨⟨φ_α|` (inverse on the state span).
pub fn metric_xi(states: &[BoundState], duals: &DualBasis) -> Result<(CMatrix, CMatrix), LinearizeError> {
    check(states, duals)?;
    let phi = ket_matrix(states);
    let xi = &phi * phi.adjoint();
    let xi_inv = CMatrix::from_columns(&duals.kets) * bra_matrix(&duals.bras);
    Ok((xi, xi_inv))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Metrics {
    Hermitian {
        xi: CMatrix,
        xi_inv: CMatrix,
    },
    /// `μ = Σ |φ_α⟩⟩⟨⟨φ_α|`, `ν = Σ |φ_α⟩⟨φ_α|` (lower-index kets are the
    /// conjugates of the bras), `μ⁻¹ = Σ |φ^α⟩⟨φ^α|`, `ν⁻¹ = Σ |φ^α⟩⟩⟨⟨φ^α|`.
    NonHermitian {
        mu: CMatrix,
        mu_inv: CMatrix,
        nu: CMatrix,
        nu_inv: CMatrix,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedPair {
    pub scheme: Scheme,
    pub k: CMatrix,
    pub l: CMatrix,
    pub metrics: Metrics,
    pub alphas: Vec<Alpha>,
    pub energies: Vec<f64>,
    /// State kets as columns.
    pub kets: CMatrix,
    /// State bras (scheme-dependent) as rows.
    pub bras: CMatrix,
    /// Dual bras `⟨⟨φ_α|` as rows.
    pub dual_bras: CMatrix,
    /// Dual kets `|φ^β⟩⟩` as columns.
    pub dual_kets: CMatrix,
    pub projector: CMatrix,
    pub residuals: BTreeMap<String, f64>,
    /// Smallest eigenvalue of each metric restricted to its natural span.
    pub positivity: BTreeMap<String, f64>,
}

/// Eigenvalues of a Hermitian `m` restricted to the column span of `basis`.
fn restricted_eigenvalues(m: &CMatrix, basis: &CMatrix) -> Result<Vec<f64>, LinalgError> {
    let q = basis.clone().qr().q();
    let q = q.columns(0, basis.ncols()).into_owned();
    Ok(linalg::hermitian_eigen(&(q.adjoint() * m * &q))?
        .into_iter()
        .map(|e| e.value.re)
        .collect())
}

fn min_of(v: Vec<f64>) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

/// Runs overlap → duals → K, L → metrics → residuals.
pub fn linearize(states: &[BoundState], scheme: Scheme, max_condition: f64) -> Result<LinearizedPair, LinearizeError> {
    let b = biortho::build(states, scheme, max_condition)?;
    let k = build_k(states, &b.duals)?;
    let l = build_l(states, &b.duals)?;
    let kets = ket_matrix(states);
    let bras = bra_matrix(&biortho::state_bras(states, scheme));
    let dual_bras = bra_matrix(&b.duals.bras);
    let dual_kets = CMatrix::from_columns(&b.duals.kets);
    let metrics = match scheme {
        Scheme::Hermitian => {
            let (xi, xi_inv) = metric_xi(states, &b.duals)?;
            Metrics::Hermitian { xi, xi_inv }
        }
        Scheme::NonHermitian => Metrics::NonHermitian {
            mu: dual_bras.adjoint() * &dual_bras,
            mu_inv: &kets * kets.adjoint(),
            nu: bras.adjoint() * &bras,
            nu_inv: &dual_kets * dual_kets.adjoint(),
        },
    };
    let mut pair = LinearizedPair {
        scheme,
        k,
        l,
        metrics,
        alphas: states.iter().map(|s| s.alpha).collect(),
        energies: states.iter().map(|s| s.energy).collect(),
        kets,
        bras,
        dual_bras,
        dual_kets,
        projector: b.projector,
        residuals: BTreeMap::new(),
        positivity: BTreeMap::new(),
    };
    pair.residuals = intertwining_residuals(&pair);
    pair.positivity = positivity(&pair)?;
    Ok(pair)
}

fn positivity(pair: &LinearizedPair) -> Result<BTreeMap<String, f64>, LinalgError> {
    let mut out = BTreeMap::new();
    match &pair.metrics {
        Metrics::Hermitian { xi, xi_inv } => {
            out.insert("xi".into(), min_of(restricted_eigenvalues(xi, &pair.kets)?));
            out.insert(
                "xi_inv".into(),
                min_of(restricted_eigenvalues(xi_inv, &pair.dual_kets)?),
            );
        }
        Metrics::NonHermitian { mu, mu_inv, nu, nu_inv } => {
            out.insert(
                "mu".into(),
                min_of(restricted_eigenvalues(mu, &pair.dual_bras.adjoint())?),
            );
            out.insert("mu_inv".into(), min_of(restricted_eigenvalues(mu_inv, &pair.kets)?));
            out.insert("nu".into(), min_of(restricted_eigenvalues(nu, &pair.bras.adjoint())?));
            out.insert(
                "nu_inv".into(),
                min_of(restricted_eigenvalues(nu_inv, &pair.dual_kets)?),
            );
        }
    }
    Ok(out)
}

/// Every intertwining and action relation as a max-norm residual.
///
/// `K` and `L` are taken from `pair` as stored; the metrics enter through their
/// low-rank factors so that no dense `dim × dim` product is ever formed.
pub fn intertwining_residuals(pair: &LinearizedPair) -> BTreeMap<String, f64> {
    let d = linalg::max_abs_diff;
    let e = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        pair.energies.len(),
        pair.energies.iter().map(|&v| c(v)),
    ));
    let (k, l) = (&pair.k, &pair.l);
    let phi = &pair.kets;
    let bras = &pair.bras;
    let dk = &pair.dual_kets;
    let db = &pair.dual_bras;
    let mut r = BTreeMap::new();

    let mut right = 0.0_f64;
    let mut left = 0.0_f64;
    for (a, &energy) in pair.energies.iter().enumerate() {
        let ket = phi.column(a);
        let bra = bras.row(a);
        right = right.max((k * ket - ket * c(energy)).norm());
        left = left.max((bra * l - bra * c(energy)).norm());
    }
    r.insert("right_action".into(), right);
    r.insert("left_action".into(), left);
    if phi.is_square() {
        // independent formula K = Φ diag(E) Φ⁻¹
        if let Some(inv) = phi.clone().try_inverse() {
            r.insert("k_minus_phi_e_phi_inv".into(), d(k, &(phi * &e * inv)));
        }
    }

    match &pair.metrics {
        Metrics::Hermitian { xi, .. } => {
            // ξ = Φ Φ†,  ξ⁻¹ = C D
            let k_phi = k * phi;
            let l_c = l * dk;
            r.insert(
                "xi_l_minus_k_xi".into(),
                d(&(phi * (phi.adjoint() * l)), &(&k_phi * phi.adjoint())),
            );
            r.insert("l_xi_inv_minus_xi_inv_k".into(), d(&(&l_c * db), &(dk * (db * k))));
            // K ξ = Σ |φ_α⟩ E_α ⟨φ_α|,  ξ⁻¹ K = Σ |φ_α⟩⟩ E_α ⟨⟨φ_α|
            r.insert(
                "k_xi_minus_spectral_sum".into(),
                d(&(&k_phi * phi.adjoint()), &(phi * (&e * bras))),
            );
            r.insert("xi_inv_k_minus_dual_sum".into(), d(&(dk * (db * k)), &(dk * (&e * db))));
            r.insert(
                "xi_xi_inv_minus_projector".into(),
                d(&(phi * ((phi.adjoint() * dk) * db)), &pair.projector),
            );
            r.insert("k_minus_l_dagger".into(), d(k, &l.adjoint()));
            r.insert("xi_hermiticity".into(), linalg::hermiticity_defect(xi));
        }
        Metrics::NonHermitian { mu, nu, .. } => {
            // μ = D† D,  μ⁻¹ = Φ Φ†,  ν = B† B,  ν⁻¹ = C C†
            let d_k = db * k;
            let b_l = bras * l;
            let k_phi = k * phi;
            let l_c = l * dk;
            let dbh = db.adjoint();
            let bh = bras.adjoint();
            r.insert(
                "k_dagger_mu_minus_mu_k".into(),
                d(&(d_k.adjoint() * db), &(&dbh * &d_k)),
            );
            r.insert(
                "nu_l_minus_l_dagger_nu".into(),
                d(&(&bh * &b_l), &(b_l.adjoint() * bras)),
            );
            r.insert(
                "k_mu_inv_minus_mu_inv_k_dagger".into(),
                d(&(&k_phi * phi.adjoint()), &(phi * k_phi.adjoint())),
            );
            r.insert(
                "l_nu_inv_minus_nu_inv_l_dagger".into(),
                d(&(&l_c * dk.adjoint()), &(dk * l_c.adjoint())),
            );
            // μ K = Σ |φ_α⟩⟩ E_α ⟨⟨φ_α|,  ν L = Σ |φ_α⟩ E_α ⟨φ_α| (lower-index kets)
            r.insert("mu_k_minus_spectral_sum".into(), d(&(&dbh * &d_k), &(&dbh * (&e * db))));
            r.insert("nu_l_minus_spectral_sum".into(), d(&(&bh * &b_l), &(&bh * (&e * bras))));
            let pd = pair.projector.adjoint();
            r.insert(
                "mu_mu_inv_minus_projector_dagger".into(),
                d(&(&dbh * ((db * phi) * phi.adjoint())), &pd),
            );
            r.insert(
                "nu_nu_inv_minus_projector_dagger".into(),
                d(&(&bh * ((bras * dk) * dk.adjoint())), &pd),
            );
            r.insert(
                "metric_hermiticity".into(),
                linalg::hermiticity_defect(mu).max(linalg::hermiticity_defect(nu)),
            );
        }
    }
    r
}

/// Bi-orthogonal spectral data of a constant non-Hermitian matrix with real spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct NonHermitianDecomposition {
    pub states: Vec<BoundState>,
    pub eta: CMatrix,
    pub eta_inv: CMatrix,
    pub residuals: BTreeMap<String, f64>,
    pub eta_min_eigenvalue: f64,
}

/// `H0 = Σ |Ψ^(n)⟩ E_n ⟨Ψ_(n)|` with the metric `η = Σ |Ψ_(n)⟩⟨Ψ_(n)|`.
pub fn spectral_decomposition_nonhermitian(h0: &CMatrix) -> Result<NonHermitianDecomposition, LinearizeError> {
    let n = linalg::ensure_square(h0)?;
    let pairs = linalg::general_eigen(h0)?;
    if let Some((index, p)) = pairs
        .iter()
        .enumerate()
        .find(|(_, p)| p.value.im.abs() > REAL_SPECTRUM_TOL)
    {
        return Err(LinearizeError::UnsupportedSpectrum {
            index,
            imag: p.value.im,
        });
    }
    let states: Vec<BoundState> = pairs
        .into_iter()
        .enumerate()
        .map(|(j, p)| {
            let energy = p.value.re;
            let e = c(energy);
            BoundState {
                alpha: Alpha { n: j, j: 0 },
                energy,
                residual_right: (h0 * &p.right - &p.right * e).norm(),
                residual_left: (h0.transpose() * &p.left - &p.left * e).norm(),
                fixed_point_residual: 0.0,
                match_quality: 1.0,
                right: p.right,
                left: p.left,
            }
        })
        .collect();
    let kets = ket_matrix(&states);
    let bras = bra_matrix(&biortho::state_bras(&states, Scheme::NonHermitian));
    let e = energies(&states);
    let eta = bras.adjoint() * &bras;
    let eta_inv = &kets * kets.adjoint();
    let id = CMatrix::identity(n, n);
    let d = linalg::max_abs_diff;
    let mut residuals = BTreeMap::new();
    residuals.insert("reconstruction".into(), d(&(&kets * &e * &bras), h0));
    residuals.insert("completeness".into(), d(&(&kets * &bras), &id));
    residuals.insert("eta_intertwining".into(), d(&(h0.adjoint() * &eta), &(&eta * h0)));
    residuals.insert(
        "eta_inv_intertwining".into(),
        d(&(h0 * &eta_inv), &(&eta_inv * h0.adjoint())),
    );
    residuals.insert("eta_eta_inv_minus_identity".into(), d(&(&eta * &eta_inv), &id));
    let eta_min_eigenvalue = min_of(linalg::hermitian_eigen(&eta)?.into_iter().map(|p| p.value.re).collect());
    Ok(NonHermitianDecomposition {
        states,
        eta,
        eta_inv,
        residuals,
        eta_min_eigenvalue,
    })
}

/// Residual summary used by reports: name → value, deterministic order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearizeSummary {
    pub scheme: Scheme,
    pub residuals: BTreeMap<String, f64>,
    pub metric_min_eigenvalues: BTreeMap<String, f64>,
}

impl From<&LinearizedPair> for LinearizeSummary {
    fn from(p: &LinearizedPair) -> Self {
        Self {
            scheme: p.scheme,
            residuals: p.residuals.clone(),
            metric_min_eigenvalues: p.positivity.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biortho::{states_from_kets, DEFAULT_MAX_CONDITION};
    use crate::linalg::CVector;
    use crate::models::real_matrix;

    fn v(values: &[f64]) -> CVector {
        CVector::from_iterator(values.len(), values.iter().map(|&x| c(x)))
    }

    fn with_energies(mut states: Vec<BoundState>, e: &[f64]) -> Vec<BoundState> {
        for (s, &en) in states.iter_mut().zip(e) {
            s.energy = en;
        }
        states
    }

    fn skewed() -> Vec<BoundState> {
        let s = 1.0 / 2f64.sqrt();
        with_energies(states_from_kets(&[v(&[1.0, 0.0]), v(&[s, s])]), &[1.0, 2.0])
    }

    #[test]
    fn orthonormal_case() {
        let states = with_energies(states_from_kets(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]), &[1.0, 3.0]);
        let p = linearize(&states, Scheme::Hermitian, DEFAULT_MAX_CONDITION).unwrap();
        let diag = real_matrix(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        assert_eq!(p.k, diag);
        assert_eq!(p.l, diag);
        assert!(p.residuals.values().all(|&r| r <= 1e-12), "{:?}", p.residuals);
        let Metrics::Hermitian { xi, .. } = &p.metrics else {
            panic!()
        };
        assert_eq!(*xi, CMatrix::identity(2, 2));
    }

    #[test]
    fn skewed_case_by_hand() {
        let states = skewed();
        let p = linearize(&states, Scheme::Hermitian, DEFAULT_MAX_CONDITION).unwrap();
        assert!(linalg::max_abs_diff(&p.k, &real_matrix(2, 2, &[1.0, 1.0, 0.0, 2.0])) < 1e-14);
        assert!(linalg::max_abs_diff(&p.l, &real_matrix(2, 2, &[1.0, 0.0, 1.0, 2.0])) < 1e-14);
        let Metrics::Hermitian { xi, .. } = &p.metrics else {
            panic!()
        };
        assert!(linalg::max_abs_diff(xi, &real_matrix(2, 2, &[1.5, 0.5, 0.5, 0.5])) < 1e-15);
        assert!(p.residuals["xi_l_minus_k_xi"] <= 1e-10);
        assert!(p.residuals["l_xi_inv_minus_xi_inv_k"] <= 1e-10);
    }

    #[test]
    fn single_state_rank_one() {
        let states = with_energies(states_from_kets(&[v(&[1.0, 0.0])]), &[5.0]);
        let b = biortho::build(&states, Scheme::Hermitian, DEFAULT_MAX_CONDITION).unwrap();
        let diag5 = real_matrix(2, 2, &[5.0, 0.0, 0.0, 0.0]);
        assert_eq!(build_k(&states, &b.duals).unwrap(), diag5);
        assert_eq!(build_l(&states, &b.duals).unwrap(), diag5);
        let (xi, xi_inv) = metric_xi(&states, &b.duals).unwrap();
        let e1 = real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(xi, e1);
        assert_eq!(xi_inv, e1);
        assert_eq!(&xi * &xi_inv, b.projector);
    }

    #[test]
    fn perturbed_l_is_detected() {
        let mut p = linearize(&skewed(), Scheme::Hermitian, DEFAULT_MAX_CONDITION).unwrap();
        p.l[(0, 1)] += c(1e-4);
        let r = intertwining_residuals(&p);
        assert!(r["xi_l_minus_k_xi"] >= 1e-5);
    }

    #[test]
    fn inconsistent_duals_are_rejected() {
        let states = skewed();
        let mut b = biortho::build(&states, Scheme::Hermitian, DEFAULT_MAX_CONDITION).unwrap();
        b.duals.bras[0][1] += c(1e-3);
        assert!(matches!(
            build_k(&states, &b.duals),
            Err(LinearizeError::Inconsistent(_))
        ));
    }

    #[test]
    fn upper_triangular_metric() {
        let h0 = real_matrix(2, 2, &[1.0, 1.0, 0.0, 2.0]);
        let dec = spectral_decomposition_nonhermitian(&h0).unwrap();
        let eta = real_matrix(2, 2, &[1.0, -1.0, -1.0, 3.0]);
        assert!(linalg::max_abs_diff(&dec.eta, &eta) < 1e-14);
        assert!(linalg::max_abs_diff(&(&eta * &h0), &(h0.adjoint() * &eta)) < 1e-14);
        assert!(dec.eta_min_eigenvalue > 0.0);
        assert!(dec.residuals.values().all(|&r| r < 1e-13), "{:?}", dec.residuals);
    }

    #[test]
    fn hermitian_input_gives_unit_metric() {
        let h0 = real_matrix(2, 2, &[2.0, 1.0, 1.0, -1.0]);
        let dec = spectral_decomposition_nonhermitian(&h0).unwrap();
        assert!(linalg::max_abs_diff(&dec.eta, &CMatrix::identity(2, 2)) < 1e-13);
    }

    #[test]
    fn complex_spectrum_is_unsupported() {
        let h0 = real_matrix(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(
            spectral_decomposition_nonhermitian(&h0),
            Err(LinearizeError::UnsupportedSpectrum { .. })
        ));
        let jordan = real_matrix(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            spectral_decomposition_nonhermitian(&jordan),
            Err(LinearizeError::Linalg(LinalgError::NonDiagonalizable { .. }))
        ));
    }
}
