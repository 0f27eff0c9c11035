use edlin::feshbach::{self, FeshbachModel};
use edlin::linalg::{self, c, CMatrix};
use edlin::random;
use proptest::prelude::*;

fn model(seed: u64, dim: usize, rank: usize) -> FeshbachModel {
    let mut rng = random::rng(seed);
    let h_r = random::random_hermitian(dim, &mut rng);
    let p = random::random_projector(dim, rank, &mut rng);
    FeshbachModel::new(h_r, p).unwrap()
}

fn gap(m: &FeshbachModel, e: f64) -> f64 {
    m.poles().iter().map(|p| (p - e).abs()).fold(f64::INFINITY, f64::min)
}

/// `P H P + P H Q (Q (E − H) Q)⁺ Q H P` assembled in the full space.
fn full_space_form(m: &FeshbachModel, e: f64) -> CMatrix {
    let d = m.dim();
    let shifted = &m.q * (CMatrix::identity(d, d) * c(e) - &m.h_r) * &m.q;
    let pinv = shifted.pseudo_inverse(1e-9).unwrap();
    &m.p * &m.h_r * &m.p + &m.p * &m.h_r * &m.q * pinv * &m.q * &m.h_r * &m.p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn effective_hamiltonian_is_hermitian(seed in 0u64..10_000, dim in 2usize..10, e in -4.0f64..4.0) {
        let rank = 1 + (seed as usize) % (dim - 1);
        let m = model(seed, dim, rank);
        prop_assume!(gap(&m, e) > 1e-6);
        let h = feshbach::feshbach_reduce(&m, e).unwrap();
        prop_assert!(linalg::hermiticity_defect(&h) <= 1e-12);
        prop_assert_eq!(h.nrows(), rank);
    }

    #[test]
    fn projected_form_matches_basis_coordinates(seed in 0u64..10_000, dim in 2usize..10, e in -4.0f64..4.0) {
        let rank = 1 + (seed as usize) % (dim - 1);
        let m = model(seed, dim, rank);
        prop_assume!(gap(&m, e) > 0.1);
        let h = feshbach::feshbach_reduce(&m, e).unwrap();
        let lifted = &m.p_basis * h * m.p_basis.adjoint();
        let err = linalg::max_abs_diff(&lifted, &full_space_form(&m, e));
        prop_assert!(err <= 1e-12, "difference {:e}", err);
    }

    #[test]
    fn entries_diverge_at_poles(seed in 0u64..10_000, dim in 3usize..10) {
        let m = model(seed, dim, 1 + (seed as usize) % (dim - 1));
        for &p in m.poles() {
            let others = m.poles().iter().filter(|&&q| q != p).map(|q| (q - p).abs()).fold(f64::INFINITY, f64::min);
            prop_assume!(others > 1e-2);
            // a pole whose Q-eigenvector decouples from P has no divergence at all
            let norm = |e: f64| feshbach::feshbach_reduce(&m, e).unwrap().norm();
            let delta = 1e-6;
            prop_assume!(norm(p + delta) > 1e3);
            let growth = (norm(p + delta / 10.0) / norm(p + delta)).max(norm(p - delta / 10.0) / norm(p - delta));
            prop_assert!(growth >= 10.0, "growth {} at pole {}", growth, p);
        }
    }
}

#[test]
fn pole_is_rejected_inside_tolerance() {
    let m = model(1, 5, 2);
    let p = m.poles()[0];
    assert!(feshbach::feshbach_reduce(&m, p + 1e-9).is_err());
    assert!(feshbach::feshbach_reduce(&m, p + 1e-6).is_ok());
}
