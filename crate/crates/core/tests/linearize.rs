use edlin::biortho::Scheme;
use edlin::linalg::{self, CMatrix};
use edlin::linearize;
use edlin::models;
use edlin::nlevp::{self, BoundState, SolveOptions};
use edlin::random;
use proptest::prelude::*;

fn states(h0: CMatrix, lo: f64, hi: f64) -> Vec<BoundState> {
    let h = models::make_constant(h0).unwrap();
    nlevp::solve_all(&h, lo, hi, &SolveOptions::default()).unwrap()
}

fn hermitian_states(seed: u64, dim: usize) -> Vec<BoundState> {
    let mut rng = random::rng(seed);
    let h0 = random::random_hermitian(dim, &mut rng);
    let e: Vec<f64> = linalg::hermitian_eigen(&h0)
        .unwrap()
        .iter()
        .map(|p| p.value.re)
        .collect();
    states(h0, e[0] - 1.0, e[dim - 1] + 1.0)
}

fn nonhermitian_states(seed: u64, dim: usize) -> Vec<BoundState> {
    let (h0, _) = random::random_real_spectrum(dim, &mut random::rng(seed));
    states(h0, 0.0, dim as f64)
}

fn permuted(states: &[BoundState], keys: &[u32]) -> Vec<BoundState> {
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by_key(|&i| keys[i % keys.len()].wrapping_mul(i as u32 + 1));
    order.into_iter().map(|i| states[i].clone()).collect()
}

fn check_pair(states: &[BoundState], scheme: Scheme, keys: &[u32]) -> Result<(), TestCaseError> {
    let a = linearize::linearize(states, scheme, 1e8).unwrap();
    let b = linearize::linearize(&permuted(states, keys), scheme, 1e8).unwrap();
    prop_assert!(linalg::max_abs_diff(&a.k, &b.k) <= 1e-12);
    prop_assert!(linalg::max_abs_diff(&a.l, &b.l) <= 1e-12);
    for (name, r) in &a.residuals {
        prop_assert!(*r <= 1e-9, "{} = {:e}", name, r);
    }
    for (name, p) in &a.positivity {
        prop_assert!(*p >= 1e-12, "{} min eigenvalue {:e}", name, p);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hermitian_pair_is_order_independent(
        seed in 0u64..10_000,
        dim in 2usize..7,
        keys in prop::collection::vec(any::<u32>(), 1..8),
    ) {
        let states = hermitian_states(seed, dim);
        check_pair(&states, Scheme::Hermitian, &keys)?;
        let pair = linearize::linearize(&states, Scheme::Hermitian, 1e8).unwrap();
        prop_assert!(linalg::max_abs_diff(&pair.k, &pair.l.adjoint()) <= 1e-10);
        prop_assert!(pair.residuals["k_minus_phi_e_phi_inv"] <= 1e-10);
    }

    #[test]
    fn nonhermitian_pair_is_order_independent(
        seed in 0u64..10_000,
        dim in 2usize..7,
        keys in prop::collection::vec(any::<u32>(), 1..8),
    ) {
        let states = nonhermitian_states(seed, dim);
        prop_assert_eq!(states.len(), dim);
        check_pair(&states, Scheme::NonHermitian, &keys)?;
    }

    #[test]
    fn subsets_linearize_on_their_span(seed in 0u64..10_000, dim in 3usize..7, skip in 0usize..3) {
        let mut states = hermitian_states(seed, dim);
        states.remove(skip);
        let pair = linearize::linearize(&states, Scheme::Hermitian, 1e8).unwrap();
        for s in &states {
            let kv = &pair.k * &s.right;
            prop_assert!((kv - &s.right * linalg::c(s.energy)).norm() <= 1e-9 * (1.0 + s.energy.abs()));
        }
        prop_assert!(linalg::max_abs_diff(&(&pair.projector * &pair.projector), &pair.projector) <= 1e-10);
    }
}
