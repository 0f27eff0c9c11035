use edlin::feshbach::{self, FeshbachModel};
use edlin::linalg::{self, CVector};
use edlin::models::{self, EdHamiltonian, StepSegment, Window};
use edlin::nlevp::{self, BoundState, SolveOptions};
use edlin::random;
use proptest::prelude::*;

fn overlap(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).norm() / (a.norm() * b.norm())
}

/// Re-evaluates `H(E_α)` and returns `|E^(branch)(E_α) − E_α|` for the
/// eigenpair carrying the state's eigenvector.
fn certificate(h: &EdHamiltonian, s: &BoundState) -> f64 {
    let pairs = nlevp::eigen_at(h, s.energy).unwrap();
    let best = pairs
        .iter()
        .max_by(|a, b| overlap(&a.right, &s.right).total_cmp(&overlap(&b.right, &s.right)))
        .unwrap();
    (best.value.re - s.energy).abs()
}

fn check_states(h: &EdHamiltonian, states: &[BoundState], tol: f64) -> Result<(), TestCaseError> {
    for s in states {
        let bound = 1e-9 * (1.0 + s.energy.abs());
        prop_assert!(certificate(h, s) <= tol.max(bound), "certificate at {}", s.energy);
        prop_assert!(s.residual_right <= bound && s.residual_left <= bound);
        prop_assert!((s.right.norm() - 1.0).abs() <= 1e-12);
        prop_assert!((linalg::pair(&s.left, &s.right) - linalg::c(1.0)).norm() <= 1e-10);
    }
    Ok(())
}

fn feshbach_model(seed: u64, dim: usize) -> (EdHamiltonian, f64, f64) {
    let mut rng = random::rng(seed);
    let h_r = random::random_hermitian(dim, &mut rng);
    let p = random::random_projector(dim, 1 + (seed as usize) % (dim - 1), &mut rng);
    let e: Vec<f64> = linalg::hermitian_eigen(&h_r)
        .unwrap()
        .iter()
        .map(|p| p.value.re)
        .collect();
    let m = FeshbachModel::new(h_r, p).unwrap();
    (feshbach::feshbach_model_as_ed(&m), e[0] - 1.0, e[dim - 1] + 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constant_model_returns_its_spectrum(seed in 0u64..10_000, dim in 1usize..8) {
        let mut rng = random::rng(seed);
        let h0 = random::random_hermitian(dim, &mut rng);
        let e: Vec<f64> = linalg::hermitian_eigen(&h0).unwrap().iter().map(|p| p.value.re).collect();
        let h = models::make_constant(h0).unwrap();
        let opts = SolveOptions::default();
        let states = nlevp::solve_all(&h, e[0] - 1.0, e[dim - 1] + 1.0, &opts).unwrap();
        let found: Vec<f64> = states.iter().map(|s| s.energy).collect();
        prop_assert_eq!(found.len(), dim);
        for (a, b) in found.iter().zip(&e) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        check_states(&h, &states, opts.tol)?;
    }

    #[test]
    fn feshbach_states_are_certified(seed in 0u64..10_000, dim in 2usize..9) {
        let (h, lo, hi) = feshbach_model(seed, dim);
        let opts = SolveOptions::default();
        let states = nlevp::solve_all(&h, lo, hi, &opts).unwrap();
        check_states(&h, &states, opts.tol)?;
    }

    #[test]
    fn grid_refinement_keeps_roots(seed in 0u64..10_000, dim in 2usize..9, points in 60usize..160) {
        let (h, lo, hi) = feshbach_model(seed, dim);
        let coarse = SolveOptions { grid_points: points, ..SolveOptions::default() };
        let fine = SolveOptions { grid_points: 2 * points, ..SolveOptions::default() };
        let a = nlevp::solve_all(&h, lo, hi, &coarse).unwrap();
        let b = nlevp::solve_all(&h, lo, hi, &fine).unwrap();
        for s in &a {
            prop_assert!(
                b.iter().any(|t| (t.energy - s.energy).abs() <= 1e-9),
                "root {} lost on refinement", s.energy
            );
        }
    }

    #[test]
    fn step_roots_respect_windows(x in 0.1f64..0.9, y in 1.1f64..3.0, split in 0.95f64..1.05) {
        let diag = |a: f64, b: f64| models::real_matrix(2, 2, &[a, 0.0, 0.0, b]);
        let h = models::make_step(vec![
            StepSegment { window: Window::new(f64::NEG_INFINITY, split), matrix: diag(x, 5.0) },
            StepSegment { window: Window::new(split, f64::INFINITY), matrix: diag(x + 0.1, y) },
        ])
        .unwrap();
        let states = nlevp::solve_all(&h, -1.0, 6.0, &SolveOptions::default()).unwrap();
        prop_assert_eq!(states.len(), 2);
        prop_assert!((states[0].energy - x).abs() <= 1e-12 && (states[1].energy - y).abs() <= 1e-12);
    }
}

#[test]
fn inverse_dependence_has_one_root() {
    // H(z) = 2 / z on z > 0: fixed point z = √2 only
    let h = EdHamiltonian::custom(
        "inverse",
        1,
        models::ZDomain::from_windows(&[Window::new(0.0, f64::INFINITY)]),
        true,
        |z| Ok(models::ModelMatrix::Dense(models::real_matrix(1, 1, &[2.0 / z]))),
    );
    let states = nlevp::solve_all(&h, 0.1, 4.0, &SolveOptions::default()).unwrap();
    assert_eq!(states.len(), 1);
    assert!((states[0].energy - 2f64.sqrt()).abs() <= 1e-10);
}
