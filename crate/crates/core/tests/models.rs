use edlin::linalg::{self, CMatrix};
use edlin::models::{self, EdHamiltonian, OscillatorParams, SexticParams, StepSegment, Window, HERMITIAN_TOL};
use edlin::random;
use proptest::prelude::*;

fn families(seed: u64) -> Vec<EdHamiltonian> {
    let mut rng = random::rng(seed);
    let (nh, _) = random::random_real_spectrum(4, &mut rng);
    vec![
        models::make_constant(random::random_hermitian(4, &mut rng)).unwrap(),
        models::make_constant(nh).unwrap(),
        models::make_step(vec![
            StepSegment {
                window: Window::new(f64::NEG_INFINITY, 0.0),
                matrix: random::random_hermitian(3, &mut rng),
            },
            StepSegment {
                window: Window::new(0.0, f64::INFINITY),
                matrix: random::random_hermitian(3, &mut rng),
            },
        ])
        .unwrap(),
        models::make_ed_mass_oscillator(OscillatorParams::unit(0.3, 41)).unwrap(),
        models::make_sextic_qes(SexticParams {
            n: 1,
            b: 1.0,
            r_max: 4.0,
            points: 40,
            window: Window::everything(),
        })
        .unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eval_is_deterministic(seed in 0u64..1000, z in -3.0f64..3.0) {
        for h in families(seed) {
            prop_assert_eq!(h.eval(z).unwrap(), h.eval(z).unwrap());
        }
    }

    #[test]
    fn hermiticity_flag_is_honest(seed in 0u64..1000, zs in prop::collection::vec(-3.0f64..3.0, 20)) {
        for h in families(seed) {
            for &z in &zs {
                let defect = linalg::hermiticity_defect(&h.eval(z).unwrap());
                prop_assert_eq!(defect <= HERMITIAN_TOL, h.hermitian_each_z(), "{} at z = {}", h.label(), z);
            }
        }
    }

    #[test]
    fn step_model_is_piecewise_constant(seed in 0u64..1000, z1 in 0.001f64..5.0, z2 in 0.001f64..5.0) {
        let h = &families(seed)[2];
        prop_assert_eq!(h.eval(z1).unwrap(), h.eval(z2).unwrap());
        prop_assert_eq!(h.eval(-z1).unwrap(), h.eval(-z2).unwrap());
        prop_assert_eq!(h.eval(0.0).unwrap(), h.eval(-z1).unwrap());
    }
}

fn ground_error(points: usize) -> f64 {
    let h = models::make_ed_mass_oscillator(OscillatorParams::unit(0.0, points)).unwrap();
    let models::ModelMatrix::Tridiagonal(t) = h.eval_structured(0.5).unwrap() else {
        panic!("oscillator is tridiagonal");
    };
    (t.eigenvalue(0) - 0.5).abs()
}

#[test]
fn oscillator_discretization_is_second_order() {
    for points in [201, 401, 801, 1601] {
        let ratio = ground_error(points) / ground_error(2 * points - 1);
        assert!(ratio >= 3.0, "{points} points: error ratio {ratio}");
    }
}

#[test]
fn dense_view_matches_structured() {
    for h in families(3) {
        let m = h.eval_structured(0.25).unwrap();
        let dense: CMatrix = m.to_dense();
        assert_eq!(dense, h.eval(0.25).unwrap());
        assert_eq!(m.dim(), h.dim());
    }
}
