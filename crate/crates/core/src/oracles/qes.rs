//! Quasi-exact solutions of the radial sextic oscillator
//! `-u'' + (A r² + 2b r⁴ + r⁶) u = E u`, `u(0) = 0`.
//!
//! The ansatz `u = r p(r²) exp(-r⁴/4 - b r²/2)` with `deg p = N` truncates
//! only when `A = A_N = b² - 4N - 5`. The coefficients of `p` then obey a
//! three-term recurrence whose (N+1)×(N+1) matrix has the QES energies as
//! eigenvalues:
//!
//! `E c_k = b(4k+3) c_k - (2k+2)(2k+3) c_{k+1} - 4(N+1-k) c_{k-1}`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::algebraic::ExtRational;
use super::poly::{Coefficient, Poly};
use super::OracleError;
use crate::linalg::SymTridiagonal;

pub type RationalPoly = Poly<BigRational>;

pub const MAX_QES_DEGREE: u32 = 3;

/// Exact data behind a [`QesSolution`]; polynomials in the energy variable `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct QesExact {
    pub b: BigRational,
    pub a_n: BigRational,
    /// Characteristic polynomial whose roots are the sector energies.
    pub char_poly: RationalPoly,
    /// `c_k(E)` with `c_0 = 1`.
    pub coeffs_in_energy: Vec<RationalPoly>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QesSolution {
    pub n: u32,
    pub b: f64,
    pub a_n: f64,
    /// Ascending, exactly N+1 of them.
    pub energies: Vec<f64>,
    /// Per energy, `c_0..=c_N` of `p(r) = Σ c_k r^{2k}`.
    pub poly_coeffs: Vec<Vec<f64>>,
    #[serde(skip)]
    pub exact: QesExact,
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn spring_constant(n: u32, b: f64) -> f64 {
    b * b - 4.0 * n as f64 - 5.0
}

pub fn qes_sextic_construct(n: u32, b: f64) -> Result<QesSolution, OracleError> {
    if n > MAX_QES_DEGREE {
        return Err(OracleError::UnsupportedDegree(n));
    }
    let b_exact = BigRational::from_float(b).ok_or(OracleError::NonFinite(b))?;
    let nn = n as i64;
    let a_exact = b_exact.clone() * b_exact.clone() - int(4 * nn + 5);

    // c_{k+1} = [(b(4k+3) - E) c_k - 4(N+1-k) c_{k-1}] / ((2k+2)(2k+3))
    let energy = RationalPoly::new(vec![BigRational::zero(), BigRational::one()]);
    let diag = |k: i64| RationalPoly::constant(b_exact.clone() * int(4 * k + 3));
    let mut coeffs: Vec<RationalPoly> = vec![RationalPoly::constant(BigRational::one())];
    for k in 0..nn {
        let ck = &coeffs[k as usize];
        let mut next = &(&diag(k) - &energy) * ck;
        if k > 0 {
            let prev = coeffs[k as usize - 1].scale(&int(4 * (nn + 1 - k)));
            next = &next - &prev;
        }
        let denom = int((2 * k + 2) * (2 * k + 3));
        coeffs.push(next.scale(&(BigRational::one() / denom)));
    }
    let top = &(&diag(nn) - &energy) * &coeffs[nn as usize];
    let char_poly = if nn > 0 {
        &top - &coeffs[nn as usize - 1].scale(&int(4))
    } else {
        top
    };

    // roots: the recurrence matrix is similar to a symmetric tridiagonal one
    let diag_f: Vec<f64> = (0..=nn).map(|k| b * (4 * k + 3) as f64).collect();
    let off_f: Vec<f64> = (0..nn)
        .map(|k| (((2 * k + 2) * (2 * k + 3) * 4 * (nn - k)) as f64).sqrt())
        .collect();
    let tri = SymTridiagonal::new(diag_f, off_f);
    let chi_f = char_poly.map(to_f64);
    let dchi_f = chi_f.derivative();
    let energies: Vec<f64> = (0..=nn as usize)
        .map(|k| {
            let mut e = tri.eigenvalue(k);
            for _ in 0..3 {
                let d = dchi_f.eval(&e);
                if d == 0.0 {
                    break;
                }
                let step = chi_f.eval(&e) / d;
                if !step.is_finite() {
                    break;
                }
                e -= step;
            }
            e
        })
        .collect();
    let poly_coeffs = energies
        .iter()
        .map(|e| coeffs.iter().map(|c| c.map(to_f64).eval(e)).collect())
        .collect();

    Ok(QesSolution {
        n,
        b,
        a_n: to_f64(&a_exact),
        energies,
        poly_coeffs,
        exact: QesExact {
            b: b_exact,
            a_n: a_exact,
            char_poly,
            coeffs_in_energy: coeffs,
        },
    })
}

/// `q` in `-u'' + (A r² + 2b r⁴ + r⁶) u - E u = q(r) exp(-r⁴/4 - b r²/2)` for
/// `u = r p(r) exp(-r⁴/4 - b r²/2)`, by direct polynomial calculus.
pub fn sextic_residual<T: Coefficient>(p: &Poly<T>, a: &T, b: &T, e: &T) -> Poly<T> {
    let w = &p.clone() * &Poly::monomial(T::one(), 1);
    let ds = Poly::new(vec![T::zero(), -b.clone(), T::zero(), -T::one()]);
    let dds = ds.derivative();
    let w1 = w.derivative();
    let w2 = w1.derivative();
    // u'' / exp(S) = w'' + 2 S' w' + (S'' + S'²) w
    let two = T::from_int(2);
    let u2 = &(&w2 + &(&ds * &w1).scale(&two)) + &(&(&dds + &(&ds * &ds)) * &w);
    let potential = Poly::new(vec![
        T::zero(),
        T::zero(),
        a.clone(),
        T::zero(),
        two * b.clone(),
        T::zero(),
        T::one(),
    ]);
    let vw = &potential * &w;
    &(&(-&u2) + &vw) - &w.scale(e)
}

fn even_poly<T: Coefficient>(c: &[T]) -> Poly<T> {
    let mut coeffs = vec![T::zero(); 2 * c.len().max(1)];
    for (k, ck) in c.iter().enumerate() {
        coeffs[2 * k] = ck.clone();
    }
    Poly::new(coeffs)
}

/// Exact residual in `Q[E]/(χ)`: the energy is the class of `E` modulo the
/// characteristic polynomial, so a zero result certifies every sector energy,
/// in particular energy `j`.
pub fn qes_residual(sol: &QesSolution, j: usize) -> Result<Poly<ExtRational>, OracleError> {
    qes_residual_perturbed(sol, j, &BigRational::zero(), &BigRational::zero())
}

/// As [`qes_residual`] with `A_N + delta_a` and `E + delta_e` substituted.
pub fn qes_residual_perturbed(
    sol: &QesSolution,
    j: usize,
    delta_a: &BigRational,
    delta_e: &BigRational,
) -> Result<Poly<ExtRational>, OracleError> {
    if j >= sol.energies.len() {
        return Err(OracleError::IndexOutOfRange {
            index: j,
            len: sol.energies.len(),
        });
    }
    let ex = &sol.exact;
    let e = ExtRational::generator(ex.char_poly.coeffs());
    let c: Vec<ExtRational> = ex
        .coeffs_in_energy
        .iter()
        .map(|ck| ck.eval_in(&e, |r| ExtRational::rational(r.clone())))
        .collect();
    let p = even_poly(&c);
    let a = ExtRational::rational(ex.a_n.clone() + delta_a.clone());
    let b = ExtRational::rational(ex.b.clone());
    let e = e + ExtRational::rational(delta_e.clone());
    Ok(sextic_residual(&p, &a, &b, &e))
}

/// Floating-point residual for energy `j`; small but not exactly zero.
pub fn qes_residual_numeric(sol: &QesSolution, j: usize) -> Result<Poly<f64>, OracleError> {
    let (c, e) = sol
        .poly_coeffs
        .get(j)
        .zip(sol.energies.get(j))
        .ok_or(OracleError::IndexOutOfRange {
            index: j,
            len: sol.energies.len(),
        })?;
    Ok(sextic_residual(&even_poly(c), &sol.a_n, &sol.b, e))
}

/// The (unnormalized) radial QES wavefunction of energy `j` at `r`.
pub fn qes_wavefunction(sol: &QesSolution, j: usize, r: f64) -> f64 {
    let p: f64 = sol.poly_coeffs[j].iter().rev().fold(0.0, |acc, c| acc * r * r + c);
    r * p * (-(r.powi(4)) / 4.0 - sol.b * r * r / 2.0).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_sector_b1() {
        let sol = qes_sextic_construct(0, 1.0).unwrap();
        assert_eq!(sol.a_n, -4.0);
        assert_eq!(sol.energies, vec![3.0]);
        assert_eq!(sol.poly_coeffs, vec![vec![1.0]]);
        assert!(qes_residual(&sol, 0).unwrap().is_zero());
    }

    #[test]
    fn ground_sector_b0() {
        let sol = qes_sextic_construct(0, 0.0).unwrap();
        assert_eq!(sol.a_n, -5.0);
        assert_eq!(sol.energies, vec![0.0]);
    }

    #[test]
    fn first_sector_b1_by_hand() {
        // recurrence block [[3, -6], [-4, 7]]: E² - 10E - 3 = 0
        let sol = qes_sextic_construct(1, 1.0).unwrap();
        assert_eq!(sol.a_n, -8.0);
        let s = 28f64.sqrt();
        assert!((sol.energies[0] - (5.0 - s)).abs() < 1e-13);
        assert!((sol.energies[1] - (5.0 + s)).abs() < 1e-13);
        for j in 0..2 {
            assert!(qes_residual(&sol, j).unwrap().is_zero());
            let numeric = qes_residual_numeric(&sol, j).unwrap();
            assert!(numeric.coeffs().iter().all(|c| c.abs() < 1e-12));
        }
    }

    #[test]
    fn all_supported_sectors_are_exact() {
        for n in 0..=MAX_QES_DEGREE {
            for b in [-1.5, 0.0, 0.5, 2.0] {
                let sol = qes_sextic_construct(n, b).unwrap();
                assert_eq!(sol.energies.len(), n as usize + 1);
                assert!(sol.energies.windows(2).all(|w| w[0] < w[1]));
                for j in 0..=n as usize {
                    assert!(qes_residual(&sol, j).unwrap().is_zero(), "N={n} b={b} j={j}");
                }
            }
        }
    }

    #[test]
    fn perturbations_break_exactness() {
        let sol = qes_sextic_construct(0, 1.0).unwrap();
        let zero = BigRational::zero();
        let milli = BigRational::new(1.into(), 1000.into());
        let q = qes_residual_perturbed(&sol, 0, &zero, &milli).unwrap();
        // -δE · r p(r): only the r¹ coefficient survives
        assert_eq!(q.degree(), Some(1));
        assert_eq!(q.coeff(1), ExtRational::rational(-milli.clone()));
        let q = qes_residual_perturbed(&sol, 0, &milli, &zero).unwrap();
        assert_eq!(q.degree(), Some(3));
        assert_eq!(q.coeff(3), ExtRational::rational(milli));
    }

    #[test]
    fn unsupported_degree() {
        assert!(matches!(
            qes_sextic_construct(4, 1.0),
            Err(OracleError::UnsupportedDegree(4))
        ));
    }
}
