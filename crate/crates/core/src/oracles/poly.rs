//! Dense univariate polynomials over any commutative coefficient ring.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{FromPrimitive, One, Zero};

/// Ring operations needed by the polynomial calculus. Blanket-implemented for
/// `f64`, `f32`, `BigRational` and anything else with the usual num-traits.
pub trait Coefficient:
    Clone
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_int(v: i64) -> Self;
}

impl<T> Coefficient for T
where
    T: Clone
        + PartialEq
        + fmt::Debug
        + Zero
        + One
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Neg<Output = T>
        + FromPrimitive,
{
    fn from_int(v: i64) -> Self {
        T::from_i64(v).expect("integer is representable in the coefficient ring")
    }
}

/// `Σ coeffs[k] x^k`, trailing zeros trimmed.
#[derive(Clone, PartialEq)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Coefficient> fmt::Debug for Poly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coeffs.iter()).finish()
    }
}

impl<T: Coefficient> Poly<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// `c x^k`
    pub fn monomial(c: T, k: usize) -> Self {
        let mut coeffs = vec![T::zero(); k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).cloned().unwrap_or_else(T::zero)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| T::from_int(k as i64) * c.clone())
                .collect(),
        )
    }

    pub fn scale(&self, s: &T) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.clone() * s.clone()).collect())
    }

    /// Horner evaluation at a point of the same ring.
    pub fn eval(&self, x: &T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    /// Maps every coefficient into another ring.
    pub fn map<U: Coefficient>(&self, f: impl Fn(&T) -> U) -> Poly<U> {
        Poly::new(self.coeffs.iter().map(f).collect())
    }

    /// Evaluates this polynomial (coefficients in `T`) at a point of a ring
    /// `U` that contains `T` through `embed`.
    pub fn eval_in<U: Coefficient>(&self, x: &U, embed: impl Fn(&T) -> U) -> U {
        self.coeffs
            .iter()
            .rev()
            .fold(U::zero(), |acc, c| acc * x.clone() + embed(c))
    }
}

impl<T: Coefficient> Add for &Poly<T> {
    type Output = Poly<T>;
    fn add(self, rhs: &Poly<T>) -> Poly<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl<T: Coefficient> Sub for &Poly<T> {
    type Output = Poly<T>;
    fn sub(self, rhs: &Poly<T>) -> Poly<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl<T: Coefficient> Mul for &Poly<T> {
    type Output = Poly<T>;
    fn mul(self, rhs: &Poly<T>) -> Poly<T> {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![T::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Poly::new(out)
    }
}

impl<T: Coefficient> Neg for &Poly<T> {
    type Output = Poly<T>;
    fn neg(self) -> Poly<T> {
        Poly::new(self.coeffs.iter().map(|c| -c.clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn derivative_and_product_over_rationals() {
        let p = Poly::new(vec![rat(1, 2), rat(0, 1), rat(3, 1)]);
        assert_eq!(p.derivative(), Poly::new(vec![rat(0, 1), rat(6, 1)]));
        let q = &p * &Poly::new(vec![rat(0, 1), rat(1, 1)]);
        assert_eq!(q.degree(), Some(3));
        assert_eq!(q.coeff(1), rat(1, 2));
        assert!((&q - &q).is_zero());
    }

    proptest! {
        #[test]
        fn product_rule_holds_exactly(a in prop::collection::vec(-20i64..20, 0..6),
                                      b in prop::collection::vec(-20i64..20, 0..6)) {
            let p = Poly::new(a.into_iter().map(|v| rat(v, 3)).collect());
            let q = Poly::new(b.into_iter().map(|v| rat(v, 7)).collect());
            let lhs = (&p * &q).derivative();
            let rhs = &(&p.derivative() * &q) + &(&p * &q.derivative());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn eval_is_a_ring_homomorphism(a in prop::collection::vec(-9i64..9, 0..5),
                                       b in prop::collection::vec(-9i64..9, 0..5),
                                       x in -5i64..5) {
            let p = Poly::new(a.into_iter().map(|v| rat(v, 1)).collect());
            let q = Poly::new(b.into_iter().map(|v| rat(v, 2)).collect());
            let x = rat(x, 1);
            prop_assert_eq!((&p * &q).eval(&x), p.eval(&x) * q.eval(&x));
            prop_assert_eq!((&p + &q).eval(&x), p.eval(&x) + q.eval(&x));
        }
    }
}
