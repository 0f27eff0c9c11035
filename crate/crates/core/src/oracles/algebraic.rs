//! Exact arithmetic in the quotient ring `Q[x] / (χ)`.
//!
//! The class of `x` stands for every root of `χ` at once, so an expression
//! that reduces to zero here vanishes exactly at each root, rational or not.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Zero};

/// Element of `Q[x]/(χ)`. Elements built from integers or rationals carry no
/// modulus and adopt the one of whatever they are combined with.
#[derive(Clone)]
pub struct ExtRational {
    coeffs: Vec<BigRational>,
    modulus: Option<Arc<Vec<BigRational>>>,
}

impl ExtRational {
    pub fn rational(r: BigRational) -> Self {
        Self::build(vec![r], None)
    }

    /// The class of `x` modulo `chi`. `chi` must have positive degree.
    pub fn generator(chi: &[BigRational]) -> Self {
        let mut chi: Vec<BigRational> = chi.to_vec();
        while chi.last().is_some_and(|c| c.is_zero()) {
            chi.pop();
        }
        assert!(chi.len() >= 2, "modulus must have positive degree");
        let lead = chi.last().cloned().expect("nonempty");
        let monic: Vec<BigRational> = chi.into_iter().map(|c| c / lead.clone()).collect();
        Self::build(vec![BigRational::zero(), BigRational::one()], Some(Arc::new(monic)))
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    fn build(mut coeffs: Vec<BigRational>, modulus: Option<Arc<Vec<BigRational>>>) -> Self {
        if let Some(m) = &modulus {
            let d = m.len() - 1;
            while coeffs.len() > d {
                let top = coeffs.pop().expect("len > d");
                if top.is_zero() {
                    continue;
                }
                let shift = coeffs.len() - d;
                for (i, mc) in m.iter().take(d).enumerate() {
                    coeffs[shift + i] = coeffs[shift + i].clone() - top.clone() * mc.clone();
                }
            }
        }
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs, modulus }
    }

    fn common_modulus(&self, other: &Self) -> Option<Arc<Vec<BigRational>>> {
        match (&self.modulus, &other.modulus) {
            (Some(a), Some(b)) => {
                assert!(
                    Arc::ptr_eq(a, b) || a == b,
                    "elements of different quotient rings combined"
                );
                Some(a.clone())
            }
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        }
    }
}

impl fmt::Debug for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return f.write_str("0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| match k {
                0 => format!("{c}"),
                1 => format!("({c})x"),
                _ => format!("({c})x^{k}"),
            })
            .collect();
        f.write_str(&terms.join(" + "))
    }
}

impl PartialEq for ExtRational {
    fn eq(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).coeffs.is_empty()
    }
}

impl Add for ExtRational {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let modulus = self.common_modulus(&rhs);
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                self.coeffs.get(k).cloned().unwrap_or_else(BigRational::zero)
                    + rhs.coeffs.get(k).cloned().unwrap_or_else(BigRational::zero)
            })
            .collect();
        Self::build(coeffs, modulus)
    }
}

impl Neg for ExtRational {
    type Output = Self;
    fn neg(self) -> Self {
        Self::build(self.coeffs.into_iter().map(|c| -c).collect(), self.modulus)
    }
}

impl Sub for ExtRational {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for ExtRational {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let modulus = self.common_modulus(&rhs);
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return Self::build(Vec::new(), modulus);
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Self::build(out, modulus)
    }
}

impl Zero for ExtRational {
    fn zero() -> Self {
        Self::build(Vec::new(), None)
    }

    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl One for ExtRational {
    fn one() -> Self {
        Self::rational(BigRational::one())
    }
}

impl FromPrimitive for ExtRational {
    fn from_i64(n: i64) -> Option<Self> {
        Some(Self::rational(BigRational::from_integer(n.into())))
    }

    fn from_u64(n: u64) -> Option<Self> {
        Some(Self::rational(BigRational::from_integer(n.into())))
    }
}
