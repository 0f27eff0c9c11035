//! Self-consistent energies of the oscillator with mass `m(z) = m0 (1 + λz)`.
//!
//! The branch energies are `E_n(z) = (n + ½) ħ √(2g / m(z))`, so a fixed
//! point solves `m0 z² (1 + λz) = 2 g ħ² (n + ½)²` with `z > 0` and `m(z) > 0`.

use crate::models::{MassLaw, OscillatorParams};

use super::OracleError;

const SAMPLES: usize = 200_000;

pub fn ho_analytic_roots(n: u32, p: &OscillatorParams) -> Result<Vec<f64>, OracleError> {
    let MassLaw::Linear { m0, lambda } = p.mass else {
        return Err(OracleError::NotParametric);
    };
    let level = n as f64 + 0.5;
    if lambda == 0.0 {
        return Ok(vec![level * p.hbar * (2.0 * p.g / m0).sqrt()]);
    }
    let target = 2.0 * p.g * p.hbar * p.hbar * level * level;
    let cubic = |z: f64| m0 * z * z * (1.0 + lambda * z) - target;
    // z < sqrt(target/m0) when λ > 0; mass vanishes at -1/λ when λ < 0
    let upper = if lambda > 0.0 {
        (target / m0).sqrt() * (1.0 + 1e-9)
    } else {
        -1.0 / lambda
    };
    let step = upper / SAMPLES as f64;
    let mut roots = Vec::new();
    let mut lo = 0.0;
    let mut f_lo = cubic(lo);
    for i in 1..=SAMPLES {
        let hi = if i == SAMPLES { upper } else { i as f64 * step };
        let f_hi = cubic(hi);
        if f_hi == 0.0 {
            roots.push(hi);
        } else if f_lo * f_hi < 0.0 {
            roots.push(bisect(&cubic, lo, hi, f_lo));
        }
        lo = hi;
        f_lo = f_hi;
    }
    roots.retain(|&z| z > 0.0 && p.mass.mass(z) > 0.0);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
    Ok(roots)
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    0.5 * (lo + hi)
}
