//! Gaussian moments `∫₀^∞ e^{-x²} x^{c+2n} dx = Γ((c+2n+1)/2) / 2`.

use statrs::function::gamma::gamma;

use super::OracleError;

/// Integration cut-off; `e^{-x²} x^{41}` is below 1e-35 beyond it.
const CUTOFF: f64 = 16.0;

pub fn gamma_moment(n: u32, c: f64) -> Result<f64, OracleError> {
    if !(c > -1.0) {
        return Err(OracleError::Divergent(c));
    }
    Ok(0.5 * gamma((c + 2.0 * n as f64 + 1.0) / 2.0))
}

/// The same moment by double-exponential quadrature, unit panels on [0, 16].
pub fn gamma_moment_quadrature(n: u32, c: f64) -> Result<f64, OracleError> {
    if !(c > -1.0) {
        return Err(OracleError::Divergent(c));
    }
    let power = c + 2.0 * n as f64;
    let f = |x: f64| {
        if x <= 0.0 {
            if power == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (-x * x + power * x.ln()).exp()
        }
    };
    let panels = CUTOFF as usize;
    Ok((0..panels)
        .map(|k| quadrature::double_exponential::integrate(f, k as f64, (k + 1) as f64, 1e-16).integral)
        .sum())
}

/// Physicists' Hermite polynomial coefficients, ascending powers.
pub fn hermite_coeffs(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 2.0];
    for k in 1..n {
        // H_{k+1} = 2x H_k - 2k H_{k-1}
        let mut next = vec![0.0; k + 2];
        for (i, v) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * v;
        }
        for (i, v) in prev.iter().enumerate() {
            next[i] -= 2.0 * k as f64 * v;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// `∫ H_n(x)² e^{-x²} dx` over the real line written as the finite Γ-sum
/// `2 Σ_k d_k Γ((2k+1)/2)/2`, where `H_n² = Σ d_k x^{2k}`.
pub fn hermite_norm_gamma_sum(n: usize) -> f64 {
    let h = hermite_coeffs(n);
    let mut square = vec![0.0; 2 * h.len() - 1];
    for (i, a) in h.iter().enumerate() {
        for (j, b) in h.iter().enumerate() {
            square[i + j] += a * b;
        }
    }
    square
        .iter()
        .enumerate()
        .filter(|(k, _)| k % 2 == 0)
        .map(|(k, d)| 2.0 * d * gamma_moment((k / 2) as u32, 0.0).expect("c = 0 converges"))
        .sum()
}
