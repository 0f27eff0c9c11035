//! Independent analytic ground truths used to check the numerical pipeline.

pub mod algebraic;
pub mod gamma;
pub mod ho;
pub mod poly;
pub mod qes;

pub use algebraic::ExtRational;
pub use gamma::{gamma_moment, gamma_moment_quadrature, hermite_coeffs, hermite_norm_gamma_sum};
pub use ho::ho_analytic_roots;
pub use poly::{Coefficient, Poly};
pub use qes::{
    qes_residual, qes_residual_numeric, qes_residual_perturbed, qes_sextic_construct, sextic_residual, QesExact,
    QesSolution, RationalPoly,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("QES degree N = {0} is not supported (0..=3)")]
    UnsupportedDegree(u32),
    #[error("parameter {0} is not finite")]
    NonFinite(f64),
    #[error("moment diverges for c = {0} (need c > -1)")]
    Divergent(f64),
    #[error("the analytic oscillator oracle needs the linear mass law m0 (1 + λz)")]
    NotParametric,
    #[error("index {index} out of range for {len} energies")]
    IndexOutOfRange { index: usize, len: usize },
}
