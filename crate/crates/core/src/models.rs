//! Energy-dependent Hamiltonians `z ↦ H(z)` and the concrete model families:
//! constant, step-shaped, the oscillator with an energy-dependent mass, and
//! the sextic quasi-exactly solvable oscillator.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::linalg::{self, c, CMatrix, SymTridiagonal};
use crate::oracles;

/// Tolerance of the Hermiticity flag.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("z = {z} lies outside the domain of model `{label}`")]
    Domain { z: f64, label: String },
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("mass m({z}) = {mass} is not positive")]
    NonPositiveMass { z: f64, mass: f64 },
    #[error("energy {z} is within {gap:e} of the pole at {pole}")]
    Pole { z: f64, pole: f64, gap: f64 },
}

/// Half-open energy window `(lo, hi]`; infinite ends are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn everything() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn contains(&self, z: f64) -> bool {
        z > self.lo && z <= self.hi
    }
}

/// A connected piece of the real line with explicit endpoint closure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn reals() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            lo_closed: false,
            hi_closed: false,
        }
    }

    fn from_window(w: Window) -> Self {
        Self {
            lo: w.lo,
            hi: w.hi,
            lo_closed: false,
            hi_closed: w.hi.is_finite(),
        }
    }

    pub fn contains(&self, z: f64) -> bool {
        let above = if self.lo_closed { z >= self.lo } else { z > self.lo };
        let below = if self.hi_closed { z <= self.hi } else { z < self.hi };
        above && below
    }
}

/// The set of admissible energies: a union of disjoint intervals minus small
/// neighbourhoods of isolated excluded points (poles).
#[derive(Debug, Clone, PartialEq)]
pub struct ZDomain {
    pieces: Vec<Interval>,
    excluded: Vec<f64>,
    exclusion_radius: f64,
}

/// A closed sub-interval free of poles, with the poles bounding it (if any).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
    pub lo_pole: Option<f64>,
    pub hi_pole: Option<f64>,
}

impl ZDomain {
    pub fn reals() -> Self {
        Self {
            pieces: vec![Interval::reals()],
            excluded: Vec::new(),
            exclusion_radius: 0.0,
        }
    }

    pub fn from_windows(windows: &[Window]) -> Self {
        let mut sorted: Vec<Interval> = windows.iter().copied().map(Interval::from_window).collect();
        sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut pieces: Vec<Interval> = Vec::new();
        for iv in sorted {
            match pieces.last_mut() {
                Some(last) if last.hi == iv.lo && (last.hi_closed || iv.lo_closed) => {
                    last.hi = iv.hi;
                    last.hi_closed = iv.hi_closed;
                }
                _ => pieces.push(iv),
            }
        }
        Self {
            pieces,
            excluded: Vec::new(),
            exclusion_radius: 0.0,
        }
    }

    pub fn with_excluded(mut self, mut points: Vec<f64>, radius: f64) -> Self {
        points.sort_by(f64::total_cmp);
        self.excluded = points;
        self.exclusion_radius = radius;
        self
    }

    pub fn pieces(&self) -> &[Interval] {
        &self.pieces
    }

    pub fn excluded(&self) -> &[f64] {
        &self.excluded
    }

    pub fn exclusion_radius(&self) -> f64 {
        self.exclusion_radius
    }

    pub fn contains(&self, z: f64) -> bool {
        z.is_finite()
            && self.pieces.iter().any(|p| p.contains(z))
            && self.excluded.iter().all(|p| (z - p).abs() >= self.exclusion_radius)
    }

    /// Whether an excluded point lies strictly between `a` and `b`.
    pub fn excluded_between(&self, a: f64, b: f64) -> Option<f64> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        self.excluded.iter().copied().find(|&p| p > lo && p < hi)
    }

    /// Splits `[lo, hi]` at the excluded points into pole-free closed spans,
    /// each kept `margin` away from its bounding poles. The interval must lie
    /// inside a single piece of the domain.
    pub fn admissible_spans(&self, lo: f64, hi: f64, margin: f64) -> Result<Vec<Span>, f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(lo);
        }
        let piece = self.pieces.iter().find(|p| p.contains(lo)).ok_or(lo)?;
        if !piece.contains(hi) {
            return Err(hi);
        }
        let mut spans = Vec::new();
        let mut start = lo;
        let mut start_pole = None;
        for &p in self.excluded.iter().filter(|&&p| p > lo - margin && p < hi + margin) {
            let end = p - margin;
            if end > start {
                spans.push(Span {
                    lo: start,
                    hi: end,
                    lo_pole: start_pole,
                    hi_pole: Some(p),
                });
            }
            start = start.max(p + margin);
            start_pole = Some(p);
        }
        if hi > start {
            spans.push(Span {
                lo: start,
                hi,
                lo_pole: start_pole,
                hi_pole: None,
            });
        }
        Ok(spans)
    }
}

/// Matrix produced by a model evaluation. Models with a real symmetric
/// tridiagonal structure keep it so the solver can exploit it.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelMatrix {
    Dense(CMatrix),
    Tridiagonal(SymTridiagonal),
}

impl ModelMatrix {
    pub fn dim(&self) -> usize {
        match self {
            ModelMatrix::Dense(m) => m.nrows(),
            ModelMatrix::Tridiagonal(t) => t.dim(),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            ModelMatrix::Dense(m) => m.clone(),
            ModelMatrix::Tridiagonal(t) => t.to_dense(),
        }
    }
}

pub type Evaluator = dyn Fn(f64) -> Result<ModelMatrix, ModelError> + Send + Sync;

/// A matrix-valued function of the energy parameter with fixed dimension.
#[derive(Clone)]
pub struct EdHamiltonian {
    dim: usize,
    domain: ZDomain,
    hermitian_each_z: bool,
    label: String,
    evaluator: Arc<Evaluator>,
}

impl fmt::Debug for EdHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EdHamiltonian")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("hermitian_each_z", &self.hermitian_each_z)
            .field("domain", &self.domain)
            .finish()
    }
}

impl EdHamiltonian {
    /// Wraps an arbitrary evaluator. The caller vouches for the Hermiticity flag.
    pub fn custom<F>(
        label: impl Into<String>,
        dim: usize,
        domain: ZDomain,
        hermitian_each_z: bool,
        evaluator: F,
    ) -> Self
    where
        F: Fn(f64) -> Result<ModelMatrix, ModelError> + Send + Sync + 'static,
    {
        Self {
            dim,
            domain,
            hermitian_each_z,
            label: label.into(),
            evaluator: Arc::new(evaluator),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &ZDomain {
        &self.domain
    }

    pub fn hermitian_each_z(&self) -> bool {
        self.hermitian_each_z
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval_structured(&self, z: f64) -> Result<ModelMatrix, ModelError> {
        if !self.domain.contains(z) {
            if let Some(&pole) = self
                .domain
                .excluded
                .iter()
                .find(|&&p| (z - p).abs() < self.domain.exclusion_radius)
            {
                return Err(ModelError::Pole {
                    z,
                    pole,
                    gap: (z - pole).abs(),
                });
            }
            return Err(ModelError::Domain {
                z,
                label: self.label.clone(),
            });
        }
        let m = (self.evaluator)(z)?;
        if m.dim() != self.dim {
            return Err(ModelError::Dimension {
                expected: self.dim,
                found: m.dim(),
            });
        }
        Ok(m)
    }

    pub fn eval(&self, z: f64) -> Result<CMatrix, ModelError> {
        self.eval_structured(z).map(|m| m.to_dense())
    }
}

/// One piece of a step model: `matrix` applies on `window`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSegment {
    pub window: Window,
    pub matrix: CMatrix,
}

pub fn make_constant(h0: CMatrix) -> Result<EdHamiltonian, ModelError> {
    if h0.nrows() != h0.ncols() {
        return Err(ModelError::NonSquare {
            rows: h0.nrows(),
            cols: h0.ncols(),
        });
    }
    let hermitian = linalg::hermiticity_defect(&h0) <= HERMITIAN_TOL;
    let dim = h0.nrows();
    let matrix = ModelMatrix::Dense(h0);
    Ok(EdHamiltonian::custom(
        "constant",
        dim,
        ZDomain::reals(),
        hermitian,
        move |_| Ok(matrix.clone()),
    ))
}

pub fn make_step(mut segments: Vec<StepSegment>) -> Result<EdHamiltonian, ModelError> {
    let first = segments
        .first()
        .ok_or_else(|| ModelError::Config("a step model needs at least one segment".into()))?;
    let dim = first.matrix.nrows();
    for s in &segments {
        if s.matrix.nrows() != s.matrix.ncols() {
            return Err(ModelError::NonSquare {
                rows: s.matrix.nrows(),
                cols: s.matrix.ncols(),
            });
        }
        if s.matrix.nrows() != dim {
            return Err(ModelError::Dimension {
                expected: dim,
                found: s.matrix.nrows(),
            });
        }
        if !(s.window.lo < s.window.hi) || s.window.lo.is_nan() || s.window.hi.is_nan() {
            return Err(ModelError::Config(format!(
                "empty window ({}, {}]",
                s.window.lo, s.window.hi
            )));
        }
    }
    segments.sort_by(|a, b| a.window.lo.total_cmp(&b.window.lo));
    for pair in segments.windows(2) {
        if pair[0].window.hi > pair[1].window.lo {
            return Err(ModelError::Config(format!(
                "overlapping windows ({}, {}] and ({}, {}]",
                pair[0].window.lo, pair[0].window.hi, pair[1].window.lo, pair[1].window.hi
            )));
        }
    }
    let hermitian = segments
        .iter()
        .all(|s| linalg::hermiticity_defect(&s.matrix) <= HERMITIAN_TOL);
    let windows: Vec<Window> = segments.iter().map(|s| s.window).collect();
    let domain = ZDomain::from_windows(&windows);
    let label = "step".to_string();
    let err_label = label.clone();
    Ok(EdHamiltonian::custom(label, dim, domain, hermitian, move |z| {
        segments
            .iter()
            .find(|s| s.window.contains(z))
            .map(|s| ModelMatrix::Dense(s.matrix.clone()))
            .ok_or_else(|| ModelError::Domain {
                z,
                label: err_label.clone(),
            })
    }))
}

/// Energy dependence of the oscillator mass.
#[derive(Clone)]
pub enum MassLaw {
    /// `m(z) = m0 (1 + λ z)`
    Linear {
        m0: f64,
        lambda: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for MassLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MassLaw::Linear { m0, lambda } => f
                .debug_struct("Linear")
                .field("m0", m0)
                .field("lambda", lambda)
                .finish(),
            MassLaw::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl MassLaw {
    pub fn mass(&self, z: f64) -> f64 {
        match self {
            MassLaw::Linear { m0, lambda } => m0 * (1.0 + lambda * z),
            MassLaw::Custom(f) => f(z),
        }
    }

    pub fn is_energy_independent(&self) -> bool {
        matches!(self, MassLaw::Linear { lambda, .. } if *lambda == 0.0)
    }
}

/// Uniform grid of `points` nodes from `x_min` to `x_max` inclusive; the
/// wavefunction vanishes one spacing beyond either end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1d {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl Grid1d {
    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| self.x_min + i as f64 * h).collect()
    }
}

#[derive(Debug, Clone)]
pub struct OscillatorParams {
    pub hbar: f64,
    pub g: f64,
    pub mass: MassLaw,
    pub grid: Grid1d,
}

impl OscillatorParams {
    /// ħ = 1, m0 = 1, g = 1/2 (unit frequency) on [-8, 8] with `points` nodes.
    pub fn unit(lambda: f64, points: usize) -> Self {
        Self {
            hbar: 1.0,
            g: 0.5,
            mass: MassLaw::Linear { m0: 1.0, lambda },
            grid: Grid1d {
                x_min: -8.0,
                x_max: 8.0,
                points,
            },
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.hbar > 0.0) || !(self.g > 0.0) {
            return Err(ModelError::Config("hbar and g must be positive".into()));
        }
        if self.grid.points < 3 || !(self.grid.x_min < self.grid.x_max) {
            return Err(ModelError::Config(
                "oscillator grid needs x_min < x_max and at least 3 points".into(),
            ));
        }
        if let MassLaw::Linear { m0, .. } = self.mass {
            if !(m0 > 0.0) {
                return Err(ModelError::Config("m0 must be positive".into()));
            }
        }
        Ok(())
    }
}

/// `-(ħ²/2m(z)) d²/dx² + g x²` by second-order central differences.
pub fn make_ed_mass_oscillator(p: OscillatorParams) -> Result<EdHamiltonian, ModelError> {
    p.validate()?;
    let nodes = p.grid.nodes();
    let h = p.grid.spacing();
    let potential: Vec<f64> = nodes.iter().map(|x| p.g * x * x).collect();
    let label = format!("ed_mass_oscillator({:?})", p.mass);
    let dim = p.grid.points;
    Ok(EdHamiltonian::custom(label, dim, ZDomain::reals(), true, move |z| {
        let mass = p.mass.mass(z);
        if !(mass > 0.0) {
            return Err(ModelError::NonPositiveMass { z, mass });
        }
        let kinetic = p.hbar * p.hbar / (2.0 * mass * h * h);
        let diag = potential.iter().map(|v| 2.0 * kinetic + v).collect();
        let off = vec![-kinetic; dim - 1];
        Ok(ModelMatrix::Tridiagonal(SymTridiagonal::new(diag, off)))
    }))
}

/// Sextic sector parameters; the potential is `A_N r² + 2b r⁴ + r⁶`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SexticParams {
    pub n: u32,
    pub b: f64,
    pub r_max: f64,
    pub points: usize,
    /// Energies assigned to sector `n`.
    pub window: Window,
}

/// Radial nodes `r_i = i h`, `i = 1..=points`, `h = r_max / points`; `u(0) = 0`.
pub fn radial_nodes(r_max: f64, points: usize) -> (Vec<f64>, f64) {
    let h = r_max / points as f64;
    ((1..=points).map(|i| i as f64 * h).collect(), h)
}

pub fn make_sextic_qes(p: SexticParams) -> Result<EdHamiltonian, ModelError> {
    make_sextic_sectors(p.b, p.r_max, p.points, &[(p.n, p.window)])
}

/// Several QES sectors sharing `b` and the radial grid; sector `N` supplies
/// the matrix on its own window.
pub fn make_sextic_sectors(
    b: f64,
    r_max: f64,
    points: usize,
    sectors: &[(u32, Window)],
) -> Result<EdHamiltonian, ModelError> {
    if !(r_max > 0.0) || points < 3 {
        return Err(ModelError::Config(
            "sextic grid needs r_max > 0 and at least 3 points".into(),
        ));
    }
    if sectors.is_empty() {
        return Err(ModelError::Config("at least one sextic sector is required".into()));
    }
    let (nodes, h) = radial_nodes(r_max, points);
    let mut pieces: Vec<(Window, SymTridiagonal)> = Vec::with_capacity(sectors.len());
    for &(n, window) in sectors {
        if !(window.lo < window.hi) {
            return Err(ModelError::Config(format!(
                "empty window ({}, {}]",
                window.lo, window.hi
            )));
        }
        let a = oracles::qes_sextic_construct(n, b)
            .map_err(|e| ModelError::Config(e.to_string()))?
            .a_n;
        let diag: Vec<f64> = nodes
            .iter()
            .map(|r| {
                let r2 = r * r;
                2.0 / (h * h) + a * r2 + 2.0 * b * r2 * r2 + r2 * r2 * r2
            })
            .collect();
        pieces.push((window, SymTridiagonal::new(diag, vec![-1.0 / (h * h); points - 1])));
    }
    pieces.sort_by(|x, y| x.0.lo.total_cmp(&y.0.lo));
    for w in pieces.windows(2) {
        if w[0].0.hi > w[1].0.lo {
            return Err(ModelError::Config(format!(
                "overlapping sector windows ({}, {}] and ({}, {}]",
                w[0].0.lo, w[0].0.hi, w[1].0.lo, w[1].0.hi
            )));
        }
    }
    let ns: Vec<String> = sectors.iter().map(|(n, _)| n.to_string()).collect();
    let label = format!("sextic_qes(N={}, b={})", ns.join("/"), b);
    let windows: Vec<Window> = pieces.iter().map(|p| p.0).collect();
    let domain = ZDomain::from_windows(&windows);
    let err_label = label.clone();
    Ok(EdHamiltonian::custom(label, points, domain, true, move |z| {
        pieces
            .iter()
            .find(|p| p.0.contains(z))
            .map(|p| ModelMatrix::Tridiagonal(p.1.clone()))
            .ok_or_else(|| ModelError::Domain {
                z,
                label: err_label.clone(),
            })
    }))
}

/// Convenience for real-valued inputs.
pub fn real_matrix(rows: usize, cols: usize, row_major: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(rows, cols, row_major.iter().map(|&v| c(v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| c(v)),
        ))
    }

    fn two_step() -> EdHamiltonian {
        make_step(vec![
            StepSegment {
                window: Window::new(f64::NEG_INFINITY, 1.0),
                matrix: diag(&[0.5, 5.0]),
            },
            StepSegment {
                window: Window::new(1.0, f64::INFINITY),
                matrix: diag(&[0.6, 2.0]),
            },
        ])
        .unwrap()
    }

    #[test]
    fn constant_model() {
        let h = make_constant(diag(&[1.0, 3.0])).unwrap();
        assert_eq!(h.eval(0.7).unwrap(), diag(&[1.0, 3.0]));
        assert!(make_constant(real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]))
            .unwrap()
            .hermitian_each_z());
        assert!(!make_constant(real_matrix(2, 2, &[1.0, 1.0, 0.0, 2.0]))
            .unwrap()
            .hermitian_each_z());
        assert!(matches!(
            make_constant(CMatrix::zeros(2, 3)),
            Err(ModelError::NonSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn step_lookup_and_boundary() {
        let h = two_step();
        assert_eq!(h.eval(0.2).unwrap(), diag(&[0.5, 5.0]));
        assert_eq!(h.eval(3.0).unwrap(), diag(&[0.6, 2.0]));
        assert_eq!(h.eval(1.0).unwrap(), diag(&[0.5, 5.0]));
        assert_eq!(h.domain().pieces().len(), 1);
    }

    #[test]
    fn step_gap_and_overlap() {
        let gapped = make_step(vec![
            StepSegment {
                window: Window::new(0.0, 1.0),
                matrix: diag(&[1.0]),
            },
            StepSegment {
                window: Window::new(2.0, 3.0),
                matrix: diag(&[2.0]),
            },
        ])
        .unwrap();
        assert!(matches!(gapped.eval(1.5), Err(ModelError::Domain { .. })));
        assert!(matches!(gapped.eval(0.0), Err(ModelError::Domain { .. })));
        let overlapping = make_step(vec![
            StepSegment {
                window: Window::new(0.0, 2.0),
                matrix: diag(&[1.0]),
            },
            StepSegment {
                window: Window::new(1.0, 3.0),
                matrix: diag(&[2.0]),
            },
        ]);
        assert!(matches!(overlapping, Err(ModelError::Config(_))));
        let mixed = make_step(vec![
            StepSegment {
                window: Window::new(0.0, 1.0),
                matrix: diag(&[1.0]),
            },
            StepSegment {
                window: Window::new(1.0, 3.0),
                matrix: diag(&[2.0, 1.0]),
            },
        ]);
        assert!(matches!(mixed, Err(ModelError::Dimension { .. })));
    }

    #[test]
    fn oscillator_zero_mass_is_rejected() {
        let h = make_ed_mass_oscillator(OscillatorParams::unit(1.0, 101)).unwrap();
        assert!(matches!(h.eval(-1.0), Err(ModelError::NonPositiveMass { .. })));
        assert!(h.eval(-0.5).is_ok());
    }

    #[test]
    fn oscillator_without_mass_dependence_is_constant() {
        let h = make_ed_mass_oscillator(OscillatorParams::unit(0.0, 51)).unwrap();
        assert_eq!(h.eval(-3.0).unwrap(), h.eval(11.0).unwrap());
    }

    #[test]
    fn sextic_window() {
        let h = make_sextic_qes(SexticParams {
            n: 0,
            b: 1.0,
            r_max: 6.0,
            points: 50,
            window: Window::new(2.0, 4.0),
        })
        .unwrap();
        assert_eq!(h.eval(2.5).unwrap(), h.eval(3.9).unwrap());
        assert!(matches!(h.eval(4.5), Err(ModelError::Domain { .. })));
        assert!(matches!(h.eval(2.0), Err(ModelError::Domain { .. })));
    }

    #[test]
    fn spans_split_at_poles() {
        let d = ZDomain::reals().with_excluded(vec![0.0, 1.0], 1e-8);
        let spans = d.admissible_spans(-2.0, 2.0, 1e-6).unwrap();
        assert_eq!(spans.len(), 3);
        assert_eq!(spans[0].hi_pole, Some(0.0));
        assert_eq!(spans[1].lo_pole, Some(0.0));
        assert_eq!(spans[1].hi_pole, Some(1.0));
        assert_eq!(spans[2].lo_pole, Some(1.0));
        assert!(!d.contains(0.5e-8));
        assert!(d.contains(2e-8));
    }
}
