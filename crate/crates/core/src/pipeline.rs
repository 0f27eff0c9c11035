//! Configuration-driven runs: model → self-consistent states → dual basis →
//! K, L and metrics → oracle cross-checks, collected into one report.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::biortho::{self, BiorthoError, BiorthoSummary, Scheme, DEFAULT_MAX_CONDITION};
use crate::feshbach::{self, FeshbachError, FeshbachModel, DEFAULT_POLE_TOL, DEFAULT_PROJECTION_TOL};
use num_complex::Complex64;

use crate::linalg::{self, CMatrix};
use crate::linearize::{self, LinearizeError, LinearizeSummary, LinearizedPair};
use crate::models::{self, EdHamiltonian, Grid1d, MassLaw, ModelError, OscillatorParams, StepSegment, Window};
use crate::nlevp::{self, Alpha, BoundState, NlevpError, SolveOptions};
use crate::{io, oracles, random};

/// `[lo, hi]` with `null` for an infinite end.
pub type WindowSpec = [Option<f64>; 2];

fn window(w: &WindowSpec) -> Window {
    Window::new(w[0].unwrap_or(f64::NEG_INFINITY), w[1].unwrap_or(f64::INFINITY))
}

/// A CSV path (relative to the config file), real rows, or `[re, im]` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Csv(String),
    Real(Vec<Vec<f64>>),
    Complex(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub window: WindowSpec,
    pub matrix: MatrixSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorSpec {
    pub n: u32,
    pub window: WindowSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomFamily {
    Hermitian,
    RealSpectrum,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn x_min() -> f64 {
    -8.0
}
fn x_max() -> f64 {
    8.0
}
fn osc_points() -> usize {
    2001
}
fn r_max() -> f64 {
    8.0
}
fn radial_points() -> usize {
    1600
}
fn pole_tol() -> f64 {
    DEFAULT_POLE_TOL
}
fn projection_tol() -> f64 {
    DEFAULT_PROJECTION_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Constant {
        h0: MatrixSource,
    },
    Step {
        segments: Vec<SegmentSpec>,
    },
    EdMassOscillator {
        #[serde(default = "one")]
        hbar: f64,
        #[serde(default = "half")]
        g: f64,
        #[serde(default = "one")]
        m0: f64,
        #[serde(default)]
        lambda: f64,
        #[serde(default = "x_min")]
        x_min: f64,
        #[serde(default = "x_max")]
        x_max: f64,
        #[serde(default = "osc_points")]
        points: usize,
    },
    SexticQes {
        b: f64,
        #[serde(default = "r_max")]
        r_max: f64,
        #[serde(default = "radial_points")]
        points: usize,
        sectors: Vec<SectorSpec>,
    },
    Feshbach {
        h_r: MatrixSource,
        p: MatrixSource,
        #[serde(default = "pole_tol")]
        pole_tol: f64,
        #[serde(default = "projection_tol")]
        projection_tol: f64,
    },
    /// A seeded random constant matrix.
    Random {
        family: RandomFamily,
        dim: usize,
    },
}

fn grid_points() -> usize {
    200
}
fn tol() -> f64 {
    nlevp::DEFAULT_TOL
}
fn threshold() -> f64 {
    nlevp::DEFAULT_AMBIGUITY_THRESHOLD
}
fn refinements() -> u32 {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub interval: [f64; 2],
    #[serde(default = "grid_points")]
    pub grid_points: usize,
    #[serde(default = "tol")]
    pub tol: f64,
    #[serde(default = "threshold")]
    pub ambiguity_threshold: f64,
    /// Track only the lowest branches (needed for large grids).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_branches: Option<usize>,
    #[serde(default = "refinements")]
    pub max_refinements: u32,
}

fn max_condition() -> f64 {
    DEFAULT_MAX_CONDITION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearizeConfig {
    /// Defaults to `hermitian` for Hermitian models, else `non_hermitian`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default = "max_condition")]
    pub max_condition: f64,
    /// Which states enter the basis, in order; all by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<Vec<Alpha>>,
}

impl Default for LinearizeConfig {
    fn default() -> Self {
        Self {
            scheme: None,
            max_condition: DEFAULT_MAX_CONDITION,
            select: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub solve: SolveConfig,
    #[serde(default)]
    pub linearize: LinearizeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed of the random-matrix generators.
    #[serde(default)]
    pub seed: u64,
    /// Directory relative CSV paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Model,
    Solve,
    Select,
    Biortho,
    Linearize,
    Oracle,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{stage} stage failed ({reason}): {message}")]
pub struct RunError {
    pub stage: Stage,
    pub class: ErrorClass,
    /// Short machine-readable cause, e.g. `rank_deficient`.
    pub reason: String,
    pub message: String,
}

impl RunError {
    pub fn new(stage: Stage, class: ErrorClass, reason: &str, message: impl fmt::Display) -> Self {
        Self {
            stage,
            class,
            reason: reason.into(),
            message: message.to_string(),
        }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        Self::new(Stage::Config, ErrorClass::Config, "invalid_config", message)
    }

    /// 2 for configuration problems, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self.class {
            ErrorClass::Config => 2,
            ErrorClass::Numerical => 3,
            ErrorClass::Io => 1,
        }
    }
}

fn model_error(stage: Stage, e: ModelError) -> RunError {
    match e {
        ModelError::Pole { .. } => RunError::new(stage, ErrorClass::Numerical, "pole", e),
        ModelError::Domain { .. } => RunError::new(stage, ErrorClass::Numerical, "domain", e),
        ModelError::NonPositiveMass { .. } => RunError::new(stage, ErrorClass::Numerical, "non_positive_mass", e),
        _ => RunError::new(stage, ErrorClass::Config, "invalid_model", e),
    }
}

fn nlevp_error(e: NlevpError) -> RunError {
    let reason = match &e {
        NlevpError::Model(m) => return model_error(Stage::Solve, m.clone()),
        NlevpError::Ambiguous { .. } => "ambiguous_branch",
        NlevpError::ComplexBranch { .. } => "complex_branch",
        NlevpError::Linalg(_) => "linear_algebra",
        NlevpError::GridCrossesPole { .. } => "pole",
        NlevpError::Interval { .. } => "interval_outside_domain",
        NlevpError::BadGrid | NlevpError::NoSuchBranch { .. } => "invalid_grid",
    };
    RunError::new(Stage::Solve, ErrorClass::Numerical, reason, e)
}

fn biortho_error(e: BiorthoError) -> RunError {
    let reason = match &e {
        BiorthoError::RankDeficient { .. } => "rank_deficient",
        BiorthoError::TooManyStates { .. } => "too_many_states",
        BiorthoError::Empty => "no_states",
        _ => "inconsistent_states",
    };
    RunError::new(Stage::Biortho, ErrorClass::Numerical, reason, e)
}

fn linearize_error(e: LinearizeError) -> RunError {
    match e {
        LinearizeError::Biortho(b) => biortho_error(b),
        LinearizeError::UnsupportedSpectrum { .. } => {
            RunError::new(Stage::Linearize, ErrorClass::Numerical, "unsupported_spectrum", e)
        }
        other => RunError::new(Stage::Linearize, ErrorClass::Numerical, "inconsistent_states", other),
    }
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, RunError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(RunError::config)?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let s = &self.solve;
        let [lo, hi] = s.interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(RunError::config(format!(
                "interval [{lo}, {hi}] must be finite and nonempty"
            )));
        }
        if s.grid_points < 16 {
            return Err(RunError::config("grid_points must be at least 16"));
        }
        if !(s.tol > 0.0) {
            return Err(RunError::config("tol must be positive"));
        }
        if !(s.ambiguity_threshold > 0.0 && s.ambiguity_threshold <= 1.0) {
            return Err(RunError::config("ambiguity_threshold must lie in (0, 1]"));
        }
        if s.max_branches == Some(0) {
            return Err(RunError::config("max_branches must be positive"));
        }
        if !(self.linearize.max_condition >= 1.0) {
            return Err(RunError::config("max_condition must be at least 1"));
        }
        for src in self.matrix_sources() {
            if let MatrixSource::Csv(p) = src {
                let path = self.base_dir.join(p);
                if !path.is_file() {
                    return Err(RunError::config(format!(
                        "matrix file {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    fn matrix_sources(&self) -> Vec<&MatrixSource> {
        match &self.model {
            ModelSpec::Constant { h0 } => vec![h0],
            ModelSpec::Step { segments } => segments.iter().map(|s| &s.matrix).collect(),
            ModelSpec::Feshbach { h_r, p, .. } => vec![h_r, p],
            _ => Vec::new(),
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            grid_points: self.solve.grid_points,
            tol: self.solve.tol,
            ambiguity_threshold: self.solve.ambiguity_threshold,
            max_branches: self.solve.max_branches,
            max_refinements: self.solve.max_refinements,
            ..SolveOptions::default()
        }
    }

    pub fn load_matrix(&self, src: &MatrixSource) -> Result<CMatrix, RunError> {
        let ragged = || RunError::config("matrix rows have unequal lengths");
        match src {
            MatrixSource::Csv(p) => io::read_matrix(&self.base_dir.join(p)).map_err(RunError::config),
            MatrixSource::Real(rows) => {
                let cols = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != cols) {
                    return Err(ragged());
                }
                let flat: Vec<f64> = rows.concat();
                Ok(models::real_matrix(rows.len(), cols, &flat))
            }
            MatrixSource::Complex(rows) => {
                let cols = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != cols) {
                    return Err(ragged());
                }
                Ok(CMatrix::from_fn(rows.len(), cols, |i, j| {
                    Complex64::new(rows[i][j][0], rows[i][j][1])
                }))
            }
        }
    }
}

/// What the oracle stage compares against.
#[derive(Debug, Clone)]
pub enum OracleSource {
    Constant(CMatrix),
    Step(Vec<StepSegment>),
    Oscillator(OscillatorParams),
    Sextic { b: f64, sectors: Vec<(u32, Window)> },
    Feshbach(Box<FeshbachModel>),
}

pub struct BuiltModel {
    pub hamiltonian: EdHamiltonian,
    pub oracle: OracleSource,
}

pub fn build_model(cfg: &RunConfig) -> Result<BuiltModel, RunError> {
    let built = match &cfg.model {
        ModelSpec::Constant { h0 } => {
            let h0 = cfg.load_matrix(h0)?;
            BuiltModel {
                hamiltonian: models::make_constant(h0.clone()).map_err(|e| model_error(Stage::Model, e))?,
                oracle: OracleSource::Constant(h0),
            }
        }
        ModelSpec::Random { family, dim } => {
            if *dim == 0 {
                return Err(RunError::config("random model needs dim > 0"));
            }
            let mut rng = random::rng(cfg.seed);
            let h0 = match family {
                RandomFamily::Hermitian => random::random_hermitian(*dim, &mut rng),
                RandomFamily::RealSpectrum => random::random_real_spectrum(*dim, &mut rng).0,
            };
            BuiltModel {
                hamiltonian: models::make_constant(h0.clone()).map_err(|e| model_error(Stage::Model, e))?,
                oracle: OracleSource::Constant(h0),
            }
        }
        ModelSpec::Step { segments } => {
            let segs = segments
                .iter()
                .map(|s| {
                    Ok(StepSegment {
                        window: window(&s.window),
                        matrix: cfg.load_matrix(&s.matrix)?,
                    })
                })
                .collect::<Result<Vec<_>, RunError>>()?;
            BuiltModel {
                hamiltonian: models::make_step(segs.clone()).map_err(|e| model_error(Stage::Model, e))?,
                oracle: OracleSource::Step(segs),
            }
        }
        ModelSpec::EdMassOscillator {
            hbar,
            g,
            m0,
            lambda,
            x_min,
            x_max,
            points,
        } => {
            let p = OscillatorParams {
                hbar: *hbar,
                g: *g,
                mass: MassLaw::Linear {
                    m0: *m0,
                    lambda: *lambda,
                },
                grid: Grid1d {
                    x_min: *x_min,
                    x_max: *x_max,
                    points: *points,
                },
            };
            BuiltModel {
                hamiltonian: models::make_ed_mass_oscillator(p.clone()).map_err(|e| model_error(Stage::Model, e))?,
                oracle: OracleSource::Oscillator(p),
            }
        }
        ModelSpec::SexticQes {
            b,
            r_max,
            points,
            sectors,
        } => {
            let sectors: Vec<(u32, Window)> = sectors.iter().map(|s| (s.n, window(&s.window))).collect();
            BuiltModel {
                hamiltonian: models::make_sextic_sectors(*b, *r_max, *points, &sectors)
                    .map_err(|e| model_error(Stage::Model, e))?,
                oracle: OracleSource::Sextic { b: *b, sectors },
            }
        }
        ModelSpec::Feshbach {
            h_r,
            p,
            pole_tol,
            projection_tol,
        } => {
            let m =
                FeshbachModel::with_tolerances(cfg.load_matrix(h_r)?, cfg.load_matrix(p)?, *pole_tol, *projection_tol)
                    .map_err(|e| match e {
                        FeshbachError::Linalg(_) => {
                            RunError::new(Stage::Model, ErrorClass::Numerical, "linear_algebra", e)
                        }
                        other => RunError::new(Stage::Model, ErrorClass::Config, "invalid_model", other),
                    })?;
            BuiltModel {
                hamiltonian: feshbach::feshbach_model_as_ed(&m),
                oracle: OracleSource::Feshbach(Box::new(m)),
            }
        }
    };
    Ok(built)
}

pub fn solve(cfg: &RunConfig, h: &EdHamiltonian) -> Result<Vec<BoundState>, RunError> {
    let [lo, hi] = cfg.solve.interval;
    nlevp::solve_all(h, lo, hi, &cfg.solve_options()).map_err(nlevp_error)
}

/// The states entering the basis, honouring `linearize.select`.
pub fn select_states(cfg: &RunConfig, states: &[BoundState]) -> Result<Vec<BoundState>, RunError> {
    let Some(select) = &cfg.linearize.select else {
        return Ok(states.to_vec());
    };
    select
        .iter()
        .map(|a| {
            states.iter().find(|s| s.alpha == *a).cloned().ok_or_else(|| {
                RunError::new(
                    Stage::Select,
                    ErrorClass::Config,
                    "unknown_state",
                    format!("no state with alpha = ({}, {})", a.n, a.j),
                )
            })
        })
        .collect()
}

pub fn scheme_for(cfg: &RunConfig, h: &EdHamiltonian) -> Scheme {
    cfg.linearize.scheme.unwrap_or(if h.hermitian_each_z() {
        Scheme::Hermitian
    } else {
        Scheme::NonHermitian
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateRow {
    pub alpha: Alpha,
    pub energy: f64,
    pub residual_right: f64,
    pub residual_left: f64,
    pub fixed_point_residual: f64,
    pub match_quality: f64,
}

impl From<&BoundState> for StateRow {
    fn from(s: &BoundState) -> Self {
        Self {
            alpha: s.alpha,
            energy: s.energy,
            residual_right: s.residual_right,
            residual_left: s.residual_left,
            fixed_point_residual: s.fixed_point_residual,
            match_quality: s.match_quality,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEntry {
    pub label: String,
    pub expected: f64,
    pub found: Option<f64>,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub source: String,
    pub entries: Vec<OracleEntry>,
    /// Largest error among entries with a match.
    pub max_error: f64,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelInfo {
    pub label: String,
    pub dim: usize,
    pub hermitian_each_z: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub seed: u64,
    /// Unix seconds; the only field allowed to differ between identical runs.
    pub timestamp: u64,
    pub config: RunConfig,
    pub model: ModelInfo,
    pub bound_states: Vec<StateRow>,
    pub selected: Vec<Alpha>,
    pub biortho: BiorthoSummary,
    pub linearize: LinearizeSummary,
    pub oracle: Option<OracleReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable") + "\n"
    }
}

pub struct RunOutput {
    pub report: Report,
    pub states: Vec<BoundState>,
    pub pair: LinearizedPair,
}

pub fn tool_info() -> ToolInfo {
    ToolInfo {
        name: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
    }
}

fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let built = build_model(cfg)?;
    let h = &built.hamiltonian;
    let states = solve(cfg, h)?;
    let chosen = select_states(cfg, &states)?;
    let scheme = scheme_for(cfg, h);
    let b = biortho::build(&chosen, scheme, cfg.linearize.max_condition).map_err(biortho_error)?;
    let pair = linearize::linearize(&chosen, scheme, cfg.linearize.max_condition).map_err(linearize_error)?;
    let oracle = oracle_report(cfg, &built.oracle, &states)?;
    let report = Report {
        tool: tool_info(),
        seed: cfg.seed,
        timestamp: now(),
        config: cfg.clone(),
        model: ModelInfo {
            label: h.label().into(),
            dim: h.dim(),
            hermitian_each_z: h.hermitian_each_z(),
        },
        bound_states: states.iter().map(StateRow::from).collect(),
        selected: chosen.iter().map(|s| s.alpha).collect(),
        biortho: b.summary,
        linearize: LinearizeSummary::from(&pair),
        oracle: Some(oracle),
    };
    Ok(RunOutput { report, states, pair })
}

fn nearest<'a>(candidates: impl Iterator<Item = &'a BoundState>, e: f64) -> Option<f64> {
    candidates
        .map(|s| s.energy)
        .min_by(|a, b| (a - e).abs().total_cmp(&(b - e).abs()))
}

/// Compares solved energies with independent predictions inside the interval.
pub fn oracle_report(cfg: &RunConfig, src: &OracleSource, states: &[BoundState]) -> Result<OracleReport, RunError> {
    let [lo, hi] = cfg.solve.interval;
    let inside = |e: f64| e >= lo && e <= hi;
    let oracle_err = |e: &dyn fmt::Display| RunError::new(Stage::Oracle, ErrorClass::Numerical, "oracle", e);
    let mut entries: Vec<OracleEntry> = Vec::new();
    let mut push = |label: String, expected: f64, found: Option<f64>| {
        entries.push(OracleEntry {
            label,
            expected,
            found,
            error: found.map(|f| (f - expected).abs()),
        });
    };
    let source = match src {
        OracleSource::Constant(h0) => {
            let pairs = if linalg::hermiticity_defect(h0) <= models::HERMITIAN_TOL {
                linalg::hermitian_eigen(h0)
            } else {
                linalg::general_eigen(h0)
            }
            .map_err(|e| oracle_err(&e))?;
            for (k, p) in pairs.iter().enumerate().filter(|(_, p)| inside(p.value.re)) {
                push(
                    format!("eigenvalue {k}"),
                    p.value.re,
                    nearest(states.iter(), p.value.re),
                );
            }
            "direct diagonalization"
        }
        OracleSource::Step(segments) => {
            for (i, s) in segments.iter().enumerate() {
                for (k, p) in linalg::general_eigen(&s.matrix)
                    .map_err(|e| oracle_err(&e))?
                    .iter()
                    .enumerate()
                {
                    let e = p.value.re;
                    if p.value.im.abs() <= 1e-12 && s.window.contains(e) && inside(e) {
                        push(format!("segment {i} eigenvalue {k}"), e, nearest(states.iter(), e));
                    }
                }
            }
            "per-window eigenvalues"
        }
        OracleSource::Oscillator(p) => {
            let branches = states.iter().map(|s| s.alpha.n + 1).max().unwrap_or(0);
            for n in 0..branches {
                for e in oracles::ho_analytic_roots(n as u32, p)
                    .map_err(|e| oracle_err(&e))?
                    .into_iter()
                    .filter(|&e| inside(e))
                {
                    push(
                        format!("branch {n}"),
                        e,
                        nearest(states.iter().filter(|s| s.alpha.n == n), e),
                    );
                }
            }
            "analytic oscillator roots"
        }
        OracleSource::Sextic { b, sectors } => {
            for (n, w) in sectors {
                let sol = oracles::qes_sextic_construct(*n, *b).map_err(|e| oracle_err(&e))?;
                for (j, &e) in sol.energies.iter().enumerate() {
                    if w.contains(e) && inside(e) {
                        push(format!("N={n} j={j}"), e, nearest(states.iter(), e));
                    }
                }
            }
            "quasi-exact sextic energies"
        }
        OracleSource::Feshbach(m) => {
            for (k, entry) in feshbach::recoverable_spectrum(m)
                .map_err(|e| oracle_err(&e))?
                .iter()
                .enumerate()
            {
                if entry.recoverable && inside(entry.eigenvalue) {
                    push(
                        format!("eigenvalue {k}"),
                        entry.eigenvalue,
                        nearest(states.iter(), entry.eigenvalue),
                    );
                }
            }
            "recoverable full-space spectrum"
        }
    };
    let max_error = entries.iter().filter_map(|e| e.error).fold(0.0, f64::max);
    let missing = entries.iter().filter(|e| e.found.is_none()).count();
    Ok(OracleReport {
        source: source.into(),
        entries,
        max_error,
        missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(json: &str) -> Result<RunConfig, RunError> {
        RunConfig::from_json(json, ".")
    }

    #[test]
    fn constant_diag_run() {
        let c = cfg(r#"{"model": {"kind": "constant", "h0": [[1, 0], [0, 3]]},
                       "solve": {"interval": [0, 4]}}"#)
        .unwrap();
        let out = run(&c).unwrap();
        let e: Vec<f64> = out.report.bound_states.iter().map(|s| s.energy).collect();
        assert_eq!(e, vec![1.0, 3.0]);
        assert!(out.report.linearize.residuals.values().all(|&r| r <= 1e-10));
        let o = out.report.oracle.unwrap();
        assert_eq!(o.missing, 0);
        assert!(o.max_error <= 1e-12);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = cfg(r#"{"model": {"kind": "constant", "h0": [[1]], "extra": 1},
                       "solve": {"interval": [0, 4]}}"#)
        .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = cfg(r#"{"model": {"kind": "constant", "h0": [[1]]},
                       "solve": {"interval": [0, 4], "grid": 3}}"#)
        .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = cfg(r#"{"model": {"kind": "constant", "h0": [[1]]},
                       "solve": {"interval": [0, 4]}, "colour": "red"}"#)
        .unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn invalid_values() {
        for solve in [
            r#"{"interval": [4, 0]}"#,
            r#"{"interval": [0, 4], "grid_points": 15}"#,
            r#"{"interval": [0, 4], "tol": 0}"#,
            r#"{"interval": [0, 4], "ambiguity_threshold": 1.5}"#,
        ] {
            let json = format!(r#"{{"model": {{"kind": "constant", "h0": [[1]]}}, "solve": {solve}}}"#);
            assert_eq!(cfg(&json).unwrap_err().stage, Stage::Config, "{solve}");
        }
        let e =
            cfg(r#"{"model": {"kind": "constant", "h0": "missing.csv"}, "solve": {"interval": [0, 4]}}"#).unwrap_err();
        assert!(e.message.contains("does not exist"));
    }

    #[test]
    fn duplicated_state_fails_in_biortho() {
        let c = cfg(r#"{"model": {"kind": "constant", "h0": [[1, 0], [0, 3]]},
                       "solve": {"interval": [0, 4]},
                       "linearize": {"select": [{"n": 0, "j": 0}, {"n": 0, "j": 0}]}}"#)
        .unwrap();
        let e = run(&c).err().unwrap();
        assert_eq!(
            (e.stage, e.reason.as_str(), e.exit_code()),
            (Stage::Biortho, "rank_deficient", 3)
        );
    }

    #[test]
    fn unknown_selection() {
        let c = cfg(r#"{"model": {"kind": "constant", "h0": [[1, 0], [0, 3]]},
                       "solve": {"interval": [0, 4]},
                       "linearize": {"select": [{"n": 5, "j": 0}]}}"#)
        .unwrap();
        let e = run(&c).err().unwrap();
        assert_eq!((e.stage, e.exit_code()), (Stage::Select, 2));
    }

    #[test]
    fn complex_spectrum_is_numerical() {
        let c = cfg(r#"{"model": {"kind": "constant", "h0": [[0, 1], [-1, 0]]},
                       "solve": {"interval": [-2, 2]}}"#)
        .unwrap();
        let e = run(&c).err().unwrap();
        assert_eq!(
            (e.stage, e.reason.as_str(), e.exit_code()),
            (Stage::Solve, "complex_branch", 3)
        );
    }

    #[test]
    fn no_states_is_numerical() {
        let c = cfg(r#"{"model": {"kind": "constant", "h0": [[10]]},
                       "solve": {"interval": [0, 4]}}"#)
        .unwrap();
        let e = run(&c).err().unwrap();
        assert_eq!(
            (e.stage, e.reason.as_str(), e.exit_code()),
            (Stage::Biortho, "no_states", 3)
        );
    }

    #[test]
    fn stage_names() {
        assert_eq!(Stage::Biortho.to_string(), "biortho");
        assert_eq!(Stage::Config.to_string(), "config");
    }
}
