use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edlin::biortho;
use edlin::feshbach::{self, FeshbachModel};
use edlin::linalg::CMatrix;
use edlin::linearize::{LinearizedPair, Metrics};
use edlin::oracles;
use edlin::pipeline::{self, ErrorClass, Format, RunConfig, RunError, Stage, StateRow};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "edlin", version, about = "Linearize energy-dependent Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: solve, dual basis, K/L and metrics, oracle checks.
    Run(ConfigArgs),
    /// Self-consistent bound states only.
    Solve(ConfigArgs),
    /// Overlap matrix, its condition and the bi-orthonormality diagnostics.
    Verify(ConfigArgs),
    /// K, L and the metrics as CSV, residuals as JSON.
    Linearize(ConfigArgs),
    /// Exact projected reduction of a Hermitian matrix.
    Reduce(ReduceArgs),
    /// Quasi-exact sextic solutions and Γ-moment tables.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// File (json) or directory (csv); stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Seed for random-matrix models.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReduceArgs {
    /// Full Hamiltonian (CSV).
    #[arg(long = "hr")]
    h_r: PathBuf,
    /// Orthogonal projector (CSV).
    #[arg(long = "projector")]
    p: PathBuf,
    /// Energies at which to sample H_eff; repeatable.
    #[arg(long = "energy", allow_negative_numbers = true)]
    energies: Vec<f64>,
    #[arg(long, default_value_t = feshbach::DEFAULT_POLE_TOL)]
    pole_tol: f64,
    #[arg(long, default_value_t = feshbach::DEFAULT_PROJECTION_TOL)]
    projection_tol: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// QES degrees; all supported ones when omitted.
    #[arg(long = "n")]
    degrees: Vec<u32>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    b: f64,
    /// Moments are tabulated for 0..=max_n.
    #[arg(long, default_value_t = 10)]
    max_n: u32,
    /// Moment exponents; 0, 1/2 and 1 when omitted.
    #[arg(long = "c", allow_negative_numbers = true)]
    exponents: Vec<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn io_error(stage: Stage, path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::new(stage, ErrorClass::Io, "io", format!("{}: {e}", path.display()))
}

fn matrix_json(m: &CMatrix) -> Value {
    Value::Array(
        m.row_iter()
            .map(|row| Value::Array(row.iter().map(|z| json!([z.re, z.im])).collect()))
            .collect(),
    )
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), RunError> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(Stage::Output, p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value") + "\n"
}

fn load(args: &ConfigArgs) -> Result<(RunConfig, Format, Option<PathBuf>), RunError> {
    let mut cfg = RunConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let format = match args.format {
        Some(FormatArg::Json) => Format::Json,
        Some(FormatArg::Csv) => Format::Csv,
        None => cfg.output.format,
    };
    cfg.output.format = format;
    let output = args
        .output
        .clone()
        .or_else(|| cfg.output.path.as_ref().map(|p| cfg.base_dir.join(p)));
    Ok((cfg, format, output))
}

fn csv_dir(output: Option<PathBuf>) -> Result<PathBuf, RunError> {
    let dir = output.ok_or_else(|| RunError::config("csv output needs --output <directory>"))?;
    std::fs::create_dir_all(&dir).map_err(|e| io_error(Stage::Output, &dir, e))?;
    Ok(dir)
}

fn write_csv(dir: &Path, name: &str, m: &CMatrix) -> Result<(), RunError> {
    let path = dir.join(name);
    edlin::io::write_matrix(&path, m).map_err(|e| io_error(Stage::Output, &path, e))
}

fn write_pair(dir: &Path, pair: &LinearizedPair) -> Result<(), RunError> {
    write_csv(dir, "K.csv", &pair.k)?;
    write_csv(dir, "L.csv", &pair.l)?;
    write_csv(dir, "projector.csv", &pair.projector)?;
    match &pair.metrics {
        Metrics::Hermitian { xi, xi_inv } => {
            write_csv(dir, "xi.csv", xi)?;
            write_csv(dir, "xi_inv.csv", xi_inv)?;
        }
        Metrics::NonHermitian { mu, mu_inv, nu, nu_inv } => {
            write_csv(dir, "mu.csv", mu)?;
            write_csv(dir, "mu_inv.csv", mu_inv)?;
            write_csv(dir, "nu.csv", nu)?;
            write_csv(dir, "nu_inv.csv", nu_inv)?;
        }
    }
    Ok(())
}

fn states_csv(rows: &[StateRow]) -> String {
    let mut out = String::from("n,j,energy,residual_right,residual_left,match_quality\n");
    for r in rows {
        out += &format!(
            "{},{},{:?},{:?},{:?},{:?}\n",
            r.alpha.n, r.alpha.j, r.energy, r.residual_right, r.residual_left, r.match_quality
        );
    }
    out
}

fn cmd_run(args: &ConfigArgs) -> Result<(), RunError> {
    let (cfg, format, output) = load(args)?;
    let out = pipeline::run(&cfg)?;
    let json = out.report.to_json();
    match format {
        Format::Json => emit(&json, output.as_deref()),
        Format::Csv => {
            let dir = csv_dir(output)?;
            write_pair(&dir, &out.pair)?;
            emit(&states_csv(&out.report.bound_states), Some(&dir.join("states.csv")))?;
            emit(&json, Some(&dir.join("report.json")))
        }
    }
}

fn cmd_solve(args: &ConfigArgs) -> Result<(), RunError> {
    let (cfg, format, output) = load(args)?;
    let built = pipeline::build_model(&cfg)?;
    let states = pipeline::solve(&cfg, &built.hamiltonian)?;
    let rows: Vec<StateRow> = states.iter().map(StateRow::from).collect();
    match format {
        Format::Json => emit(
            &pretty(&json!({ "model": built.hamiltonian.label(), "bound_states": rows })),
            output.as_deref(),
        ),
        Format::Csv => emit(&states_csv(&rows), output.as_deref()),
    }
}

fn cmd_verify(args: &ConfigArgs) -> Result<(), RunError> {
    let (cfg, format, output) = load(args)?;
    let built = pipeline::build_model(&cfg)?;
    let states = pipeline::solve(&cfg, &built.hamiltonian)?;
    let chosen = pipeline::select_states(&cfg, &states)?;
    let scheme = pipeline::scheme_for(&cfg, &built.hamiltonian);
    let overlap = biortho::overlap_matrix(&chosen, scheme)
        .map_err(|e| RunError::new(Stage::Biortho, ErrorClass::Numerical, "overlap", e))?;
    let b = biortho::build(&chosen, scheme, cfg.linearize.max_condition).map_err(|e| {
        let reason = match e {
            biortho::BiorthoError::RankDeficient { .. } => "rank_deficient",
            _ => "inconsistent_states",
        };
        RunError::new(Stage::Biortho, ErrorClass::Numerical, reason, e)
    })?;
    match format {
        Format::Json => emit(
            &pretty(&json!({
                "selected": chosen.iter().map(|s| s.alpha).collect::<Vec<_>>(),
                "overlap": matrix_json(&overlap.entries),
                "summary": b.summary,
            })),
            output.as_deref(),
        ),
        Format::Csv => {
            let dir = csv_dir(output)?;
            write_csv(&dir, "R.csv", &overlap.entries)?;
            write_csv(&dir, "projector.csv", &b.projector)?;
            emit(
                &pretty(&serde_json::to_value(&b.summary).expect("summary")),
                Some(&dir.join("summary.json")),
            )
        }
    }
}

fn cmd_linearize(args: &ConfigArgs) -> Result<(), RunError> {
    let (cfg, format, output) = load(args)?;
    let out = pipeline::run(&cfg)?;
    let residuals = pretty(&serde_json::to_value(&out.report.linearize).expect("summary"));
    match (format, output) {
        (Format::Json, None) => emit(&residuals, None),
        (_, output) => {
            let dir = csv_dir(output)?;
            write_pair(&dir, &out.pair)?;
            emit(&residuals, Some(&dir.join("residuals.json")))
        }
    }
}

fn cmd_reduce(args: &ReduceArgs) -> Result<(), RunError> {
    let read = |p: &Path| edlin::io::read_matrix(p).map_err(RunError::config);
    let m = FeshbachModel::with_tolerances(read(&args.h_r)?, read(&args.p)?, args.pole_tol, args.projection_tol)
        .map_err(|e| RunError::new(Stage::Model, ErrorClass::Config, "invalid_model", e))?;
    let samples: Vec<Value> = args
        .energies
        .iter()
        .map(|&e| match feshbach::feshbach_reduce(&m, e) {
            Ok(h) => json!({ "energy": e, "h_eff": matrix_json(&h) }),
            Err(err) => json!({ "energy": e, "error": err.to_string() }),
        })
        .collect();
    let spectrum = feshbach::recoverable_spectrum(&m)
        .map_err(|e| RunError::new(Stage::Model, ErrorClass::Numerical, "linear_algebra", e))?;
    emit(
        &pretty(&json!({
            "dim": m.dim(),
            "rank": m.rank(),
            "poles": m.poles(),
            "samples": samples,
            "recoverable_spectrum": spectrum,
        })),
        args.output.as_deref(),
    )
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), RunError> {
    let degrees: Vec<u32> = if args.degrees.is_empty() {
        (0..=oracles::qes::MAX_QES_DEGREE).collect()
    } else {
        args.degrees.clone()
    };
    let qes = degrees
        .iter()
        .map(|&n| oracles::qes_sextic_construct(n, args.b))
        .collect::<Result<Vec<_>, _>>()
        .map_err(RunError::config)?;
    let exponents = if args.exponents.is_empty() {
        vec![0.0, 0.5, 1.0]
    } else {
        args.exponents.clone()
    };
    let mut moments = Vec::new();
    for &c in &exponents {
        for n in 0..=args.max_n {
            let gamma = oracles::gamma_moment(n, c).map_err(RunError::config)?;
            let quad = oracles::gamma_moment_quadrature(n, c).map_err(RunError::config)?;
            moments.push(json!({
                "n": n,
                "c": c,
                "gamma": gamma,
                "quadrature": quad,
                "relative_difference": ((gamma - quad) / gamma).abs(),
            }));
        }
    }
    emit(
        &pretty(&json!({ "qes": qes, "moments": moments })),
        args.output.as_deref(),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Linearize(a) => cmd_linearize(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&json!({ "error": e })).expect("error json"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
