//! Command-line runner: single constraint solves, the verification suite,
//! and amplitude sweeps with plot-ready tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use deficit_core::ansatz::AngularData;
use deficit_core::io::{
    read_field_csv, write_field_csv, write_grid_sidecar, GridMeta, RunConfig, RunMode, SourceSpec,
};
use deficit_core::matter::{build_sources, matter_from_gaussians, GaussianSpec, SourceFields};
use deficit_core::solver::{
    self, assemble_lambda, charges, fixed_point, residuals, tau_tilde_norm, Problem, Solution,
    Tolerances,
};
use deficit_core::{tail_exponent, PolarGrid, Tail};

#[derive(Parser, Debug)]
#[command(
    name = "deficit",
    about = "Asymptotically flat translationally-symmetric constraint solutions: solve, verify, sweep"
)]
struct Args {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for reports and field tables.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Override the configured mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<RunMode>,

    /// Override the radial node count.
    #[arg(long)]
    nr: Option<usize>,

    /// Override the angular node count.
    #[arg(long)]
    ntheta: Option<usize>,

    /// Override the fixed-point tolerance.
    #[arg(long)]
    tol: Option<f64>,

    /// Override the iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
}

fn parse_mode(s: &str) -> Result<RunMode, String> {
    match s {
        "solve" => Ok(RunMode::Solve),
        "verify" => Ok(RunMode::Verify),
        "sweep" => Ok(RunMode::Sweep),
        other => Err(format!("unknown mode {other:?} (solve|verify|sweep)")),
    }
}

/// Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
/// 4 verification failure.
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_VERIFY: u8 = 4;

fn main() -> ExitCode {
    let args = Args::parse();
    if let Ok(threads) = std::env::var("DEFICIT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(RunError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(RunError::Solver(msg)) => {
            eprintln!("solver error: {msg}");
            ExitCode::from(EXIT_SOLVER)
        }
    }
}

enum RunError {
    Config(String),
    Solver(String),
}

fn config_err<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Config(e.to_string())
}

fn solver_err<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Solver(e.to_string())
}

fn run(args: &Args) -> Result<u8, RunError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(config_err)?;
            RunConfig::from_json(&text).map_err(config_err)?
        }
        None => RunConfig::default(),
    };
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    if let Some(nr) = args.nr {
        config.grid.n_r = nr;
    }
    if let Some(ntheta) = args.ntheta {
        config.grid.n_theta = ntheta;
    }
    if let Some(tol) = args.tol {
        config.tolerances.fixed_point_tol = tol;
    }
    if let Some(mi) = args.max_iter {
        config.tolerances.max_iter = mi;
    }
    config.validate().map_err(config_err)?;
    std::fs::create_dir_all(&args.out_dir).map_err(config_err)?;

    match config.mode {
        RunMode::Solve => run_solve(&config, &args.out_dir),
        RunMode::Verify => run_verify(&config, &args.out_dir),
        RunMode::Sweep => run_sweep(&config, &args.out_dir),
    }
}

fn build_sources_from_spec(
    grid: &PolarGrid,
    spec: &SourceSpec,
) -> Result<SourceFields, RunError> {
    match spec {
        SourceSpec::Gaussian { components } => {
            let matter = matter_from_gaussians(grid, components).map_err(config_err)?;
            build_sources(&matter).map_err(config_err)
        }
        SourceSpec::File { paths } => {
            let read = |p: &str| read_field_csv(Path::new(p), grid).map_err(config_err);
            SourceFields::from_parts(
                read(&paths.p1)?,
                read(&paths.p2)?,
                read(&paths.q_dot)?,
                read(&paths.q_grad)?,
            )
            .map_err(config_err)
        }
    }
}

fn build_problem(config: &RunConfig, grid: &PolarGrid) -> Result<Problem, RunError> {
    let sources = build_sources_from_spec(grid, &config.source)?;
    let angular = AngularData::new(config.angular.btilde.clone(), config.angular.b_big.clone())
        .map_err(|e| {
            RunError::Config(format!(
                "{e}; apply the orthogonal projection to the btilde coefficients first"
            ))
        })?;
    Problem::new(grid.clone(), config.delta, sources, angular).map_err(config_err)
}

#[derive(serde::Serialize)]
struct SolveReport {
    grid: GridMeta,
    delta: f64,
    epsilon: f64,
    alpha0: f64,
    iterations: usize,
    final_step: f64,
    charges: solver::ChargeReport,
    residuals: solver::ResidualReport,
    tau_tilde_norm: f64,
    lambda_tilde_tail: Option<f64>,
    h1_weighted_tail: Option<f64>,
    momentum_divergence_residual: f64,
    momentum_generator_residual: f64,
    lichnerowicz_residual: f64,
    fit_condition: f64,
    iteration_history: Vec<solver::IterationRecord>,
    recenter: Option<solver::RecenterData>,
}

fn tail_of(field: &deficit_core::ScalarField) -> Option<f64> {
    match tail_exponent(field) {
        Tail::Decay { exponent, .. } => Some(exponent),
        Tail::NumericallyZero => None,
    }
}

fn solve_problem(
    config: &RunConfig,
    grid: &PolarGrid,
) -> Result<(Problem, Solution, SolveReport), RunError> {
    let problem = build_problem(config, grid)?;
    let tols: Tolerances = config.tolerances.into();
    let solution = fixed_point(&problem, tols).map_err(solver_err)?;
    let charge_report = charges(&solution, &problem);
    let residual_report = residuals(&solution, &problem).map_err(solver_err)?;

    let lf = assemble_lambda(&solution.state, grid);
    let h1_weighted = solution.momentum.remainder.scaled_by(&lf.exp_minus);
    let report = SolveReport {
        grid: GridMeta::of(grid),
        delta: problem.delta,
        epsilon: problem.epsilon,
        alpha0: problem.alpha0,
        iterations: solution.iterations.len(),
        final_step: solution.iterations.last().map(|i| i.x_delta).unwrap_or(0.0),
        charges: charge_report,
        residuals: residual_report,
        tau_tilde_norm: tau_tilde_norm(&solution, &problem),
        lambda_tilde_tail: tail_of(&solution.state.lambda_tilde),
        h1_weighted_tail: tail_of(&h1_weighted.xx),
        momentum_divergence_residual: solution.momentum.report.residual_rel,
        momentum_generator_residual: solution.momentum.generator_residual_rel,
        lichnerowicz_residual: solution.lichnerowicz.residual_rel,
        fit_condition: solution.fit.condition,
        iteration_history: solution.iterations.clone(),
        recenter: solution.recenter.clone(),
    };
    Ok((problem, solution, report))
}

fn run_solve(config: &RunConfig, out_dir: &Path) -> Result<u8, RunError> {
    let grid = config.grid.build().map_err(config_err)?;
    let (_problem, solution, report) = solve_problem(config, &grid)?;

    write_grid_sidecar(&out_dir.join("grid.json"), &grid).map_err(solver_err)?;
    let lf = assemble_lambda(&solution.state, &grid);
    let fields: [(&str, &deficit_core::ScalarField); 6] = [
        ("lambda", &lf.lambda),
        ("lambda_tilde", &solution.state.lambda_tilde),
        ("h_xx", &solution.h_full.xx),
        ("h_xy", &solution.h_full.xy),
        ("tau", &solution.tau),
        ("lichnerowicz_source", &solution.s_field),
    ];
    for (name, field) in fields {
        write_field_csv(&out_dir.join(format!("{name}.csv")), field).map_err(solver_err)?;
    }
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report).map_err(solver_err)?,
    )
    .map_err(solver_err)?;

    let ch = &report.charges.converged;
    println!("epsilon     = {:.6e}", report.epsilon);
    println!("iterations  = {}", report.iterations);
    println!(
        "charges     alpha = {:+.6e}  rho = {:+.6e}  eta = {:+.6e}",
        ch.alpha, ch.rho, ch.eta
    );
    println!(
        "            c = ({:+.6e}, {:+.6e})  J = {:+.6e}  A = {:+.6e}",
        ch.c1, ch.c2, ch.j, ch.a
    );
    println!(
        "residuals   momentum = {:.3e}  hamiltonian = {:.3e}",
        report.residuals.momentum_rel, report.residuals.hamiltonian_rel
    );
    println!("report written to {}", out_dir.join("report.json").display());
    Ok(0)
}

fn run_verify(config: &RunConfig, out_dir: &Path) -> Result<u8, RunError> {
    let grid = config.grid.build().map_err(config_err)?;
    let report = deficit_core::verify::run_verification(&grid, config.delta).map_err(solver_err)?;
    for c in &report.checks {
        println!(
            "{} {:<34} {:>12.3e} <= {:>9.1e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    for d in &report.diagnostics {
        println!("info {:<34} {:>12.3e}", d.name, d.value);
    }
    std::fs::write(
        out_dir.join("verify_report.json"),
        serde_json::to_string_pretty(&report).map_err(solver_err)?,
    )
    .map_err(solver_err)?;
    Ok(if report.all_pass { 0 } else { EXIT_VERIFY })
}

/// Scale the configured source family to sweep amplitude `a`: components
/// scale linearly, the angular data as its smallness class requires
/// (btilde with epsilon ~ t^2, B with epsilon^2 ~ t^4).
fn scaled_config(config: &RunConfig, a: f64, a_ref: f64) -> RunConfig {
    let t = a / a_ref;
    let mut scaled = config.clone();
    if let SourceSpec::Gaussian { components } = &mut scaled.source {
        for c in components.iter_mut() {
            c.amplitude *= t;
        }
    }
    scaled.angular.btilde = scaled.angular.btilde.scaled(t * t);
    scaled.angular.b_big = scaled.angular.b_big.scaled(t * t * t * t);
    scaled
}

const SWEEP_HEADER: &str = "amplitude,epsilon,alpha,alpha_pred,d_alpha,rho_cos,rho_cos_pred,d_rho_cos,rho_sin,rho_sin_pred,d_rho_sin,c1,c1_pred,d_c1,c2,c2_pred,d_c2,j,j_pred,d_j,a_charge,a_pred,d_a,iterations,contraction_ratio";

#[derive(serde::Serialize)]
struct SweepSummary {
    amplitudes: Vec<f64>,
    epsilons: Vec<f64>,
    /// Fitted log-log slope of each charge discrepancy against epsilon:
    /// alpha, rho_cos, rho_sin, c1, c2, j, a.
    slopes: Vec<Option<f64>>,
    charge_names: Vec<String>,
}

fn run_sweep(config: &RunConfig, out_dir: &Path) -> Result<u8, RunError> {
    let grid = config.grid.build().map_err(config_err)?;
    let a_ref = match &config.source {
        SourceSpec::Gaussian { components } => components
            .iter()
            .map(|c: &GaussianSpec| c.amplitude.abs())
            .fold(0.0f64, f64::max),
        _ => 0.0,
    };
    if a_ref == 0.0 {
        return Err(RunError::Config(
            "sweep requires at least one gaussian component with nonzero amplitude".into(),
        ));
    }

    let mut rows = Vec::new();
    let mut epsilons = Vec::new();
    let mut discrepancies: Vec<[f64; 7]> = Vec::new();
    for &a in &config.sweep.amplitudes {
        let scaled = scaled_config(config, a, a_ref);
        let problem = build_problem(&scaled, &grid)?;
        let tols: Tolerances = scaled.tolerances.into();
        let solution = fixed_point(&problem, tols).map_err(solver_err)?;
        let ch = charges(&solution, &problem);
        let ratio = solution
            .iterations
            .iter()
            .filter_map(|i| i.ratio)
            .last()
            .unwrap_or(f64::NAN);
        let c = &ch.converged;
        rows.push(format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            a,
            problem.epsilon,
            c.alpha,
            ch.alpha_pred,
            ch.discrepancies[0],
            c.rho * c.eta.cos(),
            ch.rho_cos_pred,
            ch.discrepancies[1],
            c.rho * c.eta.sin(),
            ch.rho_sin_pred,
            ch.discrepancies[2],
            c.c1,
            ch.c1_pred,
            ch.discrepancies[3],
            c.c2,
            ch.c2_pred,
            ch.discrepancies[4],
            c.j,
            ch.j_pred,
            ch.discrepancies[5],
            c.a,
            ch.a_pred,
            ch.discrepancies[6],
            solution.iterations.len(),
            ratio,
        ));
        epsilons.push(problem.epsilon);
        discrepancies.push(ch.discrepancies);
    }

    let csv = format!("{SWEEP_HEADER}\n{}\n", rows.join("\n"));
    std::fs::write(out_dir.join("sweep.csv"), csv).map_err(solver_err)?;

    let names = ["alpha", "rho_cos", "rho_sin", "c1", "c2", "j", "a"];
    let mut slopes = Vec::new();
    for (idx, name) in names.iter().enumerate() {
        let pts: Vec<(f64, f64)> = epsilons
            .iter()
            .zip(&discrepancies)
            .filter(|(_, d)| d[idx] > 1e-13)
            .map(|(&e, d)| (e.ln(), d[idx].ln()))
            .collect();
        let slope = fit_slope(&pts);
        match slope {
            Some(s) => println!("slope d_{name:<8} vs epsilon: {s:.3}"),
            None => println!("slope d_{name:<8} vs epsilon: (discrepancy at round-off)"),
        }
        slopes.push(slope);
    }
    let summary = SweepSummary {
        amplitudes: config.sweep.amplitudes.clone(),
        epsilons,
        slopes,
        charge_names: names.iter().map(|s| s.to_string()).collect(),
    };
    std::fs::write(
        out_dir.join("sweep_summary.json"),
        serde_json::to_string_pretty(&summary).map_err(solver_err)?,
    )
    .map_err(solver_err)?;
    println!("sweep table written to {}", out_dir.join("sweep.csv").display());
    Ok(0)
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}
