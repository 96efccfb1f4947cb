//! Thin command-line front end over the library. All numerics live in the
//! library; this binary parses configuration, dispatches, and maps errors to
//! exit codes (0 success, 2 usage, 3 solver non-convergence, 4 invariant
//! violation).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polyproj::config::RunConfig;
use polyproj::grid::{
    dump_map, dump_scalar, dump_velocity, face_to_node_velocity, Grid, MapField,
};
use polyproj::nse;
use polyproj::polyconvex;
use polyproj::projection;
use polyproj::Error;

#[derive(Parser)]
#[command(name = "polyproj", version, about = "volume-preserving projections and the derived Navier-Stokes scheme")]
struct Cli {
    /// worker thread count (falls back to POLYPROJ_THREADS; all solvers are
    /// deterministic regardless of the value)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration file; defaults apply for missing fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory for artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    /// seed override
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized verification of the cofactor gap inequality
    VerifyMatrixIneq {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// evaluate the d = 4 counterexample family instead
        #[arg(long)]
        counterexample: bool,
    },
    /// Solve one projection instance and write summary + field dumps
    Project(ConfigArgs),
    /// Run the Navier-Stokes scheme and write the diagnostics CSV
    Nse(ConfigArgs),
    /// Richardson sweep in the time step; prints the observed order
    Convergence {
        #[command(flatten)]
        common: ConfigArgs,
        /// number of tau halvings beyond the base run
        #[arg(long, default_value_t = 2)]
        refinements: usize,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::Config(_) => 2,
        Error::CflExceeded { .. } | Error::DoublingExceeded { .. } | Error::MapDegenerate { .. } => 4,
        _ => 3,
    }
}

fn resolve_threads(cli_threads: Option<usize>) -> Result<usize, Error> {
    let from_env = || {
        std::env::var("POLYPROJ_THREADS")
            .ok()
            .map(|v| v.parse::<usize>().map_err(|_| {
                Error::Config(format!("POLYPROJ_THREADS must be a positive integer, got {v:?}"))
            }))
            .transpose()
    };
    let t = match cli_threads {
        Some(t) => t,
        None => from_env()?.unwrap_or(1),
    };
    if t == 0 {
        return Err(Error::Config("thread count must be at least 1".into()));
    }
    Ok(t)
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    Ok(cfg)
}

fn cmd_verify(dim: usize, samples: usize, seed: Option<u64>, counterexample: bool) -> Result<u8, Error> {
    if counterexample {
        if dim != 4 {
            return Err(Error::InvalidArgument(
                "--counterexample applies to --dim 4".into(),
            ));
        }
        let mut prev = 0.0f64;
        let mut diverging = true;
        for alpha in [2.0, 4.0, 8.0, 16.0, 32.0] {
            let p = polyconvex::d4_counterexample(alpha)?;
            println!(
                "alpha = {:>4}: lhs = {:+.6e}, |A-M|^2 = {:.6e}, ratio = {:+.6}",
                p.alpha, p.lhs, p.quad, p.ratio
            );
            diverging &= p.ratio < prev;
            prev = p.ratio;
        }
        if diverging && prev < -10.0 {
            println!("no uniform constant exists in dimension 4: ratio diverges");
            return Ok(0);
        }
        println!("counterexample family failed to diverge");
        return Ok(4);
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("--samples must be positive".into()));
    }
    let seed = seed.ok_or_else(|| {
        Error::InvalidArgument("--seed is required for randomized verification".into())
    })?;
    let report = polyconvex::verify_matrix_inequality(dim, samples, seed)?;
    println!(
        "dim = {}, c = {:.10}, tested = {}, discarded = {}, worst margin = {:+.3e}, pass = {}",
        report.dim,
        report.constant,
        report.samples_tested,
        report.samples_discarded,
        report.worst_margin,
        report.all_pass
    );
    Ok(if report.all_pass { 0 } else { 4 })
}

fn build_projection_data(cfg: &RunConfig, grid: Grid) -> Result<MapField, Error> {
    // S = id + amplitude * u with u divergence-free and no-slip: the
    // epsilon-family of near-identity data
    let v = nse::initial_velocity(grid, cfg.initial_condition()?, 1.0)?;
    let u_nodes = face_to_node_velocity(&v);
    Ok(MapField::identity(grid).add_scaled(&u_nodes, cfg.amplitude))
}

fn cmd_project(args: &ConfigArgs) -> Result<u8, Error> {
    let cfg = load_config(args)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("out-project"));
    std::fs::create_dir_all(&out)?;
    cfg.write_resolved(&out)?;
    let grid = Grid::new(cfg.dim, cfg.n)?;
    let s = build_projection_data(&cfg, grid)?;
    let opts = cfg.projection.to_options()?;
    let result = projection::solve(&s, cfg.a, &opts)?;
    let residual_f = projection::residual_f(&result.z, &s, cfg.a, cfg.r)?;
    let small = projection::smallness_report(&s, cfg.a, cfg.r)?;
    dump_map(&out.join("z_star"), "z_star", 0.0, &result.z)?;
    dump_scalar(&out.join("q_star"), "q_star", 0.0, &result.q)?;
    let summary = serde_json::json!({
        "objective": result.objective,
        "residual_f": residual_f,
        "det_violation": result.det_err_max,
        "sigma_lower": result.certificate.sigma_lower,
        "q_oscillation": result.certificate.q_oscillation,
        "threshold": result.certificate.threshold,
        "certificate_pass": result.certificate.passes,
        "iterations": {
            "outer": result.outer_iterations,
            "inner": result.inner_iterations,
        },
        "delta": small.delta,
        "delta_prime": small.delta_prime,
        "k_a_estimate": small.k_a_estimate,
    });
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(out.join("summary.json"), text + "\n")?;
    println!(
        "projection converged: det violation {:.3e}, residual {:.3e}, certificate pass = {}",
        result.det_err_max, residual_f, result.certificate.passes
    );
    Ok(0)
}

fn cmd_nse(args: &ConfigArgs) -> Result<u8, Error> {
    let cfg = load_config(args)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("out-nse"));
    std::fs::create_dir_all(&out)?;
    cfg.write_resolved(&out)?;
    let nse_cfg = cfg.to_nse_config()?;
    let result = nse::run(&nse_cfg, Some(&out.join("diagnostics.csv")))?;
    dump_velocity(&out.join("v_final"), "v_final", result.state.time, &result.state.v)?;
    dump_map(&out.join("x_final"), "x_final", result.state.time, &result.state.x)?;
    let report = nse::doubling_time_report(&result.rows, result.initial_lr, nse_cfg.dim, nse_cfg.r);
    println!(
        "{} steps to t = {:.4}; final energy {:.6e} (initial {:.6e}); alpha = {:.3}, doubling step = {:?}",
        result.rows.len(),
        result.state.time,
        result.rows.last().map(|r| r.l2_energy).unwrap_or(0.0),
        0.5 * result.initial_l2,
        report.alpha,
        report.doubling_step
    );
    Ok(0)
}

fn cmd_convergence(args: &ConfigArgs, refinements: usize) -> Result<u8, Error> {
    if refinements == 0 {
        return Err(Error::InvalidArgument("--refinements must be positive".into()));
    }
    let cfg = load_config(args)?;
    let base = cfg.to_nse_config()?;
    let mut finals = Vec::new();
    let mut taus = Vec::new();
    for k in 0..=refinements {
        let mut c = base.clone();
        c.tau = base.tau / (1 << k) as f64;
        let out = nse::run(&c, None)?;
        println!("tau = 1/{:.0}: final energy {:.8e}", 1.0 / c.tau,
            out.rows.last().map(|r| r.l2_energy).unwrap_or(0.0));
        taus.push(c.tau);
        finals.push(out.state.v);
    }
    let mut diffs = Vec::new();
    for k in 0..refinements {
        let d = finals[k].add_scaled(&finals[k + 1], -1.0).norm_lr(2.0)?;
        println!("|v(tau=1/{:.0}) - v(tau=1/{:.0})|_L2 = {:.6e}", 1.0 / taus[k], 1.0 / taus[k + 1], d);
        diffs.push(d);
    }
    if let Some(out_dir) = &args.out {
        std::fs::create_dir_all(out_dir)?;
        cfg.write_resolved(out_dir)?;
        let mut csv = String::from("tau,diff_to_half_tau\n");
        for (t, d) in taus.iter().zip(&diffs) {
            csv.push_str(&format!("{t},{d:.10e}\n"));
        }
        std::fs::write(out_dir.join("convergence.csv"), csv)?;
    }
    for k in 0..refinements.saturating_sub(1) {
        let p = (diffs[k] / diffs[k + 1]).log2();
        println!("observed order p = {p:.3}");
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = resolve_threads(cli.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let outcome = match &cli.command {
        Command::VerifyMatrixIneq { dim, samples, seed, counterexample } => {
            cmd_verify(*dim, *samples, *seed, *counterexample)
        }
        Command::Project(args) => cmd_project(args),
        Command::Nse(args) => cmd_nse(args),
        Command::Convergence { common, refinements } => cmd_convergence(common, *refinements),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
