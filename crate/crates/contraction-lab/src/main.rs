//! Command-line front-end.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 IO.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use contraction_lab::diagnostics::{
    dissipation_check, gap_of, rate_bound, rate_guarantee_check, gamma, summability_report,
};
use contraction_lab::error::{Error, Result};
use contraction_lab::harness::{
    self, ChainFileSpec, ChainGenSpec, ChainSpec, ExperimentConfig, SweepManifest,
};
use contraction_lab::io::{load_chain, read_json, save_chain, write_json};
use contraction_lab::rng::Rng;
use contraction_lab::rotation2d::{
    analyze, build_chain, rotation_report, solve_theta, RotationParams,
};
use contraction_lab::seqgen::{verify_chain, DEFAULT_CHAIN_TOL};

#[derive(Parser)]
#[command(
    name = "contraction-lab",
    version,
    about = "Numerical laboratory for products of decreasing positive contractions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a contraction chain and write it as JSON.
    Gen(GenArgs),
    /// Trace a generalized product against a chain and write a CSV trace.
    Run(RunArgs),
    /// Run a named check against a chain file and print a JSON verdict.
    Verify(VerifyArgs),
    /// Build or analyze the 2x2 rotation chain.
    Rotation2d(RotationArgs),
    /// Print the convergence-rate step bound.
    Rate(RateArgs),
    /// Run a batch of experiments from a manifest.
    Sweep(SweepArgs),
    /// Render an SVG convergence plot from a trace CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenArgs {
    /// constant | projections | commuting | gap | random | proj-average
    #[arg(long)]
    kind: String,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    len: usize,
    #[arg(long)]
    seed: u64,
    /// Spectral gap for the gap generator.
    #[arg(long)]
    delta: Option<f64>,
    /// Coordinates pinned at exactly 1 (constant/commuting generators).
    #[arg(long)]
    pinned: Option<usize>,
    /// Make every random factor fix one common unit vector.
    #[arg(long)]
    fix_common_vector: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    chain: PathBuf,
    /// identity | blocks:B | interleave:S | file:sigma.json
    #[arg(long, default_value = "identity")]
    sigma: String,
    /// random:SEED | basis:I | file:xi.json
    #[arg(long, default_value = "random:0")]
    xi: String,
    #[arg(long)]
    steps: usize,
    /// Order of the f_k functional recorded along the trace.
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = harness::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
    /// Optional verdict JSON path (the verdict is always printed).
    #[arg(long)]
    verdict: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    chain: PathBuf,
    /// chain | gap | summable | rate:m,k,eps | dissipation:k
    #[arg(long)]
    check: String,
    /// Seed for the vectors drawn by rate/dissipation checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RotationArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    n: Option<usize>,
    /// Solve for theta so the final angle hits this target (radians).
    #[arg(long)]
    target_angle: Option<f64>,
    /// Report the step size and step count the construction's estimates
    /// would need for a full quarter turn, without building anything.
    #[arg(long)]
    analyze: bool,
    #[arg(long, default_value_t = 1.0, conflicts_with = "target_norm")]
    lambda: f64,
    /// Choose lambda so the final product norm lands exactly here
    /// (requires the unscaled norm to reach it).
    #[arg(long)]
    target_norm: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: u32,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    norm_sq: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct VerifyVerdict {
    check: String,
    ok: bool,
    witness: serde_json::Value,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Rotation2d(args) => cmd_rotation(args),
        Command::Rate(args) => cmd_rate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Plot(args) => {
            contraction_lab::harness::plot::plot_trace(&args.trace, &args.out)
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let spec = ChainSpec::Generate(ChainGenSpec {
        kind: args.kind,
        dim: args.dim,
        len: args.len,
        seed: args.seed,
        delta: args.delta,
        pinned: args.pinned,
        fix_common_vector: args.fix_common_vector.then_some(true),
    });
    let chain = harness::make_chain(&spec)?;
    save_chain(&chain, &args.out)?;
    println!(
        "wrote {} ({} terms, dim {})",
        args.out.display(),
        chain.len(),
        chain.dim()
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let config = ExperimentConfig {
        chain: ChainSpec::File(ChainFileSpec { file: args.chain }),
        sigma: args.sigma,
        xi: args.xi,
        horizon: args.steps,
        k: args.k,
        threshold: args.threshold,
        out_trace: args.out,
        out_verdict: args.verdict,
    };
    let verdict = harness::run_experiment(&config, std::path::Path::new(""))?;
    println!(
        "{}",
        serde_json::to_string_pretty(&verdict).expect("verdict serializes")
    );
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let chain = load_chain(&args.chain)?;
    let verdict = if args.check == "chain" {
        let report = verify_chain(&chain, DEFAULT_CHAIN_TOL)?;
        VerifyVerdict {
            check: "chain".into(),
            ok: report.accepted,
            witness: serde_json::to_value(&report).expect("report serializes"),
        }
    } else if args.check == "gap" {
        let gap = gap_of(chain.limit_proxy(), 1e-8)?;
        VerifyVerdict {
            check: "gap".into(),
            ok: gap > 0.0,
            witness: serde_json::json!({ "gap": gap }),
        }
    } else if args.check == "summable" {
        let report = summability_report(&chain);
        VerifyVerdict {
            check: "summable".into(),
            ok: true,
            witness: serde_json::to_value(&report).expect("report serializes"),
        }
    } else if let Some(rest) = args.check.strip_prefix("rate:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Validation(format!(
                "expected rate:m,k,eps, got '{}'",
                args.check
            )));
        }
        let m: usize = parts[0]
            .parse()
            .map_err(|_| Error::Validation(format!("bad m '{}'", parts[0])))?;
        let k: u32 = parts[1]
            .parse()
            .map_err(|_| Error::Validation(format!("bad k '{}'", parts[1])))?;
        let eps: f64 = parts[2]
            .parse()
            .map_err(|_| Error::Validation(format!("bad eps '{}'", parts[2])))?;
        let xi = Rng::new(args.seed).unit_vector(chain.dim());
        let check = rate_guarantee_check(&chain, &xi, m, k, eps)?;
        VerifyVerdict {
            check: args.check.clone(),
            ok: check.ok,
            witness: serde_json::to_value(&check).expect("check serializes"),
        }
    } else if let Some(rest) = args.check.strip_prefix("dissipation:") {
        let k: u32 = rest
            .parse()
            .map_err(|_| Error::Validation(format!("bad k '{rest}'")))?;
        let mut rng = Rng::new(args.seed);
        let mut ok = true;
        let mut worst_margin = f64::INFINITY;
        let mut worst = serde_json::json!(null);
        for (i, t) in chain.terms().iter().enumerate() {
            for _ in 0..20 {
                let xi = rng.unit_vector(chain.dim());
                let check = dissipation_check(t, &xi, k)?;
                ok &= check.ok;
                let margin = check.rhs - check.lhs;
                if margin < worst_margin {
                    worst_margin = margin;
                    worst = serde_json::json!({
                        "term": i + 1,
                        "lhs": check.lhs,
                        "rhs": check.rhs,
                    });
                }
            }
        }
        VerifyVerdict {
            check: args.check.clone(),
            ok,
            witness: serde_json::json!({ "worst_margin": worst_margin, "worst": worst }),
        }
    } else {
        return Err(Error::Validation(format!(
            "unknown check '{}' (expected chain | gap | summable | rate:m,k,eps | dissipation:k)",
            args.check
        )));
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&verdict).expect("verdict serializes")
    );
    if !verdict.ok {
        return Err(Error::Validation(format!(
            "check '{}' failed; see witness above",
            verdict.check
        )));
    }
    Ok(())
}

fn cmd_rotation(args: RotationArgs) -> Result<()> {
    if args.analyze {
        let report = analyze(args.delta)?;
        if let Some(path) = &args.report {
            write_json(path, &report)?;
        }
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
        return Ok(());
    }
    let target = args.target_angle.ok_or_else(|| {
        Error::Validation("need either --target-angle or --analyze".into())
    })?;
    let n = args
        .n
        .ok_or_else(|| Error::Validation("--target-angle needs --n".into()))?;
    if n > 1_000_000 {
        return Err(Error::Validation("n is capped at 1e6".into()));
    }
    let theta = solve_theta(args.delta, n, target)?;
    let params = RotationParams::new(args.delta, n, theta)?;
    let lambda = match args.target_norm {
        None => args.lambda,
        Some(goal) => {
            let state = contraction_lab::rotation2d::run_recursion(&params)?;
            let unscaled = state.alpha_product() * state.beta_weighted_product();
            if !(0.0 < goal && goal <= unscaled) {
                return Err(Error::Validation(format!(
                    "target norm {goal} not reachable: unscaled product norm is {unscaled}"
                )));
            }
            goal / unscaled
        }
    };
    let (chain, state) = build_chain(&params, lambda)?;
    let report = rotation_report(&params, &state, &chain, lambda);
    if let Some(path) = &args.out {
        save_chain(&chain, path)?;
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(())
}

fn cmd_rate(args: RateArgs) -> Result<()> {
    if args.eps <= 0.0 {
        return Err(Error::Validation("eps must be positive".into()));
    }
    let n = rate_bound(args.m, args.k, args.eps, args.norm_sq);
    println!(
        "{}",
        serde_json::json!({
            "m": args.m,
            "k": args.k,
            "eps": args.eps,
            "norm_sq": args.norm_sq,
            "gamma": gamma(args.k),
            "n": n,
        })
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let manifest: SweepManifest = read_json(&args.manifest)?;
    let summary = harness::run_sweep(&manifest, &args.out_dir)?;
    write_json(&args.out_dir.join("summary.json"), &summary)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    if summary.total_failed > 0 {
        return Err(Error::Numerical(format!(
            "{} of {} configs failed",
            summary.total_failed, summary.total_configs
        )));
    }
    Ok(())
}
