use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use dyntrack::algorithms::AlgorithmId;
use dyntrack::analysis::{
    audit_lemmas, dgt_bound, dgt_contraction, diffusion_bound, diffusion_contraction, max_stepsize, AuditConstants,
};
use dyntrack::experiment::{output_dir, run_suite, write_suite, ExperimentConfig};
use dyntrack::record::TrajectoryRecord;

#[derive(Parser)]
#[command(name = "dyntrack", version, about = "Diffusion vs. gradient tracking on time-varying problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tune, run and record every algorithm of a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check the one-step error inequalities along a recorded run.
    Audit {
        /// Run CSV; its `.meta` sidecar must sit next to it.
        #[arg(long)]
        record: PathBuf,
    },
    /// Evaluate contraction radii, step-size limits and steady-state bounds.
    Bounds {
        #[arg(long)]
        mu: f64,
        #[arg(long = "L")]
        lipschitz: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        dx: f64,
        #[arg(long = "D", default_value_t = 0.0)]
        grad_bound: f64,
        #[arg(long, default_value_t = 0.0)]
        dg: f64,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { config } => cmd_run(config),
        Command::Audit { record } => cmd_audit(record),
        Command::Bounds { mu, lipschitz, beta, alpha, dx, grad_bound, dg } => {
            cmd_bounds(mu, lipschitz, beta, alpha, dx, grad_bound, dg);
            Ok(())
        }
    }
}

fn cmd_run(path: PathBuf) -> Result<()> {
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let config = ExperimentConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    let outcome = run_suite(&config)?;
    let dir = output_dir(&config);
    let written = write_suite(&outcome, &dir)?;
    println!("{:<16} {:>12} {:>8} {:>6} {:>14} {:>14} {:>14}", "algorithm", "alpha", "beta", "n", "steady_state", "tail_max", "bound");
    for r in &outcome.summary {
        let bound = r.theory_bound.map_or_else(|| "-".to_string(), |b| format!("{b:.6e}"));
        println!(
            "{:<16} {:>12.6e} {:>8.4} {:>6} {:>14.6e} {:>14.6e} {:>14}",
            r.algorithm.name(),
            r.alpha,
            r.beta,
            r.n,
            r.steady_state_error,
            r.tail_max,
            bound
        );
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_audit(path: PathBuf) -> Result<()> {
    let record = TrajectoryRecord::read(&path)?;
    let report = audit_lemmas(&record, &AuditConstants::from_meta(&record.meta))?;
    let text = format!("record {}\n{}", path.display(), report.to_text());
    print!("{text}");
    let audit_file = path.parent().map_or_else(|| PathBuf::from("audit.txt"), |d| d.join("audit.txt"));
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&audit_file)
        .with_context(|| format!("opening {}", audit_file.display()))?;
    f.write_all(text.as_bytes())?;
    if !report.all_in_regime() {
        log::warn!("some inequalities were skipped because alpha lies outside their regime");
    }
    report.check()?;
    Ok(())
}

fn cmd_bounds(mu: f64, l: f64, beta: f64, alpha: f64, dx: f64, d: f64, dg: f64) {
    for id in [AlgorithmId::Diffusion, AlgorithmId::Dgt] {
        println!("{id}:");
        match max_stepsize(id, mu, l, beta) {
            Some(a) => println!("  max_stepsize = {a:e}"),
            None => println!("  max_stepsize = -"),
        }
        let contraction = match id {
            AlgorithmId::Diffusion => diffusion_contraction(alpha, mu, l, beta),
            _ => dgt_contraction(alpha, mu, l, beta),
        };
        match contraction {
            Ok(m) => println!("  rho(A) = {:.12}", m.rho),
            Err(e) => println!("  rho(A): {e}"),
        }
        let bound = match id {
            AlgorithmId::Diffusion => diffusion_bound(alpha, mu, l, beta, dx, d),
            _ => dgt_bound(alpha, mu, l, beta, dx, dg),
        };
        match bound {
            Ok(b) => println!("  bound = {b:e}"),
            Err(e) => println!("  bound: {e}"),
        }
    }
}
