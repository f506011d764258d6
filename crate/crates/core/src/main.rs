use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dstofw::graph::TopologyKind;
use dstofw::runner::{lmo_self_test, run_experiment, spectrum_report, RawConfig, RunError};

#[derive(Parser)]
#[command(name = "dstofw", version, about = "Distributed stochastic Frank-Wolfe simulator")]
struct Cli {
    /// Worker threads for per-agent parallelism (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a key=value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// dstofw, denfw, cenfw or all.
        #[arg(long)]
        solver: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        iters: Option<String>,
        /// Master seed; per-purpose seeds not set in the file follow it.
        #[arg(long, allow_hyphen_values = true)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Abort with status 2 if the gradient-tracking identity drifts.
        #[arg(long)]
        check_invariants: bool,
        /// Extra `key=value` overrides, applied after the other flags.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compare the l1 linear minimization oracle against vertex enumeration.
    LmoTest {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 10)]
        max_dim: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Print the spectral gap of a Metropolis-weighted topology.
    Spectrum {
        /// ring, path, complete, ring_chords or er:<p>.
        #[arg(long)]
        topology: String,
        #[arg(long, default_value_t = 10)]
        agents: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(
    config: PathBuf,
    flags: [(&str, Option<String>); 4],
    check_invariants: bool,
    overrides: &[String],
) -> Result<(), RunError> {
    let text = std::fs::read_to_string(&config).map_err(|source| RunError::Io { path: config.clone(), source })?;
    let mut raw = RawConfig::parse(&text)?;
    for (key, value) in flags {
        if let Some(v) = value {
            raw.set(key, &v)?;
        }
    }
    if check_invariants {
        raw.set("check_invariants", "true")?;
    }
    for o in overrides {
        raw.set_assignment(o)?;
    }
    let config = raw.build()?;
    for output in run_experiment(&config)? {
        let last = output.log.last();
        println!(
            "{}: wrote {} (final loss {}, fw gap {})",
            output.log.solver,
            output.path.display(),
            last.map_or(f64::NAN, |r| r.loss),
            last.map_or(f64::NAN, |r| r.fw_gap),
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match cli.command {
        Command::Run { config, solver, iters, seed, out, check_invariants, overrides } => {
            let out = out.map(|p| p.display().to_string());
            run(config, [("solver", solver), ("iters", iters), ("seed", seed), ("out", out)], check_invariants, &overrides)
        }
        Command::LmoTest { trials, max_dim, radius, seed, tol } => {
            lmo_self_test(trials, max_dim, radius, seed).and_then(|report| {
                println!("trials={} max_excess={:e}", report.trials, report.max_excess);
                if report.max_excess <= tol {
                    Ok(())
                } else {
                    Err(RunError::Config(format!("oracle excess {:e} above {tol:e}", report.max_excess)))
                }
            })
        }
        Command::Spectrum { topology, agents, seed } => topology
            .parse::<TopologyKind>()
            .map_err(|e| RunError::Config(format!("--topology: {e}")))
            .and_then(|kind| spectrum_report(&kind, agents, seed))
            .map(|r| {
                println!("agents={} edges={} degree={}..{}", r.agents, r.edges, r.min_degree, r.max_degree);
                println!("lambda2={:.12}", r.lambda2);
                println!("k0(alpha=0.5)={} k0(alpha=1)={}", r.k0_half, r.k0_one);
            }),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
