use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use triplet_gates::harness::{
    self, describe_defaults, exit_code, ReproduceOptions, RunConfig, EXPERIMENTS, FIGURES,
};

#[derive(Parser)]
#[command(
    name = "triplet-gates",
    version,
    about = "Triplet-mediated nuclear spin gate simulator"
)]
struct Cli {
    /// Worker threads for sweeps and powder averages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        grid_n: Option<usize>,
        #[arg(long)]
        no_relaxation: bool,
    },
    /// Check a config without simulating.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the registered experiments.
    ListExperiments,
    /// Regenerate every figure directory.
    ReproduceAll {
        #[arg(long, default_value = "reproduce")]
        out: PathBuf,
        #[arg(long)]
        grid_n: Option<usize>,
        #[arg(long)]
        no_relaxation: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0
            || rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .is_err()
        {
            eprintln!("error: cannot start {n} worker threads");
            return ExitCode::from(2);
        }
    }
    let result = match cli.verb {
        Verb::Run {
            config,
            out,
            grid_n,
            no_relaxation,
        } => RunConfig::load(&config).and_then(|mut cfg| {
            if let Some(n) = grid_n {
                cfg.grid.n_polar = n;
            }
            if no_relaxation {
                cfg.relaxation.enabled = false;
            }
            let m = harness::run(&cfg, out.as_deref())?;
            for a in &m.artifacts {
                println!("{}  {}", a.sha256, a.path);
            }
            println!("{} finished in {:.2} s", m.experiment, m.wall_time_s);
            Ok(())
        }),
        Verb::Validate { config } => match harness::validate(&config) {
            Ok(v) if v.is_empty() => {
                println!("{}: valid", config.display());
                Ok(())
            }
            Ok(v) => {
                for line in &v {
                    println!("{line}");
                }
                return ExitCode::from(2);
            }
            Err(e) => Err(e),
        },
        Verb::ListExperiments => {
            for (name, about) in EXPERIMENTS {
                println!("{name:<16} {about}");
                println!(
                    "{:<16} defaults: {}",
                    "",
                    describe_defaults(name).unwrap_or("-")
                );
            }
            Ok(())
        }
        Verb::ReproduceAll {
            out,
            grid_n,
            no_relaxation,
        } => {
            let opts = ReproduceOptions {
                grid_n,
                relaxation: !no_relaxation,
            };
            harness::reproduce_all(&out, &opts).map(|m| {
                for (fig, exp) in FIGURES {
                    println!("{fig:<13} {exp}");
                }
                println!(
                    "{} artifacts in {} ({:.1} s)",
                    m.artifacts.len(),
                    out.display(),
                    m.wall_time_s
                );
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
