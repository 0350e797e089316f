use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gad_cli::{DataPaths, RunConfig};
use gad_core::{ErrorKind, GadError, Method, Result};

#[derive(Parser)]
#[command(name = "gad", version, about = "Graph-aware diffusion: generate, train, sample, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON). Missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = RunConfig::load_or_default(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the graph, train/test signals and communities.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train the denoiser for one method.
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory holding adjacency.csv and train.csv.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Generate signals from a trained checkpoint.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory holding adjacency.csv.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Adjacency CSV; overrides --data.
        #[arg(long)]
        adjacency: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        num_samples: Option<usize>,
    },
    /// Compare generated signals against a test set.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        adjacency: PathBuf,
        /// Label stored in the report.
        #[arg(long, default_value = "unknown")]
        method: String,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Train every method once and evaluate it at every step count.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated step counts; overrides the config.
        #[arg(long, value_delimiter = ',')]
        steps: Option<Vec<usize>>,
        #[arg(long)]
        iterations: Option<usize>,
    },
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData { common } => {
            let config = common.resolve()?;
            gad_cli::gen_data(&config, &config.out)?;
            println!("wrote dataset to {}", config.out.display());
        }
        Command::Train { common, data, method, iterations } => {
            let mut config = common.resolve()?;
            if let Some(m) = method {
                config.method = m;
            }
            if let Some(i) = iterations {
                config.train.num_iterations = i;
            }
            config.validate()?;
            let paths = DataPaths::resolve(&config, data.as_deref());
            let result = gad_cli::train_method(&config, config.method, &paths, &config.out)?;
            println!(
                "trained {} for {} iterations, final loss {:.6}; checkpoint {}",
                config.method,
                result.loss.0.len(),
                result.loss.0.last().copied().unwrap_or(f64::NAN),
                result.checkpoint.display()
            );
        }
        Command::Sample { common, checkpoint, data, adjacency, steps, num_samples } => {
            let mut config = common.resolve()?;
            if let Some(s) = steps {
                config.sampler.num_steps = s;
            }
            if let Some(n) = num_samples {
                config.sampler.num_samples = n;
            }
            config.validate()?;
            let adjacency = adjacency.unwrap_or_else(|| DataPaths::resolve(&config, data.as_deref()).adjacency);
            let path = gad_cli::sample(
                &config,
                &checkpoint,
                &adjacency,
                config.sampler.num_steps,
                config.sampler.num_samples,
                &config.out,
            )?;
            println!("wrote {}", path.display());
        }
        Command::Eval { common, generated, test, adjacency, method, steps } => {
            let config = common.resolve()?;
            let report = gad_cli::eval(&generated, &test, &adjacency, &method, steps, Some(&config.out))?;
            println!("aMMD {}", report.ammd);
        }
        Command::Sweep { common, steps, iterations } => {
            let mut config = common.resolve()?;
            if let Some(s) = steps {
                config.sampler.sweep_steps = s;
            }
            if let Some(i) = iterations {
                config.train.num_iterations = i;
            }
            let rows = gad_cli::sweep(&config, &config.out)?;
            for r in &rows {
                println!("{:>4} S={:<4} aMMD {:.6}", r.method.as_str(), r.steps, r.report.ammd);
            }
            println!("wrote {}", Path::new(&config.out).join(gad_cli::SWEEP_FILE).display());
        }
    }
    Ok(())
}

fn exit_code(err: &GadError) -> u8 {
    match err.kind() {
        ErrorKind::Validation => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
