use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grbf_cli::{run, CliResult, Command, RunConfig};

const AFTER_HELP: &str = "\
Output: CSV goes to --out when given, otherwise to stdout. The one-line JSON
summary goes to stdout when --out is given and to stderr otherwise.

CSV schemas (numbers in scientific notation, 13 significant digits):
  selftest     suite,passed,failed
  convergence  n,rel_mse_solve,kappa
  train        step,loss,kappa
  whitney      step,loss,kappa   (only when --steps trains the basis)

Settings are layered as flags > --config file > problem defaults. The config
file holds key=value lines with keys command, problem, n, n_min, n_max, gamma,
steps, lr, optimizer, seed, out, full_scale.";

#[derive(Parser, Debug)]
#[command(name = "grbf", version, about = "Gaussian RBF Galerkin solver", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Run the randomized invariant suites.
    Selftest {
        /// Flip the signs of the moment expansion; the suites must then fail.
        #[arg(long)]
        mutate: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Untrained solve error and condition number over a range of N.
    Convergence(Common),
    /// One untrained solve.
    Solve(Common),
    /// Train the basis and write the loss trace.
    Train(Common),
    /// The mixed Darcy problem in three dimensions.
    Whitney {
        /// Use the two-Gaussian basis in which the exact field is representable.
        #[arg(long)]
        exact_pair: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    problem: Option<u8>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Boundary penalty; 0 disables it.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// adam or lbfgs.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
    /// Problem 3 at its full size: 65536 samples, 10000 steps.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    config: Option<String>,
}

impl Common {
    fn to_config(&self, command: Command) -> RunConfig {
        RunConfig {
            command: Some(command),
            problem: self.problem,
            n: self.n,
            n_min: self.n_min,
            n_max: self.n_max,
            gamma: self.gamma,
            steps: self.steps,
            lr: self.lr,
            optimizer: self.optimizer.clone(),
            seed: self.seed,
            out: self.out.clone(),
            full_scale: self.full_scale.then_some(true),
        }
    }
}

fn execute(cli: Cli) -> CliResult<bool> {
    let (command, common, mutate, exact_pair) = match cli.command {
        Sub::Selftest { mutate, common } => (Command::Selftest, common, mutate, false),
        Sub::Convergence(c) => (Command::Convergence, c, false, false),
        Sub::Solve(c) => (Command::Solve, c, false, false),
        Sub::Train(c) => (Command::Train, c, false, false),
        Sub::Whitney { exact_pair, common } => (Command::Whitney, common, false, exact_pair),
    };
    let flags = common.to_config(command);
    let cfg = match &common.config {
        Some(path) => RunConfig::parse(&fs::read_to_string(path)?)?.overlay(&flags),
        None => flags,
    };
    let outcome = run(&cfg, mutate, exact_pair)?;
    let summary = serde_json::to_string(&outcome.summary)?;
    match (&outcome.csv, &cfg.out) {
        (Some(csv), Some(path)) => {
            fs::write(path, csv)?;
            println!("{summary}");
        }
        (Some(csv), None) => {
            print!("{csv}");
            std::io::stdout().flush()?;
            eprintln!("{summary}");
        }
        (None, _) => println!("{summary}"),
    }
    Ok(outcome.ok)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
