use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use outcome_rl::experiment::{run_to_file, ExperimentConfig};
use outcome_rl::mdp::{optimal_value, reward_range, MdpSpec};
use outcome_rl::Error;

/// Run configured experiments on finite layered MDPs.
#[derive(Parser)]
#[command(name = "outcome-rl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Check a config and the files it references.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a summary of an MDP spec file.
    ShowMdp {
        #[arg(long)]
        spec: PathBuf,
    },
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error[{}]: {e}", e.code());
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
        } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let (result, path) = match run_to_file(&cfg, out.as_deref(), threads) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            if path.is_none() {
                print!("{}", result.to_csv());
            }
            for flag in result.pass_flags() {
                let status = if flag.value == 1.0 { "pass" } else { "FAIL" };
                eprintln!("{status} {} {} {}", flag.experiment, flag.grid, flag.metric);
            }
            if let Some(p) = path {
                eprintln!("wrote {}", p.display());
            }
            if result.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Validate { config } => {
            match ExperimentConfig::load(&config).and_then(|c| c.validate().map(|_| c)) {
                Ok(c) => {
                    println!("ok: {} with {} seed(s)", c.experiment, c.seeds.len());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::ShowMdp { spec } => {
            let mdp = match MdpSpec::load(&spec).and_then(|s| s.build()) {
                Ok(m) => m,
                Err(e) => return fail(e),
            };
            let (lo, hi) = reward_range(&mdp, mdp.rewards());
            println!("horizon: {}", mdp.horizon());
            println!("layer sizes: {:?}", mdp.shape().layer_sizes);
            println!("actions: {}", mdp.num_actions());
            println!("deterministic: {}", mdp.is_deterministic());
            println!("total reward range: [{lo}, {hi}]");
            println!("optimal value: {}", optimal_value(&mdp, mdp.rewards()));
            ExitCode::SUCCESS
        }
    }
}
