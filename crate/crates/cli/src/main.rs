//! `disjhh`: generate instances, run sketches and protocols, and tabulate
//! the results as CSV with JSON mirrors.

mod adversary;
mod config;
mod error;
mod gen;
mod protocol;
mod report;
mod run;
mod table;

use clap::{Parser, Subcommand};
use config::{ExperimentConfig, Params};
use error::CliError;

const RUN_COLUMNS: &str = "\
CSV columns (mg, countsketch, turnstile-hh):
  item      index reported by the algorithm
  estimate  the algorithm's frequency estimate for the item
  exact     the item's true final frequency
CSV columns (sparse-recovery):
  index     index of a decoded nonzero entry
  value     decoded value
  exact     true final frequency at that index
The JSON mirror adds parameters and a summary (words, capacity, branch or
source, error bounds).";

const PROTOCOL_COLUMNS: &str = "\
CSV columns (deterministic, eps-publish, pigeonhole):
  trial            trial number; trial t uses seed + t
  label            true label of the instance (YES or NO)
  output           protocol answer
  correct          whether output equals label
  bits             total bits written on the board
  max_player_bits  most bits written by a single player
CSV columns (clean-sim):
  inputs                   input bits of players 0, 1, ... as a string
  tv_to_base               total variation between clean and original transcripts
  observation_probability  probability the clean player observes their input
  output_probability       probability the original protocol outputs 1
Without --label, odd trials draw YES instances and even trials NO instances.";

const ADVERSARY_COLUMNS: &str = "\
CSV columns:
  index  coordinate
  x1     first vector; coordinate istar is a 1/4-l2 heavy hitter
  x2     second vector, with x2[istar] = 0 and M x1 = M x2
The matrix file is a JSON array of rows. Without --input a random r x n
matrix with orthonormal rows is drawn from --seed.";

const REPORT_COLUMNS: &str = "\
Scans the JSON mirrors in --input and writes space.csv and
communication.csv (each with a JSON mirror) into --out, or into --input.
space.csv columns:
  source       mirror file name
  eps, L       accuracy and length bound of a turnstile-hh run
  strict       whether the strict query was used
  capacity     summary capacity S
  words        machine words of state
  words_bound  24 (L/eps)^(2/3)
communication.csv columns:
  source, protocol, n, k, l, eps, trials  run parameters
  error_rate, max_bits, mean_bits         protocol summary";

#[derive(Parser)]
#[command(
    name = "disjhh",
    version,
    about = "Heavy-hitter sketches and MostlyDISJ experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance or stream file
    Gen {
        #[arg(value_enum)]
        kind: gen::GenKind,
        #[command(flatten)]
        params: Params,
    },
    /// Run a sketch over a stream file (--input)
    #[command(after_help = RUN_COLUMNS)]
    Run {
        #[arg(value_enum)]
        alg: run::Algorithm,
        #[command(flatten)]
        params: Params,
    },
    /// Run protocol trials
    #[command(after_help = PROTOCOL_COLUMNS)]
    Protocol {
        #[arg(value_enum)]
        name: protocol::ProtocolName,
        #[command(flatten)]
        params: Params,
    },
    /// Build two vectors a linear sketch cannot tell apart
    #[command(after_help = ADVERSARY_COLUMNS)]
    Adversary {
        #[command(flatten)]
        params: Params,
    },
    /// Tabulate a directory of results
    #[command(after_help = REPORT_COLUMNS)]
    Report {
        #[command(flatten)]
        params: Params,
    },
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen { kind, params } => gen::run(kind, &ExperimentConfig::resolve(&params)?),
        Command::Run { alg, params } => {
            let cfg = ExperimentConfig::resolve(&params)?;
            run::run(alg, &cfg)?.emit(cfg.out.as_deref())
        }
        Command::Protocol { name, params } => {
            let cfg = ExperimentConfig::resolve(&params)?;
            protocol::run(name, &cfg)?.emit(cfg.out.as_deref())
        }
        Command::Adversary { params } => {
            let cfg = ExperimentConfig::resolve(&params)?;
            adversary::run(&cfg)?.emit(cfg.out.as_deref())
        }
        Command::Report { params } => {
            let cfg = ExperimentConfig::resolve(&params)?;
            let dir = match &cfg.out {
                Some(out) => out.clone(),
                None => cfg.input()?,
            };
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            for (name, table) in report::run(&cfg)? {
                table.emit(Some(&dir.join(name)))?;
            }
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(cli.command) {
        eprintln!("{}", e.to_json());
        std::process::exit(1);
    }
}
