// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fedsketch::experiment::{self, ExperimentError, Overrides};
use fedsketch::fedsim::Algorithm;

/// Federated averaging with count-sketched model updates.
///
/// Any config field can be overridden with a dotted flag, e.g.
/// `--fed.devices_per_round 10` or `--data.heterogeneity_alpha=0.5`.
#[derive(Parser, Debug)]
#[command(name = "fedsketch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment.
    Run {
        #[command(flatten)]
        common: Common,
        /// Target compression ratio n/(d·w); implies the sketched algorithm.
        #[arg(long)]
        compression: Option<f64>,
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
    },
    /// Run the config once per compression ratio (1 = dense baseline).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        compressions: Vec<f64>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AlgorithmArg {
    Vanilla,
    Sketched,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Vanilla => Algorithm::Vanilla,
            AlgorithmArg::Sketched => Algorithm::Sketched,
        }
    }
}

fn fail(e: &ExperimentError) -> ExitCode {
    eprintln!("fedsketch: {e}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let (args, dotted) = match experiment::split_dotted_args(std::env::args()) {
        Ok(split) => split,
        Err(e) => return fail(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match cli.command {
        Command::Run {
            common,
            compression,
            algorithm,
        } => {
            let ov = Overrides {
                output_dir: common.out,
                compression,
                algorithm: algorithm.map(Into::into),
                seed: common.seed,
                dotted,
            };
            match experiment::run_file(&common.config, &ov) {
                Ok(s) => {
                    println!(
                        "rounds={} final_accuracy={} total_bytes={} output={}",
                        s.rounds,
                        s.final_accuracy.map_or("n/a".into(), |a| format!("{a:.4}")),
                        s.total_bytes,
                        s.output_dir.display()
                    );
                    if let Some(a) = s.attack {
                        println!(
                            "attack success_rate={} baseline={}",
                            a.success_rate, a.baseline_rate
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Sweep {
            common,
            compressions,
        } => {
            let ov = Overrides {
                output_dir: common.out,
                seed: common.seed,
                dotted,
                ..Overrides::default()
            };
            match experiment::sweep_file(&common.config, &compressions, &ov) {
                Ok(rows) => {
                    for r in rows {
                        println!(
                            "ratio={} final_accuracy={:.4} total_bytes={}",
                            r.ratio, r.final_accuracy, r.total_bytes
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
