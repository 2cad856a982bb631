//! Command-line front end for sparse multinomial logistic regression.

mod bench;
mod common;
mod fit;
mod synth;

use clap::{error::ErrorKind, Parser, Subcommand};

use common::{run_id, CliResult};

#[derive(Parser, Debug)]
#[command(name = "shygamp", version, about = "Sparse multinomial logistic regression by hybrid GAMP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit weights on a dataset and print a JSON report.
    Train(fit::TrainCmd),
    /// Label new samples with a saved model.
    Predict(fit::PredictCmd),
    /// Test-set, hold-out or cross-validated error rate.
    Eval(fit::EvalCmd),
    /// Matched synthetic experiments and sweeps.
    Synth(synth::SynthCmd),
    /// Accuracy and runtime of the moment approximations.
    MomentsBench(bench::BenchCmd),
}

fn dispatch(cli: Cli, id: String) -> CliResult<()> {
    match &cli.command {
        Command::Train(c) => fit::train(c, id),
        Command::Predict(c) => fit::predict(c),
        Command::Eval(c) => fit::eval(c, id),
        Command::Synth(c) => synth::synth(c, id),
        Command::MomentsBench(c) => bench::bench(c),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli, run_id(&args[1..])) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
