mod commands;
mod data;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::data::DataRoot;

#[derive(Parser, Debug)]
#[command(name = "fqbmru", version, about = "Train, compile, simulate and analyse FQ BMRU networks")]
struct Cli {
    /// Root for relative dataset paths.
    #[arg(long, global = true, env = "BMRU_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network and write a checkpoint, a log and a manifest.
    Train(commands::TrainArgs),
    /// Map a hardware-backbone checkpoint onto a circuit netlist.
    Compile(commands::CompileArgs),
    /// Simulate a netlist on a dataset.
    Sim(commands::SimArgs),
    /// Accuracy under injected signal noise for one or more checkpoints.
    NoiseSweep(commands::NoiseSweepArgs),
    /// Monte Carlo mismatch analysis of a netlist.
    Mc(commands::McArgs),
    /// Power breakdown of the circuit for given state sizes.
    Power(commands::PowerArgs),
    /// Accuracy after uniform post-training quantization.
    QuantReport(commands::QuantArgs),
    /// Write a synthetic dataset as a feature-sequence file.
    GenSynth(commands::GenSynthArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let root = DataRoot(cli.data_dir);
    let result = match cli.command {
        Command::Train(a) => commands::train(a, &root),
        Command::Compile(a) => commands::compile(a),
        Command::Sim(a) => commands::sim(a, &root),
        Command::NoiseSweep(a) => commands::noise_sweep(a, &root),
        Command::Mc(a) => commands::mc(a, &root),
        Command::Power(a) => commands::power(a),
        Command::QuantReport(a) => commands::quant_report(a, &root),
        Command::GenSynth(a) => commands::gen_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
