use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rabi_xuv_cli::{error::EXIT_OTHER, execute, Command, Invocation};

/// Autler–Townes photoelectron spectra of a two-level atom in an intense XUV pulse.
#[derive(Parser)]
#[command(name = "rabi-xuv", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML or JSON run configuration; a run manifest also works.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Also write gnuplot scripts next to the data.
    #[arg(long, global = true)]
    emit_plots: bool,

    /// Worker threads (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Final spectra and doublet analysis for each selector.
    Spectrum,
    /// Photon-energy scan with dressed-branch tracking.
    Scan,
    /// Focal-volume averaged spectra.
    Average,
    /// Time-dependent essential-states propagation.
    Oracle,
    /// Blind Richardson–Lucy deconvolution.
    Deconvolve,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Scan => Command::Scan,
            Cmd::Average => Command::Average,
            Cmd::Oracle => Command::Oracle,
            Cmd::Deconvolve => Command::Deconvolve,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("rabi-xuv: cannot set up {n} threads: {e}");
            return ExitCode::from(EXIT_OTHER);
        }
    }
    let inv = Invocation {
        command: cli.command.into(),
        config: cli.config,
        out: cli.out,
        emit_plots: cli.emit_plots,
    };
    match execute(&inv) {
        Ok(files) => {
            let mut out = std::io::stdout().lock();
            for f in files {
                // a closed pipe only loses the listing
                if writeln!(out, "wrote {}", f.display()).is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rabi-xuv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
