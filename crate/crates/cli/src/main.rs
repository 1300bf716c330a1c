use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use gradphase::config::Config;
use gradphase::io::write_atomic;
use gradphase::Error;

mod commands;
mod model;
mod run;

use run::Run;

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;

/// Simulate and fit magnetic-gradient dephasing in a lithium atom interferometer.
#[derive(Parser, Debug)]
#[command(name = "gradphase", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "gradphase-out")]
    out: PathBuf,

    /// Random seed for synthetic noise.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Zeeman energy treatment.
    #[arg(long, global = true)]
    mode: Option<Mode>,

    /// Bragg diffraction order.
    #[arg(long, global = true)]
    order: Option<u32>,

    #[arg(long, global = true)]
    isotope: Option<Isotope>,

    /// Print the files written.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Relative visibility and phase versus coil current.
    Simulate,
    /// Fit coupling, speed ratio and contamination to a visibility curve.
    Fit,
    /// Fit raw fringe scans and build the drift-corrected visibility series.
    Fringes,
    /// Field magnitude, gradient and arm separation along the beam.
    ExportField,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Fringes => "fringes",
            Command::ExportField => "export-field",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Mode {
    Linear,
    BreitRabi,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Isotope {
    Li6,
    Li7,
    Mix,
}

fn load_config(cli: &Cli) -> gradphase::Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed.to_string());
    }
    if let Some(mode) = cli.mode {
        cfg.set("mode", match mode {
            Mode::Linear => "linear",
            Mode::BreitRabi => "breit-rabi",
        });
    }
    if let Some(order) = cli.order {
        cfg.set("order", order.to_string());
    }
    if let Some(iso) = cli.isotope {
        cfg.set("isotope", match iso {
            Isotope::Li6 => "li6",
            Isotope::Li7 => "li7",
            Isotope::Mix => "mix",
        });
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let run = Run::new(cfg);
    check_unknown(&run)?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("cannot create output directory {}", cli.out.display()))?;
    let out: &Path = &cli.out;
    let mut written = match cli.command {
        Command::Simulate => commands::simulate(&run, out)?,
        Command::Fit => commands::fit(&run, out)?,
        Command::Fringes => commands::fringes(&run, out)?,
        Command::ExportField => commands::export_field(&run, out)?,
    };
    let sidecar = out.join(format!("{}.run.cfg", cli.command.name()));
    write_atomic(&sidecar, run.sidecar(cli.command.name()).as_bytes())?;
    written.push(sidecar);
    if cli.verbose {
        for p in written {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

/// Keys that belong to other subcommands are tolerated; misspelled ones are not.
/// Called before anything is read, so every key still counts as unused.
fn check_unknown(run: &Run) -> gradphase::Result<()> {
    match run.unused_keys().into_iter().find(|k| !model::KNOWN_KEYS.contains(&k.as_str())) {
        Some(k) => Err(Error::config(k, "unknown key")),
        None => Ok(()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NonConvergence(_)) => EXIT_NONCONVERGENCE,
        Some(Error::Io { .. } | Error::Config { .. } | Error::Parse { .. }) => EXIT_INPUT,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_distinguish_failures() {
        let nc = anyhow::Error::new(Error::NonConvergence(vec!["start 0".into()]));
        assert_eq!(exit_code(&nc), EXIT_NONCONVERGENCE);
        let cfg = anyhow::Error::new(Error::config("order", "bad"));
        assert_eq!(exit_code(&cfg), EXIT_INPUT);
        let other = anyhow::Error::new(Error::Fit("singular".into()));
        assert_eq!(exit_code(&other), EXIT_FAILURE);
    }
}
