use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adsmc::harness::sweep::{parse_list, run_sweep};
use adsmc::harness::{metrics, preset, run_scenario, Axis, ControllerVariant, Figure, Preset, Scenario};
use adsmc::Error;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

/// Adaptive discrete sliding mode control of a DC motor under ADC imprecision.
#[derive(Parser, Debug)]
#[command(name = "adsmc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a scenario and write the per-step trace as CSV.
    Run {
        scenario: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario across values of one axis and write a summary CSV.
    Sweep {
        scenario: PathBuf,
        /// sampling_time | bits | controller
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values, e.g. 0.2,0.4,0.8 or 1siso,2mimo+mu.
        #[arg(long)]
        values: String,
        /// Controllers to cross with each value (not used with --axis controller).
        #[arg(long)]
        controllers: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the built-in experiments: fig3, fig4, fig5, fig6, fig7.
    Repro {
        figure: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario's configuration and gains without simulating.
    Validate { scenario: PathBuf },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(path: &Path) -> Result<Scenario, Error> {
    let scn = Scenario::from_file(path)?;
    scn.validate()?;
    for w in scn.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(scn)
}

fn run_trace(scn: &Scenario, out: Option<&Path>) -> Result<(), Error> {
    let trace = run_scenario(scn)?;
    let m = metrics(&trace, scn.run.transient)?;
    eprintln!(
        "{}: {} steps, mean |e| = {:.6} rad/s, rms = {:.6}, max overshoot = {:.6}",
        trace.name,
        trace.len(),
        m.mean_abs_error,
        m.rms_error,
        m.max_overshoot
    );
    trace.write_csv(output(out)?)
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { scenario, out } => {
            let scn = load(&scenario)?;
            run_trace(&scn, out.as_deref())
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            controllers,
            out,
        } => {
            let scn = load(&scenario)?;
            let axis: Axis = axis.parse()?;
            let values: Vec<String> = parse_list(&values)?;
            let controllers: Vec<ControllerVariant> = match controllers {
                Some(c) => parse_list(&c)?,
                None => Vec::new(),
            };
            let summary = run_sweep(&scn, axis, &values, &controllers)?;
            summary.write_csv(output(out.as_deref())?)
        }
        Command::Repro { figure, out } => {
            let fig: Figure = figure.parse()?;
            match preset(fig) {
                Preset::Trace(scn) => run_trace(&scn, out.as_deref()),
                Preset::Sweep {
                    base,
                    axis,
                    values,
                    controllers,
                } => {
                    let summary = run_sweep(&base, axis, &values, &controllers)?;
                    summary.write_csv(output(out.as_deref())?)
                }
            }
        }
        Command::Validate { scenario } => {
            let scn = load(&scenario)?;
            println!("{}: ok", scn.name);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_divergence() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
