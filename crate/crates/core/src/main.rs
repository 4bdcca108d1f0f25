use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mlswr::io::{load_config, preset, run_to_directory, PRESETS};
use mlswr::Error;

/// Multilayer shallow-water solver for reactive polydisperse sedimentation.
#[derive(Debug, Parser)]
#[command(name = "mlswr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a configuration and write snapshots.
    Run {
        config: PathBuf,
        /// Overrides output.directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides time.t_end, s.
        #[arg(long)]
        until: Option<f64>,
        /// Overrides time.cfl.
        #[arg(long)]
        cfl: Option<f64>,
        /// Print progress only every N steps.
        #[arg(long, default_value_t = 1)]
        log_every: u64,
    },
    /// Validate a configuration without running it.
    Check { config: PathBuf },
    /// List the built-in scenarios, or print one as a configuration file.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
}

const EXIT_INVALID: u8 = 1;
const EXIT_FAILED: u8 = 2;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        eprintln!("  caused by: {s}");
        source = s.source();
    }
    ExitCode::from(if e.is_config_error() { EXIT_INVALID } else { EXIT_FAILED })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Check { config } => match load_config(&config) {
            Ok(c) => {
                println!(
                    "{}: ok ({}x{} cells, {} layers, t_end = {} s)",
                    config.display(),
                    c.grid.nx,
                    c.grid.ny,
                    c.layers.count,
                    c.time.t_end
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Presets { show: None } => {
            for p in PRESETS {
                println!("{:<6} {}", p.name, p.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Presets { show: Some(name) } => match preset(&name) {
            Ok(p) => {
                print!("{}", p.text);
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run { config, output_dir, until, cfl, log_every } => {
            let mut c = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if let Some(d) = output_dir {
                c.output.directory = d;
            }
            if let Some(t) = until {
                c.time.t_end = t;
            }
            if let Some(v) = cfl {
                c.time.cfl = v;
            }
            if let Err(e) = c.check() {
                return fail(&e);
            }
            let dir = c.output.directory.clone();
            let every = log_every.max(1);
            let result = run_to_directory(&c, &dir, |report| {
                if report.step % every == 0 {
                    eprintln!("{report}");
                }
            });
            match result {
                Ok(summary) => {
                    eprintln!(
                        "done steps={} t={:.6} snapshots={} dir={}",
                        summary.steps,
                        summary.t,
                        summary.files.len(),
                        dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
