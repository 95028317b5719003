use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dampwave::sweep::{self, RunOptions};

#[derive(Parser)]
#[command(name = "dampwave", version, about = "Resolvent sweeps and decay experiments for damped waves on the torus")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the sweeps and checks in a TOML config.
    Run {
        config: PathBuf,
        /// Recompute even if a cached result exists.
        #[arg(long)]
        force: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Cache directory (default: $DAMPWAVE_CACHE_DIR or <output_dir>/.cache).
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Write plot data and SVG plots for a report.
    Render {
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { config, force, jobs, cache_dir } => {
            sweep::run(&config, &RunOptions { force, jobs, cache_dir }).map(|r| {
                for (name, f) in &r.fits {
                    println!("fit {name}: slope {:.4} (r² {:.4})", f.fit.slope, f.fit.r_squared);
                }
                for (name, c) in &r.checks {
                    println!("check {name}: {}", if c.pass { "pass" } else { "FAIL" });
                }
                println!("config hash {}{}", r.config_hash, if r.provenance.cached { " (cached)" } else { "" });
            })
        }
        Cmd::Render { report, out } => sweep::render(&report, out.as_deref()).map(|o| {
            for p in o.series_csv.iter().chain(&o.plots).chain(&o.traces) {
                println!("{}", p.display());
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
