//! `dibound`: batch runner for device-independent entropy bounds.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 infeasible statistics.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{ModeName, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "dibound", version, about = "Certified lower bounds on conditional entropy from Bell statistics")]
struct Args {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the SDPs in sparse SDPA format to DIR instead of solving.
    #[arg(long, value_name = "DIR")]
    export_sdpa: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// NPA level.
    #[arg(long, value_name = "N")]
    level: Option<usize>,
    /// Number of grid nodes.
    #[arg(long, value_name = "R")]
    nodes: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
    /// Print the effective configuration with all defaults and exit.
    #[arg(long)]
    print_config: bool,
}

const CONFIG_ERROR: u8 = 2;

fn load(args: &Args) -> Result<RunConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None if args.print_config => RunConfig::example(),
        None => return Err("--config is required (see --print-config for a template)".into()),
    };
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(l) = args.level {
        cfg.relaxation.level = l;
    }
    if let Some(r) = args.nodes {
        cfg.grid.nodes = r;
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if args.print_config {
        match toml::to_string_pretty(&cfg) {
            Ok(text) => {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(CONFIG_ERROR);
            }
        }
    }
    let plan = match cfg.validate() {
        Ok(p) => p,
        Err(errors) => {
            for e in errors {
                eprintln!("config error: {e}");
            }
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if let Some(dir) = &args.export_sdpa {
        return match run::export(&plan, dir) {
            Ok(n) => {
                eprintln!("wrote {n} SDPA files to {}", dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(4)
            }
        };
    }
    let rows = match run::run(&plan) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    };
    let written = match &plan.output {
        Some(path) => std::fs::File::create(path)
            .map_err(|e| format!("{}: {e}", path.display()))
            .and_then(|f| run::write_csv(&rows, f).map_err(|e| e.to_string())),
        None => run::write_csv(&rows, std::io::stdout().lock()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    ExitCode::from(run::exit_code(&rows) as u8)
}
