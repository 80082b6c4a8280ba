use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vpme::run::{self, Status};
use vpme::{load_config, CliError, RunConfig, RunMode};

/// Backward (scattering) solver for 1D Vlasov-Poisson with massless electrons.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the datum against its class; exit 2 if it falls outside the
    /// theorem's hypotheses.
    Validate(Common),
    /// Iterate to the fixed point and write the run directory.
    Run(Common),
    /// Weak-versus-pointwise convergence for f* = mu(v)(1 + cos 2 pi x).
    DemoInstability(Common),
    /// Refit the field decay of a finished run.
    DecayReport {
        run_dir: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    config: PathBuf,
    /// Override the configured mode.
    #[arg(long)]
    mode: Option<RunMode>,
    /// Output directory (default: <output root>/<config name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Root for default output directories.
    #[arg(long, env = "VPME_OUT_ROOT", default_value = "runs")]
    out_root: PathBuf,
}

struct Prepared {
    cfg: RunConfig,
    base: PathBuf,
    mode: RunMode,
    dir: PathBuf,
}

fn prepare(c: &Common) -> Result<Prepared, CliError> {
    let mut cfg = load_config(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let mode = c.mode.unwrap_or(cfg.mode);
    cfg.mode = mode;
    let base = c.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let stem = c.config.file_stem().map(PathBuf::from).unwrap_or_else(|| "run".into());
    let dir = c
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(|d| base.join(d)))
        .unwrap_or_else(|| c.out_root.join(stem));
    Ok(Prepared { cfg, base, mode, dir })
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Validate(c) => {
            let p = prepare(&c)?;
            let (_, report) = run::validate(&p.cfg, &p.base)?;
            print!("{}", run::validation_text(&report));
            let ok = report.theorem_ready() || p.mode == RunMode::Exploratory;
            Ok(if ok { 0 } else { 2 })
        }
        Command::Run(c) => {
            let p = prepare(&c)?;
            let out = run::run(&p.cfg, &p.base, p.mode, &p.dir)?;
            eprintln!("{}: {}", out.dir.display(), out.manifest.headline.contraction);
            for w in &out.report.iteration.warnings {
                eprintln!("warning: {w}");
            }
            if out.status == Status::NotConverged {
                eprintln!("iteration cap reached without convergence");
            }
            Ok(out.status.exit_code())
        }
        Command::DemoInstability(c) => {
            let p = prepare(&c)?;
            let (status, report) = run::demo_instability(&p.cfg, &p.base, p.mode, &p.dir)?;
            println!("{}", report.narrative);
            Ok(status.exit_code())
        }
        Command::DecayReport { run_dir } => {
            print!("{}", run::decay_text(&run::decay_report(&run_dir)?));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
