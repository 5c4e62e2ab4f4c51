use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use wormhole::commands::{selftest, study_command, wormhole_command, Outcome};
use wormhole::config::{builtin, parse_config, CaseName, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "wormhole",
    version,
    about = "Hybridized DG solver for acid wormhole propagation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file; the built-in case is used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs of a study.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Print progress to stderr.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study of the elliptic pressure case.
    ConvergePressure(Common),
    /// Convergence study of the convection-diffusion case.
    ConvergeConcentration {
        #[command(flatten)]
        common: Common,
        /// Diffusion coefficient; overrides the file.
        #[arg(long)]
        diffusion: Option<f64>,
    },
    /// Convergence study of the coupled porosity / pressure / concentration case.
    ConvergeCoupled(Common),
    /// Dissolution run with snapshot output.
    Wormhole(Common),
    /// Small randomized pressure and coupled runs.
    Selftest {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load(common: &Common, case: CaseName, diffusion: Option<f64>) -> Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(path) => parse_config(path)?,
        None => builtin(case, diffusion),
    };
    if cfg.case != case {
        anyhow::bail!(
            "this command runs case {:?}, the file names {:?}",
            case.as_str(),
            cfg.case.as_str()
        );
    }
    if diffusion.is_some() {
        cfg.diffusion = diffusion;
    }
    if let Some(out) = &common.out {
        cfg.output.directory = Some(out.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig) -> PathBuf {
    PathBuf::from(cfg.resolved().output.directory.unwrap_or_default())
}

fn run(cli: Cli) -> Result<bool> {
    let (outcome, dir): (Outcome, PathBuf) = match cli.command {
        Command::ConvergePressure(c) => {
            let cfg = load(&c, CaseName::PressureElliptic, None)?;
            let dir = out_dir(&cfg);
            (
                study_command("converge-pressure", &cfg, &dir, c.threads, c.verbose)?,
                dir,
            )
        }
        Command::ConvergeConcentration {
            common: c,
            diffusion,
        } => {
            let cfg = load(&c, CaseName::ConcentrationCd, diffusion)?;
            let dir = out_dir(&cfg);
            (
                study_command("converge-concentration", &cfg, &dir, c.threads, c.verbose)?,
                dir,
            )
        }
        Command::ConvergeCoupled(c) => {
            let cfg = load(&c, CaseName::Coupled, None)?;
            let dir = out_dir(&cfg);
            (
                study_command("converge-coupled", &cfg, &dir, c.threads, c.verbose)?,
                dir,
            )
        }
        Command::Wormhole(c) => {
            let cfg = load(&c, CaseName::Wormhole, None)?;
            let dir = out_dir(&cfg);
            (wormhole_command(&cfg, &dir, c.verbose)?, dir)
        }
        Command::Selftest { common: c, seed } => {
            let dir = c
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("out/selftest"));
            (selftest(seed, &dir, c.threads)?, dir)
        }
    };
    print!("{}", outcome.report);
    for ch in &outcome.manifest.checks {
        let mark = if ch.pass { "PASS" } else { "FAIL" };
        println!(
            "{mark} {}{}",
            ch.name,
            if ch.detail.is_empty() {
                String::new()
            } else {
                format!(": {}", ch.detail)
            }
        );
    }
    let path = outcome.manifest.write(&dir)?;
    println!("manifest: {}", path.display());
    Ok(outcome.manifest.pass)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
