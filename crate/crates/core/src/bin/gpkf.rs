use std::collections::HashSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gpkf::config::{parse_config, preset, RunConfig};
use gpkf::run::{exit_code, run_dir, run_many, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "gpkf", version, about = "Numerical Gaussian process Kalman filter runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario configs; several configs run in parallel.
    Run {
        /// Config files (`key = value` lines). Optional when --preset is given.
        configs: Vec<PathBuf>,
        /// Base values applied before each file, e.g. `advection-ifac`.
        #[arg(long)]
        preset: Option<String>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; with several configs each run writes to `DIR/run-<i>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only report errors.
        #[arg(long)]
        quiet: bool,
    },
}

fn load(
    configs: &[PathBuf],
    preset_name: Option<&str>,
    seed: Option<u64>,
    out: Option<&PathBuf>,
) -> Result<Vec<RunConfig>, (String, gpkf::Error)> {
    let mut cfgs = if configs.is_empty() {
        let name = preset_name.ok_or_else(|| {
            (
                "<args>".to_string(),
                gpkf::Error::Config {
                    key: "<args>".into(),
                    message: "give at least one config file or --preset".into(),
                },
            )
        })?;
        vec![preset(name).map_err(|e| (name.to_string(), e))?]
    } else {
        configs
            .iter()
            .map(|p| parse_config(p, preset_name).map_err(|e| (p.display().to_string(), e)))
            .collect::<Result<Vec<_>, _>>()?
    };
    if let Some(seed) = seed {
        cfgs = cfgs.into_iter().map(|c| c.with_seed(seed)).collect();
    }
    let n = cfgs.len();
    let distinct: HashSet<_> = cfgs.iter().map(|c| c.output_dir.clone()).collect();
    for (i, c) in cfgs.iter_mut().enumerate() {
        if let Some(base) = out {
            c.output_dir = run_dir(base, i, n);
        } else if distinct.len() < n {
            c.output_dir = run_dir(&c.output_dir, i, n);
        }
    }
    Ok(cfgs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        configs,
        preset,
        seed,
        out,
        quiet,
    } = cli.command;
    let level = if quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let cfgs = match load(&configs, preset.as_deref(), seed, out.as_ref()) {
        Ok(c) => c,
        Err((source, e)) => {
            eprintln!("gpkf: {source}: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let results = run_many(&cfgs);
    let mut code = 0;
    for (cfg, res) in cfgs.iter().zip(&results) {
        let dir = cfg.output_dir.display();
        match res {
            Ok(s) => {
                let th = s.final_state.theta;
                log::info!(
                    "{dir}: {} steps, mise {:.4e} -> {:.4e}, sigma_q {:.4e}, sigma_r {:.4e}",
                    s.mise.len() - 1,
                    s.mise[0],
                    s.mise[s.mise.len() - 1],
                    th.sigma2_q.sqrt(),
                    th.sigma2_r.sqrt()
                );
            }
            Err(e) => eprintln!("gpkf: {dir}: {e}"),
        }
        code = code.max(exit_code(res));
    }
    ExitCode::from(code as u8)
}
