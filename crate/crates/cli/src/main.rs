use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use equiflow::config::{parse_config, parse_number};
use equiflow::{cmd_analyze, cmd_run, cmd_sweep, cmd_verify, parse_monitors, AnalyzeOptions, CliError, RunOptions};
use equiflow_core::Executor;

#[derive(Parser)]
#[command(name = "equiflow", version, about = "Equivariant Lagrangian mean curvature flow runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Run directory (EQUIFLOW_OUT takes precedence).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutDir {
    fn resolve(&self, fallback: Option<&Path>) -> Result<PathBuf, CliError> {
        std::env::var_os("EQUIFLOW_OUT")
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .or_else(|| self.out.clone())
            .or_else(|| fallback.map(Path::to_path_buf))
            .ok_or_else(|| CliError::Usage("no output directory: pass --out or set EQUIFLOW_OUT".into()))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow for one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutDir,
        /// Continue an interrupted run in the same directory.
        #[arg(long)]
        resume: bool,
        /// Stop (resumably) after this many steps.
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Singular time, densities and tangent-flow report of a blow-up run.
    Analyze {
        #[command(flatten)]
        out: OutDir,
        /// Comma-separated rescaling factors, e.g. 30,100,300.
        #[arg(long, default_value = "")]
        scales: String,
        /// Ball radius for branch detection in rescaled coordinates.
        #[arg(long, default_value_t = 4.0)]
        radius: f64,
        /// Rescaled time of the sequence members.
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        tau: f64,
    },
    /// Evaluate the monitor suite over every frame; exit 1 on any failure.
    Verify {
        #[command(flatten)]
        out: OutDir,
        /// Comma-separated monitor names, or `all`.
        #[arg(long, default_value = "all")]
        monitors: String,
    },
    /// Run several configurations concurrently, each into OUT/<file stem>.
    Sweep {
        #[arg(long, required = true, num_args = 1..)]
        config: Vec<PathBuf>,
        #[command(flatten)]
        out: OutDir,
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        max_steps: Option<u64>,
    },
}

fn parse_scales(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_number(s).map_err(|m| CliError::Usage(format!("--scales: {m}"))))
        .collect()
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { config, out, resume, max_steps } => {
            let cfg = parse_config(&config)?;
            let dir = out.resolve(cfg.output_dir.as_deref())?;
            let m = cmd_run(&cfg, &dir, &RunOptions { resume, max_steps })?;
            println!("{}: {} after {} steps, t = {}", dir.display(), m.status.as_str(), m.steps, m.t_final);
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { out, scales, radius, tau } => {
            let dir = out.resolve(None)?;
            let opts = AnalyzeOptions { scales: parse_scales(&scales)?, radius, tau, ..AnalyzeOptions::default() };
            let r = cmd_analyze(&dir, &opts)?;
            println!("singular time {:.8} in [{:.8}, {:.8}]", r.singular_t, r.time_estimate.lo, r.time_estimate.hi);
            println!("location ({:.3e}, {:.3e})", r.location.re, r.location.im);
            if r.torus_control {
                println!("torus control (nonzero Maslov class)");
            }
            if let Some(b) = &r.branch_angles {
                println!("branch angles {:?} (checked against {:.6})", b.measured, b.checked);
            }
            if let Some(e) = &r.tangent_flow_error {
                println!("tangent flow unavailable: {e}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { out, monitors } => {
            let dir = out.resolve(None)?;
            let report = cmd_verify(&dir, &parse_monitors(&monitors)?)?;
            print!("{}", report.table());
            Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Sweep { config, out, resume, max_steps } => {
            let dir = out.resolve(None)?;
            let mut configs = Vec::new();
            for path in &config {
                let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
                configs.push((name, parse_config(path)?));
            }
            let mut failed = false;
            for (d, res) in cmd_sweep(&configs, &dir, &RunOptions { resume, max_steps }, Executor::Parallel) {
                match res {
                    Ok(m) => println!("{}: {} after {} steps, t = {}", d.display(), m.status.as_str(), m.steps, m.t_final),
                    Err(e) => {
                        failed = true;
                        eprintln!("{}: error: {e}", d.display());
                    }
                }
            }
            Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
    }
}
