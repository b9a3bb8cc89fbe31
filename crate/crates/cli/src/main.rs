use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use roomscan::{
    cmd_evaluate, cmd_pipeline, cmd_reconstruct, cmd_reduce, cmd_simulate, evaluation_json, CliError, RunConfig,
};

#[derive(Parser)]
#[command(name = "roomscan", version, about = "Simulate, reduce and reconstruct opportunistic indoor captures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration; defaults apply to omitted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic capture and its ground truth.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drop low-quality and redundant frames from a capture directory.
    Reduce {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a sparse model from a capture directory.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Align a model with simulator ground truth and print the errors.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Also write the evaluation JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage and write report.json.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default configuration.
    PrintDefaultConfig,
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    out.or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::new(2, "invalid-argument", "no output directory: pass --out or set output_dir"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::new(2, "invalid-argument", e.to_string()))?;
    match cli.command {
        Command::Simulate { common, out } => {
            let cfg = load(&common)?;
            let n = cmd_simulate(&cfg, &out_dir(&cfg, out)?)?;
            println!("{n}");
        }
        Command::Reduce { common, input, out } => {
            let report = cmd_reduce(&input, &load(&common)?, &out)?;
            println!(
                "kept {} of {} frames (reduction {:.3})",
                report.kept_ids.len(),
                report.total,
                report.reduction_ratio
            );
        }
        Command::Reconstruct { common, input, out } => {
            let rec = cmd_reconstruct(&input, &load(&common)?, &out)?;
            println!(
                "registered {} frames, {} points, rmse {:.3} px",
                rec.model.poses.len(),
                rec.model.points.len(),
                rec.model.reprojection_rmse()
            );
        }
        Command::Evaluate { model, gt, out } => {
            let json = evaluation_json(&cmd_evaluate(&model, &gt)?);
            if let Some(path) = out {
                write_file(&path, &json)?;
            }
            print!("{json}");
        }
        Command::Pipeline { common, out } => {
            let cfg = load(&common)?;
            let report = cmd_pipeline(&cfg, &out_dir(&cfg, out)?)?;
            print!("{}", report.to_json());
        }
        Command::PrintDefaultConfig => print!("{}", RunConfig::default().to_json()),
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::new(3, "io", format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", CliError::new(2, "invalid-argument", format!("{first}; see --help")));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code as u8)
        }
    }
}
