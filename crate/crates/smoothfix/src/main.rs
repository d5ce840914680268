use clap::Parser;
use smoothfix::config::load_config;
use smoothfix::report::{write_meta_json, write_report_csv, RunMeta};
use smoothfix::rng::RngStream;
use smoothfix::tasks::{TaskContext, TaskRegistry};
use smoothfix::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Run one experiment task against a weight model described in a config
/// file, writing report.csv and meta.json into the output directory.
///
/// Exit status: 0 when every assertion row passed, 1 when any failed (or,
/// under --strict, when the run produced warnings), 2 on configuration or
/// I/O errors.
#[derive(Parser)]
#[command(name = "smoothfix", version)]
struct Cli {
    /// Task to run; must match the `task` field of the config file.
    task: String,

    /// Path to the experiment config (JSON).
    #[arg(long)]
    config: PathBuf,

    /// Fail the run (exit 1) if it produced any warnings.
    #[arg(long)]
    strict: bool,

    /// Recompute and replace cached artifacts instead of reusing them.
    #[arg(long)]
    overwrite: bool,

    /// Worker threads; defaults to all available cores. Results are
    /// byte-identical for any worker count.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let start = Instant::now();
    let config = load_config(&cli.config)?;
    if config.task != cli.task {
        return Err(Error::Config(format!(
            "config names task `{}` but `{}` was requested",
            config.task, cli.task
        )));
    }
    let registry = TaskRegistry::builtin();
    let task = registry.get(&cli.task).ok_or_else(|| {
        Error::Config(format!(
            "unknown task `{}`; available: {}",
            cli.task,
            registry.names().join(", ")
        ))
    })?;
    let out_dir = config.resolve_output_dir()?;
    std::fs::create_dir_all(&out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let ctx = TaskContext {
        model: &config.model,
        params: &config.params,
        stream: RngStream::new(config.master_seed).named(&config.task),
        out_dir: &out_dir,
        overwrite: cli.overwrite,
    };
    let output = pool.install(|| task.run(&ctx))?;
    write_report_csv(&out_dir.join("report.csv"), &output.rows)?;
    let meta = RunMeta {
        task: config.task.clone(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        workers: pool.current_num_threads(),
        wall_secs: start.elapsed().as_secs_f64(),
        warnings: output.warnings.clone(),
        config: serde_json::to_value(&config)?,
        resolved_params: output.resolved_params,
    };
    write_meta_json(&out_dir.join("meta.json"), &meta)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    let failed = output.rows.iter().filter(|r| !r.pass).count();
    println!(
        "{}: {} rows, {} failed, {} warnings -> {}",
        config.task,
        output.rows.len(),
        failed,
        output.warnings.len(),
        out_dir.display()
    );
    Ok(failed == 0 && !(cli.strict && !output.warnings.is_empty()))
}
