use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conceptbench::dataset::{build_schema, export_dataset, generate_indices, stride_indices, DatasetId, GREEN, PURPLE};
use conceptbench::experiments::{
    read_results_csv, summarize_records, train_model, write_summary_csv, ExperimentConfig, Method,
};
use conceptbench::tasks::{loudness_setup, reduced_schema};
use conceptbench_cli::{active_run, apply_overrides, emit_plots, load_config, mark_interrupted, run, CliError};

#[derive(Parser)]
#[command(name = "conceptbench", version, about = "Concept-learning benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a dataset grid to PNGs plus concept annotations.
    Generate {
        #[arg(long, default_value = "dsprites")]
        dataset: DatasetId,
        /// Render a named loudness setup instead of the dataset grid.
        #[arg(long)]
        setup: Option<String>,
        /// Use the full grid rather than the reduced one.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        /// Maximum number of images (stride subsample).
        #[arg(long, default_value_t = 10_000)]
        scale: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and save its checkpoint bundle.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        scale: Option<usize>,
    },
    /// Run a configured experiment in a new run directory under `--out`.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        scale: Option<usize>,
    },
    /// Draw figures from a results.csv.
    Plot {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Median and interquartile range over seeds of one or more results.csv files.
    Summarize {
        #[arg(long, required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config(path: &Path, seed: Option<u64>, scale: Option<usize>) -> Result<ExperimentConfig, CliError> {
    apply_overrides(load_config(path)?, seed, scale)
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Generate { dataset, setup, full, resolution, scale, out } => {
            let schema = match (&setup, full, dataset) {
                (Some(name), _, _) => loudness_setup(name)?.schema,
                (None, true, _) | (None, false, DatasetId::DspritesColour) => {
                    let pair = (dataset == DatasetId::DspritesColour).then_some((GREEN, PURPLE));
                    build_schema(dataset, pair)?
                }
                (None, false, id) => reduced_schema(id)?,
            };
            let ds = generate_indices(&schema, resolution, &stride_indices(schema.total(), scale))?;
            export_dataset(&ds, &out)?;
            println!("wrote {} images to {}", ds.len(), out.display());
        }
        Command::Train { config: path, method, out, seed, scale } => {
            let cfg = config(&path, seed, scale)?;
            std::fs::create_dir_all(&out)?;
            let series = train_model(&cfg, method, &out)?;
            let json = serde_json::to_vec_pretty(&series).map_err(conceptbench::Error::from)?;
            std::fs::write(out.join("metrics.json"), json)?;
            println!("average {:.4} -> {}", series.average.last().copied().unwrap_or(f64::NAN), out.display());
        }
        Command::Experiment { config: path, out, seed, scale } => {
            let cfg = config(&path, seed, scale)?;
            let (manifest, dir) = run(&cfg, Some(&path), &out)?;
            println!("{} {}", manifest.run_id, dir.display());
        }
        Command::Plot { results, out } => {
            for p in emit_plots(&results, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Summarize { results, out } => {
            let mut rows = Vec::new();
            for p in &results {
                rows.extend(read_results_csv(p)?);
            }
            write_summary_csv(&out, &summarize_records(&rows)?)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let _ = ctrlc::set_handler(|| {
        if let Some(dir) = active_run() {
            if let Err(e) = mark_interrupted(&dir) {
                eprintln!("could not mark {} as failed: {e}", dir.display());
            }
        }
        std::process::exit(2);
    });
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
