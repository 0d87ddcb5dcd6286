use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use urnlab_harness::analyze::{parse_erw_params, parse_matrix, render_table};
use urnlab_harness::output::{self, read_summary, PlotRow};
use urnlab_harness::{analyze_matrix, diagnose, run_experiment, write_outputs, ExperimentConfig, HarnessError, RunSettings};

#[derive(Parser)]
#[command(name = "urnlab", version, about = "Randomized urn and elephant random walk experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replicate of an experiment and write config.toml,
    /// summary.csv, replicates.csv and plot.csv.
    Simulate {
        /// Experiment configuration (TOML).
        #[arg(short, long)]
        config: PathBuf,
        /// Worker threads; defaults to the number of available cores.
        #[arg(short, long)]
        workers: Option<usize>,
        /// Output directory, overriding `output.dir` from the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print irreducibility, row-sum norms, dominant eigenvalue and Perron
    /// vector of a nonnegative matrix.
    #[command(group(ArgGroup::new("source").required(true).args(["matrix", "file", "erw"])))]
    Analyze {
        /// Inline matrix, e.g. "[[2,1],[1,2]]".
        #[arg(short, long)]
        matrix: Option<String>,
        /// File holding nested arrays or a TOML `matrix = [[...]]` entry.
        #[arg(short, long)]
        file: Option<PathBuf>,
        /// Mean replacement matrix of the walk's memory urn, from
        /// `d=.. a=.. p=.. q=..`.
        #[arg(long, num_args = 1..)]
        erw: Option<Vec<String>>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        /// Exit with status 3 when the matrix is not irreducible.
        #[arg(long)]
        strict: bool,
    },
    /// Run an urn experiment with the SA and tail traces switched on, check
    /// the moment condition and step-size band, and write diagnostics.json
    /// next to the usual outputs.
    Diagnose {
        /// Experiment configuration (TOML); the model must be "urn".
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        workers: Option<usize>,
        /// Output directory, overriding `output.dir` from the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Convert a summary.csv into long-format plot data.
    PlotData {
        /// A summary.csv written by `simulate`.
        #[arg(short, long)]
        summary: PathBuf,
        /// Destination; standard output when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn output_dir(config: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(&config.output.dir))
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    std::fs::write(path, bytes).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate { config, workers, out } => {
            let config = ExperimentConfig::load(&config)?;
            let result = run_experiment(&config, RunSettings { workers })?;
            let files = write_outputs(&result, &output_dir(&config, out))?;
            print_files(&files);
            for name in ["proportion_error", "total_error", "count_error", "location_error", "memory_error"] {
                if let Some(p) = result.summary.last(name) {
                    println!("{name:<18} n={:<10} mean={:.6e} stderr={:.3e}", p.n, p.mean, p.stderr);
                }
            }
        }
        Command::Analyze { matrix, file, erw, format, strict } => {
            let m = if let Some(text) = matrix {
                parse_matrix(&text)?
            } else if let Some(path) = file {
                let text = std::fs::read_to_string(&path).map_err(|source| HarnessError::Io { path, source })?;
                parse_matrix(&text)?
            } else {
                parse_erw_params(&erw.unwrap_or_default())?.mean_replacement_matrix()
            };
            let report = analyze_matrix(&m)?;
            match format {
                Format::Table => print!("{}", render_table(&report)),
                Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            if strict && !report.irreducible {
                return Err(HarnessError::Contract(urnlab_core::Error::NotIrreducible));
            }
        }
        Command::Diagnose { config, workers, out } => {
            let config = ExperimentConfig::load(&config)?;
            let report = diagnose(&config, RunSettings { workers })?;
            let dir = output_dir(&config, out);
            let mut files = write_outputs(&report.experiment, &dir)?;
            let json = dir.join("diagnostics.json");
            write(&json, serde_json::to_string_pretty(&report)?.as_bytes())?;
            files.push(json);
            print_files(&files);
            println!("moment check flagged: {}", report.moment.flagged);
            println!(
                "S_n/n in [{:.4}, {:.4}], band [sigma, norm] = [{:.4}, {:.4}]",
                report.step_size.observed_min, report.step_size.observed_max, report.step_size.sigma, report.step_size.norm
            );
            for t in &report.traces {
                println!("{:<18} n={:<8} {:.4e}  ->  n={:<8} {:.4e}", t.series, t.first_n, t.first_mean, t.last_n, t.last_mean);
            }
        }
        Command::PlotData { summary, out } => {
            let rows: Vec<PlotRow> = read_summary(&summary)?;
            let bytes = output::emit_plot_data(&rows)?;
            match out {
                Some(path) => write(&path, &bytes)?,
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("urnlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
