use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ewens_pitman::io::{self, TrajectoryRecord};
use ewens_pitman::{ExperimentConfig, ExperimentKind, LabError, Result};
use ewens_pitman_core::partitions::simulate_crp;
use ewens_pitman_core::urn::sample_occupancy;
use ewens_pitman_core::{CrpParams, Grid, TrajectoryGrid, TrajectoryKind};

/// Simulate Ewens-Pitman partitions and check their limit theorems.
#[derive(Parser)]
#[command(name = "ewens-pitman", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate single runs and print `K_⌊nt⌋ / n^α` on a grid as CSV.
    Simulate {
        #[command(subcommand)]
        model: Model,
    },
    /// Run an experiment from a JSON config.
    Experiment {
        kind: ExperimentKind,
        #[command(flatten)]
        source: ConfigSource,
    },
    /// Check a config and print it with defaults filled in.
    ValidateConfig {
        #[command(flatten)]
        source: ConfigSource,
    },
    /// Re-run the experiment recorded in a metadata file.
    Replay {
        metadata: PathBuf,
        /// Write outputs here instead of the recorded directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigSource {
    #[arg(long)]
    config: PathBuf,
    /// `key=value`, applied after the file; values are parsed as JSON when
    /// possible and taken as strings otherwise.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicates: u64,
    #[arg(long, default_value_t = 100)]
    grid_size: usize,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Model {
    /// Chinese restaurant process.
    Crp(RunArgs),
    /// Occupancy counts of an urn over sampled frequencies.
    Urn {
        #[command(flatten)]
        run: RunArgs,
        /// Number of frequencies; chosen from the tail mass when absent.
        #[arg(long)]
        truncation: Option<usize>,
        /// Sample from this realization instead of a fresh one per replicate.
        #[arg(long)]
        realization: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            println!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| LabError::format("<stdout>", e))?;
    println!("{text}");
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { model } => simulate(model),
        Command::Experiment { kind, source } => {
            let mut doc = read_document(&source)?;
            match doc.get("kind") {
                None => {
                    doc.insert("kind".into(), serde_json::to_value(kind).expect("kind serializes"));
                }
                Some(v) if *v != serde_json::to_value(kind).expect("kind serializes") => {
                    return Err(LabError::Config(format!("config kind {v} does not match `{kind}`")));
                }
                Some(_) => {}
            }
            let config = ExperimentConfig::from_value(serde_json::Value::Object(doc), &source.overrides)?;
            let (summary, _) = ewens_pitman::run_experiment(&config, true)?;
            print_json(&summary)
        }
        Command::ValidateConfig { source } => {
            let doc = read_document(&source)?;
            let config = ExperimentConfig::from_value(serde_json::Value::Object(doc), &source.overrides)?;
            print_json(&serde_json::json!({ "valid": true, "config": config }))
        }
        Command::Replay { metadata, output_dir } => {
            let (summary, _) = ewens_pitman::replay(&metadata, output_dir, true)?;
            print_json(&summary)
        }
    }
}

fn read_document(source: &ConfigSource) -> Result<serde_json::Map<String, serde_json::Value>> {
    let text = std::fs::read_to_string(&source.config).map_err(|e| LabError::io(&source.config, e))?;
    match serde_json::from_str(&text) {
        Ok(serde_json::Value::Object(map)) => Ok(map),
        Ok(_) => Err(LabError::Config(format!("{}: top level must be a JSON object", source.config.display()))),
        Err(e) => Err(LabError::Config(format!("{}: {e}", source.config.display()))),
    }
}

fn simulate(model: Model) -> Result<()> {
    let (args, records) = match model {
        Model::Crp(args) => {
            let params = CrpParams::new(args.alpha, args.theta)?;
            let grid = grid(&args)?;
            let records = (0..args.replicates)
                .map(|r| {
                    let seed = ewens_pitman_core::rng::derive_seed(args.seed, r);
                    let crp = simulate_crp(args.n, params, seed)?;
                    Ok(record(&args, r, &grid, |m| crp.k_at(m)))
                })
                .collect::<Result<Vec<_>>>()?;
            (args, records)
        }
        Model::Urn {
            run: args,
            truncation,
            realization,
        } => {
            CrpParams::new(args.alpha, args.theta)?;
            let grid = grid(&args)?;
            let pinned = realization.map(|p| io::read_realization(&p)).transpose()?;
            let j = match truncation {
                Some(j) => j,
                None => ewens_pitman::experiments::auto_truncation(args.alpha, args.n)?,
            };
            let records = (0..args.replicates)
                .map(|r| {
                    let rs = ewens_pitman_core::rng::derive_seed(args.seed, r);
                    let owned;
                    let real = match &pinned {
                        Some(real) => real,
                        None => {
                            let seed = ewens_pitman_core::rng::derive_seed(rs, ewens_pitman::experiments::streams::REALIZATION);
                            owned = if args.theta == 0.0 {
                                ewens_pitman_core::frequencies::sample_pd_theta0(args.alpha, j, seed)?
                            } else {
                                ewens_pitman_core::frequencies::sample_gem(args.alpha, args.theta, j, seed)?.to_ordered()?
                            };
                            &owned
                        }
                    };
                    let occ_seed = ewens_pitman_core::rng::derive_seed(rs, ewens_pitman::experiments::streams::OCCUPANCY);
                    let occ = sample_occupancy(real, args.n, occ_seed)?;
                    Ok(record(&args, r, &grid, |m| occ.k_at(m)))
                })
                .collect::<Result<Vec<_>>>()?;
            (args, records)
        }
    };
    match &args.output {
        Some(path) => io::write_trajectories(path, &records),
        None => io::write_trajectories_to(std::io::stdout().lock(), std::path::Path::new("<stdout>"), &records),
    }
}

fn grid(args: &RunArgs) -> Result<Grid> {
    if args.n == 0 {
        return Err(LabError::Config("n must be at least 1".into()));
    }
    if args.grid_size == 0 {
        return Err(LabError::Config("grid_size must be at least 1".into()));
    }
    Ok(Grid::uniform(args.grid_size))
}

fn record(args: &RunArgs, replicate: u64, grid: &Grid, k_at: impl Fn(u64) -> u32) -> TrajectoryRecord {
    let scale = (args.n as f64).powf(args.alpha);
    TrajectoryRecord {
        alpha: args.alpha,
        theta: args.theta,
        replicate,
        trajectory: TrajectoryGrid {
            kind: TrajectoryKind::KScaled,
            n: args.n,
            grid: grid.clone(),
            values: grid.floor_indices(args.n).iter().map(|&m| k_at(m) as f64 / scale).collect(),
        },
    }
}
