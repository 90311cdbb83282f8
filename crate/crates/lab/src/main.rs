use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use explosion_lab::{run, Experiment, ExperimentConfig, RunManifest, Seed};

#[derive(Parser)]
#[command(name = "explosion-lab", version, about = "Explosion-threshold experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML config; defaults for the experiment are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides the config).
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV file with `x,y` rows of cell seeds (overrides the config).
    #[arg(long)]
    seed_cells: Option<PathBuf>,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Flow-free threshold on the disk at several resolutions.
    Gelfand(RunArgs),
    /// Bounds sandwich over catalog cases and amplitudes.
    Bounds(RunArgs),
    /// Whole-domain vs per-cell vs averaged thresholds for the four-cell flow.
    Fig2(RunArgs),
    /// Streamline variation of minimal solutions against amplitude.
    Equidist(RunArgs),
    /// Exit time on the separatrix skeleton.
    Stratify(RunArgs),
    /// Radial compressible flows.
    Compressible(RunArgs),
    /// Threshold growth for shear and cellular flows.
    ShearGrowth(RunArgs),
    /// Re-check the digests of a finished run.
    Verify {
        /// Output directory containing manifest.json.
        dir: PathBuf,
    },
}

fn read_seeds(path: &Path) -> Result<Vec<Seed>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| format!("{}: {e}", path.display())))
        .collect()
}

fn configure(experiment: Experiment, args: &RunArgs) -> Result<ExperimentConfig, String> {
    let mut config = match &args.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default_for(experiment),
    };
    if config.experiment != experiment {
        return Err(format!(
            "experiment: config is for '{}' but the subcommand is '{}'",
            config.experiment, experiment
        ));
    }
    if let Some(o) = &args.out {
        config.output_dir = o.clone();
    }
    if let Some(j) = args.jobs {
        config.jobs = j;
    }
    if let Some(s) = &args.seed_cells {
        config.seeds = read_seeds(s)?;
    }
    Ok(config)
}

fn report(m: &RunManifest) {
    for t in m.tasks.iter().filter(|t| !t.ok) {
        println!("TASK FAILED {}: {}", t.name, t.detail);
    }
    for a in &m.assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    println!(
        "{} outputs in {}, {:.1}s",
        m.outputs.len(),
        m.config.output_dir.display(),
        m.wall_seconds
    );
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::Gelfand(a) => (Experiment::Gelfand, a),
        Command::Bounds(a) => (Experiment::Bounds, a),
        Command::Fig2(a) => (Experiment::Fig2, a),
        Command::Equidist(a) => (Experiment::Equidist, a),
        Command::Stratify(a) => (Experiment::Stratify, a),
        Command::Compressible(a) => (Experiment::Compressible, a),
        Command::ShearGrowth(a) => (Experiment::ShearGrowth, a),
        Command::Verify { dir } => {
            return match RunManifest::load(&dir.join("manifest.json")) {
                Ok(m) => {
                    let bad = m.verify(dir);
                    for b in &bad {
                        println!("MISMATCH {b}");
                    }
                    if bad.is_empty() {
                        println!("{} outputs verified", m.outputs.len());
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    let config = match configure(experiment, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if args.print_config {
        print!("{}", config.to_toml_string());
        return ExitCode::SUCCESS;
    }
    match run(&config) {
        Ok(m) => {
            report(&m);
            if m.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
