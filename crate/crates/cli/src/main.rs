use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use selfish_core::io::{
    self, digest_str, parse_config, simulation_rows, sweep_rows, to_canonical_json,
    ExperimentConfig, Outputs, PlotSeries, ThresholdRecord,
};
use selfish_core::{run_repeated, sweep_with_refinement, table1_suite, Error, Result, SweepConfig};

#[derive(Parser)]
#[command(name = "selfish-sim", version, about = "Selfish-mining simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repeat one configuration with a fixed miner set.
    Simulate(Common),
    /// Sweep attacker power and estimate the profitability threshold.
    Sweep(Common),
    /// Run the full threshold table.
    #[command(name = "reproduce-table1")]
    ReproduceTable1 {
        #[command(flatten)]
        common: SuiteArgs,
        /// Rounds per run.
        #[arg(long)]
        rounds: Option<u64>,
        /// Runs per grid point.
        #[arg(long)]
        repeats: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct SuiteArgs {
    /// Optional JSON file with `rounds`, `repeats` and `seed`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct Shared {
    /// Master seed, overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
}

const TABLE_SEED: u64 = 2025;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", &e.render().to_string());
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn report(kind: &str, message: &str) {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message.trim_end() } });
    eprintln!("{body}");
}

fn run(command: Command) -> Result<()> {
    let shared = match &command {
        Command::Simulate(c) | Command::Sweep(c) => &c.shared,
        Command::ReproduceTable1 { common, .. } => &common.shared,
    };
    if let Some(jobs) = shared.jobs {
        if jobs == 0 {
            return Err(Error::Config {
                field: "--jobs".into(),
                message: "must be positive".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    }
    let outputs = match &command {
        Command::Simulate(c) => simulate(c)?,
        Command::Sweep(c) => sweep(c)?,
        Command::ReproduceTable1 {
            common,
            rounds,
            repeats,
        } => reproduce(common, *rounds, *repeats)?,
    };
    let manifest = io::write_results(&shared.out, &outputs)?;
    for path in &manifest.outputs {
        println!("{}", shared.out.join(path).display());
    }
    Ok(())
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = parse_config(&c.config)?;
    if let Some(seed) = c.shared.seed {
        cfg.set_master_seed(seed);
    }
    Ok(cfg)
}

fn outputs(digest: u64, master_seed: u64) -> Outputs {
    Outputs {
        config_digest: digest,
        master_seed,
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        ..Outputs::default()
    }
}

fn simulate(c: &Common) -> Result<Outputs> {
    let cfg = load(c)?;
    let ExperimentConfig::Simulate { config, repeats } = &cfg else {
        return Err(Error::Config {
            field: "miners".into(),
            message: "simulate needs a `miners` list; use `sweep` for sweep configs".into(),
        });
    };
    let runs = run_repeated(config, *repeats)?;
    let mut out = outputs(cfg.digest(), cfg.master_seed());
    out.rows = simulation_rows(config, &runs);
    Ok(out)
}

fn sweep(c: &Common) -> Result<Outputs> {
    let cfg = load(c)?;
    let ExperimentConfig::Sweep { sweep, refine } = &cfg else {
        return Err(Error::Config {
            field: "sweep".into(),
            message: "sweep needs a `sweep` object; use `simulate` for miner lists".into(),
        });
    };
    let mut out = outputs(cfg.digest(), cfg.master_seed());
    add_sweep(&mut out, &series_name(sweep), sweep, *refine)?;
    Ok(out)
}

fn series_name(sweep: &SweepConfig) -> String {
    format!(
        "{}_g{}_{}",
        sweep.base.protocol,
        sweep.base.gamma,
        sweep.layout.label()
    )
}

fn add_sweep(out: &mut Outputs, name: &str, sweep: &SweepConfig, refine: bool) -> Result<()> {
    let (points, estimate) = if refine {
        sweep_with_refinement(sweep)?
    } else {
        let points = selfish_core::run_sweep(sweep)?;
        let estimate = selfish_core::estimate_threshold(&points)?;
        (points, estimate)
    };
    out.rows.extend(sweep_rows(sweep, &points));
    out.thresholds.push(ThresholdRecord::new(sweep, &estimate));
    out.series.push(PlotSeries::from_points(name, &points));
    Ok(())
}

struct SuiteSettings {
    rounds: u64,
    repeats: usize,
    seed: u64,
}

fn suite_settings(path: &Path) -> Result<SuiteSettings> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let serde_json::Value::Object(map) = value else {
        return Err(Error::Config {
            field: "config".into(),
            message: "expected a JSON object".into(),
        });
    };
    let mut settings = SuiteSettings {
        rounds: 100_000,
        repeats: 5,
        seed: TABLE_SEED,
    };
    for (key, v) in &map {
        let n = v.as_u64().ok_or_else(|| Error::Config {
            field: key.clone(),
            message: "expected a non-negative integer".into(),
        })?;
        match key.as_str() {
            "rounds" => settings.rounds = n,
            "repeats" => settings.repeats = n as usize,
            "seed" => settings.seed = n,
            _ => {
                return Err(Error::Config {
                    field: key.clone(),
                    message: "unknown key; expected rounds, repeats or seed".into(),
                })
            }
        }
    }
    Ok(settings)
}

fn reproduce(common: &SuiteArgs, rounds: Option<u64>, repeats: Option<usize>) -> Result<Outputs> {
    let mut settings = match &common.config {
        Some(path) => suite_settings(path)?,
        None => SuiteSettings {
            rounds: 100_000,
            repeats: 5,
            seed: TABLE_SEED,
        },
    };
    settings.rounds = rounds.unwrap_or(settings.rounds);
    settings.repeats = repeats.unwrap_or(settings.repeats);
    settings.seed = common.shared.seed.unwrap_or(settings.seed);

    let mut suite = table1_suite(settings.seed);
    let mut canonical = String::new();
    for entry in &mut suite {
        entry.sweep.rounds = settings.rounds;
        entry.sweep.base.rounds = settings.rounds;
        entry.sweep.repeats = settings.repeats;
        entry.sweep.validate()?;
        canonical.push_str(&to_canonical_json(&ExperimentConfig::Sweep {
            sweep: entry.sweep.clone(),
            refine: true,
        }));
    }
    let mut out = outputs(digest_str(&canonical), settings.seed);
    for entry in &suite {
        add_sweep(&mut out, &entry.name, &entry.sweep, true)?;
    }
    Ok(out)
}
