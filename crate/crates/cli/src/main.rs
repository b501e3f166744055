use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use batsim_core::bench::{self, BenchConfig};
use batsim_core::config::{ScenarioConfig, StorageConfig};
use batsim_core::engine::{self, ScenarioSummary};
use batsim_core::experiment::{constant_power_experiment, Direction, ExperimentResult};
use batsim_core::microgrid::StepRecord;
use batsim_core::models::ModelKind;
use batsim_core::output::{self, OutputFormat};
use batsim_core::units::{DurationS, Soc};

#[derive(Debug, Parser)]
#[command(name = "batsim", version, about = "Battery storage models in a microgrid co-simulation")]
struct Cli {
    /// Seed for randomized workloads and pack heterogeneity.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file; stdout when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<OutputFormat>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Constant-power discharge from full to empty.
    Discharge(ExperimentArgs),
    /// Constant-power charge from empty to full.
    Charge(ExperimentArgs),
    /// Run a scenario config file.
    Scenario(ScenarioArgs),
    /// Per-step latency sweep over models and pack sizes.
    Bench(BenchArgs),
    /// Print resolved storage parameters, including derived values.
    Params(ParamsArgs),
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    /// Rate relative to 5 A per cell.
    #[arg(long)]
    c_rate: f64,
    #[arg(long, default_value_t = 1)]
    cells: usize,
    #[arg(long, default_value_t = 60.0)]
    step_seconds: f64,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    config: PathBuf,
    /// Replace the storage section with a default storage of this model and
    /// the same number of cells.
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    /// Run every model on the scenario and print one summary per model.
    #[arg(long, conflicts_with = "model")]
    compare: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_model,
          default_value = "simple,clc,ecm,pack")]
    models: Vec<ModelKind>,
    #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024")]
    cells: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 100)]
    warmup: usize,
    #[arg(long, default_value_t = 60.0)]
    step_seconds: f64,
}

#[derive(Debug, Args)]
struct ParamsArgs {
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    #[arg(long, default_value_t = 256)]
    cells: usize,
    /// Read the storage section of a scenario config instead.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: batsim_core::Error| e.to_string())
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: batsim_core::Error| e.to_string())
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_jsonl<T: serde::Serialize>(mut out: impl Write, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn run_experiment(cli: &Cli, args: &ExperimentArgs, direction: Direction) -> Result<()> {
    let step = DurationS::new(args.step_seconds).context("--step-seconds")?;
    let result: ExperimentResult =
        constant_power_experiment(args.model, direction, args.c_rate, args.cells, step)?;
    let out = sink(cli.output.as_deref())?;
    match cli.format.unwrap_or_default() {
        OutputFormat::Csv => result.write_csv(out)?,
        OutputFormat::Jsonl => write_jsonl(out, &result.rows)?,
    }
    eprintln!(
        "model={} direction={:?} c_rate={} requested_power_w={} energy_wh={} duration_s={}",
        result.model,
        result.direction,
        result.c_rate,
        result.requested_power_w,
        result.energy_wh(),
        result.duration_s()
    );
    Ok(())
}

fn print_summary(s: &ScenarioSummary) {
    eprintln!(
        "model={} steps={} net_grid_import_wh={:.3} grid_import_wh={:.3} grid_export_wh={:.3} \
         storage_charged_wh={:.3} storage_discharged_wh={:.3} unmet_wh={:.3} curtailed_wh={:.3} final_soc={:.4}",
        s.model,
        s.steps,
        s.net_grid_import_wh,
        s.grid_import_wh,
        s.grid_export_wh,
        s.storage_charged_wh,
        s.storage_discharged_wh,
        s.unmet_wh,
        s.curtailed_wh,
        s.final_soc
    );
}

fn write_records(path: Option<&Path>, format: OutputFormat, records: &[StepRecord]) -> Result<()> {
    match path {
        Some(p) => output::write_records(p, format, records)?,
        None => {
            let out = sink(None)?;
            match format {
                OutputFormat::Csv => output::write_csv(out, records)?,
                OutputFormat::Jsonl => output::write_jsonl(out, records)?,
            }
        }
    }
    Ok(())
}

fn with_model_suffix(path: &Path, model: ModelKind) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{model}.{ext}"),
        None => format!("{stem}_{model}"),
    };
    path.with_file_name(name)
}

fn apply_seed(config: &mut ScenarioConfig, seed: Option<u64>) {
    if let (Some(seed), StorageConfig::Pack(pack)) = (seed, &mut config.storage) {
        if let Some(h) = pack.heterogeneity.as_mut() {
            h.seed = seed;
        }
    }
}

fn run_scenario(cli: &Cli, args: &ScenarioArgs) -> Result<()> {
    let mut config = ScenarioConfig::from_path(&args.config)?;
    if let Some(model) = args.model {
        config = config.with_model(model);
    }
    apply_seed(&mut config, cli.seed);
    let target = match &cli.output {
        Some(p) => Some((p.clone(), cli.format.unwrap_or_else(|| OutputFormat::from_extension(p)))),
        None => config
            .output_path()
            .map(|(p, f)| (p, cli.format.unwrap_or(f))),
    };

    if args.compare {
        let configs: Vec<ScenarioConfig> = ModelKind::ALL.iter().map(|&m| config.with_model(m)).collect();
        let results = engine::run_many(configs.clone(), batsim_core::par::AVAILABLE);
        for (cfg, records) in configs.iter().zip(results) {
            let records = records?;
            if let Some((path, format)) = &target {
                output::write_records(&with_model_suffix(path, cfg.storage.kind()), *format, &records)?;
            }
            print_summary(&ScenarioSummary::of(cfg, &records));
        }
        return Ok(());
    }

    let records = engine::run(&config)?;
    match &target {
        Some((path, format)) => write_records(Some(path), *format, &records)?,
        None => write_records(None, cli.format.unwrap_or_default(), &records)?,
    }
    print_summary(&ScenarioSummary::of(&config, &records));
    Ok(())
}

fn run_bench(cli: &Cli, args: &BenchArgs) -> Result<()> {
    let config = BenchConfig {
        models: args.models.clone(),
        cell_counts: args.cells.clone(),
        iterations: args.iterations,
        warmup: args.warmup,
        step: DurationS::new(args.step_seconds).context("--step-seconds")?,
        seed: cli.seed.unwrap_or(0),
    };
    let rows = bench::sweep(&config)?;
    let out = sink(cli.output.as_deref())?;
    match cli.format.unwrap_or_default() {
        OutputFormat::Csv => bench::write_csv(out, &rows)?,
        OutputFormat::Jsonl => write_jsonl(out, &rows)?,
    }
    Ok(())
}

fn run_params(cli: &Cli, args: &ParamsArgs) -> Result<()> {
    let (storage, base) = match &args.config {
        Some(path) => {
            let config = ScenarioConfig::from_path(path)?;
            let storage = match args.model {
                Some(m) => config.storage.with_model(m),
                None => config.storage.clone(),
            };
            (storage, config.base_dir)
        }
        None => {
            let Some(model) = args.model else {
                bail!("params needs --model or --config");
            };
            if args.cells == 0 {
                bail!("--cells must be >= 1");
            }
            (StorageConfig::for_model(model, args.cells, Soc::FULL), PathBuf::from("."))
        }
    };
    let described = storage.describe(&base)?;
    let mut out = sink(cli.output.as_deref())?;
    match cli.format.unwrap_or_default() {
        OutputFormat::Jsonl => writeln!(out, "{}", serde_json::to_string(&described)?)?,
        OutputFormat::Csv => {
            writeln!(out, "key,value")?;
            for (k, v) in &described {
                match v {
                    serde_json::Value::String(s) => writeln!(out, "{k},\"{s}\"")?,
                    other => writeln!(out, "{k},{other}")?,
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Discharge(a) => run_experiment(&cli, a, Direction::Discharge),
        Command::Charge(a) => run_experiment(&cli, a, Direction::Charge),
        Command::Scenario(a) => run_scenario(&cli, a),
        Command::Bench(a) => run_bench(&cli, a),
        Command::Params(a) => run_params(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
