use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use veinorigin::descriptors::parse_descriptor_list;
use veinorigin::experiment::{
    dataset_stats, export_variant, ingest, run_matrix, stats_csv, synth_sensors, write_report, ExperimentConfig,
    Experiment, Region, SignatureScope, SynthConfig, TrainedCell, Variant,
};
use veinorigin::Error;

#[derive(Parser)]
#[command(name = "veinorigin", version, about = "Finger vein sensor model identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-sensor dataset.
    Synth(SynthArgs),
    /// Batch ROI extraction into PNGs plus a provenance manifest.
    Roi(Common),
    /// Per-class luminance and variance box-plot data.
    Stats(Common),
    /// Build the feature cache.
    Extract(Common),
    /// Grid-search and train one cell on the training split.
    Train(Common),
    /// Evaluate a trained cell on the test split.
    Evaluate(EvaluateArgs),
    /// Run every descriptor × variant cell.
    Matrix(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionArg {
    Orig,
    Roi,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Full,
    Background,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated descriptor ids, e.g. `WMV,FRF`.
    #[arg(long)]
    descriptors: Option<String>,
    #[arg(long, value_enum)]
    variant: Option<RegionArg>,
    #[arg(long, value_enum)]
    enhance: Option<Switch>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Model written by `train`.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    classes: usize,
    #[arg(long, default_value_t = 120)]
    per_class: usize,
    #[arg(long, default_value_t = 160)]
    width: usize,
    #[arg(long, default_value_t = 120)]
    height: usize,
    #[arg(long, value_enum, default_value = "full")]
    scope: ScopeArg,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidArgument(_) | Error::UnknownDescriptor(_) | Error::Serde(_) => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

type CliResult = Result<(), Failure>;

fn load_config(args: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(list) = &args.descriptors {
        cfg.descriptors = parse_descriptor_list(list)?;
        if cfg.descriptors.is_empty() {
            return Err(Error::Config("empty descriptor list".into()).into());
        }
    }
    let region = args.variant.map(|r| match r {
        RegionArg::Orig => Region::Original,
        RegionArg::Roi => Region::Roi,
    });
    let enhanced = args.enhance.map(|s| matches!(s, Switch::On));
    if region.is_some() || enhanced.is_some() {
        let base: Vec<Variant> = if cfg.variants.is_empty() { Variant::ALL.to_vec() } else { cfg.variants.clone() };
        let mut picked: Vec<Variant> = base
            .into_iter()
            .filter(|v| region.is_none_or(|r| v.region == r) && enhanced.is_none_or(|e| v.enhanced == e))
            .collect();
        if picked.is_empty() {
            // The flags name a variant the config does not list.
            picked.push(Variant { region: region.unwrap_or(Region::Original), enhanced: enhanced.unwrap_or(false) });
        }
        cfg.variants = picked;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn single_cell(cfg: &ExperimentConfig, what: &str) -> Result<(veinorigin::descriptors::DescriptorId, Variant), Failure> {
    match (cfg.descriptors.as_slice(), cfg.variants.as_slice()) {
        ([d], [v]) => Ok((*d, *v)),
        _ => Err(Failure {
            code: 1,
            message: format!("{what} needs exactly one descriptor and one variant; use --descriptors, --variant and --enhance"),
        }),
    }
}

fn ensure_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| Failure { code: 2, message: format!("cannot create `{}`: {e}", dir.display()) })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure { code: 2, message: e.to_string() })?;
    std::fs::write(path, text).map_err(|e| Failure { code: 2, message: format!("cannot write `{}`: {e}", path.display()) })
}

fn synth(args: SynthArgs) -> CliResult {
    let cfg = SynthConfig {
        classes: args.classes,
        per_class: args.per_class,
        width: args.width,
        height: args.height,
        seed: args.seed,
        scope: match args.scope {
            ScopeArg::Full => SignatureScope::Full,
            ScopeArg::Background => SignatureScope::Background,
        },
        signatures: None,
    };
    let m = synth_sensors(&cfg, &args.out)?;
    println!("wrote {} classes x {} samples to {}", m.classes.len(), cfg.per_class, args.out.display());
    println!("experiment config: {}", args.out.join("config.json").display());
    Ok(())
}

fn roi(args: Common) -> CliResult {
    let mut cfg = load_config(&args)?;
    let records = ingest(&cfg)?;
    let enhanced = matches!(args.enhance, Some(Switch::On));
    let variant = Variant { region: Region::Roi, enhanced };
    cfg.variants = vec![variant];
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.join("roi"));
    let written = export_variant(&cfg, &records, variant, &out)?;
    println!("wrote {} ROI images to {}", written.len(), out.display());
    Ok(())
}

fn stats(args: Common) -> CliResult {
    let cfg = load_config(&args)?;
    let stats = dataset_stats(&ingest(&cfg)?)?;
    ensure_dir(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("stats.json"), &stats)?;
    let csv = stats_csv(&stats);
    std::fs::write(cfg.output_dir.join("stats.csv"), &csv)
        .map_err(|e| Failure { code: 2, message: e.to_string() })?;
    print!("{csv}");
    Ok(())
}

fn extract(args: Common) -> CliResult {
    let mut cfg = load_config(&args)?;
    cfg.feature_cache = true;
    let exp = Experiment::prepare(&cfg)?;
    let mut store = exp.feature_store();
    for &v in &cfg.variants {
        for &d in &cfg.descriptors {
            let f = store.features(v, d)?;
            println!("{d} {v}: {} samples x {}", f.len(), d.dim());
        }
    }
    Ok(())
}

fn model_path(cfg: &ExperimentConfig, d: veinorigin::descriptors::DescriptorId, v: Variant) -> PathBuf {
    cfg.output_dir.join(format!("model_{d}_{v}.json"))
}

fn train(args: Common) -> CliResult {
    let cfg = load_config(&args)?;
    let (d, v) = single_cell(&cfg, "train")?;
    let exp = Experiment::prepare(&cfg)?;
    let mut store = exp.feature_store();
    let trained = exp.train_cell(&mut store, d, v)?;
    ensure_dir(&cfg.output_dir)?;
    let path = model_path(&cfg, d, v);
    trained.save(&path)?;
    println!(
        "{d} {v}: C={} kernel={} cv_accuracy={:.4} -> {}",
        trained.search.best.c,
        trained.search.best.kernel.label(),
        trained.search.best_accuracy,
        path.display()
    );
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> CliResult {
    let mut cfg = load_config(&args.common)?;
    let trained = TrainedCell::load(&args.model)?;
    if trained.config_hash != cfg.hash() {
        log::warn!("model was trained with a different config");
    }
    cfg.descriptors = vec![trained.descriptor];
    cfg.variants = vec![trained.variant];
    let exp = Experiment::prepare(&cfg)?;
    let mut store = exp.feature_store();
    let row = exp.evaluate_cell(&mut store, &trained);
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(format!("evaluation_{}_{}.json", trained.descriptor, trained.variant));
    write_json(&path, &row)?;
    match &row.evaluation {
        Some(e) => {
            println!("{} {}: auc_roc={:.6} auc_pr={:.6} accuracy={:.4}", row.descriptor, row.variant, e.auc_roc, e.auc_pr, e.accuracy);
            Ok(())
        }
        None => Err(Failure { code: 3, message: row.error.unwrap_or_default() }),
    }
}

fn matrix(args: Common) -> CliResult {
    let cfg = load_config(&args)?;
    let report = run_matrix(&cfg)?;
    write_report(&report, &cfg.output_dir, cfg.write_curves)?;
    print!("{}", veinorigin::experiment::matrix::pivot_csv(&report));
    let failed = report.failed_cells();
    if failed > 0 {
        for c in report.cells.iter().filter(|c| c.error.is_some()) {
            eprintln!("{} {}: {}", c.descriptor, c.variant, c.error.as_deref().unwrap_or(""));
        }
        return Err(Failure { code: 3, message: format!("{failed} of {} cells failed", report.cells.len()) });
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Roi(a) => roi(a),
        Command::Stats(a) => stats(a),
        Command::Extract(a) => extract(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Matrix(a) => matrix(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
