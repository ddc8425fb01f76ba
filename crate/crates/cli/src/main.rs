use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use xwalk_core::gateway::{DenyAll, GatewayMode, HttpTransport, Transport};
use xwalk_core::patch::DatasetConfig;
use xwalk_core::pipeline::{self, PipelineConfig, PipelineError};
use xwalk_core::prompt::build_template;
use xwalk_core::variant::VariantRegistry;
use xwalk_core::verdict::PredictionPolicy;

/// Zero-shot crosswalk labeling: build patch datasets from a GeoTIFF and an
/// OSM extract, label them with a multimodal model, score and export.
#[derive(Debug, Parser)]
#[command(name = "xwalk", version)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(short, long, global = true, default_value = "pipeline.toml")]
    config: PathBuf,

    /// Overrides `dataset_root` from the configuration.
    #[arg(long, global = true)]
    dataset_root: Option<PathBuf>,

    /// Overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Overrides the transcript directory of the gateway.
    #[arg(long, global = true)]
    transcripts: Option<PathBuf>,

    /// Overrides the seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render and write the datasets and their manifests.
    Build {
        /// Configurations to build (default: those in the config file).
        #[arg(long, value_delimiter = ',')]
        configs: Vec<DatasetConfig>,
        /// Balanced samples per class.
        #[arg(long)]
        per_class: Option<usize>,
        /// Sliding-window stride in pixels.
        #[arg(long)]
        stride: Option<u32>,
    },
    /// Print the system prompt and user preamble for a configuration.
    ShowPrompt {
        dataset: DatasetConfig,
        /// Print the template as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Classify every sample of a configuration through the model gateway.
    Label {
        /// A configuration name, or `all`.
        dataset: String,
        #[arg(long)]
        mode: Option<GatewayMode>,
    },
    /// Score verdicts against ground truth.
    Eval {
        /// A configuration name, or `all`.
        dataset: String,
        #[arg(long)]
        policy: Option<PredictionPolicy>,
    },
    /// Write positive predictions as OSM crossing nodes.
    ExportOsm {
        dataset: DatasetConfig,
        #[arg(long)]
        policy: Option<PredictionPolicy>,
    },
    /// Combine per-configuration reports into one table.
    Report,
}

fn load(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(p) = &cli.dataset_root {
        cfg.dataset_root = p.clone();
    }
    if let Some(p) = &cli.output_dir {
        cfg.output_dir = p.clone();
    }
    if let Some(p) = &cli.transcripts {
        cfg.gateway.transcript_dir = Some(p.clone());
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn targets(cfg: &PipelineConfig, name: &str) -> Result<Vec<DatasetConfig>, PipelineError> {
    if name.eq_ignore_ascii_case("all") {
        cfg.selected_configs()
    } else {
        Ok(vec![name.parse().map_err(PipelineError::Config)?])
    }
}

fn transport_for(cfg: &PipelineConfig, mode: GatewayMode) -> Result<Arc<dyn Transport>, PipelineError> {
    if mode == GatewayMode::Replay {
        return Ok(Arc::new(DenyAll::new()));
    }
    let t = HttpTransport::new(Duration::from_secs(cfg.gateway.timeout_secs))
        .map_err(|e| PipelineError::Config(format!("HTTP client: {e}")))?;
    Ok(Arc::new(t))
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let registry = VariantRegistry::with_defaults();
    match &cli.command {
        Command::ShowPrompt { dataset, json } => {
            let t = build_template(*dataset);
            if *json {
                println!("{}", serde_json::to_string_pretty(&t).expect("template serializes"));
            } else {
                println!("=== system ({dataset}) ===\n{}=== user ===\n{}", t.system_text, t.user_preamble);
            }
        }
        Command::Build {
            configs,
            per_class,
            stride,
        } => {
            let mut cfg = load(cli)?;
            if !configs.is_empty() {
                cfg.configs = configs.iter().map(|c| c.name().to_string()).collect();
            }
            if per_class.is_some() {
                cfg.per_class = *per_class;
            }
            if stride.is_some() {
                cfg.stride = *stride;
            }
            let out = pipeline::build(&cfg, &registry)?;
            if out.candidates.ignored_overrides > 0 {
                eprintln!("warning: {} override entries matched no approach", out.candidates.ignored_overrides);
            }
            for m in &out.manifests {
                println!(
                    "{:<10} {} samples (crosswalk {}, not-crosswalk {}) -> {}",
                    m.config.name(),
                    m.samples.len(),
                    m.counts.crosswalk,
                    m.counts.not_crosswalk,
                    cfg.dataset_root.join(m.config.name()).display()
                );
            }
        }
        Command::Label { dataset, mode } => {
            let cfg = load(cli)?;
            let mode = mode.unwrap_or(cfg.gateway.mode);
            for config in targets(&cfg, dataset)? {
                let transport = transport_for(&cfg, mode)?;
                match pipeline::label(&cfg, &registry, config, Some(mode), transport) {
                    Ok(set) => {
                        let unparseable = set
                            .entries
                            .iter()
                            .filter(|e| e.verdict.as_ref().is_some_and(|v| v.diagnostic.is_some()))
                            .count();
                        println!(
                            "{:<10} {} verdicts ({} unparseable) -> {}",
                            config.name(),
                            set.entries.len(),
                            unparseable,
                            cfg.verdicts_path(config).display()
                        );
                    }
                    Err(e @ PipelineError::GatewayFailures { .. }) => {
                        if let Ok(set) = std::fs::read(cfg.verdicts_path(config)) {
                            let set: pipeline::VerdictSet =
                                serde_json::from_slice(&set).expect("verdicts were just written");
                            for f in set.failures() {
                                eprintln!("{} {}: {}", config.name(), f.sample_id, f.error.as_ref().expect("failed"));
                            }
                        }
                        return Err(e);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Command::Eval { dataset, policy } => {
            let cfg = load(cli)?;
            let policy = policy.unwrap_or(cfg.policy);
            for config in targets(&cfg, dataset)? {
                let r = pipeline::evaluate(&cfg, config, policy)?;
                let m = &r.metrics;
                println!(
                    "{:<10} P {:.2}  R {:.2}  F1 {:.2}  Acc {:.2}  (tp {} fp {} tn {} fn {}, excluded {}, failed {}, policy {policy})",
                    config.name(),
                    m.precision,
                    m.recall,
                    m.f1,
                    m.accuracy,
                    m.matrix.tp,
                    m.matrix.fp,
                    m.matrix.tn,
                    m.matrix.fn_,
                    m.excluded,
                    r.failed
                );
            }
        }
        Command::ExportOsm { dataset, policy } => {
            let cfg = load(cli)?;
            let (path, n) = pipeline::export_osm(&cfg, *dataset, policy.unwrap_or(cfg.policy))?;
            println!("{n} crossing nodes -> {}", path.display());
        }
        Command::Report => {
            let cfg = load(cli)?;
            pipeline::report(&cfg)?;
            print!("{}", std::fs::read_to_string(cfg.output_dir.join("report.txt")).unwrap_or_default());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
