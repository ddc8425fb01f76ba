//! End-to-end stages driven by a TOML configuration file: build datasets,
//! label them through the gateway, evaluate, report and export.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{
    confusion, metrics, metrics_table, misclassification_report, to_jsonl, EvalError, MetricsReport,
};
use crate::export::{crossings_osm, Detection};
use crate::gateway::{Gateway, GatewayConfig, GatewayError, GatewayMode, Transport};
use crate::geo::{enumerate_windows, load_raster, GeoError, GeoRaster, PixelWindow};
use crate::patch::{
    build_dataset, sample_id, BuildPlan, Candidate, DatasetConfig, DatasetManifest, PatchError, RenderStyle,
    SampleId,
};
use crate::prompt::{assemble, PromptError};
use crate::provenance::Provenance;
use crate::road::{
    derive_truth, enumerate_approaches, find_intersections, load_overrides, parse_osm, Approach, Intersection,
    RoadError,
};
use crate::variant::{DatasetVariant, VariantRegistry};
use crate::verdict::{parse_response, to_prediction, Prediction, PredictionPolicy, Verdict};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{what} not found: {}", path.display())]
    MissingPath { what: &'static str, path: PathBuf },
    #[error("geo-raster: {0}")]
    Geo(#[from] GeoError),
    #[error("road-graph: {0}")]
    Road(#[from] RoadError),
    #[error("patch-studio: {0}")]
    Patch(#[from] PatchError),
    #[error("prompt-kit: {0}")]
    Prompt(#[from] PromptError),
    #[error("model-gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error("model-gateway: {failed} of {total} samples failed (first: {first})")]
    GatewayFailures { failed: usize, total: usize, first: String },
    #[error("eval-lab: {0}")]
    Eval(#[from] EvalError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl PipelineError {
    /// 1 usage, 2 data, 3 gateway.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Gateway(_) | PipelineError::GatewayFailures { .. } => 3,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<Vec<u8>, PipelineError> {
    fs::read(path).map_err(io_err(path))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    serde_json::from_slice(&read(path)?).map_err(|source| PipelineError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output types serialize");
    s.push('\n');
    s
}

fn default_configs() -> Vec<String> {
    DatasetConfig::ALL.iter().map(|c| c.name().to_string()).collect()
}

fn default_window() -> u32 {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub raster: PathBuf,
    pub osm: PathBuf,
    #[serde(default)]
    pub overrides: Option<PathBuf>,
    pub dataset_root: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_configs")]
    pub configs: Vec<String>,
    #[serde(default = "default_window")]
    pub window_size: u32,
    /// Defaults to `window_size` (non-overlapping windows).
    #[serde(default)]
    pub stride: Option<u32>,
    /// Balanced sample count per class; all labeled approaches when absent.
    #[serde(default)]
    pub per_class: Option<usize>,
    #[serde(default)]
    pub policy: PredictionPolicy,
    #[serde(default)]
    pub style: RenderStyle,
    #[serde(default)]
    pub gateway: GatewayConfig,
}

impl PipelineConfig {
    /// Parses TOML; relative paths are taken relative to `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.raster);
        fix(&mut cfg.osm);
        fix(&mut cfg.dataset_root);
        fix(&mut cfg.output_dir);
        if let Some(p) = cfg.overrides.as_mut() {
            fix(p);
        }
        if let Some(p) = cfg.gateway.transcript_dir.as_mut() {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => PipelineError::MissingPath {
                what: "config file",
                path: path.to_path_buf(),
            },
            _ => PipelineError::Io {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn stride(&self) -> u32 {
        self.stride.unwrap_or(self.window_size)
    }

    pub fn selected_configs(&self) -> Result<Vec<DatasetConfig>, PipelineError> {
        self.configs
            .iter()
            .map(|s| s.parse::<DatasetConfig>().map_err(PipelineError::Config))
            .collect()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.style.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.selected_configs()?;
        if self.window_size == 0 || self.stride() == 0 {
            return Err(PipelineError::Config("window_size and stride must be positive".into()));
        }
        Ok(())
    }

    fn config_dir(&self, config: DatasetConfig) -> PathBuf {
        self.output_dir.join(config.name())
    }

    pub fn verdicts_path(&self, config: DatasetConfig) -> PathBuf {
        self.config_dir(config).join("verdicts.json")
    }

    pub fn report_path(&self, config: DatasetConfig) -> PathBuf {
        self.config_dir(config).join("report.json")
    }

    pub fn misclassifications_path(&self, config: DatasetConfig) -> PathBuf {
        self.config_dir(config).join("misclassifications.jsonl")
    }

    pub fn crossings_path(&self, config: DatasetConfig) -> PathBuf {
        self.config_dir(config).join("crossings.osm")
    }
}

fn require(what: &'static str, path: &Path) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingPath {
            what,
            path: path.to_path_buf(),
        })
    }
}

/// Seed and digests of the raster, OSM and override files.
pub fn provenance(cfg: &PipelineConfig) -> Result<Provenance, PipelineError> {
    let mut p = Provenance::new(cfg.seed).with_input("raster", &read(&cfg.raster)?).with_input("osm", &read(&cfg.osm)?);
    if let Some(o) = &cfg.overrides {
        p = p.with_input("overrides", &read(o)?);
    }
    Ok(p)
}

/// The window holding `(px, py)` whose centre is nearest; ties go to the
/// first window in row-major order.
fn best_window(windows: &[PixelWindow], px: f64, py: f64) -> Option<PixelWindow> {
    let mut best: Option<(f64, PixelWindow)> = None;
    for w in windows.iter().filter(|w| w.contains(px, py)) {
        let (cx, cy) = w.center();
        let d = (cx - px).hypot(cy - py);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, *w));
        }
    }
    best.map(|(_, w)| w)
}

#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub intersections: usize,
    pub outside: usize,
    pub merged: usize,
    pub too_short: usize,
    pub ignored_overrides: usize,
}

/// Every labeled approach of every intersection, each in the window that
/// centres it best.
pub fn collect_candidates(cfg: &PipelineConfig, raster: &GeoRaster) -> Result<CandidateSet, PipelineError> {
    let osm = fs::File::open(&cfg.osm).map_err(io_err(&cfg.osm))?;
    let graph = parse_osm(BufReader::new(osm))?;
    let overrides = match &cfg.overrides {
        Some(p) => load_overrides(read(p)?.as_slice())?,
        None => Vec::new(),
    };
    let crs = *raster.crs();
    let intersections = find_intersections(&graph, &crs)?;
    let windows = enumerate_windows(raster, cfg.window_size, cfg.stride())?;

    let mut placed: BTreeMap<PixelWindow, Vec<&Intersection>> = BTreeMap::new();
    let mut inside_of: BTreeMap<PixelWindow, Vec<&Intersection>> = BTreeMap::new();
    let mut outside = 0;
    for i in &intersections {
        let Ok((px, py)) = raster.projected_to_pixel(i.location) else {
            outside += 1;
            continue;
        };
        match best_window(&windows, px, py) {
            Some(w) => placed.entry(w).or_default().push(i),
            None => outside += 1,
        }
    }
    for w in placed.keys() {
        for i in &intersections {
            if let Ok((px, py)) = raster.projected_to_pixel(i.location) {
                if w.contains(px, py) {
                    inside_of.entry(*w).or_default().push(i);
                }
            }
        }
    }

    let mut samples: Vec<(PixelWindow, Approach)> = Vec::new();
    let mut context: BTreeMap<PixelWindow, Arc<[Approach]>> = BTreeMap::new();
    let (mut merged, mut too_short) = (0, 0);
    for (w, list) in &placed {
        for i in list {
            let set = enumerate_approaches(i, w, raster)?;
            merged += set.merged;
            too_short += set.too_short;
            samples.extend(set.approaches.into_iter().map(|a| (*w, a)));
        }
        let mut all = Vec::new();
        for i in &inside_of[w] {
            all.extend(enumerate_approaches(i, w, raster)?.approaches);
        }
        context.insert(*w, Arc::from(all));
    }

    let (windows_of, approaches): (Vec<PixelWindow>, Vec<Approach>) = samples.into_iter().unzip();
    let outcome = derive_truth(&graph, &crs, approaches, &overrides)?;
    let digest = raster.digest();
    let geo_of: BTreeMap<_, _> = intersections.iter().map(|i| (i.node_id, i.geo)).collect();
    let candidates = windows_of
        .into_iter()
        .zip(outcome.approaches)
        .map(|(w, a)| Candidate {
            sample_id: sample_id(&digest, &w, &a),
            window: w,
            context: context[&w].clone(),
            intersection_geo: geo_of[&a.intersection],
            approach: a,
        })
        .collect();
    Ok(CandidateSet {
        candidates,
        intersections: intersections.len(),
        outside,
        merged,
        too_short,
        ignored_overrides: outcome.ignored_overrides,
    })
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub manifests: Vec<DatasetManifest>,
    pub candidates: CandidateSet,
}

pub fn build(cfg: &PipelineConfig, registry: &VariantRegistry) -> Result<BuildOutput, PipelineError> {
    cfg.validate()?;
    require("raster", &cfg.raster)?;
    require("OSM file", &cfg.osm)?;
    if let Some(o) = &cfg.overrides {
        require("override manifest", o)?;
    }
    let prov = provenance(cfg)?;
    let raster = load_raster(&cfg.raster)?;
    let candidates = collect_candidates(cfg, &raster)?;
    log::info!(
        "{} intersections, {} candidates ({} merged, {} too short, {} outside)",
        candidates.intersections,
        candidates.candidates.len(),
        candidates.merged,
        candidates.too_short,
        candidates.outside
    );
    let plan = BuildPlan {
        per_class: cfg.per_class,
        seed: cfg.seed,
    };
    let mut manifests = Vec::new();
    for config in cfg.selected_configs()? {
        let variant = variant_for(registry, config)?;
        manifests.push(build_dataset(
            variant.as_ref(),
            &raster,
            &candidates.candidates,
            &plan,
            &cfg.style,
            &cfg.dataset_root,
            &prov,
        )?);
    }
    Ok(BuildOutput { manifests, candidates })
}

fn variant_for(registry: &VariantRegistry, config: DatasetConfig) -> Result<Arc<dyn DatasetVariant>, PipelineError> {
    registry
        .get(config.name())
        .ok_or_else(|| PipelineError::Config(format!("no renderer registered for {config}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub sample_id: SampleId,
    pub bundle_digest: String,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<GatewayError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictSet {
    pub provenance: Provenance,
    pub config: DatasetConfig,
    pub model: String,
    pub entries: Vec<VerdictEntry>,
}

impl VerdictSet {
    pub fn failures(&self) -> impl Iterator<Item = &VerdictEntry> {
        self.entries.iter().filter(|e| e.error.is_some())
    }
}

/// Sends every sample of one configuration through the gateway and writes
/// the parsed verdicts. Per-sample gateway failures are written too and then
/// reported as an error.
pub fn label(
    cfg: &PipelineConfig,
    registry: &VariantRegistry,
    config: DatasetConfig,
    mode: Option<GatewayMode>,
    transport: Arc<dyn Transport>,
) -> Result<VerdictSet, PipelineError> {
    let manifest_path = DatasetManifest::path(&cfg.dataset_root, config);
    require("dataset manifest (run build first)", &manifest_path)?;
    let manifest: DatasetManifest = read_json(&manifest_path)?;
    let template = variant_for(registry, config)?.template();
    let bundles = manifest
        .samples
        .iter()
        .map(|s| assemble(&template, s, &cfg.dataset_root))
        .collect::<Result<Vec<_>, _>>()?;

    let mut gcfg = cfg.gateway.clone();
    if let Some(m) = mode {
        gcfg.mode = m;
    }
    let gateway = Gateway::from_env(gcfg, transport)?;
    let results = gateway.classify_batch(&bundles);
    let entries: Vec<VerdictEntry> = results
        .into_iter()
        .map(|r| {
            let (verdict, error) = match r.result {
                Ok(text) => (Some(parse_response(&text)), None),
                Err(e) => (None, Some(e)),
            };
            VerdictEntry {
                sample_id: r.sample_id,
                bundle_digest: r.digest,
                attempts: r.attempts,
                verdict,
                error,
            }
        })
        .collect();
    let set = VerdictSet {
        provenance: manifest.provenance.clone(),
        config,
        model: gateway.config().model.clone(),
        entries,
    };
    write(&cfg.verdicts_path(config), to_json(&set))?;

    let failed: Vec<&VerdictEntry> = set.failures().collect();
    if let Some(first) = failed.first() {
        for f in &failed {
            log::error!("{}: {}", f.sample_id, f.error.as_ref().expect("failure has an error"));
        }
        return Err(PipelineError::GatewayFailures {
            failed: failed.len(),
            total: set.entries.len(),
            first: first.error.as_ref().expect("failure has an error").to_string(),
        });
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: Provenance,
    pub model: String,
    pub metrics: MetricsReport,
    /// Samples whose gateway call failed; never scored.
    pub failed: usize,
    pub misclassified: usize,
}

fn load_run(cfg: &PipelineConfig, config: DatasetConfig) -> Result<(DatasetManifest, VerdictSet), PipelineError> {
    let mp = DatasetManifest::path(&cfg.dataset_root, config);
    require("dataset manifest (run build first)", &mp)?;
    let vp = cfg.verdicts_path(config);
    require("verdicts (run label first)", &vp)?;
    Ok((read_json(&mp)?, read_json(&vp)?))
}

pub fn evaluate(cfg: &PipelineConfig, config: DatasetConfig, policy: PredictionPolicy) -> Result<EvalReport, PipelineError> {
    let (manifest, set) = load_run(cfg, config)?;
    let truths = manifest.samples.iter().map(|s| (s.sample_id.clone(), s.truth_label)).collect();
    let verdicts: BTreeMap<SampleId, Verdict> = set
        .entries
        .iter()
        .filter_map(|e| e.verdict.clone().map(|v| (e.sample_id.clone(), v)))
        .collect();
    let predictions: BTreeMap<SampleId, Prediction> = set
        .entries
        .iter()
        .map(|e| {
            let p = e.verdict.as_ref().map_or(Prediction::Excluded, |v| to_prediction(v, policy));
            (e.sample_id.clone(), p)
        })
        .collect();
    let cm = confusion(&predictions, &truths)?;
    let mut m = metrics(&cm)?;
    m.config = Some(config);
    m.policy = Some(policy);
    let failed = set.failures().count();
    m.excluded = predictions.values().filter(|p| **p == Prediction::Excluded).count() - failed;

    let errors = misclassification_report(config, &manifest.samples, &verdicts, policy);
    write(&cfg.misclassifications_path(config), to_jsonl(&errors))?;
    let report = EvalReport {
        provenance: manifest.provenance,
        model: set.model,
        metrics: m,
        failed,
        misclassified: errors.len(),
    };
    write(&cfg.report_path(config), to_json(&report))?;
    Ok(report)
}

/// Collects the per-configuration reports that exist into `report.json` and a
/// text table `report.txt` under the output directory.
pub fn report(cfg: &PipelineConfig) -> Result<Vec<EvalReport>, PipelineError> {
    let mut reports = Vec::new();
    for config in cfg.selected_configs()? {
        let p = cfg.report_path(config);
        if p.exists() {
            reports.push(read_json::<EvalReport>(&p)?);
        }
    }
    if reports.is_empty() {
        return Err(EvalError::EmptyInput.into());
    }
    let mut text = String::new();
    let prov = &reports[0].provenance;
    text.push_str(&format!("# {} seed={}\n", prov.pipeline_version, prov.seed));
    for (k, v) in &prov.inputs {
        text.push_str(&format!("# {k} sha256={v}\n"));
    }
    let models: BTreeSet<&str> = reports.iter().map(|r| r.model.as_str()).collect();
    let policies: BTreeSet<String> = reports.iter().filter_map(|r| r.metrics.policy.map(|p| p.to_string())).collect();
    text.push_str(&format!(
        "# model={} policy={}\n\n",
        models.into_iter().collect::<Vec<_>>().join(","),
        policies.into_iter().collect::<Vec<_>>().join(",")
    ));
    let rows: Vec<MetricsReport> = reports.iter().map(|r| r.metrics.clone()).collect();
    text.push_str(&metrics_table(&rows));
    write(&cfg.output_dir.join("report.txt"), &text)?;
    write(&cfg.output_dir.join("report.json"), to_json(&reports))?;
    Ok(reports)
}

/// Writes an OSM document with one crossing node per positive prediction.
pub fn export_osm(cfg: &PipelineConfig, config: DatasetConfig, policy: PredictionPolicy) -> Result<(PathBuf, usize), PipelineError> {
    let (manifest, set) = load_run(cfg, config)?;
    let by_id: BTreeMap<&SampleId, &VerdictEntry> = set.entries.iter().map(|e| (&e.sample_id, e)).collect();
    let detections: Vec<Detection> = manifest
        .samples
        .iter()
        .filter_map(|s| {
            let e = by_id.get(&s.sample_id)?;
            let v = e.verdict.as_ref()?;
            (to_prediction(v, policy) == Prediction::Crosswalk).then(|| Detection {
                sample_id: s.sample_id.clone(),
                bundle_digest: e.bundle_digest.clone(),
                intersection_node_id: s.intersection_node_id,
                way_id: s.way_id,
                toward_node_id: s.toward_node_id,
                location: s.intersection,
            })
        })
        .collect();
    let generator = format!("{} seed={}", manifest.provenance.pipeline_version, manifest.provenance.seed);
    let mut doc = crossings_osm(&detections, &set.model, &generator);
    let inputs: Vec<String> = manifest.provenance.inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let marker = "<osm ";
    let at = doc.find(marker).expect("document has a root");
    doc.insert_str(at, &format!("<!-- inputs: {} -->\n", inputs.join(" ")));
    let path = cfg.crossings_path(config);
    write(&path, doc)?;
    Ok((path, detections.len()))
}
