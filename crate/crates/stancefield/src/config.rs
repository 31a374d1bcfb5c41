//! Pipeline configuration: one TOML file with a section per stage. Every
//! key has a default, so an empty file is a valid configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stancefield_core::evaluate::{Grouping, DEFAULT_ANCHOR_STRIDE, DEFAULT_HORIZON_DAYS};
use stancefield_core::ingest::TimeBinning;
use stancefield_core::landscape::TrainConfig;
use stancefield_core::latent::{HoldoutConfig, ImputationMethod, PpcaConfig, PpcaPriors, SvdImputeConfig};
use stancefield_core::regression::{default_alpha_grid, RbfKernelParams, DEFAULT_LENGTHSCALE_DAYS};
use stancefield_core::stationarity::{AdfRegression, KpssRegression, StationarityConfig, DEFAULT_WINDOWS};

use crate::error::{Error, Result};

/// Environment variables that override the configured paths.
pub const ENV_OBSERVATIONS: &str = "STANCEFIELD_OBSERVATIONS";
pub const ENV_METADATA: &str = "STANCEFIELD_METADATA";
pub const ENV_OUTPUT_DIR: &str = "STANCEFIELD_OUTPUT_DIR";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub paths: Paths,
    pub ingest: IngestSection,
    pub binning: BinningSection,
    pub regression: RegressionSection,
    pub ppca: PpcaSection,
    pub stationarity: StationaritySection,
    pub landscape: LandscapeSection,
    pub evaluation: EvaluationSection,
    pub analytics: AnalyticsSection,
    pub export: ExportSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observations: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            observations: None,
            metadata: None,
            output_dir: PathBuf::from("stancefield-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    /// `jsonl` or `csv`; taken from the file extension when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    /// Reject unknown columns and fields.
    pub strict: bool,
    /// Targets need strictly more posts than this.
    pub min_posts: usize,
    /// Keep each account as its own stream.
    pub by_account: bool,
    /// Study window; defaults to the binning epoch with no end.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study_start: Option<DateTime<Utc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study_end: Option<DateTime<Utc>>,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            schema: None,
            strict: false,
            min_posts: 400,
            by_account: false,
            study_start: None,
            study_end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinningSection {
    pub epoch: DateTime<Utc>,
    pub bin_width_days: u32,
    pub anchor_times: [DateTime<Utc>; 2],
    pub anchor_values: [f64; 2],
}

impl Default for BinningSection {
    fn default() -> Self {
        let b = TimeBinning::default();
        BinningSection {
            epoch: b.epoch,
            bin_width_days: b.bin_width_days,
            anchor_times: [b.anchors[0].0, b.anchors[1].0],
            anchor_values: [b.anchors[0].1, b.anchors[1].1],
        }
    }
}

impl BinningSection {
    pub fn binning(&self) -> TimeBinning {
        TimeBinning {
            epoch: self.epoch,
            bin_width_days: self.bin_width_days,
            anchors: [
                (self.anchor_times[0], self.anchor_values[0]),
                (self.anchor_times[1], self.anchor_values[1]),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionSection {
    pub lengthscale_days: f64,
    pub signal_scale: f64,
    pub alpha_grid: Vec<f64>,
}

impl Default for RegressionSection {
    fn default() -> Self {
        RegressionSection {
            lengthscale_days: DEFAULT_LENGTHSCALE_DAYS,
            signal_scale: 1.0,
            alpha_grid: default_alpha_grid(),
        }
    }
}

impl RegressionSection {
    pub fn kernel(&self) -> RbfKernelParams {
        RbfKernelParams {
            lengthscale_days: self.lengthscale_days,
            signal_scale: self.signal_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpcaSection {
    pub n_components: usize,
    /// `false` fits by maximum likelihood.
    pub use_priors: bool,
    pub mean_prior_variance: f64,
    pub transform_precision: f64,
    pub noise_alpha: f64,
    pub noise_beta: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    /// Leading latent coordinates kept for the landscape.
    pub latent_dims: usize,
    /// Trailing moving-average window in bins.
    pub smoothing_window: usize,
    pub holdout_fraction: f64,
    /// Hold-out splits for the imputation comparison; 0 skips it.
    pub holdout_splits: usize,
    pub svd_shrinkage: f64,
    pub svd_iterations: usize,
}

impl Default for PpcaSection {
    fn default() -> Self {
        let p = PpcaPriors::default();
        let c = PpcaConfig::default();
        let h = HoldoutConfig::default();
        PpcaSection {
            n_components: c.n_components,
            use_priors: true,
            mean_prior_variance: p.mean_prior_variance,
            transform_precision: p.transform_precision,
            noise_alpha: p.noise_alpha,
            noise_beta: p.noise_beta,
            tolerance: c.tolerance,
            max_iters: c.max_iters,
            latent_dims: 3,
            smoothing_window: 292,
            holdout_fraction: h.fraction,
            holdout_splits: h.splits,
            svd_shrinkage: h.svd.shrinkage,
            svd_iterations: h.svd.iterations,
        }
    }
}

impl PpcaSection {
    pub fn ppca(&self) -> PpcaConfig {
        PpcaConfig {
            n_components: self.n_components,
            priors: self.use_priors.then_some(PpcaPriors {
                mean_prior_variance: self.mean_prior_variance,
                transform_precision: self.transform_precision,
                noise_alpha: self.noise_alpha,
                noise_beta: self.noise_beta,
            }),
            tolerance: self.tolerance,
            max_iters: self.max_iters,
        }
    }

    pub fn holdout(&self) -> HoldoutConfig {
        HoldoutConfig {
            fraction: self.holdout_fraction,
            splits: self.holdout_splits,
            methods: ImputationMethod::ALL.to_vec(),
            ppca: self.ppca(),
            svd: SvdImputeConfig {
                rank: self.n_components,
                shrinkage: self.svd_shrinkage,
                iterations: self.svd_iterations,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StationaritySection {
    pub adf_regression: AdfRegression,
    pub kpss_regression: KpssRegression,
    pub n_windows: usize,
    pub alpha: f64,
}

impl Default for StationaritySection {
    fn default() -> Self {
        let s = StationarityConfig::default();
        StationaritySection {
            adf_regression: s.adf_regression,
            kpss_regression: s.kpss_regression,
            n_windows: DEFAULT_WINDOWS,
            alpha: s.alpha,
        }
    }
}

impl StationaritySection {
    pub fn config(&self) -> StationarityConfig {
        StationarityConfig {
            adf_regression: self.adf_regression,
            kpss_regression: self.kpss_regression,
            n_windows: self.n_windows,
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandscapeSection {
    pub batch_size: usize,
    pub num_epochs: usize,
    pub patience: usize,
    pub train_fraction: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub confinement_factor: f64,
    pub sigma_initial: f64,
    pub hidden_dims: Vec<usize>,
    /// Lattice nodes per varying axis of the exported drift field.
    pub grid_steps: usize,
    /// Fraction of the data range added on each side of the lattice.
    pub grid_padding: f64,
    /// Dropout passes per node for the uncertainty map.
    pub n_mc: usize,
    pub support_factor: f64,
}

impl Default for LandscapeSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        LandscapeSection {
            batch_size: t.batch_size,
            num_epochs: t.num_epochs,
            patience: t.patience,
            train_fraction: t.train_fraction,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            dropout: t.dropout,
            confinement_factor: t.confinement_factor,
            sigma_initial: t.sigma_initial,
            hidden_dims: t.hidden_dims,
            grid_steps: 21,
            grid_padding: 0.1,
            n_mc: 10,
            support_factor: 2.0,
        }
    }
}

impl LandscapeSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            num_epochs: self.num_epochs,
            patience: self.patience,
            train_fraction: self.train_fraction,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            dropout: self.dropout,
            confinement_factor: self.confinement_factor,
            sigma_initial: self.sigma_initial,
            hidden_dims: self.hidden_dims.clone(),
            seed,
        }
    }
}

/// Training defaults for per-platform (per-account) models.
pub const PER_PLATFORM_DROPOUT: f64 = 0.3;
pub const PER_PLATFORM_WEIGHT_DECAY: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSection {
    pub horizon_days: Vec<u32>,
    pub anchor_stride: usize,
    pub grouping: Grouping,
    pub alpha: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            horizon_days: DEFAULT_HORIZON_DAYS.to_vec(),
            anchor_stride: DEFAULT_ANCHOR_STRIDE,
            grouping: Grouping::FigureType,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticsSection {
    /// Calendar years for the mover tables.
    pub years: Vec<i32>,
    pub percentile: f64,
    pub top_loadings: usize,
    pub alpha: f64,
    pub grouping: Grouping,
}

impl Default for AnalyticsSection {
    fn default() -> Self {
        AnalyticsSection {
            years: vec![2022, 2023, 2024],
            percentile: 0.1,
            top_loadings: 30,
            alpha: 0.05,
            grouping: Grouping::FigureType,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExportSection {
    /// Years with a snapshot figure.
    pub years: Vec<i32>,
    pub width: u32,
    pub height: u32,
    /// Streamlines start every this many lattice nodes.
    pub seed_stride: usize,
    /// Integration step as a fraction of the grid spacing.
    pub step_fraction: f64,
    pub max_steps: usize,
    /// Trace the unit direction field instead of the raw drift.
    pub normalize_streams: bool,
    /// kT of the Boltzmann marginal over latent dimensions beyond the first
    /// two.
    pub temperature: f64,
    /// Lattice nodes per marginalized axis.
    pub marginal_steps: usize,
}

impl Default for ExportSection {
    fn default() -> Self {
        ExportSection {
            years: (2022..=2025).collect(),
            width: 600,
            height: 600,
            seed_stride: 2,
            step_fraction: 0.25,
            max_steps: 500,
            normalize_streams: true,
            temperature: 1.0,
            marginal_steps: 11,
        }
    }
}

impl PipelineConfig {
    /// Parses TOML text. Unknown keys are errors under `strict` and
    /// warnings otherwise.
    pub fn from_toml(text: &str, strict: bool) -> Result<PipelineConfig> {
        let value: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: PipelineConfig = value
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let known = toml::Table::try_from(&cfg).map_err(|e| Error::Config(e.to_string()))?;
        let unknown = unknown_keys(&value, &known);
        if !unknown.is_empty() {
            let list = unknown.into_iter().collect::<Vec<_>>().join(", ");
            if strict {
                return Err(Error::Config(format!("unknown keys: {list}")));
            }
            log::warn!("ignoring unknown config keys: {list}");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, strict: bool) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        PipelineConfig::from_toml(&text, strict)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Replaces paths with any set environment overrides.
    pub fn apply_env(&mut self) {
        if let Some(v) = std::env::var_os(ENV_OBSERVATIONS) {
            self.paths.observations = Some(v.into());
        }
        if let Some(v) = std::env::var_os(ENV_METADATA) {
            self.paths.metadata = Some(v.into());
        }
        if let Some(v) = std::env::var_os(ENV_OUTPUT_DIR) {
            self.paths.output_dir = v.into();
        }
    }

    /// Switches to one stream per account. Dropout and weight decay move to
    /// the per-platform defaults unless `text`, the config source, sets them.
    pub fn use_accounts(&mut self, text: Option<&str>) -> Result<()> {
        self.ingest.by_account = true;
        let explicit: toml::Table = match text {
            Some(t) => toml::from_str(t).map_err(|e| Error::Config(e.to_string()))?,
            None => toml::Table::new(),
        };
        let set = |key: &str| {
            explicit
                .get("landscape")
                .and_then(toml::Value::as_table)
                .is_some_and(|t| t.contains_key(key))
        };
        if !set("dropout") {
            self.landscape.dropout = PER_PLATFORM_DROPOUT;
        }
        if !set("weight_decay") {
            self.landscape.weight_decay = PER_PLATFORM_WEIGHT_DECAY;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        self.binning.binning().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.regression.kernel().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.regression.alpha_grid.is_empty() || self.regression.alpha_grid.iter().any(|a| !(*a > 0.0)) {
            return bad("regression.alpha_grid must be non-empty and positive");
        }
        let p = &self.ppca;
        if p.n_components == 0 || p.latent_dims == 0 || p.latent_dims > p.n_components {
            return bad("ppca.latent_dims must be in 1..=n_components");
        }
        if p.smoothing_window == 0 {
            return bad("ppca.smoothing_window must be at least 1");
        }
        if p.holdout_splits > 0 && !(p.holdout_fraction > 0.0 && p.holdout_fraction < 1.0) {
            return bad("ppca.holdout_fraction must be in (0, 1)");
        }
        if let (Some(s), Some(e)) = (self.ingest.study_start, self.ingest.study_end) {
            if e <= s {
                return bad("ingest.study_end must follow study_start");
            }
        }
        self.landscape
            .train_config(0)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.landscape.grid_steps < 2 || !(self.landscape.grid_padding >= 0.0) {
            return bad("landscape.grid_steps must be at least 2 and grid_padding non-negative");
        }
        if self.stationarity.n_windows < 2 {
            return bad("stationarity.n_windows must be at least 2");
        }
        if self.evaluation.horizon_days.is_empty() || self.evaluation.anchor_stride == 0 {
            return bad("evaluation needs horizons and a positive anchor stride");
        }
        let a = &self.analytics;
        if !(a.percentile > 0.0 && a.percentile <= 1.0) {
            return bad("analytics.percentile must be in (0, 1]");
        }
        let x = &self.export;
        if x.seed_stride == 0 || !(x.step_fraction > 0.0) || x.width == 0 || x.height == 0 {
            return bad("export needs a positive seed stride, step and size");
        }
        if !(x.temperature > 0.0) || x.marginal_steps < 2 {
            return bad("export.temperature must be positive and marginal_steps at least 2");
        }
        let (lo, hi) = (self.binning.anchor_times[0].year(), self.binning.anchor_times[1].year());
        for y in a.years.iter().chain(&x.years) {
            if *y < lo || *y > hi {
                return Err(Error::Config(format!("year {y} lies outside {lo}..={hi}")));
            }
        }
        Ok(())
    }

    pub fn study_window(&self) -> (DateTime<Utc>, Option<DateTime<Utc>>) {
        let start = self.ingest.study_start.unwrap_or(self.binning.epoch).max(self.binning.epoch);
        (start, self.ingest.study_end)
    }
}

/// Dotted paths of keys in `user` that `known` lacks.
fn unknown_keys(user: &toml::Table, known: &toml::Table) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    walk(user, Some(known), "", &mut out);
    out
}

fn walk(user: &toml::Table, known: Option<&toml::Table>, prefix: &str, out: &mut BTreeSet<String>) {
    for (k, v) in user {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match known.and_then(|t| t.get(k)) {
            None => {
                out.insert(path);
            }
            Some(known_v) => {
                if let (toml::Value::Table(u), toml::Value::Table(kt)) = (v, known_v) {
                    walk(u, Some(kt), &path, out);
                }
            }
        }
    }
}

/// SHA-256 of the canonical JSON form of a value.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config values serialize");
    hex(&Sha256::digest(bytes))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
