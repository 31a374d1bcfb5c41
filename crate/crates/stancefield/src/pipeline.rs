//! The seven-stage pipeline. Each stage reads its inputs from files, writes
//! its artifacts under the output directory and is recorded in
//! `manifest.json` with the hashes of its config, inputs and outputs. A
//! stage is skipped when all three still match, so reruns only repeat what
//! changed. Wall-clock durations go to `run_log.json`, which keeps the
//! manifest itself reproducible.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stancefield_core::analytics::{
    centroid_distances, eta_squared, person_means, significant_movers, variance_entropy, CentroidTable,
    MoveDirection, MoverQuery, MoverRow,
};
use stancefield_core::density::snapshot_series;
use stancefield_core::evaluate::{
    days_to_bins, group_breakdown, group_keys, horizon_eval, standard_models, Forecaster, GroupBreakdown,
    HorizonConfig, HorizonReport, MIN_HISTORY,
};
use stancefield_core::ingest::{
    dedup_observations, filter_targets, index_meta, new_year, PersonMeta, StanceObservation,
};
use stancefield_core::landscape::{
    drift_field, marginalize_boltzmann, train, Axis, FieldConfig, PotentialNet, TrainConfig, TrainHistory,
};
use stancefield_core::latent::{
    edge_fill, holdout_mae, moving_average, pivot, ppca_fit, ppca_transform, trajectories_from_latents,
    ImputationScore, LatentTrajectory, PpcaModel, StanceMatrix,
};
use stancefield_core::regression::regress_observations;
use stancefield_core::seed;
use stancefield_core::stationarity::stationarity_report;
use stancefield_core::Error as CoreError;

use crate::config::{hash_json, hex, PipelineConfig};
use crate::error::{Error, Result};
use crate::formats::{self, Schema};
use crate::svg::export_svg;

pub const MANIFEST: &str = "manifest.json";
pub const RUN_LOG: &str = "run_log.json";
pub const LOCK: &str = ".lock";

/// Child-seed indices of the master seed.
pub const SEED_PPCA: u64 = 1;
pub const SEED_TRAIN: u64 = 2;
pub const SEED_FIELD: u64 = 3;
pub const SEED_HOLDOUT: u64 = 4;

pub const OBSERVATIONS: &str = "ingest/observations.jsonl";
pub const METADATA: &str = "ingest/metadata.csv";
pub const INGEST_REPORT: &str = "ingest/report.json";
pub const SERIES: &str = "regression/series.csv";
pub const PPCA: &str = "latent/ppca.json";
pub const TRAJECTORIES: &str = "latent/trajectories.csv";
pub const LATENT_REPORT: &str = "latent/report.json";
pub const STATIONARITY: &str = "stationarity/report.json";
pub const MODEL: &str = "landscape/model.json";
pub const HISTORY: &str = "landscape/history.json";
pub const DRIFT_FIELD: &str = "landscape/drift_field.csv";
pub const CHECKPOINT: &str = "landscape/checkpoint.json";
pub const EVALUATION: &str = "evaluate/report.json";
pub const HORIZONS: &str = "evaluate/horizons.csv";
pub const GROUPS: &str = "evaluate/groups.csv";
pub const ANALYTICS: &str = "analytics/report.json";
pub const MOVERS: &str = "analytics/movers.csv";
pub const MARGINAL: &str = "analytics/marginal_potential.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Regression,
    Latent,
    Stationarity,
    Landscape,
    Evaluate,
    Analytics,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Regression,
        Stage::Latent,
        Stage::Stationarity,
        Stage::Landscape,
        Stage::Evaluate,
        Stage::Analytics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Regression => "regression",
            Stage::Latent => "latent",
            Stage::Stationarity => "stationarity",
            Stage::Landscape => "landscape",
            Stage::Evaluate => "evaluate",
            Stage::Analytics => "analytics",
        }
    }
}

/// Options that come from the command line rather than the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Reuse this PPCA model instead of fitting one.
    pub ppca_model: Option<PathBuf>,
    /// Train and evaluate on these trajectories instead of the latent
    /// stage's output.
    pub trajectories: Option<PathBuf>,
    /// Run requested stages even when the manifest says they are current.
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// `complete` or `failed`.
    pub status: String,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Option<Manifest>> {
        let path = out.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_str(&formats::read_text(&path)?)?))
    }

    pub fn record(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == stage.name())
    }

    fn put(&mut self, rec: StageRecord) {
        self.stages.retain(|r| r.stage != rec.stage);
        self.stages.push(rec);
        let pos = |name: &str| Stage::ALL.iter().position(|s| s.name() == name);
        self.stages.sort_by_key(|r| pos(&r.stage));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRun {
    pub stage: String,
    /// `ran`, `skipped` or `failed`.
    pub action: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub started: Option<DateTime<Utc>>,
    pub stages: Vec<StageRun>,
}

impl RunLog {
    pub fn action(&self, stage: Stage) -> Option<&str> {
        self.stages.iter().find(|r| r.stage == stage.name()).map(|r| r.action.as_str())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(bytes)))
}

/// Exclusive ownership of an output directory for the life of the value.
pub struct Lock {
    path: PathBuf,
}

impl Lock {
    pub fn acquire(out: &Path) -> Result<Lock> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let path = out.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Lock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Data(format!(
                "{} is locked by another run; remove {} if that run is gone",
                out.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Checks every output hash in the manifest against the files on disk and
/// returns the mismatched or missing paths.
pub fn verify(out: &Path) -> Result<Vec<String>> {
    let manifest = Manifest::load(out)?.ok_or_else(|| Error::Data(format!("no manifest in {}", out.display())))?;
    let mut bad = Vec::new();
    for rec in &manifest.stages {
        for (rel, hash) in &rec.outputs {
            let p = out.join(rel);
            if !p.exists() || sha256_file(&p)? != *hash {
                bad.push(rel.clone());
            }
        }
    }
    Ok(bad)
}

pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub opts: RunOptions,
    out: PathBuf,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, opts: RunOptions) -> Pipeline {
        let out = cfg.paths.output_dir.clone();
        Pipeline { cfg, opts, out }
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn trajectories_path(&self) -> (String, PathBuf) {
        match &self.opts.trajectories {
            Some(p) => ("trajectories".into(), p.clone()),
            None => (TRAJECTORIES.into(), self.path(TRAJECTORIES)),
        }
    }

    fn has_metadata(&self) -> bool {
        self.cfg.paths.metadata.is_some()
    }

    fn config_hash(&self, stage: Stage) -> String {
        let c = &self.cfg;
        match stage {
            Stage::Ingest => hash_json(&(&c.ingest, &c.binning, c.paths.metadata.is_some())),
            Stage::Regression => hash_json(&(&c.regression, &c.binning, c.ingest.by_account)),
            Stage::Latent => hash_json(&(&c.ppca, &c.binning, c.seed, self.opts.ppca_model.is_some())),
            Stage::Stationarity => hash_json(&c.stationarity),
            Stage::Landscape => hash_json(&(&c.landscape, &c.binning, c.seed)),
            Stage::Evaluate => hash_json(&(&c.evaluation, &c.binning, c.ingest.by_account)),
            Stage::Analytics => hash_json(&(
                &c.analytics,
                &c.export,
                &c.binning,
                &c.landscape.grid_steps,
                &c.landscape.grid_padding,
                &c.landscape.n_mc,
                &c.landscape.support_factor,
                c.ingest.by_account,
                c.seed,
            )),
        }
    }

    /// Logical input name and path of every file a stage reads.
    fn inputs(&self, stage: Stage) -> Result<Vec<(String, PathBuf)>> {
        let up = |rel: &str| (rel.to_string(), self.path(rel));
        let mut v = Vec::new();
        match stage {
            Stage::Ingest => {
                let obs = self.cfg.paths.observations.clone().ok_or_else(|| {
                    Error::Config("no observation file configured (paths.observations)".into())
                })?;
                v.push(("observations".into(), obs));
                if let Some(m) = &self.cfg.paths.metadata {
                    v.push(("metadata".into(), m.clone()));
                }
            }
            Stage::Regression => v.push(up(OBSERVATIONS)),
            Stage::Latent => {
                v.push(up(SERIES));
                if let Some(p) = &self.opts.ppca_model {
                    v.push(("ppca_model".into(), p.clone()));
                }
            }
            Stage::Stationarity | Stage::Landscape => v.push(self.trajectories_path()),
            Stage::Evaluate => {
                v.push(self.trajectories_path());
                v.push(up(MODEL));
                if self.has_metadata() {
                    v.push(up(METADATA));
                    v.push(up(OBSERVATIONS));
                }
            }
            Stage::Analytics => {
                v.push(self.trajectories_path());
                v.push(up(MODEL));
                v.push(up(PPCA));
                v.push(up(OBSERVATIONS));
                if self.has_metadata() {
                    v.push(up(METADATA));
                }
            }
        }
        Ok(v)
    }

    fn input_hashes(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (name, path) in self.inputs(stage)? {
            if !path.exists() {
                return Err(Error::Data(format!(
                    "{} needs {} ({}); run the stage that produces it first",
                    stage.name(),
                    name,
                    path.display()
                )));
            }
            out.insert(name, sha256_file(&path)?);
        }
        Ok(out)
    }

    fn is_current(&self, rec: &StageRecord, config_hash: &str, inputs: &BTreeMap<String, String>) -> Result<bool> {
        if rec.status != "complete" || rec.config_hash != config_hash || rec.inputs != *inputs {
            return Ok(false);
        }
        for (rel, hash) in &rec.outputs {
            let p = self.path(rel);
            if !p.exists() || sha256_file(&p)? != *hash {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Runs `stages` in order, skipping those the manifest shows as current
    /// unless forced.
    pub fn run(&self, stages: &[Stage]) -> Result<RunLog> {
        let _lock = Lock::acquire(&self.out)?;
        let mut manifest = Manifest::load(&self.out)?.unwrap_or(Manifest {
            version: 1,
            stages: Vec::new(),
        });
        let mut log = RunLog {
            started: Some(Utc::now()),
            stages: Vec::new(),
        };
        for &stage in stages {
            let start = Instant::now();
            let config_hash = self.config_hash(stage);
            let inputs = self.input_hashes(stage).map_err(|e| e.in_stage(stage.name()))?;
            if !self.opts.force {
                if let Some(rec) = manifest.record(stage) {
                    if self.is_current(rec, &config_hash, &inputs)? {
                        log::info!("{}: up to date", stage.name());
                        log.stages.push(StageRun {
                            stage: stage.name().into(),
                            action: "skipped".into(),
                            seconds: start.elapsed().as_secs_f64(),
                        });
                        continue;
                    }
                }
            }
            log::info!("{}: running", stage.name());
            let result = self.execute(stage).and_then(|outputs| {
                outputs
                    .into_iter()
                    .map(|rel| Ok((rel.clone(), sha256_file(&self.path(&rel))?)))
                    .collect::<Result<BTreeMap<_, _>>>()
            });
            let (status, outputs, error) = match &result {
                Ok(o) => ("complete", o.clone(), None),
                Err(e) => ("failed", BTreeMap::new(), Some(e.to_string())),
            };
            manifest.put(StageRecord {
                stage: stage.name().into(),
                status: status.into(),
                config_hash,
                inputs,
                outputs,
                error,
            });
            formats::write_text(&self.path(MANIFEST), &formats::to_json_pretty(&manifest))?;
            log.stages.push(StageRun {
                stage: stage.name().into(),
                action: if result.is_ok() { "ran" } else { "failed" }.into(),
                seconds: start.elapsed().as_secs_f64(),
            });
            formats::write_text(&self.path(RUN_LOG), &formats::to_json_pretty(&log))?;
            if let Err(e) = result {
                return Err(e.in_stage(stage.name()));
            }
        }
        formats::write_text(&self.path(RUN_LOG), &formats::to_json_pretty(&log))?;
        Ok(log)
    }

    fn execute(&self, stage: Stage) -> Result<Vec<String>> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Regression => self.regression(),
            Stage::Latent => self.latent(),
            Stage::Stationarity => self.stationarity(),
            Stage::Landscape => self.landscape(),
            Stage::Evaluate => self.evaluate(),
            Stage::Analytics => self.analytics(),
        }
    }

    fn write(&self, rel: &str, text: &str) -> Result<String> {
        formats::write_text(&self.path(rel), text)?;
        Ok(rel.to_string())
    }

    fn read_observations(&self) -> Result<Vec<StanceObservation>> {
        let text = formats::read_text(&self.path(OBSERVATIONS))?;
        Ok(formats::parse_observations(&text, Schema::Jsonl, false)?.0)
    }

    fn read_metadata(&self) -> Result<Option<BTreeMap<String, PersonMeta>>> {
        if !self.has_metadata() {
            return Ok(None);
        }
        let meta = formats::read_metadata(&self.path(METADATA), false)?.0;
        Ok(Some(index_meta(&meta)?))
    }

    fn read_trajectories(&self) -> Result<Vec<LatentTrajectory>> {
        formats::trajectories_from_csv(&formats::read_text(&self.trajectories_path().1)?)
    }

    fn read_net(&self) -> Result<PotentialNet> {
        formats::net_from_json(&formats::read_text(&self.path(MODEL))?)
    }

    fn ingest(&self) -> Result<Vec<String>> {
        let c = &self.cfg;
        let path = c.paths.observations.as_ref().expect("checked with the inputs");
        let schema = match &c.ingest.schema {
            Some(tag) => Schema::parse(tag)?,
            None => Schema::from_path(path)?,
        };
        let (obs, parse) = formats::read_observations(path, schema, c.ingest.strict)?;
        let (start, end) = c.study_window();
        let windowed: Vec<StanceObservation> = obs
            .iter()
            .filter(|o| o.timestamp >= start && end.is_none_or(|e| o.timestamp < e))
            .cloned()
            .collect();
        let deduped = dedup_observations(&windowed, c.ingest.by_account);
        let kept = filter_targets(&deduped, c.ingest.min_posts);
        let mut outputs = vec![self.write(OBSERVATIONS, &formats::observations_to_jsonl(&kept))?];

        let mut meta_report = None;
        if let Some(mp) = &c.paths.metadata {
            let (meta, report) = formats::read_metadata(mp, c.ingest.strict)?;
            index_meta(&meta)?;
            outputs.push(self.write(METADATA, &formats::metadata_to_csv(&meta)?)?);
            meta_report = Some(report);
        }
        let count = |f: fn(&StanceObservation) -> &str| {
            let mut v: Vec<&str> = kept.iter().map(f).collect();
            v.sort_unstable();
            v.dedup();
            v.len()
        };
        let report = IngestReport {
            observations: parse,
            metadata: meta_report,
            outside_window: obs.len() - windowed.len(),
            duplicates: windowed.len() - deduped.len(),
            below_min_posts: deduped.len() - kept.len(),
            kept: kept.len(),
            persons: count(|o| o.person_id.as_str()),
            targets: count(|o| o.target_id.as_str()),
        };
        outputs.push(self.write(INGEST_REPORT, &formats::to_json_pretty(&report))?);
        Ok(outputs)
    }

    fn regression(&self) -> Result<Vec<String>> {
        let c = &self.cfg;
        let obs = self.read_observations()?;
        if obs.is_empty() {
            return Err(Error::Data("no observations survive ingest".into()));
        }
        let series = regress_observations(
            &obs,
            &c.binning.binning(),
            &c.regression.kernel(),
            &c.regression.alpha_grid,
            c.ingest.by_account,
        )?;
        Ok(vec![self.write(SERIES, &formats::series_to_csv(&series)?)?])
    }

    fn latent(&self) -> Result<Vec<String>> {
        let c = &self.cfg;
        let binning = c.binning.binning();
        let series = formats::series_from_csv(&formats::read_text(&self.path(SERIES))?)?;
        let m = pivot(&series)?;
        let filled = edge_fill(&m);
        let model = match &self.opts.ppca_model {
            Some(p) => formats::ppca_from_json(&formats::read_text(p)?)?,
            None => ppca_fit(&filled, &c.ppca.ppca(), seed::derive(c.seed, SEED_PPCA))?,
        };
        if c.ppca.latent_dims > model.n_components {
            return Err(Error::Config(format!(
                "ppca.latent_dims {} exceeds the model's {} components",
                c.ppca.latent_dims, model.n_components
            )));
        }
        let aligned = align_columns(&filled, &model.columns);
        let tr = ppca_transform(&model, &aligned)?;
        let raw = trajectories_from_latents(&aligned, &tr.latents, &binning, c.ppca.latent_dims)?;
        let trajs = raw
            .iter()
            .map(|t| moving_average(t, c.ppca.smoothing_window))
            .collect::<stancefield_core::Result<Vec<_>>>()?;
        let imputation = if c.ppca.holdout_splits > 0 && self.opts.ppca_model.is_none() {
            Some(holdout_mae(&filled, &c.ppca.holdout(), seed::derive(c.seed, SEED_HOLDOUT))?)
        } else {
            None
        };
        let report = LatentReport {
            rows: m.n_rows(),
            columns: m.n_cols(),
            missing_fraction: m.missing_fraction(),
            missing_after_edge_fill: filled.missing_fraction(),
            unmatched_columns: m.col_keys.iter().filter(|k| !model.columns.contains(k)).count(),
            empty_rows: tr.empty_rows,
            converged: model.converged,
            iterations: model.iterations,
            noise_variance: model.noise_variance,
            noise_floor_hit: model.noise_floor_hit,
            imputation,
        };
        Ok(vec![
            self.write(PPCA, &formats::ppca_to_json(&model))?,
            self.write(TRAJECTORIES, &formats::trajectories_to_csv(&trajs)?)?,
            self.write(LATENT_REPORT, &formats::to_json_pretty(&report))?,
        ])
    }

    fn stationarity(&self) -> Result<Vec<String>> {
        let report = stationarity_report(&self.read_trajectories()?, &self.cfg.stationarity.config())?;
        Ok(vec![self.write(STATIONARITY, &formats::to_json_pretty(&report))?])
    }

    fn field_config(&self) -> FieldConfig {
        FieldConfig {
            n_mc: self.cfg.landscape.n_mc,
            seed: seed::derive(self.cfg.seed, SEED_FIELD),
            support_factor: self.cfg.landscape.support_factor,
        }
    }

    fn landscape(&self) -> Result<Vec<String>> {
        let c = &self.cfg;
        let trajs = self.read_trajectories()?;
        let tc = c.landscape.train_config(seed::derive(c.seed, SEED_TRAIN));
        let (net, history): (PotentialNet, TrainHistory) = match train(&trajs, &tc, &c.binning.binning()) {
            Ok(r) => r,
            Err(CoreError::Diverged { epoch, checkpoint }) => {
                formats::write_text(&self.path(CHECKPOINT), &formats::net_to_json(&checkpoint))?;
                return Err(Error::Numeric(format!(
                    "training diverged in epoch {epoch}; last good weights saved to {CHECKPOINT}"
                )));
            }
            Err(e) => return Err(e.into()),
        };
        let axes = plane_axes(&trajs, c.landscape.grid_steps, c.landscape.grid_padding)?;
        let support: Vec<Vec<f64>> = trajs.iter().flat_map(|t| t.coords.iter().cloned()).collect();
        let (t_lo, t_hi) = time_range(&trajs);
        let field = drift_field(&net, &axes, 0.5 * (t_lo + t_hi), &support, &self.field_config())?;
        Ok(vec![
            self.write(MODEL, &formats::net_to_json(&net))?,
            self.write(HISTORY, &formats::to_json_pretty(&history))?,
            self.write(DRIFT_FIELD, &formats::drift_field_to_csv(&field)?)?,
        ])
    }

    fn evaluate(&self) -> Result<Vec<String>> {
        let c = &self.cfg;
        let trajs = self.read_trajectories()?;
        let net = self.read_net()?;
        let width = c.binning.bin_width_days;
        let longest = trajs.iter().map(LatentTrajectory::len).max().unwrap_or(0);
        let (usable, skipped_horizons): (Vec<u32>, Vec<u32>) = c
            .evaluation
            .horizon_days
            .iter()
            .partition(|&&d| days_to_bins(d, width) + MIN_HISTORY <= longest);
        if usable.is_empty() {
            return Err(Error::Data(format!(
                "every horizon exceeds the longest trajectory ({longest} bins)"
            )));
        }
        for d in &skipped_horizons {
            log::warn!("horizon of {d} days exceeds every trajectory; left out");
        }
        let models = standard_models(Some(&net));
        let refs: Vec<&dyn Forecaster> = models.iter().map(|m| m.as_ref()).collect();
        let hc = HorizonConfig {
            horizon_days: usable,
            anchor_stride: c.evaluation.anchor_stride,
        };
        let eval = horizon_eval(&refs, &trajs, width, &hc)?;
        let groups = match self.read_metadata()? {
            Some(meta) => {
                let obs = self.read_observations()?;
                let keys = group_keys(&meta, &obs, c.evaluation.grouping, c.ingest.by_account);
                Some(group_breakdown(&eval, &keys, c.evaluation.alpha)?)
            }
            None => None,
        };
        let mut outputs = Vec::new();
        if let Some(g) = &groups {
            outputs.push(self.write(GROUPS, &groups_csv(g)?)?);
        }
        outputs.push(self.write(HORIZONS, &horizons_csv(&eval.report)?)?);
        let report = EvaluationReport {
            report: eval.report,
            skipped_horizon_days: skipped_horizons,
            groups,
        };
        outputs.insert(0, self.write(EVALUATION, &formats::to_json_pretty(&report))?);
        Ok(outputs)
    }

    fn analytics(&self) -> Result<Vec<String>> {
        let c = &self.cfg;
        let binning = c.binning.binning();
        let trajs = self.read_trajectories()?;
        let model: PpcaModel = formats::ppca_from_json(&formats::read_text(&self.path(PPCA))?)?;
        let mut obs = self.read_observations()?;
        if c.ingest.by_account {
            for o in &mut obs {
                o.person_id = o.stream_id(true).to_string();
            }
        }
        let mut notes = Vec::new();
        let means = person_means(&trajs);
        let mean_rows: Vec<Vec<f64>> = means.values().cloned().collect();
        let entropy = soft(variance_entropy(&mean_rows), "variance entropy", &mut notes)?;

        let (mut eta, mut centroids) = (Vec::new(), None);
        if let Some(meta) = self.read_metadata()? {
            let keys = group_keys(&meta, &obs, c.analytics.grouping, c.ingest.by_account);
            let dim = mean_rows.first().map_or(0, Vec::len);
            let grouped: Vec<(&Vec<f64>, &String)> =
                means.iter().filter_map(|(p, m)| Some((m, keys.get(p)?))).collect();
            for k in 0..dim {
                let values: Vec<f64> = grouped.iter().map(|(m, _)| m[k]).collect();
                let labels: Vec<&String> = grouped.iter().map(|(_, g)| *g).collect();
                eta.push(soft(eta_squared(&values, &labels), &format!("eta squared on dimension {}", k + 1), &mut notes)?);
            }
            centroids = soft(centroid_distances(&means, &keys), "centroid distances", &mut notes)?;
        }

        let mut tables = Vec::new();
        let dims = trajs.first().map_or(0, LatentTrajectory::dim).min(model.n_components);
        for &year in &c.analytics.years {
            for dim in 0..dims {
                let loadings: Vec<(String, f64)> =
                    model.columns.iter().cloned().zip(model.component(dim)).collect();
                for direction in [MoveDirection::Positive, MoveDirection::Negative] {
                    let q = MoverQuery {
                        dim,
                        percentile: c.analytics.percentile,
                        direction,
                        start: new_year(year),
                        end: new_year(year + 1),
                        top_loadings: c.analytics.top_loadings,
                        alpha: c.analytics.alpha,
                    };
                    let what = format!("movers {year} dimension {} {direction:?}", dim + 1);
                    if let Some(r) = soft(significant_movers(&trajs, &loadings, &obs, &binning, &q), &what, &mut notes)? {
                        tables.push(MoverTable {
                            year,
                            dim: dim + 1,
                            direction,
                            movers: r.movers,
                            rows: r.rows,
                        });
                    }
                }
            }
        }

        let mut outputs = vec![self.write(MOVERS, &movers_csv(&tables)?)?];
        let mut snapshots = Vec::new();
        if trajs.first().map_or(0, LatentTrajectory::dim) >= 2 {
            let net = self.read_net()?;
            let axes = plane_axes(&trajs, c.landscape.grid_steps, c.landscape.grid_padding)?;
            for snap in snapshot_series(&net, &c.export.years, &axes, &trajs, &binning, &self.field_config())? {
                let title = format!("Stance landscape {}", snap.year);
                let svg = export_svg(&snap.field, &snap.density, &c.export, &title)?;
                outputs.push(self.write(&format!("analytics/snapshots/{}.svg", snap.year), &svg)?);
                snapshots.push(SnapshotSummary {
                    year: snap.year,
                    time: snap.time,
                    n_points: snap.n_points,
                });
            }
            let marginal = self.marginal_potential(&net, &trajs)?;
            outputs.push(self.write(MARGINAL, &marginal)?);
        } else {
            notes.push("snapshots need at least two latent dimensions".into());
        }
        let report = AnalyticsReport {
            variance_entropy: entropy,
            eta_squared: eta,
            centroids,
            movers: tables,
            snapshots,
            notes,
        };
        outputs.insert(0, self.write(ANALYTICS, &formats::to_json_pretty(&report))?);
        Ok(outputs)
    }
}

impl Pipeline {
    /// Boltzmann marginal of the potential onto the first two latent
    /// dimensions at the data's mid time, as `x,y,phi` rows. The other
    /// dimensions are integrated over their data range.
    fn marginal_potential(&self, net: &PotentialNet, trajs: &[LatentTrajectory]) -> Result<String> {
        let c = &self.cfg;
        let d = trajs.iter().map(LatentTrajectory::dim).max().unwrap_or(0);
        let axes: Vec<Axis> = (0..d)
            .map(|k| {
                if k < 2 {
                    padded_axis(trajs, k, c.landscape.grid_steps, c.landscape.grid_padding)
                } else {
                    padded_axis(trajs, k, c.export.marginal_steps, 0.0)
                }
            })
            .collect();
        let (t_lo, t_hi) = time_range(trajs);
        let phi = marginalize_boltzmann(net, [0, 1], &axes, 0.5 * (t_lo + t_hi), c.export.temperature)?;
        let mut rows = Vec::with_capacity(phi.len());
        for i in 0..axes[0].steps {
            for j in 0..axes[1].steps {
                rows.push(vec![
                    axes[0].value(i).to_string(),
                    axes[1].value(j).to_string(),
                    phi[i * axes[1].steps + j].to_string(),
                ]);
            }
        }
        formats::table_csv(&["x", "y", "phi"], &rows)
    }
}

/// Padded data range of dimension `k`.
fn padded_axis(trajs: &[LatentTrajectory], k: usize, steps: usize, padding: f64) -> Axis {
    let vals = trajs.iter().flat_map(|t| t.coords.iter().map(move |c| c[k]));
    let lo = vals.clone().fold(f64::INFINITY, f64::min);
    let hi = vals.fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { padding * (hi - lo) } else { 1.0 };
    Axis::new(lo - pad, hi + pad, steps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub learning_rates: Vec<f64>,
    pub dropouts: Vec<f64>,
    pub weight_decays: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTrial {
    pub learning_rate: f64,
    pub dropout: f64,
    pub weight_decay: f64,
    pub best_epoch: usize,
    /// `None` when training diverged.
    pub best_validation: Option<f64>,
}

/// Trains once per grid point with the same seed and split, sorted by
/// validation loss with diverged runs last.
pub fn sweep(trajs: &[LatentTrajectory], base: &TrainConfig, grid: &SweepGrid, binning: &stancefield_core::ingest::TimeBinning) -> Result<Vec<SweepTrial>> {
    let mut trials = Vec::new();
    for &learning_rate in &grid.learning_rates {
        for &dropout in &grid.dropouts {
            for &weight_decay in &grid.weight_decays {
                let cfg = TrainConfig {
                    learning_rate,
                    dropout,
                    weight_decay,
                    ..base.clone()
                };
                let (best_epoch, best_validation) = match train(trajs, &cfg, binning) {
                    Ok((_, h)) => (h.best_epoch, Some(h.best_validation)),
                    Err(CoreError::Diverged { epoch, .. }) => (epoch, None),
                    Err(e) => return Err(e.into()),
                };
                log::info!("lr {learning_rate} dropout {dropout} wd {weight_decay}: {best_validation:?}");
                trials.push(SweepTrial {
                    learning_rate,
                    dropout,
                    weight_decay,
                    best_epoch,
                    best_validation,
                });
            }
        }
    }
    trials.sort_by(|a, b| match (a.best_validation, b.best_validation) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(trials)
}

/// Turns input-shaped failures into a note so one empty year or group does
/// not sink the whole report.
fn soft<T>(r: stancefield_core::Result<T>, what: &str, notes: &mut Vec<String>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ (CoreError::InvalidInput(_) | CoreError::Degenerate(_) | CoreError::EmptyWindow(_))) => {
            notes.push(format!("{what}: {e}"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// Reorders `m` onto `columns`; columns the matrix lacks are all missing
/// and columns the model lacks are dropped.
pub fn align_columns(m: &StanceMatrix, columns: &[String]) -> StanceMatrix {
    if m.col_keys == columns {
        return m.clone();
    }
    let (n, p) = (m.n_rows(), columns.len());
    let src: Vec<Option<usize>> = columns.iter().map(|c| m.col_keys.iter().position(|k| k == c)).collect();
    let mut values = vec![0.0; n * p];
    let mut missing = vec![true; n * p];
    for i in 0..n {
        for (j, s) in src.iter().enumerate() {
            if let Some(v) = s.and_then(|s| m.get(i, s)) {
                values[i * p + j] = v;
                missing[i * p + j] = false;
            }
        }
    }
    StanceMatrix {
        row_keys: m.row_keys.clone(),
        col_keys: columns.to_vec(),
        values,
        missing,
    }
}

fn time_range(trajs: &[LatentTrajectory]) -> (f64, f64) {
    let times = trajs.iter().flat_map(|t| t.times.iter().copied());
    let lo = times.clone().fold(f64::INFINITY, f64::min);
    let hi = times.fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Lattice over the data: the first two dimensions vary across their
/// padded range, the rest sit at the data mean.
pub fn plane_axes(trajs: &[LatentTrajectory], steps: usize, padding: f64) -> Result<Vec<Axis>> {
    let d = trajs.iter().map(LatentTrajectory::dim).max().unwrap_or(0);
    let points: Vec<&Vec<f64>> = trajs.iter().flat_map(|t| t.coords.iter()).collect();
    if d == 0 || points.is_empty() {
        return Err(Error::Data("no trajectory points".into()));
    }
    Ok((0..d)
        .map(|k| {
            if k < 2 {
                padded_axis(trajs, k, steps, padding)
            } else {
                Axis::fixed(points.iter().map(|c| c[k]).sum::<f64>() / points.len() as f64)
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub observations: formats::ParseReport,
    pub metadata: Option<formats::ParseReport>,
    pub outside_window: usize,
    pub duplicates: usize,
    pub below_min_posts: usize,
    pub kept: usize,
    pub persons: usize,
    pub targets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentReport {
    pub rows: usize,
    pub columns: usize,
    pub missing_fraction: f64,
    pub missing_after_edge_fill: f64,
    /// Targets without a column in a reused model.
    pub unmatched_columns: usize,
    pub empty_rows: usize,
    pub converged: bool,
    pub iterations: usize,
    pub noise_variance: f64,
    pub noise_floor_hit: bool,
    pub imputation: Option<Vec<ImputationScore>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    #[serde(flatten)]
    pub report: HorizonReport,
    pub skipped_horizon_days: Vec<u32>,
    pub groups: Option<GroupBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoverTable {
    pub year: i32,
    /// 1-based latent dimension.
    pub dim: usize,
    pub direction: MoveDirection,
    pub movers: Vec<String>,
    pub rows: Vec<MoverRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSummary {
    pub year: i32,
    pub time: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsReport {
    pub variance_entropy: Option<f64>,
    /// Per dimension; `None` where groups were degenerate.
    pub eta_squared: Vec<Option<f64>>,
    pub centroids: Option<CentroidTable>,
    pub movers: Vec<MoverTable>,
    pub snapshots: Vec<SnapshotSummary>,
    pub notes: Vec<String>,
}

pub fn horizons_csv(r: &HorizonReport) -> Result<String> {
    let mut rows = Vec::new();
    for (m, model) in r.models.iter().enumerate() {
        for h in 0..r.horizon_days.len() {
            rows.push(vec![
                model.clone(),
                r.horizon_days[h].to_string(),
                r.horizon_bins[h].to_string(),
                r.n_anchors[h].to_string(),
                r.median_mse[m][h].to_string(),
                r.ratio[m][h].to_string(),
            ]);
        }
    }
    formats::table_csv(&["model", "horizon_days", "horizon_bins", "n_anchors", "median_mse", "ratio"], &rows)
}

fn groups_csv(g: &GroupBreakdown) -> Result<String> {
    let rows: Vec<Vec<String>> = g
        .rows
        .iter()
        .map(|r| {
            vec![
                r.group.clone(),
                r.model.clone(),
                r.horizon_days.to_string(),
                r.n_people.to_string(),
                r.n_anchors.to_string(),
                r.ratio.to_string(),
                r.p_value.to_string(),
                r.p_adjusted.to_string(),
                r.reject.to_string(),
            ]
        })
        .collect();
    formats::table_csv(
        &["group", "model", "horizon_days", "n_people", "n_anchors", "ratio", "p", "p_adjusted", "reject"],
        &rows,
    )
}

/// One row per target in the before→after layout.
pub fn movers_csv(tables: &[MoverTable]) -> Result<String> {
    let mut rows = Vec::new();
    for t in tables {
        for r in &t.rows {
            rows.push(vec![
                t.year.to_string(),
                t.dim.to_string(),
                format!("{:?}", t.direction).to_lowercase(),
                r.target.clone(),
                r.loading.to_string(),
                r.shift(0),
                r.shift(1),
                r.shift(2),
                r.n_before.to_string(),
                r.n_after.to_string(),
                r.test.clone(),
                r.p_value.to_string(),
                r.p_adjusted.to_string(),
                r.significant.to_string(),
            ]);
        }
    }
    formats::table_csv(
        &[
            "year", "dim", "direction", "target", "loading", "favor", "neutral", "against", "n_before", "n_after",
            "test", "p", "p_adjusted", "significant",
        ],
        &rows,
    )
}

/// Fixed-width text table of the horizon ratios.
pub fn render_summary(r: &HorizonReport) -> String {
    let width = r.models.iter().map(String::len).max().unwrap_or(5).max(5);
    let mut s = format!("{:width$}", "model");
    for d in &r.horizon_days {
        s.push_str(&format!(" {:>9}", format!("{d}d")));
    }
    s.push('\n');
    for (m, model) in r.models.iter().enumerate() {
        s.push_str(&format!("{model:width$}"));
        for v in &r.ratio[m] {
            s.push_str(&format!(" {v:>9.4}"));
        }
        s.push('\n');
    }
    s
}
