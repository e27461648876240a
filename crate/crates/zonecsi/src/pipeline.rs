//! Orchestration: one config file drives preprocessing, tracing, clustering,
//! zone formation, surrogate training, full-area path prediction, and the
//! sum-rate evaluation. Every stage persists its outputs into a single
//! artifact directory and records a config hash in `manifest.json`; an
//! unchanged stage is skipped on re-run, and a stage whose upstream
//! artifacts were produced under a different configuration refuses to run
//! unless forced.
//!
//! All randomness flows from the one root seed in the config via named
//! sub-seeds (clustering init, train/test split, model init, Monte Carlo),
//! so identical config and seed give byte-identical artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{
    fit_for_count, hard_assign, select_cluster_count, write_validity_csv, FcmConfig,
    MembershipMatrix,
};
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::precode::{
    csi_overhead_reduction, run_sweep, write_sweep_csv, ArraySpec, HybridConfig, SweepConfig,
    SweepRow,
};
use crate::raytrace::{
    read_path_db, summarize, trace_all, write_path_db, write_summary, PathRecord, RadioConfig,
};
use crate::scene::{feasible_locations, load_scene, quantize_merge, save_scene};
use crate::seed::subseed;
use crate::surrogate::{
    build_dataset, candidate_paths, classification_metrics, cnn, ffnn, predict_paths,
    split_locations, train_classifier, train_one_step, train_regressors, trees,
    ClassificationMetrics, ClassifierSpec, EnsembleSpec, LabeledPath, OneStepSpec, TARGET_NAMES,
};
use crate::zones::{
    cluster_params, cluster_regions, form_zones, prune_cluster, read_zone_map,
    write_zone_locations_csv, write_zone_map, ClusterParams,
};

// ---------------------------------------------------------------------------
// Config file

/// Scene preprocessing knobs: world origin shift, vertex quantization
/// resolution, and the lattice spacing for feasible UT locations (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub origin: [f64; 3],
    pub resolution: f64,
    pub grid_spacing: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            origin: [0.0; 3],
            resolution: 0.5,
            grid_spacing: 0.5,
        }
    }
}

/// Cluster-count scan: fuzzy fits for 2..=c_max candidates, scored by the
/// five validity indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterStageConfig {
    pub c_max: usize,
    pub fuzzifier: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for ClusterStageConfig {
    fn default() -> Self {
        ClusterStageConfig {
            c_max: 70,
            fuzzifier: 2.0,
            epsilon: 1e-6,
            max_iterations: 500,
        }
    }
}

/// Zone formation: per-cluster path pruning toggle and the membership level
/// that separates deterministic from fuzzy region coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZonesConfig {
    pub prune: bool,
    pub membership_threshold: f64,
}

impl Default for ZonesConfig {
    fn default() -> Self {
        ZonesConfig {
            prune: true,
            membership_threshold: crate::zones::DEFAULT_MEMBERSHIP_THRESHOLD,
        }
    }
}

/// Surrogate training: location-level train fraction, the classifier and
/// ensemble specs, and the optional joint feed-forward baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Fraction of locations used for training; the rest are held out.
    pub split_ratio: f64,
    pub classifier: ClassifierSpec,
    pub ensembles: EnsembleSpec,
    pub one_step_enabled: bool,
    pub one_step: OneStepSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            split_ratio: 0.7,
            classifier: ClassifierSpec::default(),
            ensembles: EnsembleSpec::default(),
            one_step_enabled: false,
            one_step: OneStepSpec::default(),
        }
    }
}

/// Sum-rate evaluation: array geometry, RF chains per group, the grid of
/// active user counts (distributed evenly over the groups) and transmit
/// powers, and the Monte Carlo depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub array_rows: usize,
    pub array_cols: usize,
    /// Element spacing in wavelengths.
    pub element_spacing: f64,
    pub chains_per_group: Vec<usize>,
    /// Total active users per sweep; each must divide over the groups with
    /// every group getting at least one user.
    pub k_a_grid: Vec<usize>,
    pub p_t_dbm: Vec<f64>,
    pub noise_dbm: f64,
    pub paths_per_cluster: usize,
    pub n_realizations: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            array_rows: 16,
            array_cols: 16,
            element_spacing: 0.5,
            chains_per_group: vec![11, 11],
            k_a_grid: vec![2, 4, 6, 8, 10],
            p_t_dbm: vec![20.0, 25.0, 30.0, 35.0, 40.0],
            noise_dbm: -134.0,
            paths_per_cluster: 10,
            n_realizations: 200,
        }
    }
}

/// The whole pipeline configuration, loaded from one TOML file. `scene` is
/// resolved relative to the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every stage derives its own sub-seeds from it.
    pub seed: u64,
    pub scene: PathBuf,
    pub preprocess: PreprocessConfig,
    pub radio: RadioConfig,
    pub cluster: ClusterStageConfig,
    pub zones: ZonesConfig,
    pub train: TrainConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            scene: PathBuf::new(),
            preprocess: PreprocessConfig::default(),
            radio: RadioConfig::default(),
            cluster: ClusterStageConfig::default(),
            zones: ZonesConfig::default(),
            train: TrainConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scene.as_os_str().is_empty() {
            return Err(Error::InvalidConfig("no scene file given".into()));
        }
        if !self.scene.is_file() {
            return Err(Error::InvalidConfig(format!(
                "scene file {} does not exist",
                self.scene.display()
            )));
        }
        let p = &self.preprocess;
        if !(p.resolution > 0.0) || !(p.grid_spacing > 0.0) {
            return Err(Error::InvalidConfig(
                "resolution and grid_spacing must be positive".into(),
            ));
        }
        if !p.origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("origin must be finite".into()));
        }
        self.radio.validate()?;
        let c = &self.cluster;
        if c.c_max < 2 {
            return Err(Error::InvalidConfig(format!(
                "c_max must be at least 2, got {}",
                c.c_max
            )));
        }
        // Borrow the fuzzy config's own validation for the shared fields.
        FcmConfig {
            cluster_count: 2,
            fuzzifier: c.fuzzifier,
            epsilon: c.epsilon,
            max_iterations: c.max_iterations,
            rng_seed: 0,
        }
        .validate()?;
        let z = &self.zones;
        if !(z.membership_threshold > 0.0 && z.membership_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "membership_threshold must be in (0,1], got {}",
                z.membership_threshold
            )));
        }
        let t = &self.train;
        if !(t.split_ratio > 0.0 && t.split_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "split_ratio must be in (0,1), got {}",
                t.split_ratio
            )));
        }
        t.classifier.validate()?;
        t.ensembles.validate()?;
        if t.one_step_enabled {
            t.one_step.validate()?;
        }
        let e = &self.evaluate;
        ArraySpec {
            rows: e.array_rows,
            cols: e.array_cols,
            element_spacing: e.element_spacing,
        }
        .validate()?;
        if e.chains_per_group.is_empty() || e.chains_per_group.iter().any(|&n| n == 0) {
            return Err(Error::InvalidConfig(
                "chains_per_group must be non-empty and positive".into(),
            ));
        }
        if e.k_a_grid.is_empty() {
            return Err(Error::InvalidConfig("k_a_grid must be non-empty".into()));
        }
        let n_rf: usize = e.chains_per_group.iter().sum();
        for &ka in &e.k_a_grid {
            if ka < e.chains_per_group.len() {
                return Err(Error::InvalidConfig(format!(
                    "K_a={ka} cannot cover {} groups with at least one user each",
                    e.chains_per_group.len()
                )));
            }
            if ka > n_rf {
                return Err(Error::InvalidConfig(format!(
                    "K_a={ka} exceeds the {n_rf} available RF chains"
                )));
            }
        }
        if e.p_t_dbm.is_empty() || e.p_t_dbm.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "p_t_dbm grid must be non-empty and finite".into(),
            ));
        }
        if !e.noise_dbm.is_finite() {
            return Err(Error::InvalidConfig("noise_dbm must be finite".into()));
        }
        if e.paths_per_cluster == 0 || e.n_realizations == 0 {
            return Err(Error::InvalidConfig(
                "paths_per_cluster and n_realizations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Parses the TOML config and resolves a relative scene path against the
/// config file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut cfg: RunConfig = toml::from_str(&text)?;
    if cfg.scene.is_relative() {
        if let Some(dir) = path.parent() {
            cfg.scene = dir.join(&cfg.scene);
        }
    }
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Stages and artifacts

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Preprocess,
    Trace,
    Cluster,
    Zones,
    Train,
    Predict,
    Evaluate,
}

impl Stage {
    /// Execution order; dependencies always come earlier.
    pub const ALL: [Stage; 7] = [
        Stage::Preprocess,
        Stage::Trace,
        Stage::Cluster,
        Stage::Zones,
        Stage::Train,
        Stage::Predict,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Trace => "trace",
            Stage::Cluster => "cluster",
            Stage::Zones => "zones",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
        }
    }

    /// Direct upstream stages whose artifacts this stage reads.
    pub fn deps(self) -> &'static [Stage] {
        match self {
            Stage::Preprocess => &[],
            Stage::Trace => &[Stage::Preprocess],
            Stage::Cluster => &[Stage::Trace],
            Stage::Zones => &[Stage::Preprocess, Stage::Trace, Stage::Cluster],
            Stage::Train => &[Stage::Preprocess, Stage::Trace],
            Stage::Predict => &[Stage::Preprocess, Stage::Trace, Stage::Train],
            Stage::Evaluate => &[Stage::Zones],
        }
    }

    /// The artifact named in dependency errors.
    pub fn main_artifact(self) -> &'static str {
        match self {
            Stage::Preprocess => SCENE_SNAPSHOT,
            Stage::Trace => PATH_DB,
            Stage::Cluster => MEMBERSHIPS_CSV,
            Stage::Zones => ZONE_MAP,
            Stage::Train => CLASSIFIER_MODEL,
            Stage::Predict => PREDICTED_PATHS,
            Stage::Evaluate => SUMRATE_CSV,
        }
    }

    /// Every file this stage writes, in a fixed order.
    pub fn artifacts(self, cfg: &RunConfig) -> Vec<&'static str> {
        match self {
            Stage::Preprocess => vec![SCENE_SNAPSHOT, LOCATIONS_CSV],
            Stage::Trace => vec![PATH_DB, TRACE_SUMMARY],
            Stage::Cluster => vec![
                VALIDITY_CSV,
                MEMBERSHIPS_CSV,
                CENTROIDS_CSV,
                CLUSTER_SUMMARY,
            ],
            Stage::Zones => vec![ZONE_MAP, ZONE_LOCATIONS_CSV, REGIONS_JSON],
            Stage::Train => {
                let mut v = vec![CLASSIFIER_MODEL, ENSEMBLES_MODEL];
                if cfg.train.one_step_enabled {
                    v.push(ONESTEP_MODEL);
                }
                v.push(TRAIN_METRICS);
                v
            }
            Stage::Predict => vec![PREDICTED_PATHS, PREDICT_METRICS],
            Stage::Evaluate => vec![SUMRATE_CSV, EVALUATE_SUMMARY],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Stage> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown stage `{s}`; expected one of preprocess, trace, cluster, zones, \
                     train, predict, evaluate"
                ))
            })
    }
}

/// Parses a comma-separated stage list, preserving canonical order and
/// dropping duplicates.
pub fn parse_stages(s: &str) -> Result<Vec<Stage>> {
    let mut set = BTreeSet::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        set.insert(Stage::from_str(part)?);
    }
    if set.is_empty() {
        return Err(Error::InvalidArgument("no stages given".into()));
    }
    Ok(Stage::ALL.into_iter().filter(|s| set.contains(s)).collect())
}

pub const SCENE_SNAPSHOT: &str = "scene_quantized.scene";
pub const LOCATIONS_CSV: &str = "locations.csv";
pub const PATH_DB: &str = "paths.csv";
pub const TRACE_SUMMARY: &str = "trace_summary.json";
pub const VALIDITY_CSV: &str = "validity.csv";
pub const MEMBERSHIPS_CSV: &str = "memberships.csv";
pub const CENTROIDS_CSV: &str = "centroids.csv";
pub const CLUSTER_SUMMARY: &str = "cluster_summary.json";
pub const ZONE_MAP: &str = "zones.json";
pub const ZONE_LOCATIONS_CSV: &str = "zone_locations.csv";
pub const REGIONS_JSON: &str = "regions.json";
pub const CLASSIFIER_MODEL: &str = "model_classifier.json";
pub const ENSEMBLES_MODEL: &str = "model_ensembles.json";
pub const ONESTEP_MODEL: &str = "model_onestep.json";
pub const TRAIN_METRICS: &str = "train_metrics.json";
pub const PREDICTED_PATHS: &str = "predicted_paths.csv";
pub const PREDICT_METRICS: &str = "predict_metrics.json";
pub const SUMRATE_CSV: &str = "sumrate.csv";
pub const EVALUATE_SUMMARY: &str = "evaluate_summary.json";
pub const MANIFEST: &str = "manifest.json";

// ---------------------------------------------------------------------------
// Manifest and config hashing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Hash over the stage's config slice, the root seed, the upstream
    /// hashes, and (for preprocess) the scene file bytes.
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn load_manifest(out_dir: &Path) -> Result<Manifest> {
    let path = out_dir.join(MANIFEST);
    if !path.is_file() {
        return Ok(Manifest::default());
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_manifest(out_dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = out_dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// The config slice a stage's behavior depends on, as canonical JSON.
/// Upstream influence enters through upstream hashes, not repeated slices.
fn stage_config_json(stage: Stage, cfg: &RunConfig) -> Result<String> {
    let value = match stage {
        Stage::Preprocess => serde_json::to_value(&cfg.preprocess)?,
        Stage::Trace => serde_json::to_value(&cfg.radio)?,
        Stage::Cluster => serde_json::to_value(&cfg.cluster)?,
        Stage::Zones => serde_json::to_value(&cfg.zones)?,
        Stage::Train => serde_json::to_value(&cfg.train)?,
        // Predict reuses the trained models and the train split; both are
        // covered by the train stage's hash.
        Stage::Predict => serde_json::Value::Null,
        Stage::Evaluate => serde_json::to_value(&cfg.evaluate)?,
    };
    Ok(value.to_string())
}

fn stage_uses_seed(stage: Stage) -> bool {
    matches!(
        stage,
        Stage::Cluster | Stage::Train | Stage::Predict | Stage::Evaluate
    )
}

/// Stage hash: name, config slice, root seed where randomness is involved,
/// upstream hashes in dependency order, and the raw scene bytes for
/// preprocess (so editing the scene invalidates the whole chain).
fn stage_hash(stage: Stage, cfg: &RunConfig, upstream: &[(Stage, String)]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(stage.name().as_bytes());
    h.update([0u8]);
    h.update(stage_config_json(stage, cfg)?.as_bytes());
    h.update([0u8]);
    if stage_uses_seed(stage) {
        h.update(cfg.seed.to_le_bytes());
        h.update([0u8]);
    }
    for (dep, hash) in upstream {
        h.update(dep.name().as_bytes());
        h.update([b'=']);
        h.update(hash.as_bytes());
        h.update([0u8]);
    }
    if stage == Stage::Preprocess {
        let bytes =
            fs::read(&cfg.scene).map_err(|e| Error::io(cfg.scene.display().to_string(), e))?;
        h.update(&bytes);
    }
    let digest = h.finalize();
    use fmt::Write;
    let mut hex = String::with_capacity(64);
    for b in digest {
        write!(hex, "{b:02x}").expect("hex formatting");
    }
    Ok(hex)
}

/// Hashes of the full chain as if every stage ran under the current config.
fn pure_chain(cfg: &RunConfig) -> Result<BTreeMap<Stage, String>> {
    let mut chain: BTreeMap<Stage, String> = BTreeMap::new();
    for stage in Stage::ALL {
        let ups: Vec<(Stage, String)> = stage
            .deps()
            .iter()
            .map(|d| (*d, chain[d].clone()))
            .collect();
        let h = stage_hash(stage, cfg, &ups)?;
        chain.insert(stage, h);
    }
    Ok(chain)
}

// ---------------------------------------------------------------------------
// Orchestration

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageAction {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub action: StageAction,
}

struct StageStatus {
    /// Manifest record present and every artifact file on disk.
    present: bool,
    /// Present and hashed exactly as the current config chain would.
    current: bool,
    recorded_hash: Option<String>,
}

fn artifacts_present(stage: Stage, cfg: &RunConfig, out_dir: &Path) -> bool {
    stage
        .artifacts(cfg)
        .iter()
        .all(|name| out_dir.join(name).is_file())
}

/// Runs the requested stages in canonical order. A stage is skipped when its
/// manifest hash already matches the current config and its artifacts exist;
/// `force` re-runs requested stages regardless and accepts stale (but not
/// missing) upstream artifacts.
pub fn run_pipeline(
    cfg: &RunConfig,
    stages: &[Stage],
    out_dir: &Path,
    force: bool,
) -> Result<Vec<StageOutcome>> {
    cfg.validate()?;
    if stages.is_empty() {
        return Err(Error::InvalidArgument("no stages requested".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let mut manifest = load_manifest(out_dir)?;
    let chain = pure_chain(cfg)?;
    let requested: BTreeSet<Stage> = stages.iter().cloned().collect();

    let mut status: BTreeMap<Stage, StageStatus> = BTreeMap::new();
    for stage in Stage::ALL {
        let recorded = manifest
            .stages
            .get(stage.name())
            .map(|r| r.config_hash.clone());
        let present = recorded.is_some() && artifacts_present(stage, cfg, out_dir);
        let current = present && recorded.as_deref() == Some(chain[&stage].as_str());
        status.insert(
            stage,
            StageStatus {
                present,
                current,
                recorded_hash: recorded,
            },
        );
    }

    let mut outcomes = Vec::new();
    for stage in Stage::ALL {
        if !requested.contains(&stage) {
            continue;
        }
        let mut ups: Vec<(Stage, String)> = Vec::with_capacity(stage.deps().len());
        for dep in stage.deps() {
            let st = &status[dep];
            if !st.present {
                return Err(Error::MissingArtifact {
                    stage: stage.name().to_string(),
                    artifact: dep.main_artifact().to_string(),
                    producer: dep.name().to_string(),
                });
            }
            if !st.current && !force {
                return Err(Error::StaleArtifact {
                    stage: dep.name().to_string(),
                });
            }
            // Under force a stale upstream contributes its recorded hash, so
            // the manifest keeps describing what actually fed this stage.
            let hash = st
                .recorded_hash
                .clone()
                .expect("present stage has a recorded hash");
            ups.push((*dep, hash));
        }

        if !force && status[&stage].current {
            log::info!("stage {stage}: up to date, skipping");
            outcomes.push(StageOutcome {
                stage,
                action: StageAction::Skipped,
            });
            continue;
        }

        log::info!("stage {stage}: running");
        run_stage(stage, cfg, out_dir)?;
        let own_hash = stage_hash(stage, cfg, &ups)?;
        manifest.stages.insert(
            stage.name().to_string(),
            StageRecord {
                config_hash: own_hash.clone(),
                seed: cfg.seed,
                artifacts: stage
                    .artifacts(cfg)
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            },
        );
        save_manifest(out_dir, &manifest)?;
        let present = artifacts_present(stage, cfg, out_dir);
        status.insert(
            stage,
            StageStatus {
                present,
                current: present && own_hash == chain[&stage],
                recorded_hash: Some(own_hash),
            },
        );
        outcomes.push(StageOutcome {
            stage,
            action: StageAction::Ran,
        });
    }
    Ok(outcomes)
}

fn run_stage(stage: Stage, cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    match stage {
        Stage::Preprocess => run_preprocess(cfg, out_dir),
        Stage::Trace => run_trace(cfg, out_dir),
        Stage::Cluster => run_cluster(cfg, out_dir),
        Stage::Zones => run_zones(cfg, out_dir),
        Stage::Train => run_train(cfg, out_dir),
        Stage::Predict => run_predict(cfg, out_dir),
        Stage::Evaluate => run_evaluate(cfg, out_dir),
    }
}

// ---------------------------------------------------------------------------
// Stage bodies

fn run_preprocess(cfg: &RunConfig, out: &Path) -> Result<()> {
    let [ox, oy, oz] = cfg.preprocess.origin;
    let scene = load_scene(&cfg.scene, Point3::new(ox, oy, oz))?;
    let quantized = quantize_merge(&scene, cfg.preprocess.resolution)?;
    let locations = feasible_locations(&quantized, cfg.preprocess.grid_spacing)?;
    if locations.is_empty() {
        return Err(Error::InvalidConfig(
            "no feasible UT locations; check bounds and grid_spacing".into(),
        ));
    }
    save_scene(&quantized, &out.join(SCENE_SNAPSHOT))?;
    write_locations_csv(&out.join(LOCATIONS_CSV), &locations)?;
    log::info!(
        "preprocess: {} planes, {} feasible locations",
        quantized.planes.len(),
        locations.len()
    );
    Ok(())
}

fn run_trace(cfg: &RunConfig, out: &Path) -> Result<()> {
    let scene = load_scene(&out.join(SCENE_SNAPSHOT), Point3::ZERO)?;
    let locations = read_locations_csv(&out.join(LOCATIONS_CSV))?;
    let records = trace_all(&scene, &locations, &cfg.radio)?;
    write_path_db(&out.join(PATH_DB), &records)?;
    let summary = summarize(&records, locations.len(), scene.planes.len());
    write_summary(&out.join(TRACE_SUMMARY), &summary)?;
    log::info!(
        "trace: {} records, {} existent",
        records.len(),
        records.iter().filter(|r| r.existent).count()
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub best_c: usize,
    pub n_existent_paths: usize,
    pub iterations: usize,
    pub final_objective: f64,
}

fn run_cluster(cfg: &RunConfig, out: &Path) -> Result<()> {
    let records = read_path_db(&out.join(PATH_DB))?;
    let (existent, index): (Vec<PathRecord>, Vec<usize>) = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.existent)
        .map(|(i, r)| (r.clone(), i))
        .unzip();
    if existent.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "clustering needs at least 2 existent paths, found {}",
            existent.len()
        )));
    }
    let base = FcmConfig {
        cluster_count: 2,
        fuzzifier: cfg.cluster.fuzzifier,
        epsilon: cfg.cluster.epsilon,
        max_iterations: cfg.cluster.max_iterations,
        rng_seed: subseed(cfg.seed, "cluster"),
    };
    let outcome = select_cluster_count(&existent, cfg.cluster.c_max, &base)?;
    write_validity_csv(&out.join(VALIDITY_CSV), &outcome)?;
    let fit = fit_for_count(&existent, &base, outcome.best_c)?;
    write_memberships_csv(&out.join(MEMBERSHIPS_CSV), &index, &fit.memberships)?;
    write_centroids_csv(&out.join(CENTROIDS_CSV), &fit.centroids)?;
    let summary = ClusterSummary {
        best_c: outcome.best_c,
        n_existent_paths: existent.len(),
        iterations: fit.objective_history.len(),
        final_objective: *fit
            .objective_history
            .last()
            .expect("fit always records at least one iteration"),
    };
    let text = serde_json::to_string_pretty(&summary)?;
    let path = out.join(CLUSTER_SUMMARY);
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    log::info!(
        "cluster: {} paths into {} clusters after {} iterations",
        existent.len(),
        summary.best_c,
        summary.iterations
    );
    Ok(())
}

fn run_zones(cfg: &RunConfig, out: &Path) -> Result<()> {
    let locations = read_locations_csv(&out.join(LOCATIONS_CSV))?;
    let records = read_path_db(&out.join(PATH_DB))?;
    let (index, memberships) = read_memberships_csv(&out.join(MEMBERSHIPS_CSV))?;

    let existent: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.existent)
        .map(|(i, _)| i)
        .collect();
    if index != existent {
        return Err(Error::InvalidArgument(
            "membership table does not match the path database".into(),
        ));
    }
    let epaths: Vec<PathRecord> = existent.iter().map(|&i| records[i].clone()).collect();
    let local = hard_assign(&memberships);
    let c = memberships.n_clusters();

    // Cluster parameters, pruned against the unpruned benchmark when asked.
    // A cluster that wins no path keeps a zeroed placeholder; zone formation
    // never dereferences it.
    let mut params = vec![zeroed_params(); c];
    for j in 0..c {
        let members: Vec<PathRecord> = epaths
            .iter()
            .zip(&local)
            .filter(|(_, &a)| a == j)
            .map(|(p, _)| p.clone())
            .collect();
        if members.is_empty() {
            continue;
        }
        let unpruned = cluster_params(&members)?;
        params[j] = if cfg.zones.prune && members.len() > 2 {
            prune_cluster(&members, &unpruned)?.1
        } else {
            unpruned
        };
    }

    let mut assignment = vec![0usize; records.len()];
    for (pos, &global) in existent.iter().enumerate() {
        assignment[global] = local[pos];
    }
    let zones = form_zones(locations.len(), &assignment, &records, &params)?;
    write_zone_map(&out.join(ZONE_MAP), &zones)?;
    write_zone_locations_csv(&out.join(ZONE_LOCATIONS_CSV), &locations, &zones)?;

    let regions = cluster_regions(&local, &memberships, &epaths, cfg.zones.membership_threshold)?;
    let text = serde_json::to_string_pretty(&regions)?;
    let path = out.join(REGIONS_JSON);
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    log::info!("zones: {} zones (including the block zone)", zones.len());
    Ok(())
}

fn zeroed_params() -> ClusterParams {
    ClusterParams {
        mean_aaod: 0.0,
        mean_eaod: 0.0,
        mean_aaoa: 0.0,
        mean_eaoa: 0.0,
        mean_delay: 0.0,
        mean_power: 0.0,
        spread_aaod: 0.0,
        spread_eaod: 0.0,
        spread_aaoa: 0.0,
        spread_eaoa: 0.0,
        spread_delay: 0.0,
        spread_power: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub n_locations: usize,
    pub n_train_locations: usize,
    pub n_test_locations: usize,
    /// Held-out existence classification of the two-step model.
    pub classification: ClassificationMetrics,
    /// Held-out per-target RMSE over slots both traced and predicted
    /// existent.
    pub two_step_rmse: BTreeMap<String, f64>,
    pub two_step_rmse_slots: usize,
    /// Cross-validated ensemble RMSE from training, per target.
    pub ensemble_cv_rmse: BTreeMap<String, f64>,
    /// Held-out per-target RMSE of the joint feed-forward baseline over
    /// traced-existent slots, when that model is enabled.
    pub one_step_rmse: Option<BTreeMap<String, f64>>,
}

fn run_train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let scene = load_scene(&out.join(SCENE_SNAPSHOT), Point3::ZERO)?;
    let locations = read_locations_csv(&out.join(LOCATIONS_CSV))?;
    let records = read_path_db(&out.join(PATH_DB))?;
    let data = build_dataset(&scene, &locations, &records)?;

    let (train_locs, test_locs) =
        split_locations(locations.len(), cfg.train.split_ratio, cfg.seed)?;
    let mut in_train = vec![false; locations.len()];
    for &l in &train_locs {
        in_train[l] = true;
    }
    let train_set: Vec<LabeledPath> = data
        .iter()
        .filter(|s| in_train[s.candidate.ut_index])
        .cloned()
        .collect();
    let test_set: Vec<LabeledPath> = data
        .iter()
        .filter(|s| !in_train[s.candidate.ut_index])
        .cloned()
        .collect();

    let class_samples: Vec<([f64; 15], bool)> = train_set
        .iter()
        .map(|s| (s.candidate.features, s.existent))
        .collect();
    let class_spec = ClassifierSpec {
        rng_seed: subseed(cfg.seed, "classifier"),
        ..cfg.train.classifier.clone()
    };
    let classifier = train_classifier(&class_samples, &class_spec)?;
    cnn::save_classifier(&out.join(CLASSIFIER_MODEL), &classifier)?;

    let ens_spec = EnsembleSpec {
        rng_seed: subseed(cfg.seed, "trees"),
        ..cfg.train.ensembles.clone()
    };
    let regressors = train_regressors(&train_set, &ens_spec)?;
    trees::save_regressors(&out.join(ENSEMBLES_MODEL), &regressors)?;

    let one_step = if cfg.train.one_step_enabled {
        let spec = OneStepSpec {
            rng_seed: subseed(cfg.seed, "one-step"),
            ..cfg.train.one_step.clone()
        };
        let existent_train: Vec<LabeledPath> = train_set
            .iter()
            .filter(|s| s.existent)
            .cloned()
            .collect();
        let model = train_one_step(&existent_train, &spec)?;
        ffnn::save_one_step(&out.join(ONESTEP_MODEL), &model)?;
        Some(model)
    } else {
        None
    };

    // Held-out evaluation.
    let truth: Vec<bool> = test_set.iter().map(|s| s.existent).collect();
    let predicted: Vec<bool> = test_set
        .iter()
        .map(|s| classifier.predict(&s.candidate.features))
        .collect();
    let classification = classification_metrics(&predicted, &truth)?;

    let mut sq = [0.0f64; 6];
    let mut n_both = 0usize;
    for (s, &pred) in test_set.iter().zip(&predicted) {
        if !(s.existent && pred) {
            continue;
        }
        let y = regressors.predict(&s.candidate.features);
        for t in 0..6 {
            let d = y[t] - s.targets[t];
            sq[t] += d * d;
        }
        n_both += 1;
    }
    let two_step_rmse = rmse_map(&sq, n_both);

    let one_step_rmse = one_step.map(|model| {
        let mut sq = [0.0f64; 6];
        let mut n = 0usize;
        for s in test_set.iter().filter(|s| s.existent) {
            let y = model.predict(&s.candidate.features);
            for t in 0..6 {
                let d = y[t] - s.targets[t];
                sq[t] += d * d;
            }
            n += 1;
        }
        rmse_map(&sq, n)
    });

    let metrics = TrainMetrics {
        n_locations: locations.len(),
        n_train_locations: train_locs.len(),
        n_test_locations: test_locs.len(),
        classification,
        two_step_rmse,
        two_step_rmse_slots: n_both,
        ensemble_cv_rmse: TARGET_NAMES
            .iter()
            .zip(&regressors.cv_rmse)
            .map(|(name, &v)| (name.to_string(), v))
            .collect(),
        one_step_rmse,
    };
    let text = serde_json::to_string_pretty(&metrics)?;
    let path = out.join(TRAIN_METRICS);
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    log::info!(
        "train: kappa {:.3} on {} held-out locations",
        metrics.classification.kappa,
        metrics.n_test_locations
    );
    Ok(())
}

fn rmse_map(sq: &[f64; 6], n: usize) -> BTreeMap<String, f64> {
    TARGET_NAMES
        .iter()
        .enumerate()
        .map(|(t, name)| {
            let v = if n == 0 {
                f64::NAN
            } else {
                (sq[t] / n as f64).sqrt()
            };
            (name.to_string(), v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictMetrics {
    pub n_test_locations: usize,
    pub n_test_slots: usize,
    /// Existence agreement with the tracer on held-out locations.
    pub classification: ClassificationMetrics,
    /// Per-target RMSE over held-out slots both traced and predicted
    /// existent.
    pub rmse: BTreeMap<String, f64>,
    pub rmse_slots: usize,
}

fn run_predict(cfg: &RunConfig, out: &Path) -> Result<()> {
    let scene = load_scene(&out.join(SCENE_SNAPSHOT), Point3::ZERO)?;
    let locations = read_locations_csv(&out.join(LOCATIONS_CSV))?;
    let classifier = cnn::load_classifier(&out.join(CLASSIFIER_MODEL))?;
    let regressors = trees::load_regressors(&out.join(ENSEMBLES_MODEL))?;

    let candidates = candidate_paths(&scene, &locations);
    let predictions = predict_paths(&classifier, &regressors, &candidates);
    write_path_db(&out.join(PREDICTED_PATHS), &predictions)?;

    // Score against the tracer on the same held-out locations as training.
    let records = read_path_db(&out.join(PATH_DB))?;
    if records.len() != predictions.len() {
        return Err(Error::InvalidArgument(
            "path database and predictions disagree on slot count".into(),
        ));
    }
    let (_, test_locs) = split_locations(locations.len(), cfg.train.split_ratio, cfg.seed)?;
    let mut in_test = vec![false; locations.len()];
    for &l in &test_locs {
        in_test[l] = true;
    }
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    let mut sq = [0.0f64; 6];
    let mut n_both = 0usize;
    let mut n_slots = 0usize;
    for (r, p) in records.iter().zip(&predictions) {
        if !in_test[r.ut_index] {
            continue;
        }
        n_slots += 1;
        truth.push(r.existent);
        predicted.push(p.existent);
        if r.existent && p.existent {
            let want = [r.aaod, r.eaod, r.aaoa, r.eaoa, r.rss_dbm, r.delay_s];
            let got = [p.aaod, p.eaod, p.aaoa, p.eaoa, p.rss_dbm, p.delay_s];
            for t in 0..6 {
                let d = got[t] - want[t];
                sq[t] += d * d;
            }
            n_both += 1;
        }
    }
    let metrics = PredictMetrics {
        n_test_locations: test_locs.len(),
        n_test_slots: n_slots,
        classification: classification_metrics(&predicted, &truth)?,
        rmse: rmse_map(&sq, n_both),
        rmse_slots: n_both,
    };
    let text = serde_json::to_string_pretty(&metrics)?;
    let path = out.join(PREDICT_METRICS);
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    log::info!(
        "predict: {} slots, held-out kappa {:.3}",
        predictions.len(),
        metrics.classification.kappa
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateSummary {
    pub antennas: usize,
    pub rf_chains: usize,
    pub overhead_reduction_percent: f64,
    pub k_a_grid: Vec<usize>,
    /// Zone ids whose cluster parameters fed the groups, largest first.
    pub zones_used: Vec<usize>,
    pub n_realizations: usize,
}

fn run_evaluate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let zones = read_zone_map(&out.join(ZONE_MAP))?;
    let e = &cfg.evaluate;
    let n_groups = e.chains_per_group.len();

    // The most-covered zones stand in for the active UT groups.
    let mut eligible: Vec<_> = zones
        .iter()
        .filter(|z| z.zone_id != 0 && !z.group_csi.is_empty())
        .collect();
    eligible.sort_by(|a, b| {
        b.locations
            .len()
            .cmp(&a.locations.len())
            .then(a.zone_id.cmp(&b.zone_id))
    });
    if eligible.len() < n_groups {
        return Err(Error::InvalidArgument(format!(
            "need {} non-block zones for the groups, found {}",
            n_groups,
            eligible.len()
        )));
    }
    let selected = &eligible[..n_groups];
    let group_csi: Vec<Vec<ClusterParams>> = selected.iter().map(|z| z.group_csi.clone()).collect();

    let array = ArraySpec {
        rows: e.array_rows,
        cols: e.array_cols,
        element_spacing: e.element_spacing,
    };
    let mut rows: Vec<SweepRow> = Vec::new();
    for &ka in &e.k_a_grid {
        let base = ka / n_groups;
        let extra = ka % n_groups;
        let users_per_group: Vec<usize> = (0..n_groups)
            .map(|g| base + usize::from(g < extra))
            .collect();
        let sweep = SweepConfig {
            array,
            hybrid: HybridConfig {
                chains_per_group: e.chains_per_group.clone(),
                users_per_group,
            },
            group_csi: group_csi.clone(),
            p_t_dbm: e.p_t_dbm.clone(),
            noise_dbm: e.noise_dbm,
            paths_per_cluster: e.paths_per_cluster,
            n_realizations: e.n_realizations,
            rng_seed: subseed(cfg.seed, &format!("sweep:ka={ka}")),
        };
        rows.extend(run_sweep(&sweep)?);
    }
    write_sweep_csv(&out.join(SUMRATE_CSV), &rows)?;

    let summary = EvaluateSummary {
        antennas: array.rows * array.cols,
        rf_chains: e.chains_per_group.iter().sum(),
        overhead_reduction_percent: csi_overhead_reduction(
            array.rows * array.cols,
            e.chains_per_group.iter().sum(),
        ),
        k_a_grid: e.k_a_grid.clone(),
        zones_used: selected.iter().map(|z| z.zone_id).collect(),
        n_realizations: e.n_realizations,
    };
    let text = serde_json::to_string_pretty(&summary)?;
    let path = out.join(EVALUATE_SUMMARY);
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    log::info!(
        "evaluate: {} sweep rows, overhead reduction {:.2}%",
        rows.len(),
        summary.overhead_reduction_percent
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Plot data

/// Rewrites an artifact as a tidy CSV for plotting. Kinds: `validity`
/// (columns c,pc,pe,sc,s,xb), `zones` (x,y,z,zone_id), `sumrate` (the sweep
/// schema), `clusters` (per existent path, parameters plus hard cluster).
pub fn emit_plot_data(out_dir: &Path, kind: &str) -> Result<PathBuf> {
    match kind {
        "validity" => {
            let src = require_artifact(out_dir, VALIDITY_CSV, Stage::Cluster)?;
            let dst = out_dir.join("plot_validity.csv");
            let mut reader = csv::Reader::from_path(&src)?;
            let file = fs::File::create(&dst).map_err(|e| Error::io(dst.display().to_string(), e))?;
            let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
            w.write_record(["c", "pc", "pe", "sc", "s", "xb"])?;
            for row in reader.records() {
                let row = row?;
                w.write_record(row.iter().take(6))?;
            }
            w.flush().map_err(|e| Error::io(dst.display().to_string(), e))?;
            Ok(dst)
        }
        "zones" => {
            let src = require_artifact(out_dir, ZONE_LOCATIONS_CSV, Stage::Zones)?;
            let dst = out_dir.join("plot_zones.csv");
            fs::copy(&src, &dst).map_err(|e| Error::io(dst.display().to_string(), e))?;
            Ok(dst)
        }
        "sumrate" => {
            let src = require_artifact(out_dir, SUMRATE_CSV, Stage::Evaluate)?;
            let dst = out_dir.join("plot_sumrate.csv");
            fs::copy(&src, &dst).map_err(|e| Error::io(dst.display().to_string(), e))?;
            Ok(dst)
        }
        "clusters" => {
            let db = require_artifact(out_dir, PATH_DB, Stage::Trace)?;
            let mem = require_artifact(out_dir, MEMBERSHIPS_CSV, Stage::Cluster)?;
            let records = read_path_db(&db)?;
            let (index, memberships) = read_memberships_csv(&mem)?;
            let assignment = hard_assign(&memberships);
            let dst = out_dir.join("plot_clusters.csv");
            let file = fs::File::create(&dst).map_err(|e| Error::io(dst.display().to_string(), e))?;
            let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
            w.write_record(["aaod", "eaod", "aaoa", "eaoa", "delay_s", "rss_dbm", "cluster"])?;
            for (pos, &global) in index.iter().enumerate() {
                let r = records.get(global).ok_or_else(|| {
                    Error::InvalidArgument(
                        "membership table does not match the path database".into(),
                    )
                })?;
                w.write_record(&[
                    r.aaod.to_string(),
                    r.eaod.to_string(),
                    r.aaoa.to_string(),
                    r.eaoa.to_string(),
                    r.delay_s.to_string(),
                    r.rss_dbm.to_string(),
                    assignment[pos].to_string(),
                ])?;
            }
            w.flush().map_err(|e| Error::io(dst.display().to_string(), e))?;
            Ok(dst)
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown plot kind `{other}`; expected validity, zones, sumrate, or clusters"
        ))),
    }
}

fn require_artifact(out_dir: &Path, name: &str, producer: Stage) -> Result<PathBuf> {
    let path = out_dir.join(name);
    if !path.is_file() {
        return Err(Error::MissingArtifact {
            stage: "plotdata".to_string(),
            artifact: name.to_string(),
            producer: producer.name().to_string(),
        });
    }
    Ok(path)
}

// ---------------------------------------------------------------------------
// Small CSV artifacts

pub fn write_locations_csv(path: &Path, locations: &[Point3]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["x", "y", "z"])?;
    for p in locations {
        w.write_record(&[p.x.to_string(), p.y.to_string(), p.z.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_locations_csv(path: &Path) -> Result<Vec<Point3>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "{}: expected 3 columns, got {}",
                path.display(),
                row.len()
            )));
        }
        let parse = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| {
                Error::InvalidArgument(format!(
                    "{}: bad number `{}`",
                    path.display(),
                    &row[i]
                ))
            })
        };
        out.push(Point3::new(parse(0)?, parse(1)?, parse(2)?));
    }
    Ok(out)
}

/// One row per clustered path: its index in the full path database followed
/// by its membership in each cluster.
pub fn write_memberships_csv(
    path: &Path,
    index: &[usize],
    memberships: &MembershipMatrix,
) -> Result<()> {
    if index.len() != memberships.n_paths() {
        return Err(Error::InvalidArgument(
            "index and membership rows must align".into(),
        ));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["path_index".to_string()];
    header.extend((0..memberships.n_clusters()).map(|j| format!("m{j}")));
    w.write_record(&header)?;
    for (pos, &global) in index.iter().enumerate() {
        let mut row = vec![global.to_string()];
        row.extend(memberships.row(pos).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_memberships_csv(path: &Path) -> Result<(Vec<usize>, MembershipMatrix)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let mut index = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "{}: membership rows need an index and at least one cluster",
                path.display()
            )));
        }
        let idx: usize = row[0].parse().map_err(|_| {
            Error::InvalidArgument(format!("{}: bad path index `{}`", path.display(), &row[0]))
        })?;
        index.push(idx);
        let mut vals = Vec::with_capacity(row.len() - 1);
        for v in row.iter().skip(1) {
            vals.push(v.parse().map_err(|_| {
                Error::InvalidArgument(format!("{}: bad membership `{v}`", path.display()))
            })?);
        }
        rows.push(vals);
    }
    Ok((index, MembershipMatrix::from_rows(&rows)?))
}

fn write_centroids_csv(path: &Path, centroids: &[[f64; 5]]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["cluster", "aaod", "eaod", "aaoa", "eaoa", "delay_s"])?;
    for (j, c) in centroids.iter().enumerate() {
        w.write_record(&[
            j.to_string(),
            c[0].to_string(),
            c[1].to_string(),
            c[2].to_string(),
            c[3].to_string(),
            c[4].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn minimal_config_fills_documented_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 9\nscene = \"room.scene\"").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.scene, PathBuf::from("room.scene"));
        assert_eq!(cfg.preprocess.resolution, 0.5);
        assert_eq!(cfg.preprocess.grid_spacing, 0.5);
        assert_eq!(cfg.radio.frequency_hz, 28e9);
        assert_eq!(cfg.cluster.c_max, 70);
        assert_eq!(cfg.cluster.fuzzifier, 2.0);
        assert_eq!(cfg.zones.membership_threshold, 0.6);
        assert!(cfg.zones.prune);
        assert_eq!(cfg.train.split_ratio, 0.7);
        assert!(!cfg.train.one_step_enabled);
        assert_eq!(cfg.evaluate.array_rows * cfg.evaluate.array_cols, 256);
        assert_eq!(cfg.evaluate.chains_per_group, vec![11, 11]);
        assert_eq!(cfg.evaluate.k_a_grid, vec![2, 4, 6, 8, 10]);
        assert_eq!(cfg.evaluate.noise_dbm, -134.0);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = toml::from_str::<RunConfig>("seed = 1\nscene = \"a\"\ntypo = 3");
        assert!(err.is_err());
    }

    #[test]
    fn section_overrides_apply() {
        let text = r#"
seed = 4
scene = "room.scene"

[preprocess]
grid_spacing = 1.0

[cluster]
c_max = 8

[train]
split_ratio = 0.5

[train.classifier]
epochs = 40

[evaluate]
k_a_grid = [2, 4]
n_realizations = 50
"#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.preprocess.grid_spacing, 1.0);
        assert_eq!(cfg.preprocess.resolution, 0.5);
        assert_eq!(cfg.cluster.c_max, 8);
        assert_eq!(cfg.train.split_ratio, 0.5);
        assert_eq!(cfg.train.classifier.epochs, 40);
        assert_eq!(cfg.train.classifier.batch_size, 4096);
        assert_eq!(cfg.evaluate.k_a_grid, vec![2, 4]);
        assert_eq!(cfg.evaluate.n_realizations, 50);
    }

    #[test]
    fn load_config_resolves_scene_relative_to_config_dir() {
        let dir = tempdir().unwrap();
        let scene = dir.path().join("room.scene");
        fs::write(&scene, "stub").unwrap();
        let cfg_path = dir.path().join("run.toml");
        fs::write(&cfg_path, "seed = 1\nscene = \"room.scene\"").unwrap();
        let cfg = load_config(&cfg_path).unwrap();
        assert_eq!(cfg.scene, scene);
    }

    #[test]
    fn stage_names_round_trip_and_deps_precede() {
        for (i, stage) in Stage::ALL.into_iter().enumerate() {
            assert_eq!(Stage::from_str(stage.name()).unwrap(), stage);
            for dep in stage.deps() {
                let j = Stage::ALL.iter().position(|s| s == dep).unwrap();
                assert!(j < i, "{dep} must precede {stage}");
            }
        }
        assert!(Stage::from_str("paint").is_err());
    }

    #[test]
    fn parse_stages_orders_and_dedupes() {
        let got = parse_stages("trace, preprocess,trace").unwrap();
        assert_eq!(got, vec![Stage::Preprocess, Stage::Trace]);
        assert!(parse_stages("preprocess,warp").is_err());
        assert!(parse_stages(" , ").is_err());
    }

    fn hash_fixture_config(dir: &Path) -> RunConfig {
        let scene = dir.join("room.scene");
        fs::write(&scene, "scene bytes").unwrap();
        RunConfig {
            seed: 3,
            scene,
            ..RunConfig::default()
        }
    }

    #[test]
    fn stage_hashes_isolate_config_sections() {
        let dir = tempdir().unwrap();
        let cfg = hash_fixture_config(dir.path());
        let base = pure_chain(&cfg).unwrap();

        let mut edited = cfg.clone();
        edited.cluster.c_max = 9;
        let changed = pure_chain(&edited).unwrap();
        assert_eq!(base[&Stage::Preprocess], changed[&Stage::Preprocess]);
        assert_eq!(base[&Stage::Trace], changed[&Stage::Trace]);
        assert_ne!(base[&Stage::Cluster], changed[&Stage::Cluster]);
        // Propagates through upstream hashing.
        assert_ne!(base[&Stage::Zones], changed[&Stage::Zones]);
        assert_ne!(base[&Stage::Evaluate], changed[&Stage::Evaluate]);
        // Train does not depend on clustering.
        assert_eq!(base[&Stage::Train], changed[&Stage::Train]);
    }

    #[test]
    fn seed_touches_only_seeded_stages() {
        let dir = tempdir().unwrap();
        let cfg = hash_fixture_config(dir.path());
        let base = pure_chain(&cfg).unwrap();
        let mut reseeded = cfg.clone();
        reseeded.seed = 4;
        let changed = pure_chain(&reseeded).unwrap();
        assert_eq!(base[&Stage::Preprocess], changed[&Stage::Preprocess]);
        assert_eq!(base[&Stage::Trace], changed[&Stage::Trace]);
        assert_ne!(base[&Stage::Cluster], changed[&Stage::Cluster]);
        assert_ne!(base[&Stage::Train], changed[&Stage::Train]);
        assert_ne!(base[&Stage::Evaluate], changed[&Stage::Evaluate]);
    }

    #[test]
    fn scene_bytes_invalidate_the_whole_chain() {
        let dir = tempdir().unwrap();
        let cfg = hash_fixture_config(dir.path());
        let base = pure_chain(&cfg).unwrap();
        fs::write(&cfg.scene, "different bytes").unwrap();
        let changed = pure_chain(&cfg).unwrap();
        for stage in Stage::ALL {
            assert_ne!(base[&stage], changed[&stage], "{stage}");
        }
    }

    #[test]
    fn locations_csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("locations.csv");
        let pts = vec![
            Point3::new(0.5, 1.5, 1.0),
            Point3::new(-2.25, 0.0, 3.5),
            Point3::new(1.0 / 3.0, 7.0, 0.1),
        ];
        write_locations_csv(&path, &pts).unwrap();
        let back = read_locations_csv(&path).unwrap();
        assert_eq!(back, pts);
    }

    #[test]
    fn memberships_csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("memberships.csv");
        let u = MembershipMatrix::from_rows(&[
            vec![0.25, 0.75],
            vec![1.0 / 3.0, 2.0 / 3.0],
            vec![0.9, 0.1],
        ])
        .unwrap();
        let index = vec![2, 5, 11];
        write_memberships_csv(&path, &index, &u).unwrap();
        let (idx, back) = read_memberships_csv(&path).unwrap();
        assert_eq!(idx, index);
        assert_eq!(back, u);
    }

    #[test]
    fn unknown_plot_kind_is_rejected() {
        let dir = tempdir().unwrap();
        let err = emit_plot_data(dir.path(), "sparkline").unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn plot_data_names_missing_producer() {
        let dir = tempdir().unwrap();
        let err = emit_plot_data(dir.path(), "sumrate").unwrap_err();
        match err {
            Error::MissingArtifact {
                artifact, producer, ..
            } => {
                assert_eq!(artifact, SUMRATE_CSV);
                assert_eq!(producer, "evaluate");
            }
            other => panic!("expected MissingArtifact, got {other:?}"),
        }
    }
}
