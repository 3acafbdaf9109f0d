//! End-to-end experiment pipeline behind the command-line driver: ingest,
//! attack, defend and bench stages, their configuration and their on-disk
//! artifacts.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coreset::{approximation_error, compress, CoresetConfig, CoresetQuery, DEFAULT_THETA};
use crate::error::{Error, Result};
use crate::ingest::{parse_checkins, CheckinFormat};
use crate::model::{group_by_user, segment_trajectories, MobilityProfile, Report, Trajectory, UserId};
use crate::optimizer::{FrontierPoint, FrontierReport, DEFAULT_GAMMA};
use crate::privacy::{
    apply, sanitize_until_safe_compiled, smartmask_baseline, utility, LadderStep, OpParams, PrivacyMode,
    SanitizedTrajectory, DEFAULT_UTILITY_FLOOR_M, EMERGENCY_TEMPORAL_WEIGHT,
};
use crate::profiles::{mine_profiles, split_users, MinedProfiles, MinerConfig};
use crate::serverless::{
    run_workload, AllocationProfile, CostConfig, MetricsRow, PayloadCorpus, Scenario, WorkloadSpec,
    DEFAULT_MEMORY_SET_MB,
};
use crate::social::{coverage_from_scores, CompiledProfiles, StrengthConfig};
use crate::synth::{generate, SynthConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SynthConfig),
    File { path: PathBuf, format: CheckinFormat },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SynthConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub window_hours: f64,
    pub window_sweep_hours: Vec<f64>,
    pub train_fraction: f64,
    pub split_seed: u64,
    /// Score the training users against their own profiles.
    pub leakage_check: bool,
    pub miner: MinerConfig,
    pub strength: StrengthConfig,
    pub delta: f64,
    pub delta_sweep: Vec<f64>,
    pub ops: OpParams,
    pub ladder: Vec<PrivacyMode>,
    pub utility_floor_m: f64,
    pub coreset_thetas: Vec<f64>,
    pub knowledge_fractions: Vec<f64>,
    /// Upper edges of the trajectory-length buckets.
    pub length_buckets: Vec<usize>,
    pub workload: WorkloadSpec,
    pub scenarios: Vec<Scenario>,
    pub memory_set: Vec<u32>,
    pub cost: CostConfig,
    pub gamma: f64,
    pub out_dir: PathBuf,
    pub bind: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::default(),
            window_hours: 8.0,
            window_sweep_hours: vec![4.0, 8.0, 24.0],
            train_fraction: 0.6,
            split_seed: 1,
            leakage_check: false,
            miner: MinerConfig::default(),
            strength: StrengthConfig::default(),
            delta: 0.5,
            delta_sweep: vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            ops: OpParams::default(),
            ladder: PrivacyMode::ALL.to_vec(),
            utility_floor_m: DEFAULT_UTILITY_FLOOR_M,
            coreset_thetas: vec![DEFAULT_THETA],
            knowledge_fractions: vec![0.1, 0.25, 0.5, 0.75, 1.0],
            length_buckets: vec![2, 4, 8, 16],
            workload: WorkloadSpec::default(),
            scenarios: Scenario::ALL.to_vec(),
            memory_set: DEFAULT_MEMORY_SET_MB.to_vec(),
            cost: CostConfig::default(),
            gamma: DEFAULT_GAMMA,
            out_dir: PathBuf::from("out"),
            bind: "127.0.0.1:8080".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Route one seed into every random stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let DataSource::Synthetic(s) = &mut self.data {
            s.seed = seed;
        }
        self.split_seed = seed;
        self.ops.rng_seed = seed;
        self.workload.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_hours >= 0.0) || self.window_sweep_hours.iter().any(|h| !(*h >= 0.0)) {
            return Err(Error::InvalidConfig("window lengths must be >= 0".into()));
        }
        self.miner.validate()?;
        self.strength.validate()?;
        self.ops.validate()?;
        self.workload.validate()?;
        self.cost.validate()?;
        if self.ladder.is_empty() {
            return Err(Error::EmptyLadder);
        }
        if self.knowledge_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::InvalidConfig("knowledge fractions must lie in (0, 1]".into()));
        }
        if self.coreset_thetas.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidConfig("coreset thetas must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        for &m in &self.memory_set {
            AllocationProfile::new(m)?;
        }
        if let DataSource::File { path, .. } = &self.data {
            if !path.exists() {
                return Err(Error::Io(format!("{}: no such file", path.display())));
            }
        }
        Ok(())
    }

    /// The attack's strength config, sharing the miner's match key.
    pub fn attack_config(&self) -> StrengthConfig {
        StrengthConfig { match_key: self.miner.match_key, ..self.strength }
    }

    fn window_s(hours: f64) -> i64 {
        (hours * 3600.0).round() as i64
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// All trajectories of every user, segmented with one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStore {
    pub window_s: i64,
    pub profiles: Vec<MobilityProfile>,
}

impl TrajectoryStore {
    pub fn build(reports: &[Report], window_s: i64) -> Result<Self> {
        let profiles = group_by_user(reports.to_vec())
            .into_par_iter()
            .map(|(user, rs)| MobilityProfile::new(user, segment_trajectories(rs, window_s)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrajectoryStore { window_s, profiles })
    }

    pub fn users(&self) -> Vec<UserId> {
        self.profiles.iter().map(|p| p.user_id().to_string()).collect()
    }

    pub fn trajectory_count(&self) -> usize {
        self.profiles.iter().map(|p| p.trajectories().len()).sum()
    }

    fn select(&self, users: &[UserId]) -> Vec<MobilityProfile> {
        let wanted: std::collections::HashSet<&str> = users.iter().map(String::as_str).collect();
        self.profiles.iter().filter(|p| wanted.contains(p.user_id())).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub window_hours: f64,
    pub users: usize,
    pub trajectories: usize,
    pub mean_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutput {
    pub store: TrajectoryStore,
    pub pois: Vec<Report>,
    pub windows: Vec<WindowRow>,
    pub skipped_lines: usize,
}

/// Distinct (location, payload) points in first-seen order.
fn distinct_points(reports: &[Report]) -> Vec<Report> {
    let mut seen = std::collections::HashSet::new();
    reports
        .iter()
        .filter(|r| seen.insert((r.lat.to_bits(), r.lon.to_bits(), r.payload.clone())))
        .map(|r| Report { user_id: "poi".into(), timestamp: 0, ..r.clone() })
        .collect()
}

pub fn load_reports(source: &DataSource) -> Result<(Vec<Report>, Vec<Report>, usize)> {
    match source {
        DataSource::Synthetic(cfg) => {
            let corpus = generate(cfg);
            Ok((corpus.reports(), corpus.poi_reports(), 0))
        }
        DataSource::File { path, format } => {
            let file = File::open(path).map_err(|e| io_error(path, e))?;
            let out = parse_checkins(BufReader::new(file), *format);
            if out.reports.is_empty() {
                let first = out.errors.first().map(|e| format!(" (line {}: {})", e.line, e.message));
                return Err(Error::Io(format!(
                    "{}: no valid check-ins{}",
                    path.display(),
                    first.unwrap_or_default()
                )));
            }
            let pois = distinct_points(&out.reports);
            Ok((out.reports, pois, out.errors.len()))
        }
    }
}

pub fn run_ingest(cfg: &ExperimentConfig) -> Result<IngestOutput> {
    let (reports, pois, skipped_lines) = load_reports(&cfg.data)?;
    let windows = cfg
        .window_sweep_hours
        .iter()
        .map(|&h| {
            let s = TrajectoryStore::build(&reports, ExperimentConfig::window_s(h))?;
            let n = s.trajectory_count();
            let total: usize = s.profiles.iter().map(MobilityProfile::report_count).sum();
            Ok(WindowRow {
                window_hours: h,
                users: s.profiles.len(),
                trajectories: n,
                mean_length: if n == 0 { 0.0 } else { total as f64 / n as f64 },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let store = TrajectoryStore::build(&reports, ExperimentConfig::window_s(cfg.window_hours))?;
    Ok(IngestOutput { store, pois, windows, skipped_lines })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<UserId>,
    pub test: Vec<UserId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub user_id: UserId,
    pub traj_id: String,
    pub length: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub delta: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutput {
    pub split: Split,
    pub profiles: MinedProfiles,
    pub scores: Vec<ScoreRow>,
    pub coverage: Vec<CoverageRow>,
}

pub fn split_store(store: &TrajectoryStore, cfg: &ExperimentConfig) -> Result<Split> {
    let (train, test) = split_users(&store.users(), cfg.train_fraction, cfg.split_seed)?;
    let test = if cfg.leakage_check { train.clone() } else { test };
    Ok(Split { train, test })
}

pub fn test_trajectories(store: &TrajectoryStore, split: &Split) -> Vec<Trajectory> {
    store.select(&split.test).into_iter().flat_map(|p| p.trajectories().to_vec()).collect()
}

pub fn run_attack(store: &TrajectoryStore, cfg: &ExperimentConfig) -> Result<AttackOutput> {
    let split = split_store(store, cfg)?;
    let profiles = mine_profiles(&store.select(&split.train), &cfg.miner)?;
    let compiled = CompiledProfiles::compile(&profiles.profile_set()?, &cfg.attack_config())?;
    let tests = test_trajectories(store, &split);
    if tests.is_empty() {
        return Err(Error::EmptyUsers);
    }
    let scores = tests
        .par_iter()
        .map(|t| {
            Ok(ScoreRow {
                user_id: t.user_id().to_string(),
                traj_id: t.traj_id().to_string(),
                length: t.len(),
                score: compiled.score(t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(UserId, f64)> = scores.iter().map(|s| (s.user_id.clone(), s.score)).collect();
    let coverage = cfg
        .delta_sweep
        .iter()
        .map(|&delta| Ok(CoverageRow { delta, coverage: coverage_from_scores(&pairs, delta)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(AttackOutput { split, profiles, scores, coverage })
}

/// Column label used for each sanitizer in the defense tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseOp {
    None,
    Mode(PrivacyMode),
    Smartmask,
    Ladder,
}

impl DefenseOp {
    pub fn label(&self) -> String {
        match self {
            DefenseOp::None => "none".into(),
            DefenseOp::Mode(m) => m.op().to_string(),
            DefenseOp::Smartmask => "smartmask".into(),
            DefenseOp::Ladder => "ladder".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseSummaryRow {
    pub op: String,
    pub trajectories: usize,
    pub mean_score: f64,
    pub utility_pct: f64,
    pub utility_emergency_pct: f64,
    pub captured_pct: f64,
    pub unsafe_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub op: String,
    pub bucket: String,
    pub trajectories: usize,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoresetRow {
    pub theta: f64,
    pub reports_before: usize,
    pub reports_after: usize,
    pub reduction_pct: f64,
    pub mean_path_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeRow {
    pub op: String,
    pub fraction: f64,
    pub profiles: usize,
    pub captured_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefenseOutput {
    pub summary: Vec<DefenseSummaryRow>,
    pub buckets: Vec<BucketRow>,
    pub coreset: Vec<CoresetRow>,
    pub knowledge: Vec<KnowledgeRow>,
}

impl DefenseOutput {
    pub fn mean_score(&self, op: &str) -> Option<f64> {
        self.summary.iter().find(|r| r.op == op).map(|r| r.mean_score)
    }
}

fn bucket_label(len: usize, edges: &[usize]) -> String {
    let mut lo = 1;
    for &hi in edges {
        if len <= hi {
            return format!("{lo}-{hi}");
        }
        lo = hi + 1;
    }
    format!("{lo}+")
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Per-trajectory seed: the configured seed plus the trajectory's position.
fn seeded(p: &OpParams, i: usize) -> OpParams {
    p.with_seed(p.rng_seed.wrapping_add(i as u64))
}

pub fn run_defense(
    store: &TrajectoryStore,
    pois: &[Report],
    attack: &AttackOutput,
    cfg: &ExperimentConfig,
) -> Result<DefenseOutput> {
    let strength = cfg.attack_config();
    let compiled = CompiledProfiles::compile(&attack.profiles.profile_set()?, &strength)?;
    let tests = test_trajectories(store, &attack.split);
    if tests.is_empty() {
        return Err(Error::EmptyUsers);
    }
    let ladder: Vec<LadderStep> = cfg.ladder.iter().map(|&mode| LadderStep { mode, params: cfg.ops }).collect();

    let mut ops = vec![DefenseOp::None];
    ops.extend(PrivacyMode::ALL.iter().map(|&m| DefenseOp::Mode(m)));
    ops.push(DefenseOp::Smartmask);
    ops.push(DefenseOp::Ladder);

    let n_profiles = compiled.len();
    let prefixes: Vec<(f64, usize)> = cfg
        .knowledge_fractions
        .iter()
        .map(|&f| (f, ((f * n_profiles as f64).ceil() as usize).clamp(1, n_profiles)))
        .collect();

    let mut summary = Vec::new();
    let mut buckets = Vec::new();
    let mut knowledge = Vec::new();
    for op in ops {
        let per_traj = tests
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                let params = seeded(&cfg.ops, i);
                let (s, score): (SanitizedTrajectory, f64) = match op {
                    DefenseOp::None => {
                        let s = SanitizedTrajectory::identity(t);
                        let score = compiled.score(&s.released)?;
                        (s, score)
                    }
                    DefenseOp::Mode(m) => {
                        let s = apply(m, t, &params)?;
                        let score = compiled.score(&s.released)?;
                        (s, score)
                    }
                    DefenseOp::Smartmask => {
                        let s = smartmask_baseline(t, pois)?;
                        let score = compiled.score(&s.released)?;
                        (s, score)
                    }
                    DefenseOp::Ladder => {
                        let steps: Vec<LadderStep> =
                            ladder.iter().map(|st| LadderStep { mode: st.mode, params }).collect();
                        let out = sanitize_until_safe_compiled(t, &compiled, cfg.delta, &steps)?;
                        (out.sanitized, out.score)
                    }
                };
                let u = utility(&s, t, 0.0, cfg.utility_floor_m)?.percent;
                let ue = utility(&s, t, EMERGENCY_TEMPORAL_WEIGHT, cfg.utility_floor_m)?.percent;
                let prefix_scores = prefixes
                    .iter()
                    .map(|&(_, n)| compiled.score_prefix(&s.released, n))
                    .collect::<Result<Vec<f64>>>()?;
                Ok((t.len(), score, u, ue, s.unsafe_flag, prefix_scores))
            })
            .collect::<Result<Vec<_>>>()?;

        let label = op.label();
        let n = per_traj.len();
        summary.push(DefenseSummaryRow {
            op: label.clone(),
            trajectories: n,
            mean_score: mean(per_traj.iter().map(|r| r.1)),
            utility_pct: mean(per_traj.iter().map(|r| r.2)),
            utility_emergency_pct: mean(per_traj.iter().map(|r| r.3)),
            captured_pct: 100.0 * per_traj.iter().filter(|r| r.1 >= cfg.delta).count() as f64 / n as f64,
            unsafe_count: per_traj.iter().filter(|r| r.4).count(),
        });
        let mut by_bucket: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
        for r in &per_traj {
            let label = bucket_label(r.0, &cfg.length_buckets);
            let order = cfg.length_buckets.iter().position(|&e| r.0 <= e).unwrap_or(cfg.length_buckets.len());
            by_bucket.entry((order, label)).or_default().push(r.1);
        }
        for ((_, bucket), scores) in by_bucket {
            buckets.push(BucketRow {
                op: label.clone(),
                bucket,
                trajectories: scores.len(),
                mean_score: mean(scores.into_iter()),
            });
        }
        for (j, &(fraction, profiles)) in prefixes.iter().enumerate() {
            let captured = per_traj.iter().filter(|r| r.5[j] >= cfg.delta).count();
            knowledge.push(KnowledgeRow {
                op: label.clone(),
                fraction,
                profiles,
                captured_pct: 100.0 * captured as f64 / n as f64,
            });
        }
    }

    let coreset = cfg
        .coreset_thetas
        .iter()
        .map(|&theta| {
            let cc = CoresetConfig::new(theta)?;
            let compressed: Vec<Trajectory> = tests.par_iter().map(|t| compress(t, &cc)).collect();
            let before: usize = tests.iter().map(Trajectory::len).sum();
            let after: usize = compressed.iter().map(Trajectory::len).sum();
            let errors: Vec<f64> = tests
                .iter()
                .zip(&compressed)
                .filter_map(|(t, c)| approximation_error(t, c, CoresetQuery::PathLength).ok())
                .collect();
            Ok(CoresetRow {
                theta,
                reports_before: before,
                reports_after: after,
                reduction_pct: 100.0 * (before - after) as f64 / before as f64,
                mean_path_error: mean(errors.into_iter()),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DefenseOutput { summary, buckets, coreset, knowledge })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFrontier {
    pub scenario: Scenario,
    #[serde(flatten)]
    pub report: FrontierReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub rows: Vec<MetricsRow>,
    pub frontiers: Vec<ScenarioFrontier>,
}

impl BenchOutput {
    pub fn infeasible(&self) -> bool {
        self.frontiers.iter().any(|f| f.report.infeasible)
    }
}

pub fn run_bench(store: &TrajectoryStore, cfg: &ExperimentConfig) -> Result<BenchOutput> {
    let corpus = PayloadCorpus::from_profiles(&store.profiles);
    let allocs = cfg.memory_set.iter().map(|&m| AllocationProfile::new(m)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut frontiers = Vec::new();
    for &scenario in &cfg.scenarios {
        let w = WorkloadSpec { scenario, ..cfg.workload };
        let points = allocs
            .par_iter()
            .map(|a| Ok((a, run_workload(&w, a, &corpus)?)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(|(a, m)| {
                let p = FrontierPoint::evaluate(a, &m, &cfg.cost);
                rows.push(MetricsRow::new(&w, a, &p.metrics, &cfg.cost));
                p
            })
            .collect();
        frontiers.push(ScenarioFrontier { scenario, report: FrontierReport::build(points, &cfg.cost, cfg.gamma)? });
    }
    Ok(BenchOutput { rows, frontiers })
}

/// Artifact files written by each stage, relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, BTreeMap<String, String>>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        read_json(&path)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn record(&mut self, stage: &str, entries: &[(&str, &str)]) {
        self.stages
            .insert(stage.into(), entries.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect());
    }

    /// Path of an artifact another stage declared.
    pub fn artifact(&self, dir: &Path, stage: &str, name: &str) -> Result<PathBuf> {
        self.stages
            .get(stage)
            .and_then(|s| s.get(name))
            .map(|f| dir.join(f))
            .ok_or_else(|| Error::Io(format!("{}: run `{stage}` first (no {name} artifact)", dir.display())))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_error(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| io_error(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| io_error(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn prepare(dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    Manifest::load(dir)
}

pub fn cmd_ingest(cfg: &ExperimentConfig) -> Result<IngestOutput> {
    let dir = &cfg.out_dir;
    let mut manifest = prepare(dir)?;
    let out = run_ingest(cfg)?;
    write_json(&dir.join("store.json"), &out.store)?;
    write_json(&dir.join("pois.json"), &out.pois)?;
    write_csv(&dir.join("windows.csv"), &out.windows)?;
    manifest.record("ingest", &[("store", "store.json"), ("pois", "pois.json"), ("windows", "windows.csv")]);
    manifest.save(dir)?;
    Ok(out)
}

fn load_store(cfg: &ExperimentConfig, manifest: &Manifest) -> Result<TrajectoryStore> {
    read_json(&manifest.artifact(&cfg.out_dir, "ingest", "store")?)
}

pub fn cmd_attack(cfg: &ExperimentConfig) -> Result<AttackOutput> {
    let dir = &cfg.out_dir;
    let mut manifest = prepare(dir)?;
    let store = load_store(cfg, &manifest)?;
    let out = run_attack(&store, cfg)?;
    write_json(&dir.join("split.json"), &out.split)?;
    write_json(&dir.join("profiles.json"), &out.profiles)?;
    write_csv(&dir.join("attack_scores.csv"), &out.scores)?;
    write_csv(&dir.join("coverage.csv"), &out.coverage)?;
    manifest.record(
        "attack",
        &[
            ("split", "split.json"),
            ("profiles", "profiles.json"),
            ("scores", "attack_scores.csv"),
            ("coverage", "coverage.csv"),
        ],
    );
    manifest.save(dir)?;
    Ok(out)
}

pub fn cmd_defend(cfg: &ExperimentConfig) -> Result<DefenseOutput> {
    let dir = &cfg.out_dir;
    let mut manifest = prepare(dir)?;
    let store = load_store(cfg, &manifest)?;
    let pois: Vec<Report> = read_json(&manifest.artifact(dir, "ingest", "pois")?)?;
    let split: Split = read_json(&manifest.artifact(dir, "attack", "split")?)?;
    let profiles: MinedProfiles = read_json(&manifest.artifact(dir, "attack", "profiles")?)?;
    let attack = AttackOutput { split, profiles, scores: Vec::new(), coverage: Vec::new() };
    let out = run_defense(&store, &pois, &attack, cfg)?;
    write_csv(&dir.join("defense_summary.csv"), &out.summary)?;
    write_csv(&dir.join("defense_buckets.csv"), &out.buckets)?;
    write_csv(&dir.join("coreset.csv"), &out.coreset)?;
    write_csv(&dir.join("knowledge.csv"), &out.knowledge)?;
    manifest.record(
        "defend",
        &[
            ("summary", "defense_summary.csv"),
            ("buckets", "defense_buckets.csv"),
            ("coreset", "coreset.csv"),
            ("knowledge", "knowledge.csv"),
        ],
    );
    manifest.save(dir)?;
    Ok(out)
}

pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<BenchOutput> {
    let dir = &cfg.out_dir;
    let mut manifest = prepare(dir)?;
    let store = load_store(cfg, &manifest)?;
    let out = run_bench(&store, cfg)?;
    write_csv(&dir.join("metrics.csv"), &out.rows)?;
    write_json(&dir.join("frontier.json"), &out.frontiers)?;
    manifest.record("bench", &[("metrics", "metrics.csv"), ("frontier", "frontier.json")]);
    manifest.save(dir)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            data: DataSource::Synthetic(SynthConfig::small(30, 900, 5)),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn bucket_labels() {
        let e = [2, 4, 8];
        assert_eq!(bucket_label(1, &e), "1-2");
        assert_eq!(bucket_label(3, &e), "3-4");
        assert_eq!(bucket_label(8, &e), "5-8");
        assert_eq!(bucket_label(9, &e), "9+");
    }

    #[test]
    fn toml_round_trip() {
        let cfg = small();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        let partial = ExperimentConfig::from_toml_str("delta = 0.4\n[data]\nkind = \"synthetic\"\nusers = 12\n").unwrap();
        assert_eq!(partial.delta, 0.4);
        assert!(matches!(partial.data, DataSource::Synthetic(ref s) if s.users == 12));
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(ExperimentConfig::from_toml_str("gamma = 1.5").is_err());
        assert!(ExperimentConfig::from_toml_str("ladder = []").is_err());
        assert!(ExperimentConfig::from_toml_str("[data]\nkind = \"file\"\npath = \"/no/such\"\nformat = \"csv\"").is_err());
    }

    #[test]
    fn seed_override_reaches_every_stage() {
        let cfg = small().with_seed(99);
        assert_eq!(cfg.split_seed, 99);
        assert_eq!(cfg.ops.rng_seed, 99);
        assert_eq!(cfg.workload.seed, 99);
        assert!(matches!(cfg.data, DataSource::Synthetic(ref s) if s.seed == 99));
    }

    #[test]
    fn ingest_small_synthetic() {
        let out = run_ingest(&small()).unwrap();
        assert_eq!(out.store.profiles.len(), 30);
        assert_eq!(out.windows.len(), 3);
        let total: usize = out.store.profiles.iter().map(MobilityProfile::report_count).sum();
        assert_eq!(total, 900);
    }

    #[test]
    fn attack_then_defend() {
        let cfg = small();
        let ing = run_ingest(&cfg).unwrap();
        let att = run_attack(&ing.store, &cfg).unwrap();
        assert_eq!(att.split.train.len(), 18);
        assert!(att.coverage.windows(2).all(|w| w[1].coverage <= w[0].coverage));
        let def = run_defense(&ing.store, &ing.pois, &att, &cfg).unwrap();
        assert_eq!(def.summary.len(), 7);
        let pc = def.summary.iter().find(|r| r.op == "path_confusion").unwrap();
        assert_eq!(pc.utility_pct, 100.0);
        let tc = def.summary.iter().find(|r| r.op == "temp_cloak").unwrap();
        assert_eq!(tc.utility_pct, 100.0);
        assert!(tc.utility_emergency_pct < 100.0);
    }

    #[test]
    fn leakage_mode_scores_training_users() {
        let cfg = ExperimentConfig {
            leakage_check: true,
            strength: StrengthConfig { alpha: 1.0, ..StrengthConfig::default() },
            ..small()
        };
        let ing = run_ingest(&cfg).unwrap();
        let att = run_attack(&ing.store, &cfg).unwrap();
        assert_eq!(att.split.test, att.split.train);
        assert!(att.scores.iter().all(|s| s.score == 1.0));
    }
}
