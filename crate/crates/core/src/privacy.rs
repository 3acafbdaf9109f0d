//! Trajectory sanitization: spatial cloaking, temporal cloaking, dummy
//! locations, path confusion, the nearest-POI baseline, the utility metric and
//! the δ-constrained sanitization ladder.
//!
//! Randomized operations draw from `ChaCha8Rng::seed_from_u64(rng_seed)`, one
//! generator per call, in this order:
//! - `temp_cloak`: one `gen_range(shift_min..=shift_max)` per report, in input order.
//! - `dummy_locations`: per report in input order, per dummy, a bearing
//!   `gen_range(0..2π)` then `u = gen::<f64>()`; the distance is `radius·√u`.
//! - `path_confusion`: one `SliceRandom::shuffle` per block, blocks in order.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{destination, haversine_m};
use crate::model::{to_cell, GridSpec, Report, Trajectory};
use crate::social::{CompiledProfiles, ProfileSet, StrengthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyMode {
    LooseDummy,
    LoosePathconf,
    ModerateCloak,
    StrictTempcloak,
}

impl PrivacyMode {
    pub const ALL: [PrivacyMode; 4] =
        [PrivacyMode::LooseDummy, PrivacyMode::LoosePathconf, PrivacyMode::ModerateCloak, PrivacyMode::StrictTempcloak];

    pub fn op(self) -> OpKind {
        match self {
            PrivacyMode::LooseDummy => OpKind::DummyLocations,
            PrivacyMode::LoosePathconf => OpKind::PathConfusion,
            PrivacyMode::ModerateCloak => OpKind::Cloak,
            PrivacyMode::StrictTempcloak => OpKind::TempCloak,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PrivacyMode::LooseDummy => "loose_dummy",
            PrivacyMode::LoosePathconf => "loose_pathconf",
            PrivacyMode::ModerateCloak => "moderate_cloak",
            PrivacyMode::StrictTempcloak => "strict_tempcloak",
        }
    }
}

impl fmt::Display for PrivacyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accepts either the mode name (`moderate_cloak`) or the operation name (`cloak`).
impl FromStr for PrivacyMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        PrivacyMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s || m.op().as_str() == s)
            .ok_or_else(|| format!("unknown privacy operation {s:?}"))
    }
}

/// What produced a sanitized trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    None,
    DummyLocations,
    PathConfusion,
    Cloak,
    TempCloak,
    Smartmask,
}

impl OpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::None => "none",
            OpKind::DummyLocations => "dummy_locations",
            OpKind::PathConfusion => "path_confusion",
            OpKind::Cloak => "cloak",
            OpKind::TempCloak => "temp_cloak",
            OpKind::Smartmask => "smartmask",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpParams {
    /// Cloaking grid.
    pub grid: GridSpec,
    /// Temporal cloaking shift bounds, seconds.
    pub shift_min: i64,
    pub shift_max: i64,
    /// Dummies generated per true report.
    pub dummy_count: usize,
    pub dummy_radius: f64,
    /// Path confusion block size q.
    pub window_q: usize,
    pub rng_seed: u64,
}

impl Default for OpParams {
    fn default() -> Self {
        OpParams {
            grid: GridSpec::new(0.005).expect("positive"),
            shift_min: 0,
            shift_max: 7200,
            dummy_count: 2,
            dummy_radius: 200.0,
            window_q: 3,
            rng_seed: 0,
        }
    }
}

impl OpParams {
    pub fn validate(&self) -> Result<()> {
        if self.shift_min > self.shift_max {
            return Err(Error::InvalidConfig(format!(
                "shift_min {} exceeds shift_max {}",
                self.shift_min, self.shift_max
            )));
        }
        if !(self.dummy_radius >= 0.0) {
            return Err(Error::InvalidConfig(format!("dummy_radius {} must be >= 0", self.dummy_radius)));
        }
        if self.window_q < 1 {
            return Err(Error::InvalidConfig("window_q must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, rng_seed: u64) -> Self {
        OpParams { rng_seed, ..self }
    }
}

/// A released trajectory with, for every released report, the index of the
/// true report it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SanitizedWire", try_from = "SanitizedWire")]
pub struct SanitizedTrajectory {
    pub released: Trajectory,
    pub provenance: Vec<usize>,
    pub op_applied: OpKind,
    pub unsafe_flag: bool,
}

#[derive(Serialize, Deserialize)]
struct SanitizedWire {
    op: OpKind,
    traj_id: String,
    user_id: String,
    released: Vec<Report>,
    provenance: Vec<usize>,
    #[serde(default)]
    unsafe_flag: bool,
}

impl From<SanitizedTrajectory> for SanitizedWire {
    fn from(s: SanitizedTrajectory) -> Self {
        SanitizedWire {
            op: s.op_applied,
            traj_id: s.released.traj_id().to_string(),
            user_id: s.released.user_id().to_string(),
            released: s.released.into_reports(),
            provenance: s.provenance,
            unsafe_flag: s.unsafe_flag,
        }
    }
}

impl TryFrom<SanitizedWire> for SanitizedTrajectory {
    type Error = Error;

    fn try_from(w: SanitizedWire) -> Result<Self> {
        if w.provenance.len() != w.released.len() {
            return Err(Error::MissingProvenance(w.provenance.len().min(w.released.len())));
        }
        Ok(SanitizedTrajectory {
            released: Trajectory::new(w.traj_id, w.user_id, w.released)?,
            provenance: w.provenance,
            op_applied: w.op,
            unsafe_flag: w.unsafe_flag,
        })
    }
}

impl SanitizedTrajectory {
    pub fn identity(tr: &Trajectory) -> Self {
        SanitizedTrajectory {
            released: tr.clone(),
            provenance: (0..tr.len()).collect(),
            op_applied: OpKind::None,
            unsafe_flag: false,
        }
    }

    fn build(tr: &Trajectory, reports: Vec<Report>, provenance: Vec<usize>, op: OpKind) -> Self {
        SanitizedTrajectory {
            released: tr.with_reports(reports).expect("sanitizers keep timestamps ordered and coordinates valid"),
            provenance,
            op_applied: op,
            unsafe_flag: false,
        }
    }
}

fn clamp_position(lat: f64, lon: f64) -> (f64, f64) {
    (lat.clamp(-90.0, 90.0), lon.clamp(-180.0, 180.0))
}

/// Replace each location by the center of its grid cell.
pub fn cloak(tr: &Trajectory, p: &OpParams) -> SanitizedTrajectory {
    let reports = tr
        .reports()
        .iter()
        .map(|r| {
            let (lat, lon) = p.grid.cell_center(to_cell(r, &p.grid));
            let (lat, lon) = clamp_position(lat, lon);
            r.moved_to(lat, lon)
        })
        .collect();
    SanitizedTrajectory::build(tr, reports, (0..tr.len()).collect(), OpKind::Cloak)
}

/// Shift every timestamp by an independent uniform draw, then restore
/// timestamp order (stable). Shifted timestamps saturate at 0.
pub fn temp_cloak(tr: &Trajectory, p: &OpParams) -> Result<SanitizedTrajectory> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
    let mut shifted: Vec<(usize, Report)> = tr
        .reports()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let shift = rng.gen_range(p.shift_min..=p.shift_max);
            let mut r = r.clone();
            r.timestamp = r.timestamp.saturating_add(shift).max(0);
            (i, r)
        })
        .collect();
    shifted.sort_by_key(|(_, r)| r.timestamp);
    let (provenance, reports) = shifted.into_iter().unzip();
    Ok(SanitizedTrajectory::build(tr, reports, provenance, OpKind::TempCloak))
}

/// Release each true report followed by `dummy_count` reports drawn
/// uniformly from the disk of radius `dummy_radius` meters around it.
pub fn dummy_locations(tr: &Trajectory, p: &OpParams) -> Result<SanitizedTrajectory> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
    let n = tr.len() * (p.dummy_count + 1);
    let mut reports = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for (i, r) in tr.reports().iter().enumerate() {
        reports.push(r.clone());
        provenance.push(i);
        for _ in 0..p.dummy_count {
            let bearing = rng.gen_range(0.0..std::f64::consts::TAU);
            let u: f64 = rng.gen();
            let (lat, lon) = destination(r.lat, r.lon, p.dummy_radius * u.sqrt(), bearing);
            let (lat, lon) = clamp_position(lat, lon);
            reports.push(r.moved_to(lat, lon));
            provenance.push(i);
        }
    }
    Ok(SanitizedTrajectory::build(tr, reports, provenance, OpKind::DummyLocations))
}

/// Permute locations and payloads within consecutive blocks of `window_q`
/// reports; timestamps stay in their original slots.
pub fn path_confusion(tr: &Trajectory, p: &OpParams) -> Result<SanitizedTrajectory> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
    let src = tr.reports();
    let mut perm: Vec<usize> = (0..src.len()).collect();
    for block in perm.chunks_mut(p.window_q) {
        block.shuffle(&mut rng);
    }
    let reports = perm
        .iter()
        .enumerate()
        .map(|(slot, &from)| Report { timestamp: src[slot].timestamp, ..src[from].clone() })
        .collect();
    Ok(SanitizedTrajectory::build(tr, reports, perm, OpKind::PathConfusion))
}

/// Snap every report to the nearest point of interest (haversine, first POI
/// wins ties). The POI's payload replaces the report's when the POI has one.
pub fn smartmask_baseline(tr: &Trajectory, pois: &[Report]) -> Result<SanitizedTrajectory> {
    if pois.is_empty() {
        return Err(Error::EmptyPois);
    }
    let reports = tr
        .reports()
        .iter()
        .map(|r| {
            let mut best = &pois[0];
            let mut best_d = f64::INFINITY;
            for poi in pois {
                let d = haversine_m(r.lat, r.lon, poi.lat, poi.lon);
                if d < best_d {
                    best_d = d;
                    best = poi;
                }
            }
            Report {
                lat: best.lat,
                lon: best.lon,
                payload: best.payload.clone().or_else(|| r.payload.clone()),
                ..r.clone()
            }
        })
        .collect();
    Ok(SanitizedTrajectory::build(tr, reports, (0..tr.len()).collect(), OpKind::Smartmask))
}

/// Apply one ladder mode.
pub fn apply(mode: PrivacyMode, tr: &Trajectory, p: &OpParams) -> Result<SanitizedTrajectory> {
    match mode {
        PrivacyMode::LooseDummy => dummy_locations(tr, p),
        PrivacyMode::LoosePathconf => path_confusion(tr, p),
        PrivacyMode::ModerateCloak => {
            p.validate()?;
            Ok(cloak(tr, p))
        }
        PrivacyMode::StrictTempcloak => temp_cloak(tr, p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utility {
    pub raw: f64,
    pub percent: f64,
}

/// Location-based-app setting: distance only.
pub const DEFAULT_TEMPORAL_WEIGHT: f64 = 0.0;
/// Emergency-response setting: one meter per second of delay.
pub const EMERGENCY_TEMPORAL_WEIGHT: f64 = 1.0;
pub const DEFAULT_UTILITY_FLOOR_M: f64 = 1.0;

/// Inverse-distance utility. Each released report is paired with its
/// provenance source; `d = sqrt(d_geo² + (w_t·Δτ)²)` floored at `floor_m`,
/// `raw = Σ 1/√d`, `percent = 100·raw / (n/√floor_m)`.
pub fn utility(s: &SanitizedTrajectory, truth: &Trajectory, temporal_weight: f64, floor_m: f64) -> Result<Utility> {
    if !(floor_m > 0.0) {
        return Err(Error::InvalidConfig(format!("utility floor {floor_m} must be > 0")));
    }
    if !(temporal_weight >= 0.0) {
        return Err(Error::InvalidConfig(format!("temporal weight {temporal_weight} must be >= 0")));
    }
    let released = s.released.reports();
    let mut raw = 0.0;
    for (i, r) in released.iter().enumerate() {
        let src = s
            .provenance
            .get(i)
            .and_then(|&j| truth.reports().get(j))
            .ok_or(Error::MissingProvenance(i))?;
        let d_geo = haversine_m(r.lat, r.lon, src.lat, src.lon);
        let d_time = temporal_weight * (r.timestamp - src.timestamp) as f64;
        let d = d_geo.hypot(d_time).max(floor_m);
        raw += 1.0 / d.sqrt();
    }
    let best = released.len() as f64 / floor_m.sqrt();
    Ok(Utility { raw, percent: 100.0 * raw / best })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    pub mode: PrivacyMode,
    #[serde(default)]
    pub params: OpParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderOutcome {
    pub sanitized: SanitizedTrajectory,
    pub score: f64,
    /// Index of the chosen ladder step.
    pub step: usize,
}

/// Try ladder steps in order, each on the original trajectory; return the
/// first whose score is below `delta`, otherwise the lowest-scoring one with
/// `unsafe_flag` set.
pub fn sanitize_until_safe(
    tr: &Trajectory,
    set: &ProfileSet,
    delta: f64,
    ladder: &[LadderStep],
    cfg: &StrengthConfig,
) -> Result<LadderOutcome> {
    let compiled = CompiledProfiles::compile(set, cfg)?;
    sanitize_until_safe_compiled(tr, &compiled, delta, ladder)
}

pub fn sanitize_until_safe_compiled(
    tr: &Trajectory,
    compiled: &CompiledProfiles,
    delta: f64,
    ladder: &[LadderStep],
) -> Result<LadderOutcome> {
    if ladder.is_empty() {
        return Err(Error::EmptyLadder);
    }
    let mut best: Option<LadderOutcome> = None;
    for (step, entry) in ladder.iter().enumerate() {
        let sanitized = apply(entry.mode, tr, &entry.params)?;
        let score = compiled.score(&sanitized.released)?;
        if score < delta {
            return Ok(LadderOutcome { sanitized, score, step });
        }
        if best.as_ref().is_none_or(|b| score < b.score) {
            best = Some(LadderOutcome { sanitized, score, step });
        }
    }
    let mut out = best.expect("ladder is non-empty");
    out.sanitized.unsafe_flag = true;
    Ok(out)
}
