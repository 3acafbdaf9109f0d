//! Core domain types: reports, trajectories, mobility profiles, and the
//! spatial grid / match-key machinery that turns reports into symbols.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type UserId = String;

/// Default cell edge used for spatial matching when reports carry no payload.
pub const DEFAULT_MATCH_CELL_DEG: f64 = 0.001;

/// One timestamped, geolocated datum shared by a user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReport")]
pub struct Report {
    pub user_id: UserId,
    pub lat: f64,
    pub lon: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

#[derive(Deserialize)]
struct RawReport {
    user_id: UserId,
    lat: f64,
    lon: f64,
    timestamp: i64,
    #[serde(default)]
    payload: Option<String>,
}

impl TryFrom<RawReport> for Report {
    type Error = Error;

    fn try_from(r: RawReport) -> Result<Self> {
        Report::new(r.user_id, r.lat, r.lon, r.timestamp, r.payload)
    }
}

impl Report {
    pub fn new(
        user_id: impl Into<UserId>,
        lat: f64,
        lon: f64,
        timestamp: i64,
        payload: Option<String>,
    ) -> Result<Self> {
        let report = Report { user_id: user_id.into(), lat, lon, timestamp, payload };
        report.validate()?;
        Ok(report)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::InvalidReport(format!("lat {} outside [-90, 90]", self.lat)));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::InvalidReport(format!("lon {} outside [-180, 180]", self.lon)));
        }
        if self.timestamp < 0 {
            return Err(Error::InvalidReport(format!("timestamp {} is negative", self.timestamp)));
        }
        Ok(())
    }

    /// Copy of this report moved to a new position.
    pub fn moved_to(&self, lat: f64, lon: f64) -> Report {
        Report { lat, lon, ..self.clone() }
    }
}

/// Ordered, non-empty report sequence with identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory")]
pub struct Trajectory {
    traj_id: String,
    user_id: UserId,
    reports: Vec<Report>,
}

#[derive(Deserialize)]
struct RawTrajectory {
    traj_id: String,
    user_id: UserId,
    reports: Vec<Report>,
}

impl TryFrom<RawTrajectory> for Trajectory {
    type Error = Error;

    fn try_from(t: RawTrajectory) -> Result<Self> {
        Trajectory::new(t.traj_id, t.user_id, t.reports)
    }
}

impl Trajectory {
    pub fn new(
        traj_id: impl Into<String>,
        user_id: impl Into<UserId>,
        reports: Vec<Report>,
    ) -> Result<Self> {
        let traj_id = traj_id.into();
        if reports.is_empty() {
            return Err(Error::InvalidTrajectory(format!("trajectory {traj_id} has no reports")));
        }
        if let Some(w) = reports.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
            return Err(Error::InvalidTrajectory(format!(
                "trajectory {traj_id}: timestamp decreases at report {}",
                w + 1
            )));
        }
        for r in &reports {
            r.validate()?;
        }
        Ok(Trajectory { traj_id, user_id: user_id.into(), reports })
    }

    pub fn traj_id(&self) -> &str {
        &self.traj_id
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn reports(&self) -> &[Report] {
        &self.reports
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn into_reports(self) -> Vec<Report> {
        self.reports
    }

    /// Same identity, different reports. Re-validates.
    pub fn with_reports(&self, reports: Vec<Report>) -> Result<Trajectory> {
        Trajectory::new(self.traj_id.clone(), self.user_id.clone(), reports)
    }

    pub fn symbols(&self, key: &MatchKey) -> Result<Vec<Symbol>> {
        self.reports.iter().map(|r| match_symbol(r, key)).collect()
    }
}

/// A user's set of trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct MobilityProfile {
    user_id: UserId,
    trajectories: Vec<Trajectory>,
}

#[derive(Deserialize)]
struct RawProfile {
    user_id: UserId,
    trajectories: Vec<Trajectory>,
}

impl TryFrom<RawProfile> for MobilityProfile {
    type Error = Error;

    fn try_from(p: RawProfile) -> Result<Self> {
        MobilityProfile::new(p.user_id, p.trajectories)
    }
}

impl MobilityProfile {
    pub fn new(user_id: impl Into<UserId>, trajectories: Vec<Trajectory>) -> Result<Self> {
        let user_id = user_id.into();
        if trajectories.is_empty() {
            return Err(Error::InvalidProfile(format!("profile of {user_id} has no trajectories")));
        }
        if let Some(t) = trajectories.iter().find(|t| t.user_id() != user_id) {
            return Err(Error::InvalidProfile(format!(
                "trajectory {} belongs to {} not {user_id}",
                t.traj_id(),
                t.user_id()
            )));
        }
        Ok(MobilityProfile { user_id, trajectories })
    }

    /// Lift a single trajectory to a one-trajectory profile.
    pub fn from_trajectory(tr: Trajectory) -> Self {
        MobilityProfile { user_id: tr.user_id.clone(), trajectories: vec![tr] }
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn report_count(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct GridSpec {
    cell_size_deg: f64,
}

impl TryFrom<f64> for GridSpec {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        GridSpec::new(v)
    }
}

impl From<GridSpec> for f64 {
    fn from(g: GridSpec) -> f64 {
        g.cell_size_deg
    }
}

impl GridSpec {
    pub fn new(cell_size_deg: f64) -> Result<Self> {
        if cell_size_deg > 0.0 && cell_size_deg.is_finite() {
            Ok(GridSpec { cell_size_deg })
        } else {
            Err(Error::InvalidConfig(format!("cell size {cell_size_deg} must be > 0")))
        }
    }

    pub fn cell_size_deg(&self) -> f64 {
        self.cell_size_deg
    }

    pub fn cell_center(&self, cell: Cell) -> (f64, f64) {
        (
            (cell.lat_idx as f64 + 0.5) * self.cell_size_deg,
            (cell.lon_idx as f64 + 0.5) * self.cell_size_deg,
        )
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { cell_size_deg: DEFAULT_MATCH_CELL_DEG }
    }
}

/// Integer grid coordinate (floor convention).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub lat_idx: i64,
    pub lon_idx: i64,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lat_idx, self.lon_idx)
    }
}

pub fn to_cell(r: &Report, g: &GridSpec) -> Cell {
    Cell {
        lat_idx: (r.lat / g.cell_size_deg).floor() as i64,
        lon_idx: (r.lon / g.cell_size_deg).floor() as i64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Cell,
    Category,
    CellAndCategory,
}

/// Defines when two reports count as "the same" for sequence similarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchKey {
    pub mode: MatchMode,
    #[serde(default)]
    pub grid: GridSpec,
    /// When set, reports also have to fall in the same time-of-day bin
    /// (seconds since UTC midnight divided by this width).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_bin_s: Option<u32>,
}

impl MatchKey {
    pub fn cell(grid: GridSpec) -> Self {
        MatchKey { mode: MatchMode::Cell, grid, time_bin_s: None }
    }

    pub fn category() -> Self {
        MatchKey { mode: MatchMode::Category, grid: GridSpec::default(), time_bin_s: None }
    }

    pub fn with_time_bin(self, seconds: u32) -> Result<Self> {
        if seconds == 0 {
            return Err(Error::InvalidConfig("time bin must be > 0 seconds".into()));
        }
        Ok(MatchKey { time_bin_s: Some(seconds), ..self })
    }

    /// Category matching when every report carries a payload, otherwise
    /// spatial matching on 0.001° cells.
    pub fn default_for<'a>(reports: impl IntoIterator<Item = &'a Report>) -> Self {
        let mut any = false;
        let all_payload = reports.into_iter().all(|r| {
            any = true;
            r.payload.is_some()
        });
        if any && all_payload {
            MatchKey::category()
        } else {
            MatchKey::cell(GridSpec::default())
        }
    }
}

impl Default for MatchKey {
    fn default() -> Self {
        MatchKey::cell(GridSpec::default())
    }
}

/// Report-equality alphabet for sequence similarity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symbol {
    Cell(Cell),
    Category(String),
    CellCategory(Cell, String),
    /// A symbol qualified by its time-of-day bin.
    Timed(Box<Symbol>, i64),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Cell(c) => write!(f, "{c}"),
            Symbol::Category(s) => f.write_str(s),
            Symbol::CellCategory(c, s) => write!(f, "{c}/{s}"),
            Symbol::Timed(s, bin) => write!(f, "{s}@{bin}"),
        }
    }
}

pub fn match_symbol(r: &Report, k: &MatchKey) -> Result<Symbol> {
    let base = match k.mode {
        MatchMode::Cell => Symbol::Cell(to_cell(r, &k.grid)),
        MatchMode::Category => Symbol::Category(r.payload.clone().ok_or(Error::MissingPayload)?),
        MatchMode::CellAndCategory => {
            let payload = r.payload.clone().ok_or(Error::MissingPayload)?;
            Symbol::CellCategory(to_cell(r, &k.grid), payload)
        }
    };
    Ok(match k.time_bin_s {
        Some(w) if w > 0 => Symbol::Timed(Box::new(base), r.timestamp.rem_euclid(86_400) / i64::from(w)),
        _ => base,
    })
}

/// Split one user's reports into maximal runs whose consecutive gaps are
/// shorter than `window_s` seconds. Trajectory ids are `{user}-{n}`.
pub fn segment_trajectories(mut reports: Vec<Report>, window_s: i64) -> Result<Vec<Trajectory>> {
    let Some(first) = reports.first() else {
        return Ok(Vec::new());
    };
    let user = first.user_id.clone();
    if let Some(other) = reports.iter().find(|r| r.user_id != user) {
        return Err(Error::MixedUsers(user, other.user_id.clone()));
    }
    reports.sort_by_key(|r| r.timestamp);

    let mut runs: Vec<Vec<Report>> = Vec::new();
    let mut last_ts = None;
    for r in reports {
        match (last_ts, runs.last_mut()) {
            (Some(prev), Some(run)) if r.timestamp - prev < window_s => {
                last_ts = Some(r.timestamp);
                run.push(r);
            }
            _ => {
                last_ts = Some(r.timestamp);
                runs.push(vec![r]);
            }
        }
    }
    runs.into_iter()
        .enumerate()
        .map(|(i, run)| Trajectory::new(format!("{user}-{i}"), user.clone(), run))
        .collect()
}

/// Group any report stream by user, preserving first-seen user order.
pub fn group_by_user(reports: Vec<Report>) -> Vec<(UserId, Vec<Report>)> {
    let mut order: Vec<UserId> = Vec::new();
    let mut groups: BTreeMap<UserId, Vec<Report>> = BTreeMap::new();
    for r in reports {
        let entry = groups.entry(r.user_id.clone()).or_insert_with(|| {
            order.push(r.user_id.clone());
            Vec::new()
        });
        entry.push(r);
    }
    order
        .into_iter()
        .map(|u| {
            let rs = groups.remove(&u).unwrap_or_default();
            (u, rs)
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn rep(user: &str, lat: f64, lon: f64, ts: i64) -> Report {
        Report::new(user, lat, lon, ts, None).unwrap()
    }

    pub fn cat(user: &str, payload: &str, ts: i64) -> Report {
        Report::new(user, 40.0, -74.0, ts, Some(payload.to_string())).unwrap()
    }

    /// Category-only trajectory; each char of `seq` becomes a payload.
    pub fn cat_traj(user: &str, id: &str, seq: &str) -> Trajectory {
        let reports = seq.chars().enumerate().map(|(i, c)| cat(user, &c.to_string(), i as i64 * 60)).collect();
        Trajectory::new(id, user, reports).unwrap()
    }
}
