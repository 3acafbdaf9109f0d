//! Tangent-threshold trajectory compression.
//!
//! The tangent at a report is the slope Δlat/Δlon of the segment entering it.
//! An interior report is a turn vertex, and is kept, when the relative change
//! from its entering slope to its leaving slope (the entering slope of the
//! next report) reaches θ. Endpoints are always kept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::haversine_m;
use crate::model::{MobilityProfile, Report, Trajectory};
use crate::social::{score, ProfileSet, StrengthConfig};

pub const DEFAULT_THETA: f64 = 0.0005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoresetConfig {
    pub theta: f64,
}

impl CoresetConfig {
    pub fn new(theta: f64) -> Result<Self> {
        if theta >= 0.0 && !theta.is_nan() {
            Ok(CoresetConfig { theta })
        } else {
            Err(Error::InvalidConfig(format!("theta {theta} must be >= 0")))
        }
    }
}

impl Default for CoresetConfig {
    fn default() -> Self {
        CoresetConfig { theta: DEFAULT_THETA }
    }
}

/// Slope of the segment prev → cur. `±inf` for a vertical segment, `0` for a
/// zero-length one.
pub fn heading_tangent(prev: &Report, cur: &Report) -> f64 {
    let dlat = cur.lat - prev.lat;
    let dlon = cur.lon - prev.lon;
    if dlon == 0.0 {
        if dlat == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(dlat)
        }
    } else {
        dlat / dlon
    }
}

/// |next − prev| / |prev| with the zero and infinity conventions:
/// 0/0 is no change, x/0 is infinite change, equal infinities are no change,
/// and any other pairing involving an infinity is infinite change.
pub fn relative_tangent_change(prev: f64, next: f64) -> f64 {
    if prev.is_infinite() || next.is_infinite() {
        return if prev == next { 0.0 } else { f64::INFINITY };
    }
    let num = (next - prev).abs();
    if prev == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / prev.abs()
    }
}

/// Indices of the reports kept by [`compress`].
pub fn retained_indices(reports: &[Report], cfg: &CoresetConfig) -> Vec<usize> {
    let n = reports.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut keep = Vec::with_capacity(n);
    keep.push(0);
    for i in 1..n - 1 {
        let entering = heading_tangent(&reports[i - 1], &reports[i]);
        let leaving = heading_tangent(&reports[i], &reports[i + 1]);
        if relative_tangent_change(entering, leaving) >= cfg.theta {
            keep.push(i);
        }
    }
    keep.push(n - 1);
    keep
}

pub fn compress(tr: &Trajectory, cfg: &CoresetConfig) -> Trajectory {
    if tr.len() <= 2 {
        return tr.clone();
    }
    let reports = tr.reports();
    let kept = retained_indices(reports, cfg).into_iter().map(|i| reports[i].clone()).collect();
    tr.with_reports(kept).expect("a subsequence of a valid trajectory is valid")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoresetQuery {
    PathLength,
    ReportCount,
    /// Score of the trajectory against a one-profile set holding the original.
    LcsSelfScore(StrengthConfig),
}

pub fn path_length_m(tr: &Trajectory) -> f64 {
    tr.reports().windows(2).map(|w| haversine_m(w[0].lat, w[0].lon, w[1].lat, w[1].lon)).sum()
}

/// Empirical ε = |Q(coreset) − Q(original)| / Q(original).
pub fn approximation_error(original: &Trajectory, coreset: &Trajectory, q: CoresetQuery) -> Result<f64> {
    let (qo, qc) = match q {
        CoresetQuery::PathLength => (path_length_m(original), path_length_m(coreset)),
        CoresetQuery::ReportCount => (original.len() as f64, coreset.len() as f64),
        CoresetQuery::LcsSelfScore(cfg) => {
            let set = ProfileSet::new(vec![MobilityProfile::from_trajectory(original.clone())])?;
            (score(original, &set, &cfg)?, score(coreset, &set, &cfg)?)
        }
    };
    if qo == 0.0 {
        return Err(Error::ZeroQuery);
    }
    Ok((qc - qo).abs() / qo)
}
