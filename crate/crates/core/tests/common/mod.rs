#![allow(dead_code)]

use std::path::Path;

use trajpriv::experiment::ExperimentConfig;
use trajpriv::model::{Report, Trajectory};

pub const EVALUATION_TOML: &str = include_str!("../../configs/evaluation.toml");

pub fn evaluation_config(out_dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str(EVALUATION_TOML).expect("evaluation config parses");
    cfg.out_dir = out_dir.to_path_buf();
    cfg
}

/// Category-payload trajectory, one report per character, ten minutes apart
/// and 100 m north of each other.
pub fn cat_traj(user: &str, id: &str, seq: &str) -> Trajectory {
    let reports = seq
        .chars()
        .enumerate()
        .map(|(i, c)| {
            Report::new(user, 40.7 + 0.0009 * i as f64, -73.95, 1_000_000 + 600 * i as i64, Some(c.to_string()))
                .unwrap()
        })
        .collect();
    Trajectory::new(id, user, reports).unwrap()
}

pub fn location_multiset(reports: &[Report]) -> Vec<(u64, u64)> {
    let mut v: Vec<_> = reports.iter().map(|r| (r.lat.to_bits(), r.lon.to_bits())).collect();
    v.sort_unstable();
    v
}
