//! Compiling the analyst's mobility profiles from training users.
//!
//! Patterns are contiguous symbol runs mined exhaustively per user, ranked by
//! support (number of the user's trajectories containing the run), then by
//! length, then by symbol order.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MatchKey, MatchMode, MobilityProfile, Report, Symbol, Trajectory, UserId};
use crate::social::ProfileSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub top_k: usize,
    pub min_len: usize,
    #[serde(default)]
    pub match_key: MatchKey,
}

impl MinerConfig {
    pub fn new(top_k: usize, min_len: usize, match_key: MatchKey) -> Result<Self> {
        let c = MinerConfig { top_k, min_len, match_key };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.top_k < 1 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        if self.min_len < 2 {
            return Err(Error::InvalidConfig("min_len must be >= 2".into()));
        }
        Ok(())
    }
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig { top_k: 5, min_len: 2, match_key: MatchKey::default() }
    }
}

/// Deterministic train/test split. The train side has
/// `round(train_fraction · N)` users; both sides keep input order.
pub fn split_users(users: &[UserId], train_fraction: f64, seed: u64) -> Result<(Vec<UserId>, Vec<UserId>)> {
    if users.is_empty() {
        return Err(Error::EmptyUsers);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let n_train = (train_fraction * users.len() as f64).round() as usize;
    let mut idx: Vec<usize> = (0..users.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_train = vec![false; users.len()];
    for &i in &idx[..n_train] {
        is_train[i] = true;
    }
    let (train, test): (Vec<_>, Vec<_>) = users.iter().zip(is_train).partition(|(_, t)| *t);
    Ok((train.into_iter().map(|(u, _)| u.clone()).collect(), test.into_iter().map(|(u, _)| u.clone()).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub symbols: Vec<Symbol>,
    pub support: usize,
    /// Representative reports, one per symbol.
    pub reports: Vec<Report>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedProfile {
    pub user_id: UserId,
    pub patterns: Vec<Pattern>,
    /// True when the user had no run of `min_len` or more and their longest
    /// raw trajectory stands in for the patterns.
    #[serde(default)]
    pub fallback: bool,
}

impl MinedProfile {
    pub fn to_profile(&self) -> Result<MobilityProfile> {
        let trajectories = self
            .patterns
            .iter()
            .enumerate()
            .map(|(i, p)| Trajectory::new(format!("{}-p{i}", self.user_id), self.user_id.clone(), p.reports.clone()))
            .collect::<Result<Vec<_>>>()?;
        MobilityProfile::new(self.user_id.clone(), trajectories)
    }
}

/// Output of [`mine_profiles`]; serializes as a JSON array of
/// `{user_id, patterns: [{symbols, support, reports}], fallback}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MinedProfiles(pub Vec<MinedProfile>);

impl MinedProfiles {
    pub fn profile_set(&self) -> Result<ProfileSet> {
        ProfileSet::new(self.0.iter().map(MinedProfile::to_profile).collect::<Result<Vec<_>>>()?)
    }

    pub fn fallback_users(&self) -> Vec<&str> {
        self.0.iter().filter(|p| p.fallback).map(|p| p.user_id.as_str()).collect()
    }
}

/// Where a pattern was first seen: trajectory index and start offset.
type Occurrence = (usize, usize);

fn untimed(s: &Symbol) -> &Symbol {
    match s {
        Symbol::Timed(inner, _) => inner,
        s => s,
    }
}

fn materialize(
    symbols: &[Symbol],
    first: Occurrence,
    trajectories: &[Trajectory],
    key: &MatchKey,
) -> Vec<Report> {
    let (t, start) = first;
    let run = &trajectories[t].reports()[start..start + symbols.len()];
    run.iter()
        .zip(symbols)
        .map(|(r, s)| match (key.mode, untimed(s)) {
            (MatchMode::Cell, Symbol::Cell(c)) | (MatchMode::CellAndCategory, Symbol::CellCategory(c, _)) => {
                let (lat, lon) = key.grid.cell_center(*c);
                r.moved_to(lat, lon)
            }
            _ => r.clone(),
        })
        .collect()
}

fn mine_user(profile: &MobilityProfile, cfg: &MinerConfig) -> Result<MinedProfile> {
    let trajectories = profile.trajectories();
    let seqs = trajectories.iter().map(|t| t.symbols(&cfg.match_key)).collect::<Result<Vec<_>>>()?;

    // support counts each trajectory once per pattern.
    let mut stats: HashMap<&[Symbol], (usize, Occurrence, usize)> = HashMap::new();
    for (ti, seq) in seqs.iter().enumerate() {
        let n = seq.len();
        for start in 0..n {
            for end in (start + cfg.min_len)..=n {
                let run = &seq[start..end];
                let entry = stats.entry(run).or_insert((0, (ti, start), usize::MAX));
                if entry.2 != ti {
                    entry.0 += 1;
                    entry.2 = ti;
                }
            }
        }
    }

    if stats.is_empty() {
        let longest = trajectories
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::InvalidProfile(format!("{} has no trajectories", profile.user_id())))?;
        let tr = &trajectories[longest];
        return Ok(MinedProfile {
            user_id: profile.user_id().to_string(),
            patterns: vec![Pattern { symbols: seqs[longest].clone(), support: 1, reports: tr.reports().to_vec() }],
            fallback: true,
        });
    }

    let mut ranked: Vec<(&[Symbol], usize, Occurrence)> =
        stats.into_iter().map(|(run, (support, first, _))| (run, support, first)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(b.0.len().cmp(&a.0.len())).then(a.0.cmp(b.0)));
    ranked.truncate(cfg.top_k);

    let patterns = ranked
        .into_iter()
        .map(|(run, support, first)| Pattern {
            symbols: run.to_vec(),
            support,
            reports: materialize(run, first, trajectories, &cfg.match_key),
        })
        .collect();
    Ok(MinedProfile { user_id: profile.user_id().to_string(), patterns, fallback: false })
}

pub fn mine_profiles(trainset: &[MobilityProfile], cfg: &MinerConfig) -> Result<MinedProfiles> {
    cfg.validate()?;
    if trainset.is_empty() {
        return Err(Error::EmptyUsers);
    }
    use rayon::prelude::*;
    let mined = trainset.par_iter().map(|p| mine_user(p, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(MinedProfiles(mined))
}
