//! The adversary's similarity math: longest common consecutive subsequence,
//! pairwise probability, conditional entropy, social strength, the score of a
//! trajectory against a set of mobility profiles, and coverage rate.
//!
//! Logarithms are natural; `0·ln 0` is taken as 0.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MatchKey, MobilityProfile, Symbol, Trajectory, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthConfig {
    pub alpha: f64,
    #[serde(default)]
    pub match_key: MatchKey,
    #[serde(default = "default_clamp")]
    pub clamp: bool,
}

fn default_clamp() -> bool {
    true
}

impl StrengthConfig {
    pub fn new(alpha: f64, match_key: MatchKey, clamp: bool) -> Result<Self> {
        let cfg = StrengthConfig { alpha, match_key, clamp };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha <= 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("alpha {} must lie in (0, 1]", self.alpha)))
        }
    }
}

pub const DEFAULT_ALPHA: f64 = 0.1;

impl Default for StrengthConfig {
    fn default() -> Self {
        StrengthConfig { alpha: DEFAULT_ALPHA, match_key: MatchKey::default(), clamp: true }
    }
}

/// The analyst's compiled mobility profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MobilityProfile>", into = "Vec<MobilityProfile>")]
pub struct ProfileSet {
    profiles: Vec<MobilityProfile>,
}

impl TryFrom<Vec<MobilityProfile>> for ProfileSet {
    type Error = Error;

    fn try_from(v: Vec<MobilityProfile>) -> Result<Self> {
        ProfileSet::new(v)
    }
}

impl From<ProfileSet> for Vec<MobilityProfile> {
    fn from(s: ProfileSet) -> Self {
        s.profiles
    }
}

impl ProfileSet {
    pub fn new(profiles: Vec<MobilityProfile>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::EmptyProfileSet);
        }
        Ok(ProfileSet { profiles })
    }

    pub fn profiles(&self) -> &[MobilityProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// The first `n` profiles (at least one).
    pub fn prefix(&self, n: usize) -> ProfileSet {
        ProfileSet { profiles: self.profiles[..n.clamp(1, self.profiles.len())].to_vec() }
    }
}

/// Length of the longest common contiguous run of `a` and `b`.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

pub fn lcs_consecutive(a: &Trajectory, b: &Trajectory, k: &MatchKey) -> Result<usize> {
    Ok(lcs_len(&a.symbols(k)?, &b.symbols(k)?))
}

pub fn pair_prob(a: &Trajectory, b: &Trajectory, k: &MatchKey) -> Result<f64> {
    Ok(lcs_consecutive(a, b, k)? as f64 / a.len() as f64)
}

fn neg_p_ln_p(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.ln()
    }
}

fn entropy_of<T: PartialEq>(g1: &[Vec<T>], g2: &[Vec<T>]) -> f64 {
    let mut h = 0.0;
    for a in g1 {
        if a.is_empty() {
            continue;
        }
        for b in g2 {
            h += neg_p_ln_p(lcs_len(a, b) as f64 / a.len() as f64);
        }
    }
    h
}

fn strength_from_entropy(h: f64, cfg: &StrengthConfig) -> f64 {
    let s = cfg.alpha * h.exp();
    if cfg.clamp {
        s.min(1.0)
    } else {
        s
    }
}

fn profile_symbols(g: &MobilityProfile, k: &MatchKey) -> Result<Vec<Vec<Symbol>>> {
    g.trajectories().iter().map(|t| t.symbols(k)).collect()
}

pub fn conditional_entropy(g1: &MobilityProfile, g2: &MobilityProfile, k: &MatchKey) -> Result<f64> {
    Ok(entropy_of(&profile_symbols(g1, k)?, &profile_symbols(g2, k)?))
}

pub fn social_strength(g1: &MobilityProfile, g2: &MobilityProfile, cfg: &StrengthConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(strength_from_entropy(conditional_entropy(g1, g2, &cfg.match_key)?, cfg))
}

pub fn score(tr: &Trajectory, set: &ProfileSet, cfg: &StrengthConfig) -> Result<f64> {
    CompiledProfiles::compile(set, cfg)?.score(tr)
}

/// Fraction of distinct users with at least one trajectory scoring ≥ δ.
pub fn coverage_rate(
    users: &[(UserId, Trajectory)],
    set: &ProfileSet,
    delta: f64,
    cfg: &StrengthConfig,
) -> Result<f64> {
    let compiled = CompiledProfiles::compile(set, cfg)?;
    let scored = users
        .iter()
        .map(|(u, t)| Ok((u.clone(), compiled.score(t)?)))
        .collect::<Result<Vec<_>>>()?;
    coverage_from_scores(&scored, delta)
}

pub fn coverage_from_scores(scores: &[(UserId, f64)], delta: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyUsers);
    }
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for (u, s) in scores {
        let e = best.entry(u.as_str()).or_insert(f64::NEG_INFINITY);
        *e = e.max(*s);
    }
    let captured = best.values().filter(|&&s| s >= delta).count();
    Ok(captured as f64 / best.len() as f64)
}

/// A profile set with every trajectory pre-converted to interned symbol ids,
/// for scoring many trajectories against the same set.
#[derive(Debug, Clone)]
pub struct CompiledProfiles {
    cfg: StrengthConfig,
    interner: HashMap<Symbol, u32>,
    profiles: Vec<Vec<Vec<u32>>>,
}

const UNSEEN: u32 = u32::MAX;

impl CompiledProfiles {
    pub fn compile(set: &ProfileSet, cfg: &StrengthConfig) -> Result<Self> {
        cfg.validate()?;
        if set.is_empty() {
            return Err(Error::EmptyProfileSet);
        }
        let mut interner: HashMap<Symbol, u32> = HashMap::new();
        let mut profiles = Vec::with_capacity(set.len());
        for g in set.profiles() {
            let mut seqs = Vec::with_capacity(g.trajectories().len());
            for t in g.trajectories() {
                let seq = t
                    .symbols(&cfg.match_key)?
                    .into_iter()
                    .map(|s| {
                        let next = interner.len() as u32;
                        *interner.entry(s).or_insert(next)
                    })
                    .collect();
                seqs.push(seq);
            }
            profiles.push(seqs);
        }
        Ok(CompiledProfiles { cfg: *cfg, interner, profiles })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn config(&self) -> &StrengthConfig {
        &self.cfg
    }

    fn encode(&self, tr: &Trajectory) -> Result<Vec<u32>> {
        Ok(tr
            .symbols(&self.cfg.match_key)?
            .iter()
            .map(|s| self.interner.get(s).copied().unwrap_or(UNSEEN))
            .collect())
    }

    /// Strength of `tr` (as a one-trajectory profile) against each profile.
    pub fn strengths(&self, tr: &Trajectory) -> Result<Vec<f64>> {
        let q = [self.encode(tr)?];
        Ok(self
            .profiles
            .iter()
            .map(|g| strength_from_entropy(entropy_of(&q, g), &self.cfg))
            .collect())
    }

    pub fn score(&self, tr: &Trajectory) -> Result<f64> {
        self.score_prefix(tr, self.profiles.len())
    }

    /// Score against the first `n` profiles only.
    pub fn score_prefix(&self, tr: &Trajectory, n: usize) -> Result<f64> {
        let n = n.clamp(1, self.profiles.len());
        let q = [self.encode(tr)?];
        let sum: f64 = self.profiles[..n]
            .iter()
            .map(|g| strength_from_entropy(entropy_of(&q, g), &self.cfg))
            .sum();
        Ok(sum / n as f64)
    }
}
