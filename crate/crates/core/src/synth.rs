//! Seeded generator for check-in corpora shaped like a city-scale
//! location-based-service dump.
//!
//! Users belong to social groups that share routines (ordered venue chains);
//! each user also has personal routines and occasional random outings. One
//! outing is emitted per active day, so an 8-hour segmentation window recovers
//! the outings as trajectories.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geo;
use crate::ingest::format_timestamp;
use crate::model::Report;

const CATEGORIES: &[&str] = &[
    "Home (private)", "Office", "Subway", "Bar", "Coffee Shop", "Gym / Fitness Center",
    "Train Station", "Cafe", "Clothing Store", "Bookstore", "Burger Joint", "Ice Cream Shop",
    "Mall", "Park", "Pizza Place", "Deli / Bodega", "Grocery Store", "Bus Station",
    "American Restaurant", "Italian Restaurant", "Mexican Restaurant", "Chinese Restaurant",
    "Sushi Restaurant", "Bakery", "Movie Theater", "Museum", "Music Venue", "Library",
    "College Academic Building", "Hospital", "Drugstore / Pharmacy", "Bank", "Hotel",
    "Airport", "Plaza", "Bridge", "Neighborhood", "Salon / Barbershop", "Arts & Crafts Store",
    "Electronics Store",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub users: usize,
    pub checkins: usize,
    pub venues: usize,
    pub neighborhoods: usize,
    pub groups: usize,
    pub routines_per_group: usize,
    pub personal_routines: usize,
    pub min_routine_len: usize,
    pub max_routine_len: usize,
    /// Minutes between consecutive check-ins of one outing.
    pub min_gap_min: i64,
    pub max_gap_min: i64,
    /// Probability a routine stop is replaced by a random venue.
    pub substitution_prob: f64,
    /// Probability a routine stop is skipped.
    pub skip_prob: f64,
    /// Probability an outing follows a group routine / a personal routine;
    /// the remainder are random outings.
    pub group_routine_prob: f64,
    pub personal_routine_prob: f64,
    /// Gaussian-ish jitter applied to reported coordinates, meters.
    pub gps_jitter_m: f64,
    /// Probability a check-in is filed under a random category instead of the
    /// venue's own.
    pub label_noise_prob: f64,
    pub start_epoch: i64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            users: 1083,
            checkins: 227_428,
            venues: 4000,
            neighborhoods: 60,
            groups: 45,
            routines_per_group: 4,
            personal_routines: 2,
            min_routine_len: 3,
            max_routine_len: 7,
            min_gap_min: 10,
            max_gap_min: 50,
            substitution_prob: 0.15,
            skip_prob: 0.1,
            group_routine_prob: 0.55,
            personal_routine_prob: 0.35,
            gps_jitter_m: 0.0,
            label_noise_prob: 0.0,
            // 2012-04-03T00:00:00Z
            start_epoch: 1_333_411_200,
            seed: 2012,
        }
    }
}

impl SynthConfig {
    pub fn small(users: usize, checkins: usize, seed: u64) -> Self {
        SynthConfig {
            users,
            checkins,
            venues: (users * 4).clamp(40, 4000),
            neighborhoods: (users / 18).clamp(3, 60),
            groups: (users / 24).max(1),
            seed,
            ..SynthConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Venue {
    pub venue_id: String,
    pub category_id: String,
    pub category_name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckinRow {
    pub user_id: String,
    pub venue: usize,
    /// Index into the category table as reported by the user.
    pub category: usize,
    pub lat: f64,
    pub lon: f64,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub venues: Vec<Venue>,
    pub rows: Vec<CheckinRow>,
    pub users: usize,
}

impl SynthCorpus {
    pub fn reports(&self) -> Vec<Report> {
        self.rows
            .iter()
            .map(|r| Report {
                user_id: r.user_id.clone(),
                lat: r.lat,
                lon: r.lon,
                timestamp: r.timestamp,
                payload: Some(CATEGORIES[r.category].to_string()),
            })
            .collect()
    }

    /// Venues as payload-carrying reports, usable as a point-of-interest list.
    pub fn poi_reports(&self) -> Vec<Report> {
        self.venues
            .iter()
            .map(|v| Report {
                user_id: v.venue_id.clone(),
                lat: v.lat,
                lon: v.lon,
                timestamp: 0,
                payload: Some(v.category_name.clone()),
            })
            .collect()
    }

    pub fn write_tsv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.rows {
            let v = &self.venues[r.venue];
            writeln!(
                w,
                "{}\t{}\tc{:03}\t{}\t{}\t{}\t-240\t{}",
                r.user_id,
                v.venue_id,
                r.category,
                CATEGORIES[r.category],
                r.lat,
                r.lon,
                format_timestamp(r.timestamp)
            )?;
        }
        Ok(())
    }
}

fn category_weight(i: usize) -> f64 {
    1.0 / (i as f64 + 2.0)
}

fn pick_weighted(rng: &mut ChaCha8Rng, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().unwrap_or(&1.0);
    let x = rng.gen_range(0.0..total);
    cumulative.partition_point(|&c| c <= x).min(cumulative.len() - 1)
}

/// Largest-remainder split of `total` into `weights.len()` parts with a
/// per-part minimum.
fn allocate(total: usize, weights: &[f64], min_each: usize) -> Vec<usize> {
    let n = weights.len();
    let spare = total.saturating_sub(min_each * n);
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * spare as f64).collect();
    let mut parts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = spare - parts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        parts[i] += 1;
        left -= 1;
    }
    parts.iter().map(|p| p + min_each).collect()
}

pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Neighborhood centers inside the five-borough bounding box.
    let hoods: Vec<(f64, f64)> = (0..cfg.neighborhoods.max(1))
        .map(|_| (rng.gen_range(40.58..40.88), rng.gen_range(-74.03..-73.77)))
        .collect();

    let mut cat_cum = Vec::with_capacity(CATEGORIES.len());
    let mut acc = 0.0;
    for i in 0..CATEGORIES.len() {
        acc += category_weight(i);
        cat_cum.push(acc);
    }

    let mut venues = Vec::with_capacity(cfg.venues);
    let mut venue_cats = Vec::with_capacity(cfg.venues);
    let mut venues_by_hood: Vec<Vec<usize>> = vec![Vec::new(); hoods.len()];
    for v in 0..cfg.venues.max(1) {
        let h = v % hoods.len();
        let (hl, hn) = hoods[h];
        let (lat, lon) = geo::destination(
            hl,
            hn,
            rng.gen_range(0.0f64..1.0).sqrt() * 1500.0,
            rng.gen_range(0.0..std::f64::consts::TAU),
        );
        let c = pick_weighted(&mut rng, &cat_cum);
        venue_cats.push(c);
        venues.push(Venue {
            venue_id: format!("v{v:05x}"),
            category_id: format!("c{c:03}"),
            category_name: CATEGORIES[c].to_string(),
            lat: (lat * 1e6).round() / 1e6,
            lon: (lon * 1e6).round() / 1e6,
        });
        venues_by_hood[h].push(v);
    }

    let make_routine = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        let len = rng.gen_range(cfg.min_routine_len..=cfg.max_routine_len.max(cfg.min_routine_len));
        let hood = &venues_by_hood[rng.gen_range(0..venues_by_hood.len())];
        (0..len).map(|_| hood[rng.gen_range(0..hood.len())]).collect()
    };

    let groups: Vec<Vec<Vec<usize>>> = (0..cfg.groups.max(1))
        .map(|_| (0..cfg.routines_per_group.max(1)).map(|_| make_routine(&mut rng)).collect())
        .collect();

    let weights: Vec<f64> = (0..cfg.users).map(|_| rng.gen_range(0.3..1.7)).collect();
    let min_each = (cfg.checkins / cfg.users.max(1)).min(5);
    let quotas = allocate(cfg.checkins, &weights, min_each);

    let mut rows = Vec::with_capacity(cfg.checkins);
    for (u, quota) in quotas.iter().copied().enumerate() {
        let user_id = (u + 1).to_string();
        let group = &groups[rng.gen_range(0..groups.len())];
        let personal: Vec<Vec<usize>> =
            (0..cfg.personal_routines).map(|_| make_routine(&mut rng)).collect();
        let mut day = 0i64;
        let mut emitted = 0usize;
        while emitted < quota {
            day += rng.gen_range(1..=2);
            let mut t = cfg.start_epoch + day * 86_400 + rng.gen_range(7 * 3600..11 * 3600);
            let roll: f64 = rng.gen();
            let chain: Vec<usize> = if roll < cfg.group_routine_prob {
                group.choose(&mut rng).cloned().unwrap_or_default()
            } else if roll < cfg.group_routine_prob + cfg.personal_routine_prob && !personal.is_empty() {
                personal.choose(&mut rng).cloned().unwrap_or_default()
            } else {
                make_routine(&mut rng)
            };
            for &stop in &chain {
                if emitted >= quota {
                    break;
                }
                if rng.gen_bool(cfg.skip_prob.clamp(0.0, 1.0)) {
                    continue;
                }
                let venue = if rng.gen_bool(cfg.substitution_prob.clamp(0.0, 1.0)) {
                    rng.gen_range(0..venues.len())
                } else {
                    stop
                };
                let (mut lat, mut lon) = (venues[venue].lat, venues[venue].lon);
                if cfg.gps_jitter_m > 0.0 {
                    let d = cfg.gps_jitter_m * (rng.gen::<f64>() + rng.gen::<f64>() + rng.gen::<f64>()) / 1.5;
                    (lat, lon) = geo::destination(lat, lon, d, rng.gen_range(0.0..std::f64::consts::TAU));
                }
                let category = if cfg.label_noise_prob > 0.0 && rng.gen_bool(cfg.label_noise_prob.min(1.0)) {
                    rng.gen_range(0..CATEGORIES.len())
                } else {
                    venue_cats[venue]
                };
                rows.push(CheckinRow { user_id: user_id.clone(), venue, category, lat, lon, timestamp: t });
                emitted += 1;
                t += rng.gen_range(cfg.min_gap_min * 60..=cfg.max_gap_min * 60);
            }
        }
    }
    SynthCorpus { venues, rows, users: cfg.users }
}
