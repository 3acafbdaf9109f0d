//! Performance/budget trade-off over memory allocations: Pareto dominance,
//! the exhaustive and greedy frontiers, and slack-band allocation selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serverless::{headroom, spending_budget, AllocationProfile, CostConfig, SimMetrics};

pub const DEFAULT_GAMMA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub memory_mb: u32,
    /// Success rate λ of the allocation.
    pub ep: f64,
    pub sb: f64,
    pub headroom: f64,
    pub metrics: SimMetrics,
}

impl FrontierPoint {
    pub fn evaluate(alloc: &AllocationProfile, metrics: &SimMetrics, c: &CostConfig) -> Self {
        let sb = spending_budget(metrics, alloc, c);
        FrontierPoint {
            memory_mb: alloc.memory_mb,
            ep: metrics.success_rate,
            sb,
            headroom: headroom(sb, c),
            metrics: SimMetrics { spending_budget: Some(sb), ..*metrics },
        }
    }
}

/// Weak Pareto dominance with at least one strict improvement: lower or equal
/// budget and higher or equal performance.
pub fn dominates(a: &FrontierPoint, b: &FrontierPoint) -> bool {
    a.sb <= b.sb && a.ep >= b.ep && (a.sb < b.sb || a.ep > b.ep)
}

fn by_memory(points: &mut [FrontierPoint]) {
    points.sort_by(|a, b| a.memory_mb.cmp(&b.memory_mb).then(a.sb.total_cmp(&b.sb)).then(b.ep.total_cmp(&a.ep)));
}

/// Every point not dominated by another, ordered by memory. O(n²).
pub fn exhaustive_frontier(points: &[FrontierPoint]) -> Vec<FrontierPoint> {
    let mut out: Vec<FrontierPoint> =
        points.iter().filter(|p| !points.iter().any(|q| dominates(q, p))).copied().collect();
    by_memory(&mut out);
    out
}

/// Single sweep from the best-performing allocation down, keeping a point
/// when it undercuts every budget seen so far, or matches the cheapest budget
/// at the same performance.
pub fn greedy_frontier(points: &[FrontierPoint]) -> Vec<FrontierPoint> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        b.ep.total_cmp(&a.ep).then(a.sb.total_cmp(&b.sb)).then(a.memory_mb.cmp(&b.memory_mb))
    });
    let mut out = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for p in sorted {
        let keep = match best {
            None => true,
            Some((min_sb, ep_at_min)) => p.sb < min_sb || (p.sb == min_sb && p.ep == ep_at_min),
        };
        if keep {
            if best.is_none_or(|(min_sb, _)| p.sb < min_sb) {
                best = Some((p.sb, p.ep));
            }
            out.push(p);
        }
    }
    by_memory(&mut out);
    out
}

/// Among points with positive headroom, take those within `gamma` of the best
/// feasible performance and return the cheapest (smaller memory on ties).
pub fn select_allocation(frontier: &[FrontierPoint], c: &CostConfig, gamma: f64) -> Result<FrontierPoint> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidConfig(format!("gamma {gamma} outside [0, 1)")));
    }
    let feasible: Vec<&FrontierPoint> = frontier.iter().filter(|p| headroom(p.sb, c) > 0.0).collect();
    let max_ep = feasible.iter().map(|p| p.ep).fold(f64::NEG_INFINITY, f64::max);
    feasible
        .into_iter()
        .filter(|p| p.ep >= (1.0 - gamma) * max_ep)
        .min_by(|a, b| a.sb.total_cmp(&b.sb).then(a.memory_mb.cmp(&b.memory_mb)))
        .copied()
        .ok_or(Error::InfeasibleBudget)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierReport {
    pub points: Vec<FrontierPoint>,
    pub frontier: Vec<FrontierPoint>,
    pub chosen: Option<FrontierPoint>,
    pub gamma: f64,
    pub infeasible: bool,
}

impl FrontierReport {
    pub fn build(points: Vec<FrontierPoint>, c: &CostConfig, gamma: f64) -> Result<Self> {
        let frontier = greedy_frontier(&points);
        let (chosen, infeasible) = match select_allocation(&frontier, c, gamma) {
            Ok(p) => (Some(p), false),
            Err(Error::InfeasibleBudget) => (None, true),
            Err(e) => return Err(e),
        };
        Ok(FrontierReport { points, frontier, chosen, gamma, infeasible })
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::point;
    use super::*;
    use proptest::prelude::*;

    fn cost(cap: f64) -> CostConfig {
        CostConfig::new(0.000017, cap).unwrap()
    }

    #[test]
    fn dominance_cases() {
        assert!(dominates(&point(1, 0.04, 0.9), &point(2, 0.05, 0.9)));
        let a = point(1, 0.04, 0.9);
        assert!(!dominates(&a, &a));
        assert!(!dominates(&point(1, 0.04, 0.8), &point(2, 0.05, 0.9)));
        assert!(!dominates(&point(2, 0.05, 0.9), &point(1, 0.04, 0.8)));
    }

    #[test]
    fn exhaustive_cases() {
        let same: Vec<_> = (0..4).map(|i| point(512 * (i + 1), 0.1, 0.5)).collect();
        assert_eq!(exhaustive_frontier(&same).len(), 4);
        let chain: Vec<_> = (0..5).map(|i| point(512 * (i + 1), 0.01 * (i + 1) as f64, 0.5 + 0.1 * i as f64)).collect();
        assert_eq!(exhaustive_frontier(&chain), chain);
        let mut one = chain.clone();
        one.push(point(9999, 0.0, 1.0));
        assert_eq!(exhaustive_frontier(&one), vec![point(9999, 0.0, 1.0)]);
    }

    #[test]
    fn greedy_small_cases() {
        let p = point(512, 0.1, 0.5);
        assert_eq!(greedy_frontier(&[p]), vec![p]);
        let q = point(1024, 0.2, 0.9);
        assert_eq!(greedy_frontier(&[q, p]), vec![p, q]);
    }

    /// Every subset of a 5-allocation grid, with values drawn from a small
    /// alphabet so ties are common.
    #[test]
    fn greedy_matches_exhaustive_on_grid_subsets() {
        let sbs = [0.01, 0.02, 0.02, 0.03, 0.01];
        let eps = [0.5, 0.9, 0.9, 1.0, 0.5];
        let grid: Vec<_> = (0..5).map(|i| point(512 * (i as u32 + 1), sbs[i], eps[i])).collect();
        for mask in 1u32..32 {
            let subset: Vec<_> = (0..5).filter(|i| mask & (1 << i) != 0).map(|i| grid[i]).collect();
            assert_eq!(greedy_frontier(&subset), exhaustive_frontier(&subset), "mask {mask:05b}");
        }
    }

    #[test]
    fn selection_cases() {
        let c = cost(1.0);
        let f = [point(512, 0.10, 1.0), point(1024, 0.05, 0.96)];
        assert_eq!(select_allocation(&f, &c, 0.05).unwrap().memory_mb, 1024);
        assert_eq!(select_allocation(&f, &c, 0.0).unwrap().memory_mb, 512);
        let ties = [point(1024, 0.10, 1.0), point(512, 0.10, 1.0), point(1536, 0.05, 0.5)];
        assert_eq!(select_allocation(&ties, &c, 0.0).unwrap().memory_mb, 512);
        assert_eq!(select_allocation(&f, &cost(0.01), 0.05), Err(Error::InfeasibleBudget));
        assert!(select_allocation(&f, &c, 1.0).is_err());
    }

    #[test]
    fn cap_equal_to_sb_is_infeasible() {
        let f = [point(512, 0.5, 1.0)];
        assert_eq!(select_allocation(&f, &cost(0.5), 0.0), Err(Error::InfeasibleBudget));
    }

    #[test]
    fn report_flags_infeasible() {
        let r = FrontierReport::build(vec![point(512, 2.0, 1.0)], &cost(1.0), 0.05).unwrap();
        assert!(r.infeasible);
        assert!(r.chosen.is_none());
        let v = serde_json::to_value(&r).unwrap();
        assert!(v.get("points").is_some() && v.get("frontier").is_some() && v.get("gamma").is_some());
    }

    fn arb_points(max: usize) -> impl Strategy<Value = Vec<FrontierPoint>> {
        proptest::collection::vec((0u32..8, 0u32..6, 0u32..6), 1..=max).prop_map(|v| {
            v.into_iter().map(|(m, s, e)| point(512 * (m + 1), s as f64 * 0.01, e as f64 * 0.2)).collect()
        })
    }

    proptest! {
        #[test]
        fn greedy_equals_exhaustive(points in arb_points(64)) {
            prop_assert_eq!(greedy_frontier(&points), exhaustive_frontier(&points));
        }

        #[test]
        fn dominance_order_laws(a in (0u32..4, 0u32..4), b in (0u32..4, 0u32..4), c in (0u32..4, 0u32..4)) {
            let [a, b, c] = [a, b, c].map(|(s, e)| point(512, s as f64, e as f64));
            prop_assert!(!dominates(&a, &a));
            prop_assert!(!(dominates(&a, &b) && dominates(&b, &a)));
            if dominates(&a, &b) && dominates(&b, &c) {
                prop_assert!(dominates(&a, &c));
            }
        }

        #[test]
        fn selection_contract(points in arb_points(16), g1 in 0.0f64..0.99, g2 in 0.0f64..0.99, cap in 0.005f64..0.08) {
            let c = cost(cap);
            let f = greedy_frontier(&points);
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            match (select_allocation(&f, &c, lo), select_allocation(&f, &c, hi)) {
                (Ok(a), Ok(b)) => {
                    prop_assert!(f.contains(&a));
                    prop_assert!(headroom(a.sb, &c) > 0.0);
                    prop_assert!(b.sb <= a.sb);
                }
                (Err(Error::InfeasibleBudget), Err(Error::InfeasibleBudget)) => {
                    prop_assert!(f.iter().all(|p| headroom(p.sb, &c) <= 0.0));
                }
                other => prop_assert!(false, "inconsistent {:?}", other),
            }
        }
    }
}
