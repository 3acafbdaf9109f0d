//! Simulated serverless deployment: memory allocations map to replica counts,
//! a closed-loop client population drives a seeded discrete-event simulation,
//! and the resulting metrics feed the spending-budget model.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MobilityProfile;
use crate::privacy::PrivacyMode;

pub const DEFAULT_MEMORY_SET_MB: [u32; 5] = [512, 1024, 1536, 2048, 2560];
pub const REPLICA_UNIT_MB: u32 = 512;
/// Monetary units per GB-second.
pub const DEFAULT_RATE_CR: f64 = 0.000017;

const NANOS_PER_SEC: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AllocationProfile {
    pub memory_mb: u32,
    #[serde(default = "default_unit")]
    pub replica_unit_mb: u32,
}

fn default_unit() -> u32 {
    REPLICA_UNIT_MB
}

impl AllocationProfile {
    pub fn new(memory_mb: u32) -> Result<Self> {
        Self::with_unit(memory_mb, REPLICA_UNIT_MB)
    }

    pub fn with_unit(memory_mb: u32, replica_unit_mb: u32) -> Result<Self> {
        if replica_unit_mb == 0 || memory_mb < replica_unit_mb || !memory_mb.is_multiple_of(replica_unit_mb) {
            return Err(Error::InvalidConfig(format!(
                "memory {memory_mb} MB is not a positive multiple of {replica_unit_mb} MB"
            )));
        }
        Ok(AllocationProfile { memory_mb, replica_unit_mb })
    }

    pub fn replicas(&self) -> usize {
        (self.memory_mb / self.replica_unit_mb) as usize
    }

    pub fn memory_gb(&self) -> f64 {
        self.memory_mb as f64 / 1024.0
    }
}

pub fn default_allocations() -> Vec<AllocationProfile> {
    DEFAULT_MEMORY_SET_MB.iter().map(|&m| AllocationProfile::new(m).expect("valid default")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// One trajectory against one profile.
    OvO,
    /// One trajectory against every reference profile.
    OvM,
    /// A whole profile against every reference profile.
    MvM,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::OvO, Scenario::OvM, Scenario::MvM];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::OvO => "OvO",
            Scenario::OvM => "OvM",
            Scenario::MvM => "MvM",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ovo" => Ok(Scenario::OvO),
            "ovm" => Ok(Scenario::OvM),
            "mvm" => Ok(Scenario::MvM),
            _ => Err(format!("unknown scenario {s:?}")),
        }
    }
}

/// service = base_s + per_report_s · work units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceTimeModel {
    pub base_s: f64,
    pub per_report_s: f64,
}

impl ServiceTimeModel {
    /// Calibration constants, measured once and kept fixed.
    pub fn default_for(op: PrivacyMode) -> Self {
        let base_s = match op {
            PrivacyMode::LooseDummy => 0.060,
            PrivacyMode::LoosePathconf => 0.045,
            PrivacyMode::ModerateCloak => 0.040,
            PrivacyMode::StrictTempcloak => 0.050,
        };
        ServiceTimeModel { base_s, per_report_s: 0.002 }
    }

    fn nanos(&self, units: usize) -> u64 {
        ((self.base_s + self.per_report_s * units as f64) * NANOS_PER_SEC).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadSpec {
    pub scenario: Scenario,
    pub total_requests: usize,
    pub op: PrivacyMode,
    pub clients: usize,
    pub timeout_s: f64,
    pub queue_capacity: usize,
    /// Delay before a client whose request was rejected sends the next one.
    pub reject_backoff_s: f64,
    /// Profiles each OvM/MvM request is compared against.
    pub reference_profiles: usize,
    pub service: ServiceTimeModel,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        let op = PrivacyMode::ModerateCloak;
        WorkloadSpec {
            scenario: Scenario::OvO,
            total_requests: 20_000,
            op,
            clients: 50,
            timeout_s: 8.0,
            queue_capacity: 100,
            reject_backoff_s: 0.010,
            reference_profiles: 3,
            service: ServiceTimeModel::default_for(op),
            seed: 7,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.total_requests < 1 {
            return Err(Error::InvalidConfig("total_requests must be >= 1".into()));
        }
        if !(self.timeout_s > 0.0) {
            return Err(Error::InvalidConfig(format!("timeout {} must be > 0", self.timeout_s)));
        }
        if self.clients < 1 {
            return Err(Error::InvalidConfig("clients must be >= 1".into()));
        }
        if !(self.reject_backoff_s >= 0.0) || !(self.service.base_s >= 0.0) || !(self.service.per_report_s >= 0.0) {
            return Err(Error::InvalidConfig("service times and backoff must be >= 0".into()));
        }
        if matches!(self.scenario, Scenario::OvM | Scenario::MvM) && self.reference_profiles < 1 {
            return Err(Error::InvalidConfig("reference_profiles must be >= 1".into()));
        }
        Ok(())
    }

    /// Work units for a payload of `reports` reports.
    pub fn units(&self, reports: usize) -> usize {
        match self.scenario {
            Scenario::OvO => reports,
            Scenario::OvM | Scenario::MvM => reports * self.reference_profiles,
        }
    }
}

/// Payload sizes available to the load generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadCorpus {
    pub trajectory_sizes: Vec<usize>,
    pub profile_sizes: Vec<usize>,
}

impl PayloadCorpus {
    pub fn from_profiles(profiles: &[MobilityProfile]) -> Self {
        PayloadCorpus {
            trajectory_sizes: profiles.iter().flat_map(|p| p.trajectories().iter().map(|t| t.len())).collect(),
            profile_sizes: profiles.iter().map(MobilityProfile::report_count).collect(),
        }
    }

    fn sizes(&self, scenario: Scenario) -> &[usize] {
        match scenario {
            Scenario::OvO | Scenario::OvM => &self.trajectory_sizes,
            Scenario::MvM => &self.profile_sizes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    /// Mean response time of successful requests, seconds.
    pub avg_response_time: f64,
    /// Successful requests per simulated second.
    pub throughput: f64,
    pub success_count: usize,
    pub total: usize,
    pub success_rate: f64,
    pub rejected: usize,
    pub timed_out: usize,
    pub makespan_s: f64,
    pub spending_budget: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    pub rate_cr: f64,
    pub budget_cap: f64,
}

impl CostConfig {
    pub fn new(rate_cr: f64, budget_cap: f64) -> Result<Self> {
        let c = CostConfig { rate_cr, budget_cap };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rate_cr > 0.0 && self.budget_cap > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig("rate_cr and budget_cap must be > 0".into()))
        }
    }
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig { rate_cr: DEFAULT_RATE_CR, budget_cap: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Issue { client: usize },
    Complete { replica: usize },
    Expire { req: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReqState {
    Queued(usize),
    Running,
    Done,
}

struct Req {
    client: usize,
    arrival: u64,
    service: u64,
    state: ReqState,
}

#[derive(Default)]
struct Replica {
    running: Option<usize>,
    queue: VecDeque<usize>,
}

struct Sim<'a> {
    w: &'a WorkloadSpec,
    sizes: &'a [usize],
    rng: ChaCha8Rng,
    events: BinaryHeap<Reverse<(u64, u64, Event)>>,
    seq: u64,
    replicas: Vec<Replica>,
    reqs: Vec<Req>,
    next_replica: usize,
    timeout: u64,
    backoff: u64,
    successes: usize,
    latency_sum: u128,
    rejected: usize,
    timed_out: usize,
    now: u64,
}

impl Sim<'_> {
    fn push(&mut self, at: u64, e: Event) {
        self.seq += 1;
        self.events.push(Reverse((at, self.seq, e)));
    }

    fn start(&mut self, replica: usize, req: usize) {
        self.reqs[req].state = ReqState::Running;
        self.replicas[replica].running = Some(req);
        let at = self.now + self.reqs[req].service;
        self.push(at, Event::Complete { replica });
    }

    fn issue(&mut self, client: usize) {
        if self.reqs.len() >= self.w.total_requests {
            return;
        }
        let size = self.sizes[self.rng.gen_range(0..self.sizes.len())];
        let service = self.w.service.nanos(self.w.units(size));
        let id = self.reqs.len();
        self.reqs.push(Req { client, arrival: self.now, service, state: ReqState::Done });
        let r = self.next_replica;
        self.next_replica = (self.next_replica + 1) % self.replicas.len();
        if self.replicas[r].running.is_none() {
            self.start(r, id);
        } else if self.replicas[r].queue.len() < self.w.queue_capacity {
            self.reqs[id].state = ReqState::Queued(r);
            self.replicas[r].queue.push_back(id);
        } else {
            self.rejected += 1;
            let at = self.now + self.backoff;
            self.push(at, Event::Issue { client });
            return;
        }
        let at = self.now + self.timeout;
        self.push(at, Event::Expire { req: id });
    }

    fn complete(&mut self, replica: usize) {
        let req = self.replicas[replica].running.take().expect("completion on a busy replica");
        let r = &mut self.reqs[req];
        if r.state == ReqState::Running {
            r.state = ReqState::Done;
            self.successes += 1;
            self.latency_sum += (self.now - r.arrival) as u128;
            let client = r.client;
            self.push(self.now, Event::Issue { client });
        }
        if let Some(next) = self.replicas[replica].queue.pop_front() {
            self.start(replica, next);
        }
    }

    /// The client gives up. A queued request leaves its queue; a running one
    /// keeps its replica busy until it finishes.
    fn expire(&mut self, req: usize) {
        let state = self.reqs[req].state;
        match state {
            ReqState::Done => return,
            ReqState::Queued(r) => self.replicas[r].queue.retain(|&q| q != req),
            ReqState::Running => {}
        }
        self.reqs[req].state = ReqState::Done;
        self.timed_out += 1;
        let client = self.reqs[req].client;
        self.push(self.now, Event::Issue { client });
    }
}

fn secs_to_nanos(s: f64) -> u64 {
    (s * NANOS_PER_SEC).round() as u64
}

/// Closed-loop discrete-event simulation. Every client sends its first request
/// at t = 0 and the next one as soon as the previous is answered, timed out,
/// or (after `reject_backoff_s`) rejected. Requests go round-robin to the
/// replicas; a replica serves one request at a time from a FIFO queue of at
/// most `queue_capacity` waiting requests. A request succeeds when it
/// finishes within `timeout_s` of its arrival. Latency is counted in integer
/// nanoseconds.
pub fn run_workload(w: &WorkloadSpec, alloc: &AllocationProfile, corpus: &PayloadCorpus) -> Result<SimMetrics> {
    w.validate()?;
    let sizes = corpus.sizes(w.scenario);
    if sizes.is_empty() {
        return Err(Error::EmptyUsers);
    }
    let mut sim = Sim {
        w,
        sizes,
        rng: ChaCha8Rng::seed_from_u64(w.seed),
        events: BinaryHeap::new(),
        seq: 0,
        replicas: (0..alloc.replicas()).map(|_| Replica::default()).collect(),
        reqs: Vec::with_capacity(w.total_requests),
        next_replica: 0,
        timeout: secs_to_nanos(w.timeout_s),
        backoff: secs_to_nanos(w.reject_backoff_s),
        successes: 0,
        latency_sum: 0,
        rejected: 0,
        timed_out: 0,
        now: 0,
    };
    for client in 0..w.clients {
        sim.push(0, Event::Issue { client });
    }
    let mut makespan = 0;
    while let Some(Reverse((at, _, e))) = sim.events.pop() {
        sim.now = at;
        match e {
            Event::Issue { client } => sim.issue(client),
            Event::Complete { replica } => {
                makespan = at;
                sim.complete(replica);
            }
            Event::Expire { req } => {
                if sim.reqs[req].state != ReqState::Done {
                    makespan = at;
                }
                sim.expire(req);
            }
        }
    }
    let total = sim.reqs.len();
    let success_count = sim.successes;
    let makespan_s = makespan as f64 / NANOS_PER_SEC;
    Ok(SimMetrics {
        avg_response_time: if success_count == 0 {
            0.0
        } else {
            sim.latency_sum as f64 / success_count as f64 / NANOS_PER_SEC
        },
        throughput: if makespan == 0 { 0.0 } else { success_count as f64 / makespan_s },
        success_count,
        total,
        success_rate: success_count as f64 / total as f64,
        rejected: sim.rejected,
        timed_out: sim.timed_out,
        makespan_s,
        spending_budget: None,
    })
}

/// λ = successes / total.
pub fn success_rate(m: &SimMetrics) -> Result<f64> {
    if m.total == 0 {
        return Err(Error::NoRequests);
    }
    Ok(m.success_count as f64 / m.total as f64)
}

/// SB = c_r · avgT · memory_GB · successes.
pub fn spending_budget(m: &SimMetrics, alloc: &AllocationProfile, c: &CostConfig) -> f64 {
    c.rate_cr * m.avg_response_time * alloc.memory_gb() * m.success_count as f64
}

pub fn headroom(sb: f64, c: &CostConfig) -> f64 {
    c.budget_cap - sb
}

/// One CSV row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: Scenario,
    pub op: PrivacyMode,
    pub memory_mb: u32,
    #[serde(rename = "avgT")]
    pub avg_t: f64,
    pub rps: f64,
    pub lambda: f64,
    #[serde(rename = "SB")]
    pub sb: f64,
}

impl MetricsRow {
    pub fn new(w: &WorkloadSpec, alloc: &AllocationProfile, m: &SimMetrics, c: &CostConfig) -> Self {
        MetricsRow {
            scenario: w.scenario,
            op: w.op,
            memory_mb: alloc.memory_mb,
            avg_t: m.avg_response_time,
            rps: m.throughput,
            lambda: m.success_rate,
            sb: m.spending_budget.unwrap_or_else(|| spending_budget(m, alloc, c)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn corpus() -> PayloadCorpus {
        PayloadCorpus { trajectory_sizes: vec![3, 5, 8, 4, 6, 2], profile_sizes: vec![20, 35, 12] }
    }

    fn metrics(avg_t: f64, success: usize, total: usize) -> SimMetrics {
        SimMetrics {
            avg_response_time: avg_t,
            throughput: 0.0,
            success_count: success,
            total,
            success_rate: success as f64 / total.max(1) as f64,
            rejected: 0,
            timed_out: 0,
            makespan_s: 0.0,
            spending_budget: None,
        }
    }

    #[test]
    fn allocation_replicas() {
        assert_eq!(AllocationProfile::new(1024).unwrap().replicas(), 2);
        assert_eq!(AllocationProfile::new(2560).unwrap().replicas(), 5);
        assert!(AllocationProfile::new(700).is_err());
        assert!(AllocationProfile::new(0).is_err());
    }

    #[test]
    fn one_replica_per_request_serves_all() {
        let w = WorkloadSpec { total_requests: 40, clients: 40, queue_capacity: 0, timeout_s: 10.0, ..Default::default() };
        let alloc = AllocationProfile::new(512 * 40).unwrap();
        let m = run_workload(&w, &alloc, &corpus()).unwrap();
        assert_eq!(m.success_rate, 1.0);
        assert_eq!(m.total, 40);
    }

    /// Hand-stepped: both requests arrive at t = 0; the first starts on the
    /// only replica, the second meets a busy replica and no queue slot.
    #[test]
    fn zero_queue_two_arrivals() {
        let w = WorkloadSpec { total_requests: 2, clients: 2, queue_capacity: 0, timeout_s: 10.0, ..Default::default() };
        let m = run_workload(&w, &AllocationProfile::new(512).unwrap(), &corpus()).unwrap();
        assert_eq!(m.success_count, 1);
        assert_eq!(m.rejected, 1);
        assert_eq!(m.total, 2);
    }

    /// Hand-stepped: one replica, unit payloads; service = 1 s; three clients
    /// at t = 0 with queue 2. Latencies 1, 2, 3 s; then the refilled loop.
    #[test]
    fn hand_stepped_latencies() {
        let w = WorkloadSpec {
            total_requests: 3,
            clients: 3,
            queue_capacity: 2,
            timeout_s: 100.0,
            service: ServiceTimeModel { base_s: 0.0, per_report_s: 1.0 },
            ..Default::default()
        };
        let c = PayloadCorpus { trajectory_sizes: vec![1], profile_sizes: vec![1] };
        let m = run_workload(&w, &AllocationProfile::new(512).unwrap(), &c).unwrap();
        assert_eq!(m.success_count, 3);
        assert_relative_eq!(m.avg_response_time, 2.0, max_relative = 1e-12);
        assert_relative_eq!(m.makespan_s, 3.0, max_relative = 1e-12);
        assert_relative_eq!(m.throughput, 1.0, max_relative = 1e-12);

        let tight = WorkloadSpec { timeout_s: 1.5, ..w };
        let m = run_workload(&tight, &AllocationProfile::new(512).unwrap(), &c).unwrap();
        // Request 2 expires in the queue at 1.5 s; request 1 completes at 2 s
        // after its timeout.
        assert_eq!(m.success_count, 1);
        assert_eq!(m.timed_out, 2);
    }

    #[test]
    fn deterministic_under_seed() {
        let w = WorkloadSpec { total_requests: 2000, ..Default::default() };
        let a = AllocationProfile::new(1024).unwrap();
        assert_eq!(run_workload(&w, &a, &corpus()).unwrap(), run_workload(&w, &a, &corpus()).unwrap());
    }

    #[test]
    fn doubling_replicas_raises_throughput() {
        let w = WorkloadSpec { total_requests: 3000, ..Default::default() };
        let one = run_workload(&w, &AllocationProfile::new(512).unwrap(), &corpus()).unwrap();
        let two = run_workload(&w, &AllocationProfile::new(1024).unwrap(), &corpus()).unwrap();
        assert!(two.throughput > one.throughput, "{} vs {}", two.throughput, one.throughput);
    }

    #[test]
    fn monotone_across_default_grid() {
        for scenario in Scenario::ALL {
            let w = WorkloadSpec { scenario, total_requests: 4000, ..Default::default() };
            let ms: Vec<SimMetrics> =
                default_allocations().iter().map(|a| run_workload(&w, a, &corpus()).unwrap()).collect();
            for p in ms.windows(2) {
                assert!(p[1].success_rate >= p[0].success_rate, "{scenario}: {:?}", ms);
                assert!(p[1].avg_response_time <= p[0].avg_response_time, "{scenario}: {:?}", ms);
            }
        }
    }

    #[test]
    fn success_rate_cases() {
        assert_eq!(success_rate(&metrics(0.1, 20000, 20000)).unwrap(), 1.0);
        assert_eq!(success_rate(&metrics(0.1, 15000, 20000)).unwrap(), 0.75);
        assert_eq!(success_rate(&metrics(0.1, 0, 20000)).unwrap(), 0.0);
        assert_eq!(success_rate(&metrics(0.1, 0, 0)), Err(Error::NoRequests));
    }

    #[test]
    fn spending_budget_cases() {
        let c = CostConfig::new(0.0001, 1.0).unwrap();
        let m = metrics(0.5, 1000, 1000);
        let a = AllocationProfile::new(1024).unwrap();
        assert_relative_eq!(spending_budget(&m, &a, &c), 0.05, max_relative = 1e-12);
        assert_eq!(spending_budget(&metrics(0.5, 0, 10), &a, &c), 0.0);
        let b = AllocationProfile::new(2048).unwrap();
        assert_relative_eq!(spending_budget(&m, &b, &c), 2.0 * spending_budget(&m, &a, &c), max_relative = 1e-12);
    }

    #[test]
    fn headroom_cases() {
        let c = CostConfig::new(0.0001, 1.0).unwrap();
        assert_relative_eq!(headroom(0.05, &c), 0.95, max_relative = 1e-12);
        assert_eq!(headroom(1.0, &c), 0.0);
        assert!(headroom(1.5, &c) < 0.0);
        assert!(CostConfig::new(0.0, 1.0).is_err());
    }

    #[test]
    fn invalid_workloads() {
        let a = AllocationProfile::new(512).unwrap();
        assert!(run_workload(&WorkloadSpec { total_requests: 0, ..Default::default() }, &a, &corpus()).is_err());
        assert!(run_workload(&WorkloadSpec { timeout_s: 0.0, ..Default::default() }, &a, &corpus()).is_err());
        let empty = PayloadCorpus { trajectory_sizes: vec![], profile_sizes: vec![] };
        assert!(run_workload(&WorkloadSpec::default(), &a, &empty).is_err());
    }

    proptest! {
        #[test]
        fn metric_bounds(seed in 0u64..500, mem in 1u32..6, q in 0usize..4, clients in 1usize..20) {
            let w = WorkloadSpec { total_requests: 200, clients, queue_capacity: q, seed, ..Default::default() };
            let m = run_workload(&w, &AllocationProfile::new(mem * 512).unwrap(), &corpus()).unwrap();
            prop_assert_eq!(m.total, 200);
            prop_assert!(m.success_count <= m.total);
            prop_assert_eq!(m.success_count + m.rejected + m.timed_out, m.total);
            prop_assert!((0.0..=1.0).contains(&m.success_rate));
        }

        #[test]
        fn budget_linearity(cr in 1e-6f64..1e-3, t in 0.01f64..5.0, s in 1usize..50_000, k in 1.0f64..8.0) {
            let a = AllocationProfile::new(1024).unwrap();
            let c = CostConfig::new(cr, 1.0).unwrap();
            let base = spending_budget(&metrics(t, s, s), &a, &c);
            let scaled_t = spending_budget(&metrics(t * k, s, s), &a, &c);
            prop_assert!((scaled_t - k * base).abs() <= 1e-12 * k * base);
            let c2 = CostConfig::new(cr * k, 1.0).unwrap();
            let scaled_c = spending_budget(&metrics(t, s, s), &a, &c2);
            prop_assert!((scaled_c - k * base).abs() <= 1e-12 * k * base);
        }
    }
}
