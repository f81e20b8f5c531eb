//! Event-driven simulation of the network process, optionally with routes
//! pre-drawn to a fixed depth at external arrival.

mod audit;
mod state;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use thiserror::Error;

use crate::network::ValidatedNetwork;
use crate::scheduling::{self, PolicyError, PolicyKind};

pub use audit::{AuditReport, RoutingIncrements};
pub use state::{
    sample_next, stream, stream_id, Assignment, InService, Job, JobType, Pick, SimState, TieBreak,
};

/// Jobs present at time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialJobs {
    pub buffer: usize,
    pub counter: u32,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub horizon: f64,
    pub sample_interval: f64,
    pub seed: u64,
    /// Route pre-draw depth `D`; 0 simulates the plain process.
    pub predraw_depth: usize,
    /// Record `Q_{i,c}` for `c <= counter_cap` in every sample (0: off).
    pub counter_cap: usize,
    pub replications: usize,
    pub tiebreak: TieBreak,
    pub initial: Vec<InitialJobs>,
    pub audit: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            horizon: 1e4,
            sample_interval: 1.0,
            seed: 0,
            predraw_depth: 0,
            counter_cap: 0,
            replications: 1,
            tiebreak: TieBreak::Lowest,
            initial: Vec::new(),
            audit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("horizon must be positive, got {0}")]
    HorizonNonPositive(f64),
    #[error("sample interval must be positive, got {0}")]
    SampleIntervalNonPositive(f64),
    #[error("synchronized network: {0}")]
    IncompatibleSynchronizedPolicyShape(String),
    #[error("policy: {0}")]
    Policy(#[from] PolicyError),
    #[error("initial state: {0}")]
    BadInitialState(String),
    #[error("replication count must be at least 1")]
    NoReplications,
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::HorizonNonPositive(_) => "HorizonNonPositive",
            SimError::SampleIntervalNonPositive(_) => "SampleIntervalNonPositive",
            SimError::IncompatibleSynchronizedPolicyShape(_) => "IncompatibleSynchronizedPolicyShape",
            SimError::Policy(_) => "Policy",
            SimError::BadInitialState(_) => "BadInitialState",
            SimError::NoReplications => "NoReplications",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub t: f64,
    pub norm: f64,
    /// `Q_i` per buffer.
    pub queues: Vec<u64>,
    /// `V_i` per buffer.
    pub remaining: Vec<f64>,
    /// `Q_{i,c}` for `c = 1..=counter_cap`, per buffer; empty when off.
    pub counters: Vec<Vec<u64>>,
    pub probe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub rows: Vec<SampleRow>,
    pub events_processed: u64,
    pub final_norm: f64,
    pub final_jobs: usize,
    /// Jobs entering each buffer, by arrival or routing.
    pub visits: Vec<u64>,
    pub audit: Option<AuditReport>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.norm).collect()
    }

    /// Average of the sampled norm.
    pub fn time_avg_norm(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.norm).sum::<f64>() / self.rows.len() as f64
    }
}

/// Function of the state recorded with every sample.
pub type Probe<'a> = &'a (dyn Fn(&SimState) -> f64 + Sync);

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Completion,
    Arrival { batch: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    index: usize,
    seq: u64,
}

impl Event {
    fn class(&self) -> u8 {
        match self.kind {
            EventKind::Completion => 0,
            EventKind::Arrival { .. } => 1,
        }
    }

    fn key(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.class().cmp(&other.class()))
            .then(self.index.cmp(&other.index))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: the heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key(self)
    }
}

struct Calendar {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl Calendar {
    fn push(&mut self, time: f64, kind: EventKind, index: usize) {
        self.seq += 1;
        self.heap.push(Event { time, kind, index, seq: self.seq });
    }

    fn next_time(&self) -> f64 {
        self.heap.peek().map_or(f64::INFINITY, |e| e.time)
    }
}

fn check_options(net: &ValidatedNetwork, policy: &PolicyKind, opts: &SimOptions) -> Result<(), SimError> {
    if !(opts.horizon > 0.0) {
        return Err(SimError::HorizonNonPositive(opts.horizon));
    }
    if !(opts.sample_interval > 0.0) {
        return Err(SimError::SampleIntervalNonPositive(opts.sample_interval));
    }
    policy.check(net.num_buffers())?;
    if net.spec().synchronized {
        for (what, v) in [("horizon", opts.horizon), ("sample interval", opts.sample_interval)] {
            if v.fract() != 0.0 {
                return Err(SimError::IncompatibleSynchronizedPolicyShape(format!(
                    "{what} must be a whole number of slots, got {v}"
                )));
            }
        }
    }
    for init in &opts.initial {
        if init.buffer >= net.num_buffers() {
            return Err(SimError::BadInitialState(format!("buffer {} does not exist", init.buffer + 1)));
        }
        if init.counter == 0 {
            return Err(SimError::BadInitialState("counters start at 1".into()));
        }
    }
    Ok(())
}

pub fn simulate(net: &ValidatedNetwork, policy: &PolicyKind, opts: &SimOptions) -> Result<Trajectory, SimError> {
    simulate_with(net, policy, opts, None)
}

/// Simulates one run with seed `opts.seed`, evaluating `probe` at every
/// sample.
pub fn simulate_with(
    net: &ValidatedNetwork,
    policy: &PolicyKind,
    opts: &SimOptions,
    probe: Option<Probe>,
) -> Result<Trajectory, SimError> {
    check_options(net, policy, opts)?;
    let n = net.num_buffers();
    let h_count = net.components().len();
    let mut state = SimState::new(net, opts.predraw_depth, opts.seed, opts.tiebreak);
    let mut cal = Calendar { heap: BinaryHeap::new(), seq: 0 };
    let mut audit = opts.audit.then(|| audit::Auditor::new(net, opts.predraw_depth));
    let mut visits = vec![0u64; n];
    let mut affected = vec![false; h_count];

    for init in &opts.initial {
        for _ in 0..init.count {
            state.add_job(net, init.buffer, init.counter);
            visits[init.buffer] += 1;
        }
        affected[net.component_of(init.buffer)] = true;
    }
    for i in 0..n {
        let model = &net.spec().buffers[i].arrival;
        if let Some((t, batch)) = model.first(state.arrival_rng(i)) {
            cal.push(t, EventKind::Arrival { batch }, i);
        }
    }

    let mut rows = Vec::new();
    let mut k: u64 = 0;
    let mut events: u64 = 0;
    // Initial jobs get a pass at time 0 unless events at 0 trigger one.
    if cal.next_time() > 0.0 && affected.iter().any(|&a| a) {
        if let Some(a) = audit.as_mut() {
            a.begin_instant(&state, 0.0);
        }
        policy_pass(&mut state, net, policy, &mut affected, &mut cal, audit.as_mut());
        if let Some(a) = audit.as_mut() {
            a.end_instant(&state);
        }
    }
    loop {
        let next_t = cal.next_time();
        loop {
            let ts = k as f64 * opts.sample_interval;
            if ts > opts.horizon || ts >= next_t {
                break;
            }
            state.t = ts;
            rows.push(sample(&state, net, opts.counter_cap, probe));
            k += 1;
        }
        if next_t > opts.horizon {
            break;
        }

        state.t = next_t;
        if let Some(a) = audit.as_mut() {
            a.begin_instant(&state, next_t);
        }
        while cal.next_time() == next_t {
            let ev = cal.heap.pop().expect("peeked");
            events += 1;
            match ev.kind {
                EventKind::Completion => {
                    let j = ev.index;
                    let before = audit.as_ref().map(|_| {
                        let rec = *state.in_service(j).expect("busy activity");
                        (state.job(rec.job).clone(), rec)
                    });
                    let dest = state.complete(net, j);
                    affected[net.component_of(net.activity(j).buffer)] = true;
                    if let Some(l) = dest {
                        visits[l] += 1;
                        affected[net.component_of(l)] = true;
                    }
                    if let (Some(a), Some((job, rec))) = (audit.as_mut(), before) {
                        a.completion(&state, &job, &rec, next_t, dest);
                    }
                }
                EventKind::Arrival { batch } => {
                    let i = ev.index;
                    for _ in 0..batch {
                        state.add_job(net, i, 1);
                    }
                    visits[i] += u64::from(batch);
                    affected[net.component_of(i)] = true;
                    if let Some(a) = audit.as_mut() {
                        a.arrivals(batch);
                    }
                    let model = &net.spec().buffers[i].arrival;
                    if let Some((t, b)) = model.next_after(next_t, state.arrival_rng(i)) {
                        cal.push(t, EventKind::Arrival { batch: b }, i);
                    }
                }
            }
        }
        policy_pass(&mut state, net, policy, &mut affected, &mut cal, audit.as_mut());
        if let Some(a) = audit.as_mut() {
            a.end_instant(&state);
        }
    }
    state.t = opts.horizon;
    Ok(Trajectory {
        seed: opts.seed,
        rows,
        events_processed: events,
        final_norm: state.norm(),
        final_jobs: state.live_jobs(),
        visits,
        audit: audit.map(|a| a.finish()),
    })
}

fn policy_pass(
    state: &mut SimState,
    net: &ValidatedNetwork,
    policy: &PolicyKind,
    affected: &mut [bool],
    cal: &mut Calendar,
    mut audit: Option<&mut audit::Auditor>,
) {
    if let Some(a) = audit.as_deref_mut() {
        a.before_pass(state);
    }
    for h in 0..affected.len() {
        if !std::mem::take(&mut affected[h]) {
            continue;
        }
        for asg in scheduling::decide(state, net, h, policy) {
            cal.push(asg.end, EventKind::Completion, asg.activity);
            if let Some(a) = audit.as_deref_mut() {
                a.started(&asg);
            }
        }
    }
}

fn sample(state: &SimState, net: &ValidatedNetwork, cap: usize, probe: Option<Probe>) -> SampleRow {
    let n = net.num_buffers();
    let queues: Vec<u64> = (0..n).map(|i| state.waiting_len(i)).collect();
    let mut remaining = vec![0.0; n];
    for (j, _, v) in state.serving() {
        remaining[net.activity(j).buffer] += v;
    }
    let counters = if cap == 0 {
        Vec::new()
    } else {
        (0..n)
            .map(|i| (1..=cap as u32).map(|c| state.waiting_with_counter(i, c)).collect())
            .collect()
    };
    let norm = queues.iter().sum::<u64>() as f64 + remaining.iter().sum::<f64>();
    SampleRow { t: state.time(), norm, queues, remaining, counters, probe: probe.map(|p| p(state)) }
}

/// Independent runs with seeds `opts.seed, opts.seed + 1, ...`, in seed
/// order. Runs execute in parallel.
pub fn run_replications(
    net: &ValidatedNetwork,
    policy: &PolicyKind,
    opts: &SimOptions,
    probe: Option<Probe>,
) -> Result<Vec<Trajectory>, SimError> {
    if opts.replications == 0 {
        return Err(SimError::NoReplications);
    }
    check_options(net, policy, opts)?;
    (0..opts.replications as u64)
        .into_par_iter()
        .map(|r| {
            let o = SimOptions { seed: opts.seed.wrapping_add(r), ..opts.clone() };
            simulate_with(net, policy, &o, probe)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::network::{validate, validate_with, ValidationPolicy};

    fn rs_opts(horizon: f64, seed: u64) -> SimOptions {
        SimOptions { horizon, sample_interval: 1.0, seed, audit: true, ..SimOptions::default() }
    }

    #[test]
    fn empty_network_stays_empty() {
        let mut spec = examples::tandem();
        spec.buffers[0].arrival = crate::network::ArrivalModel::None;
        let net = validate_with(spec, ValidationPolicy { require_arrivals: false }).unwrap();
        let tr = simulate(&net, &PolicyKind::Lrfs, &rs_opts(50.0, 1)).unwrap();
        assert_eq!(tr.rows.len(), 51);
        assert!(tr.rows.iter().all(|r| r.norm == 0.0));
        assert_eq!(tr.events_processed, 0);
    }

    #[test]
    fn bad_options_are_rejected() {
        let net = validate(examples::tandem()).unwrap();
        let o = SimOptions { horizon: 0.0, ..SimOptions::default() };
        assert_eq!(simulate(&net, &PolicyKind::Lrfs, &o), Err(SimError::HorizonNonPositive(0.0)));
        let net = validate(examples::switch_2x2(0.2)).unwrap();
        let o = SimOptions { horizon: 10.5, ..SimOptions::default() };
        assert!(matches!(
            simulate(&net, &PolicyKind::Lrfs, &o),
            Err(SimError::IncompatibleSynchronizedPolicyShape(_))
        ));
    }

    #[test]
    fn sample_times_are_increasing_multiples() {
        let net = validate(examples::rybko_stolyar(&examples::RS_MEANS)).unwrap();
        let o = SimOptions { sample_interval: 0.5, ..rs_opts(100.0, 3) };
        let tr = simulate(&net, &PolicyKind::Lrfs, &o).unwrap();
        assert_eq!(tr.rows.len(), 201);
        for (k, r) in tr.rows.iter().enumerate() {
            assert_eq!(r.t, k as f64 * 0.5);
        }
        let audit = tr.audit.unwrap();
        assert_eq!(audit.violations(), 0, "{audit:?}");
    }

    #[test]
    fn same_seed_same_trajectory() {
        let net = validate(examples::psn_a2()).unwrap();
        let o = SimOptions { tiebreak: TieBreak::Random, ..rs_opts(500.0, 11) };
        let p = PolicyKind::EpsLrfs { epsilon: 0.2 };
        let a = simulate(&net, &p, &o).unwrap();
        let b = simulate(&net, &p, &o).unwrap();
        assert_eq!(a, b);
        let c = simulate(&net, &p, &SimOptions { seed: 12, ..o }).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn replications_use_consecutive_seeds() {
        let net = validate(examples::tandem()).unwrap();
        let o = SimOptions { replications: 3, ..rs_opts(200.0, 40) };
        let reps = run_replications(&net, &PolicyKind::Lrfs, &o, None).unwrap();
        assert_eq!(reps.iter().map(|t| t.seed).collect::<Vec<_>>(), vec![40, 41, 42]);
        assert_eq!(reps[1], simulate(&net, &PolicyKind::Lrfs, &SimOptions { seed: 41, ..o.clone() }).unwrap());
        let single = run_replications(&net, &PolicyKind::Lrfs, &SimOptions { replications: 1, ..o.clone() }, None)
            .unwrap();
        assert_eq!(single[0], simulate(&net, &PolicyKind::Lrfs, &o).unwrap());
    }

    #[test]
    fn synchronized_events_fall_on_integers() {
        let net = validate(examples::wireless_fig4()).unwrap();
        let o = SimOptions { sample_interval: 1.0, ..rs_opts(2000.0, 5) };
        let tr = simulate(&net, &PolicyKind::EpsLrfs { epsilon: 0.0125 }, &o).unwrap();
        let audit = tr.audit.unwrap();
        assert_eq!(audit.violations(), 0, "{audit:?}");
        for r in &tr.rows {
            assert!(r.remaining.iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }

    #[test]
    fn initial_backlog_is_served() {
        let net = validate(examples::rybko_stolyar(&examples::RS_MEANS)).unwrap();
        let o = SimOptions {
            initial: vec![InitialJobs { buffer: 0, counter: 1, count: 200 }],
            predraw_depth: 2,
            counter_cap: 3,
            ..rs_opts(50.0, 2)
        };
        let tr = simulate(&net, &PolicyKind::Lrfs, &o).unwrap();
        assert_eq!(tr.rows[0].norm, 200.0 - 1.0 + 0.1);
        assert_eq!(tr.rows[0].counters[0], vec![199, 0, 0]);
        let audit = tr.audit.unwrap();
        assert_eq!(audit.violations(), 0, "{audit:?}");
    }
}
