//! Per-event invariant checks for audited runs.

use crate::diagnostics::{service_weight, waiting_weight};
use crate::network::ValidatedNetwork;
use crate::scheduling;

use super::state::{Assignment, InService, Job, JobType, SimState};

/// Relative slack on floating-point identities.
const SLACK: f64 = 1e-9;

/// Changes of `M1 + M2` caused by routing alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoutingIncrements {
    pub count: u64,
    pub mean: f64,
    pub stderr: f64,
}

impl RoutingIncrements {
    /// Mean within `k` standard errors of zero.
    pub fn centered(&self, k: f64) -> bool {
        self.mean.abs() <= k * self.stderr + 1e-12
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub instants: u64,
    pub feasibility: u64,
    pub maximality: u64,
    pub non_preemption: u64,
    pub counter: u64,
    pub workload_identity: u64,
    pub conservation: u64,
    pub synchrony: u64,
    pub first_violation: Option<String>,
    pub routing: RoutingIncrements,
}

impl AuditReport {
    pub fn violations(&self) -> u64 {
        self.feasibility
            + self.maximality
            + self.non_preemption
            + self.counter
            + self.workload_identity
            + self.conservation
            + self.synchrony
    }

    /// Merges reports of independent runs (routing increments pooled).
    pub fn merge(reports: &[AuditReport]) -> AuditReport {
        let mut out = AuditReport::default();
        let (mut n, mut s1, mut s2) = (0u64, 0.0, 0.0);
        for r in reports {
            out.instants += r.instants;
            out.feasibility += r.feasibility;
            out.maximality += r.maximality;
            out.non_preemption += r.non_preemption;
            out.counter += r.counter;
            out.workload_identity += r.workload_identity;
            out.conservation += r.conservation;
            out.synchrony += r.synchrony;
            if out.first_violation.is_none() {
                out.first_violation = r.first_violation.clone();
            }
            let c = r.routing.count as f64;
            n += r.routing.count;
            s1 += r.routing.mean * c;
            // Recover the sum of squares from mean and standard error.
            let var = if r.routing.count > 1 { r.routing.stderr.powi(2) * c } else { 0.0 };
            s2 += var * (c - 1.0).max(0.0) + c * r.routing.mean.powi(2);
        }
        out.routing = summarize(n, s1, s2);
        out
    }
}

fn summarize(n: u64, s1: f64, s2: f64) -> RoutingIncrements {
    if n == 0 {
        return RoutingIncrements::default();
    }
    let nf = n as f64;
    let mean = s1 / nf;
    let var = if n > 1 { ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    RoutingIncrements { count: n, mean, stderr: (var / nf).sqrt() }
}

pub(crate) struct Auditor<'a> {
    net: &'a ValidatedNetwork,
    depth: usize,
    report: AuditReport,
    prev_t: f64,
    expected: f64,
    snapshot: Vec<Option<(usize, f64)>>,
    inc_n: u64,
    inc_s1: f64,
    inc_s2: f64,
}

impl<'a> Auditor<'a> {
    pub fn new(net: &'a ValidatedNetwork, depth: usize) -> Self {
        Auditor {
            net,
            depth,
            report: AuditReport::default(),
            prev_t: 0.0,
            expected: 0.0,
            snapshot: Vec::new(),
            inc_n: 0,
            inc_s1: 0.0,
            inc_s2: 0.0,
        }
    }

    fn flag(&mut self, what: &str, detail: String) {
        if self.report.first_violation.is_none() {
            self.report.first_violation = Some(format!("{what}: {detail}"));
        }
    }

    /// Before the events of instant `t`: deplete the ledger for the time
    /// elapsed since the previous instant.
    pub fn begin_instant(&mut self, state: &SimState, t: f64) {
        self.report.instants += 1;
        if self.report.instants == 1 {
            self.expected = state.total_waiting() as f64;
        }
        let dt = t - self.prev_t;
        for (j, _, _) in state.serving() {
            self.expected -= self.net.activity(j).beta * dt;
        }
        self.prev_t = t;
        if self.net.spec().synchronized && t.fract() != 0.0 {
            self.report.synchrony += 1;
            self.flag("synchrony", format!("event at non-integer time {t}"));
        }
    }

    pub fn arrivals(&mut self, batch: u32) {
        self.expected += f64::from(batch);
    }

    pub fn completion(&mut self, state: &SimState, before: &Job, rec: &InService, t: f64, dest: Option<usize>) {
        if rec.end != t {
            self.report.non_preemption += 1;
            self.flag("non-preemption", format!("service ending {} completed at {t}", rec.end));
        }
        let after = dest.map(|_| state.job(rec.job));
        if let Some(job) = after {
            self.expected += 1.0;
            if job.counter != before.counter + 1 {
                self.report.counter += 1;
                self.flag("counter", format!("job {} went {} -> {}", job.id, before.counter, job.counter));
            }
        }
        if before.job_type(self.depth) != JobType::ShortPath {
            let w0 = service_weight(self.net, self.depth, before, 0.0);
            let w1 = after.map_or(0.0, |job| waiting_weight(self.net, self.depth, job));
            let d = w1 - w0;
            self.inc_n += 1;
            self.inc_s1 += d;
            self.inc_s2 += d * d;
        }
    }

    pub fn before_pass(&mut self, state: &SimState) {
        self.snapshot = (0..self.net.num_activities())
            .map(|j| state.in_service(j).map(|s| (s.job, s.end)))
            .collect();
    }

    pub fn started(&mut self, asg: &Assignment) {
        self.expected += asg.drawn - 1.0;
        if asg.counter == 0 {
            self.report.counter += 1;
            self.flag("counter", format!("job {} started with counter 0", asg.job_id));
        }
    }

    pub fn end_instant(&mut self, state: &SimState) {
        let net = self.net;
        for (j, snap) in self.snapshot.clone().into_iter().enumerate() {
            if let Some((job, end)) = snap {
                let kept = state.in_service(j).is_some_and(|s| s.job == job && s.end == end);
                if !kept {
                    self.report.non_preemption += 1;
                    self.flag("non-preemption", format!("activity {} lost its job", j + 1));
                }
            }
        }

        let mut holders = vec![0u32; net.num_processors()];
        for j in 0..net.num_activities() {
            if state.in_service(j).is_some() {
                for &k in &net.activity(j).processors {
                    holders[k] += 1;
                    if state.processor_holder(k) != Some(j) {
                        self.report.feasibility += 1;
                        self.flag("feasibility", format!("processor {} not held by activity {}", k + 1, j + 1));
                    }
                }
            }
        }
        if let Some(k) = holders.iter().position(|&c| c > 1) {
            self.report.feasibility += 1;
            self.flag("feasibility", format!("processor {} over capacity", k + 1));
        }

        for h in 0..net.components().len() {
            let u = scheduling::current_schedule(state, net, Some(h));
            let q = scheduling::queue_vector(state, net, Some(h));
            if !scheduling::is_maximal_wrt(net, &u, &q) {
                self.report.maximality += 1;
                self.flag("maximality", format!("component {} not maximal at t = {}", h + 1, state.time()));
            }
        }

        let mut v_by_records = vec![0.0; net.num_buffers()];
        for (j, job, v) in state.serving() {
            v_by_records[job.buffer] += v;
            if job.buffer != net.activity(j).buffer {
                self.report.workload_identity += 1;
                self.flag("workload", format!("activity {} serves a job of another buffer", j + 1));
            }
        }
        for i in 0..net.num_buffers() {
            let m = net.mean(i);
            let v: f64 = net.activities_of(i).iter().map(|&j| state.remaining(j)).sum();
            let w = m * state.waiting_len(i) as f64 + v;
            let w2 = m * state.recount_waiting(i) as f64 + v_by_records[i];
            if (w - w2).abs() > SLACK * w.max(1.0) {
                self.report.workload_identity += 1;
                self.flag("workload", format!("buffer {}: {w} vs {w2}", i + 1));
            }
        }

        let norm = state.norm();
        if (norm - self.expected).abs() > SLACK * norm.max(1.0) {
            self.report.conservation += 1;
            self.flag("conservation", format!("norm {norm} but ledger {} at t = {}", self.expected, state.time()));
        }
        self.expected = norm;
    }

    pub fn finish(mut self) -> AuditReport {
        self.report.routing = summarize(self.inc_n, self.inc_s1, self.inc_s2);
        self.report
    }
}
