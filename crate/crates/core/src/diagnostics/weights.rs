//! Expected remaining work of each job and the per-type totals.

use std::collections::BTreeMap;

use crate::network::ValidatedNetwork;
use crate::sim::{Job, JobType, SimState};

/// Sum of means along `path` from position `from` (1-based) to its end.
fn path_work(net: &ValidatedNetwork, path: &[usize], from: usize) -> f64 {
    path.iter().skip(from.saturating_sub(1)).map(|&i| net.mean(i)).sum()
}

/// Weight of a waiting job: its expected remaining work including the visit
/// to its current buffer.
pub fn waiting_weight(net: &ValidatedNetwork, depth: usize, job: &Job) -> f64 {
    let c = job.counter as usize;
    match job.job_type(depth) {
        JobType::Routed => net.visit_work()[job.buffer],
        JobType::FullPath => net.next_work()[job.path[depth - 1]] + path_work(net, &job.path, c),
        JobType::ShortPath => path_work(net, &job.path, c),
    }
}

/// Weight of a job in service with remaining requirement `v`: `v` plus the
/// expected work after the current visit.
pub fn service_weight(net: &ValidatedNetwork, depth: usize, job: &Job, v: f64) -> f64 {
    let c = job.counter as usize;
    v + match job.job_type(depth) {
        JobType::Routed => net.next_work()[job.buffer],
        JobType::FullPath => net.next_work()[job.path[depth - 1]] + path_work(net, &job.path, c + 1),
        JobType::ShortPath => path_work(net, &job.path, c + 1),
    }
}

/// Where a job currently is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JobPlace {
    Waiting,
    /// In service with the given remaining requirement.
    InService(f64),
}

pub fn job_weight(net: &ValidatedNetwork, depth: usize, job: &Job, place: JobPlace) -> f64 {
    match place {
        JobPlace::Waiting => waiting_weight(net, depth, job),
        JobPlace::InService(v) => service_weight(net, depth, job, v),
    }
}

/// Total weights of Type 1 (counter beyond the depth), Type 2 (pre-drawn
/// path of full depth) and Type 3 (shorter pre-drawn path) jobs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeightTable {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl WeightTable {
    pub fn total(&self) -> f64 {
        self.m1 + self.m2 + self.m3
    }
}

/// `M1`, `M2`, `M3` from aggregate counts: waiting Type 1 jobs by buffer and
/// waiting Type 2/3 jobs by (path, position), then the jobs in service.
pub fn total_weights(state: &SimState, net: &ValidatedNetwork) -> WeightTable {
    let depth = state.depth();
    let n = net.num_buffers();
    let mut routed = vec![0u64; n];
    let mut on_path: BTreeMap<(&[usize], u32), u64> = BTreeMap::new();
    for i in 0..n {
        for job in state.waiting_jobs(i) {
            if job.counter as usize > depth {
                routed[i] += 1;
            } else {
                *on_path.entry((job.path.as_slice(), job.counter)).or_default() += 1;
            }
        }
    }
    let mut t = WeightTable::default();
    for i in 0..n {
        t.m1 += routed[i] as f64 * net.visit_work()[i];
    }
    let m = net.means();
    for ((path, pos), count) in on_path {
        let tail: f64 = (pos as usize..=path.len()).map(|k| m[path[k - 1]]).sum();
        if path.len() == depth {
            t.m2 += count as f64 * (net.next_work()[path[depth - 1]] + tail);
        } else {
            t.m3 += count as f64 * tail;
        }
    }
    for (_, job, v) in state.serving() {
        let c = job.counter as usize;
        if c > depth {
            t.m1 += v + net.next_work()[job.buffer];
        } else {
            let tail: f64 = (c + 1..=job.path.len()).map(|k| m[job.path[k - 1]]).sum();
            if job.path.len() == depth {
                t.m2 += v + net.next_work()[job.path[depth - 1]] + tail;
            } else {
                t.m3 += v + tail;
            }
        }
    }
    t
}

/// Sum of [`job_weight`] over every job, waiting or in service.
pub fn sum_job_weights(state: &SimState, net: &ValidatedNetwork) -> f64 {
    let depth = state.depth();
    let waiting: f64 = (0..net.num_buffers())
        .flat_map(|i| state.waiting_jobs(i))
        .map(|job| job_weight(net, depth, job, JobPlace::Waiting))
        .sum();
    let serving: f64 = state.serving().map(|(_, job, v)| job_weight(net, depth, job, JobPlace::InService(v))).sum();
    waiting + serving
}
