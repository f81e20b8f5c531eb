//! Immediate and counted workloads.

use crate::network::ValidatedNetwork;
use crate::sim::SimState;

use super::DiagnosticsError;

/// `W_i = m_i Q_i + V_i` per buffer.
pub fn immediate_workload(state: &SimState, net: &ValidatedNetwork) -> Vec<f64> {
    let v = remaining_by_buffer(state, net, None);
    (0..net.num_buffers()).map(|i| net.mean(i) * state.waiting_len(i) as f64 + v[i]).collect()
}

/// `V_i`, or `V_{i,≤c}` when `upto` is given.
pub fn remaining_by_buffer(state: &SimState, net: &ValidatedNetwork, upto: Option<u32>) -> Vec<f64> {
    let mut v = vec![0.0; net.num_buffers()];
    for (_, job, rem) in state.serving() {
        if upto.is_none_or(|c| job.counter <= c) {
            v[job.buffer] += rem;
        }
    }
    v
}

/// Counted queues and workloads for one counter level `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadView {
    pub c: u32,
    /// `W_i`.
    pub immediate: Vec<f64>,
    /// `Q_{i,≤c}`.
    pub queue_upto: Vec<u64>,
    /// `Q̂_{i,≤c}`: waiting jobs with counter `≤ c` in or destined for `i`.
    pub queue_hat: Vec<u64>,
    /// `W_{i,<c}`.
    pub below: Vec<f64>,
    /// `W_{i,≤c}`.
    pub upto: Vec<f64>,
    /// `Ŵ_{i,≤c}`.
    pub hat: Vec<f64>,
}

/// Counted workloads at level `c`. Uses `V_i` on unsynchronized networks and
/// `V_{i,<c}`, `V_{i,≤c}` on synchronized ones.
pub fn counted_workloads(state: &SimState, net: &ValidatedNetwork, c: u32) -> Result<WorkloadView, DiagnosticsError> {
    let depth = state.depth();
    if c as usize > depth {
        return Err(DiagnosticsError::PredrawDepthInsufficient { needed: c as usize, depth });
    }
    let n = net.num_buffers();
    let mut below_q = vec![0u64; n];
    let mut upto_q = vec![0u64; n];
    let mut hat_q = vec![0u64; n];
    for i in 0..n {
        for job in state.waiting_jobs(i) {
            let m = job.counter;
            if m < c {
                below_q[i] += 1;
            }
            if m <= c {
                upto_q[i] += 1;
                hat_q[i] += 1;
                for r in (m + 1)..=c {
                    if let Some(&dest) = job.path.get(r as usize - 1) {
                        hat_q[dest] += 1;
                    }
                }
            }
        }
    }
    let (v_below, v_upto) = if net.spec().synchronized {
        let below = if c == 0 { vec![0.0; n] } else { remaining_by_buffer(state, net, Some(c - 1)) };
        (below, remaining_by_buffer(state, net, Some(c)))
    } else {
        let v = remaining_by_buffer(state, net, None);
        (v.clone(), v)
    };
    let m = net.means();
    let lin = |q: &[u64], v: &[f64]| -> Vec<f64> { (0..n).map(|i| m[i] * q[i] as f64 + v[i]).collect() };
    Ok(WorkloadView {
        c,
        immediate: immediate_workload(state, net),
        below: lin(&below_q, &v_below),
        upto: lin(&upto_q, &v_upto),
        hat: lin(&hat_q, &v_upto),
        queue_upto: upto_q,
        queue_hat: hat_q,
    })
}

/// `Ŵ_{≤c}` for every `c = 1..=d` in one pass over the waiting jobs.
pub fn counted_hat_levels(state: &SimState, net: &ValidatedNetwork, d: usize) -> Result<Vec<Vec<f64>>, DiagnosticsError> {
    let depth = state.depth();
    if d > depth {
        return Err(DiagnosticsError::PredrawDepthInsufficient { needed: d, depth });
    }
    let n = net.num_buffers();
    // hat[c - 1][i] = Q̂_{i,≤c}, built from per-level increments.
    let mut inc = vec![vec![0u64; n]; d + 1];
    for i in 0..n {
        for job in state.waiting_jobs(i) {
            let m = job.counter as usize;
            if m > d {
                continue;
            }
            inc[m][i] += 1;
            for r in (m + 1)..=d {
                if let Some(&dest) = job.path.get(r - 1) {
                    inc[r][dest] += 1;
                }
            }
        }
    }
    let m = net.means();
    let sync = net.spec().synchronized;
    let v_all = remaining_by_buffer(state, net, None);
    let mut q = vec![0u64; n];
    let mut out = Vec::with_capacity(d);
    for c in 1..=d {
        for i in 0..n {
            q[i] += inc[c][i];
        }
        let v = if sync { remaining_by_buffer(state, net, Some(c as u32)) } else { v_all.clone() };
        out.push((0..n).map(|i| m[i] * q[i] as f64 + v[i]).collect());
    }
    Ok(out)
}
