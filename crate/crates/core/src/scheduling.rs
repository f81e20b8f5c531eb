//! Maximal schedules and the LRFS, ε-LRFS and static-priority policies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::ValidatedNetwork;
use crate::sim::{Assignment, Pick, SimState};

/// Default cap on `2^J` for exhaustive schedule enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("enumerating 2^{activities} schedules exceeds the cap {cap}")]
pub struct EnumerationTooLarge {
    pub activities: usize,
    pub cap: u64,
}

/// Binary activity employment vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScheduleVector(pub Vec<bool>);

/// Which buffers hold work.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportPattern(pub Vec<bool>);

impl SupportPattern {
    pub fn of(w: &[f64]) -> Self {
        SupportPattern(w.iter().map(|&x| x > 0.0).collect())
    }
}

impl ScheduleVector {
    pub fn zeros(n: usize) -> Self {
        ScheduleVector(vec![false; n])
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        ScheduleVector(bits.iter().map(|&b| b != 0).collect())
    }

    /// Number of employed activities using each processor.
    pub fn usage(&self, net: &ValidatedNetwork) -> Vec<u32> {
        let mut used = vec![0; net.num_processors()];
        for (j, _) in self.0.iter().enumerate().filter(|(_, &on)| on) {
            for &k in &net.activity(j).processors {
                used[k] += 1;
            }
        }
        used
    }

    pub fn is_feasible(&self, net: &ValidatedNetwork) -> bool {
        self.usage(net).iter().all(|&c| c <= 1)
    }

    /// Service rate vector `s(u)`: `s_i = Σ_{j ∈ J_i} β_j u_j`.
    pub fn rates(&self, net: &ValidatedNetwork) -> Vec<f64> {
        let mut s = vec![0.0; net.num_buffers()];
        for (j, _) in self.0.iter().enumerate().filter(|(_, &on)| on) {
            let a = net.activity(j);
            s[a.buffer] += a.beta;
        }
        s
    }
}

/// Activity `j` cannot be added to `u` without exceeding some processor's
/// capacity (in particular when `u_j = 1`).
pub fn is_maximal_activity(net: &ValidatedNetwork, j: usize, u: &ScheduleVector) -> bool {
    let used = u.usage(net);
    net.activity(j).processors.iter().any(|&k| used[k] >= 1)
}

/// Every activity serving a buffer with positive `w` is maximal in `u`.
pub fn is_maximal_wrt(net: &ValidatedNetwork, u: &ScheduleVector, w: &[f64]) -> bool {
    is_maximal_for(net, u, &SupportPattern::of(w))
}

pub fn is_maximal_for(net: &ValidatedNetwork, u: &ScheduleVector, pattern: &SupportPattern) -> bool {
    let used = u.usage(net);
    net.spec().activities.iter().all(|a| {
        !pattern.0[a.buffer] || a.processors.iter().any(|&k| used[k] >= 1)
    })
}

/// Buffers with an activity that is not maximal in `u`, i.e. one that could
/// still be added without exceeding capacity.
pub fn open_buffers(net: &ValidatedNetwork, u: &ScheduleVector) -> Vec<bool> {
    let used = u.usage(net);
    let mut open = vec![false; net.num_buffers()];
    for a in &net.spec().activities {
        if a.processors.iter().all(|&k| used[k] == 0) {
            open[a.buffer] = true;
        }
    }
    open
}

fn check_cap(net: &ValidatedNetwork, cap: u64) -> Result<(), EnumerationTooLarge> {
    let j = net.num_activities();
    if j >= 64 || (1u64 << j) > cap {
        return Err(EnumerationTooLarge { activities: j, cap });
    }
    Ok(())
}

/// Every capacity-feasible schedule, in lexicographic order of the bit
/// vector read from activity 0.
pub fn enumerate_feasible(net: &ValidatedNetwork, cap: u64) -> Result<Vec<ScheduleVector>, EnumerationTooLarge> {
    check_cap(net, cap)?;
    let mut out = Vec::new();
    let mut used = vec![false; net.num_processors()];
    let mut cur = vec![false; net.num_activities()];
    feasible_rec(net, 0, &mut used, &mut cur, &mut out);
    Ok(out)
}

fn feasible_rec(
    net: &ValidatedNetwork,
    j: usize,
    used: &mut [bool],
    cur: &mut Vec<bool>,
    out: &mut Vec<ScheduleVector>,
) {
    if j == cur.len() {
        out.push(ScheduleVector(cur.clone()));
        return;
    }
    feasible_rec(net, j + 1, used, cur, out);
    let procs = &net.activity(j).processors;
    if procs.iter().all(|&k| !used[k]) {
        for &k in procs {
            used[k] = true;
        }
        cur[j] = true;
        feasible_rec(net, j + 1, used, cur, out);
        cur[j] = false;
        for &k in procs {
            used[k] = false;
        }
    }
}

/// `M(w)` for any `w` with the given support.
pub fn enumerate_maximal(
    net: &ValidatedNetwork,
    pattern: &SupportPattern,
    cap: u64,
) -> Result<Vec<ScheduleVector>, EnumerationTooLarge> {
    Ok(enumerate_feasible(net, cap)?
        .into_iter()
        .filter(|u| is_maximal_for(net, u, pattern))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolicyKind {
    Lrfs,
    EpsLrfs { epsilon: f64 },
    /// Buffers listed from highest to lowest priority.
    StaticPriority { order: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("epsilon must lie in [0, 1], got {0}")]
    EpsilonOutOfRange(f64),
    #[error("priority order must list every buffer exactly once")]
    BadPriorityOrder,
}

impl PolicyError {
    pub fn code(&self) -> &'static str {
        match self {
            PolicyError::EpsilonOutOfRange(_) => "EpsilonOutOfRange",
            PolicyError::BadPriorityOrder => "BadPriorityOrder",
        }
    }
}

impl PolicyKind {
    pub fn check(&self, buffers: usize) -> Result<(), PolicyError> {
        match self {
            PolicyKind::Lrfs => Ok(()),
            PolicyKind::EpsLrfs { epsilon } => {
                if (0.0..=1.0).contains(epsilon) {
                    Ok(())
                } else {
                    Err(PolicyError::EpsilonOutOfRange(*epsilon))
                }
            }
            PolicyKind::StaticPriority { order } => {
                let mut seen = vec![false; buffers];
                for &i in order {
                    if i >= buffers || seen[i] {
                        return Err(PolicyError::BadPriorityOrder);
                    }
                    seen[i] = true;
                }
                if seen.iter().all(|&s| s) {
                    Ok(())
                } else {
                    Err(PolicyError::BadPriorityOrder)
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Lrfs => "lrfs",
            PolicyKind::EpsLrfs { .. } => "eps-lrfs",
            PolicyKind::StaticPriority { .. } => "static-priority",
        }
    }
}

/// Runs the policy for component `h` and returns the jobs started.
pub fn decide(state: &mut SimState, net: &ValidatedNetwork, h: usize, policy: &PolicyKind) -> Vec<Assignment> {
    match policy {
        PolicyKind::Lrfs => lrfs_decide(state, net, h),
        PolicyKind::EpsLrfs { epsilon } => eps_lrfs_decide(state, net, h, *epsilon),
        PolicyKind::StaticPriority { order } => static_priority_decide(state, net, h, order),
    }
}

/// Activities of component `h` with waiting work and all processors idle.
fn non_maximal(state: &SimState, net: &ValidatedNetwork, h: usize) -> Vec<usize> {
    net.components()[h]
        .activities
        .iter()
        .copied()
        .filter(|&j| {
            let a = net.activity(j);
            state.waiting_len(a.buffer) > 0 && a.processors.iter().all(|&k| state.processor_free(k))
        })
        .collect()
}

fn eligible_activity(state: &mut SimState, net: &ValidatedNetwork, sigma: &[usize], buffer: usize) -> usize {
    let options: Vec<usize> = sigma.iter().copied().filter(|&j| net.activity(j).buffer == buffer).collect();
    let pick = state.tie(options.len());
    options[pick]
}

/// LRFS for component `h`: while some activity is non-maximal, start the
/// smallest-counter job among the buffers of those activities.
pub fn lrfs_decide(state: &mut SimState, net: &ValidatedNetwork, h: usize) -> Vec<Assignment> {
    let mut started = Vec::new();
    loop {
        let sigma = non_maximal(state, net, h);
        if sigma.is_empty() {
            return started;
        }
        let mut best: Option<u32> = None;
        let mut tied: Vec<usize> = Vec::new();
        for &j in &sigma {
            let i = net.activity(j).buffer;
            if tied.contains(&i) {
                continue;
            }
            let c = state.min_counter(i).expect("buffer has waiting jobs");
            match best {
                Some(b) if c > b => {}
                Some(b) if c == b => tied.push(i),
                _ => {
                    best = Some(c);
                    tied.clear();
                    tied.push(i);
                }
            }
        }
        tied.sort_unstable();
        let pick = state.tie(tied.len());
        let buffer = tied[pick];
        let j = eligible_activity(state, net, &sigma, buffer);
        started.push(state.start(net, j, Pick::SmallestCounter));
    }
}

/// ε-LRFS for component `h`. When the component timer is zero and the
/// buffer holding the largest-counter job (lowest index on ties) has a
/// non-maximal activity, that job is started with probability `epsilon`
/// and the timer is reset whatever the coin shows. LRFS then completes
/// the schedule.
pub fn eps_lrfs_decide(state: &mut SimState, net: &ValidatedNetwork, h: usize, epsilon: f64) -> Vec<Assignment> {
    let mut started = Vec::new();
    if epsilon > 0.0 {
        let mut target: Option<(u32, usize)> = None;
        for &i in &net.components()[h].buffers {
            if let Some(c) = state.max_counter(i) {
                if target.is_none_or(|(best, _)| c > best) {
                    target = Some((c, i));
                }
            }
        }
        if let Some((_, i)) = target {
            let sigma: Vec<usize> = net
                .activities_of(i)
                .iter()
                .copied()
                .filter(|&j| net.activity(j).processors.iter().all(|&k| state.processor_free(k)))
                .collect();
            if !sigma.is_empty() && state.timer(h) == 0.0 {
                if state.policy_coin(epsilon) {
                    let j = eligible_activity(state, net, &sigma, i);
                    started.push(state.start(net, j, Pick::LargestCounter));
                }
                state.set_timer(h);
            }
        }
    }
    started.extend(lrfs_decide(state, net, h));
    started
}

/// Static priority within component `h`: buffers are visited in `order`
/// and each takes every idle activity it can, smallest counter first.
pub fn static_priority_decide(
    state: &mut SimState,
    net: &ValidatedNetwork,
    h: usize,
    order: &[usize],
) -> Vec<Assignment> {
    let mut started = Vec::new();
    for &i in order {
        if net.component_of(i) != h {
            continue;
        }
        for &j in net.activities_of(i) {
            if state.waiting_len(i) == 0 {
                break;
            }
            if net.activity(j).processors.iter().all(|&k| state.processor_free(k)) {
                started.push(state.start(net, j, Pick::SmallestCounter));
            }
        }
    }
    started
}

/// Current schedule `σ(t)` restricted to the activities of component `h`
/// (all activities when `h` is `None`).
pub fn current_schedule(state: &SimState, net: &ValidatedNetwork, h: Option<usize>) -> ScheduleVector {
    let mut u = ScheduleVector::zeros(net.num_activities());
    for j in 0..net.num_activities() {
        let inside = h.is_none_or(|h| net.component_of(net.activity(j).buffer) == h);
        u.0[j] = inside && state.in_service(j).is_some();
    }
    u
}

/// Queue vector `Q^(h)(t)` (all buffers when `h` is `None`).
pub fn queue_vector(state: &SimState, net: &ValidatedNetwork, h: Option<usize>) -> Vec<f64> {
    (0..net.num_buffers())
        .map(|i| {
            if h.is_none_or(|h| net.component_of(i) == h) {
                state.waiting_len(i) as f64
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::network::{validate, ValidatedNetwork};
    use crate::sim::TieBreak;

    fn rs() -> ValidatedNetwork {
        validate(examples::rybko_stolyar(&examples::RS_MEANS)).unwrap()
    }

    fn one_server() -> ValidatedNetwork {
        validate(examples::single_server_two_buffers(0.3, 0.3)).unwrap()
    }

    fn two_disjoint() -> ValidatedNetwork {
        let mut spec = examples::tandem();
        spec.routing = crate::linalg::zeros(2);
        validate(spec).unwrap()
    }

    #[test]
    fn activity_maximality() {
        let net = one_server();
        let u = ScheduleVector::from_bits(&[1, 0]);
        assert!(is_maximal_activity(&net, 0, &u));
        let u = ScheduleVector::from_bits(&[0, 1]);
        assert!(is_maximal_activity(&net, 0, &u));
        let net = two_disjoint();
        assert!(!is_maximal_activity(&net, 0, &ScheduleVector::zeros(2)));
    }

    #[test]
    fn maximality_with_respect_to_w() {
        let net = rs();
        assert!(is_maximal_wrt(&net, &ScheduleVector::zeros(4), &[0.0; 4]));
        assert!(is_maximal_wrt(&net, &ScheduleVector::from_bits(&[1, 0, 0, 0]), &[1.0, 0.0, 0.0, 1.0]));
        assert!(!is_maximal_wrt(&net, &ScheduleVector::zeros(4), &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn enumeration_examples() {
        let net = one_server();
        let m = enumerate_maximal(&net, &SupportPattern(vec![true, true]), DEFAULT_ENUMERATION_CAP).unwrap();
        let mut got: Vec<_> = m.into_iter().collect();
        got.sort();
        assert_eq!(got, vec![ScheduleVector::from_bits(&[0, 1]), ScheduleVector::from_bits(&[1, 0])]);

        let all = enumerate_maximal(&net, &SupportPattern(vec![false, false]), DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all.len(), 3);

        let net = rs();
        let m = enumerate_maximal(&net, &SupportPattern(vec![true, false, false, true]), DEFAULT_ENUMERATION_CAP)
            .unwrap();
        assert_eq!(m.len(), 6);
        for u in &m {
            assert!(u.0[0] ^ u.0[3]);
            assert!(!(u.0[1] && u.0[2]));
        }
    }

    #[test]
    fn enumeration_cap() {
        let net = rs();
        assert_eq!(
            enumerate_feasible(&net, 8),
            Err(EnumerationTooLarge { activities: 4, cap: 8 })
        );
        assert!(enumerate_feasible(&net, 16).is_ok());
    }

    #[test]
    fn maximal_sets_are_closed() {
        for name in examples::NAMES {
            let net = validate(examples::build(name, false).unwrap()).unwrap();
            let n = net.num_buffers();
            for mask in 0..(1u32 << n) {
                let pattern = SupportPattern((0..n).map(|i| mask >> i & 1 == 1).collect());
                for u in enumerate_maximal(&net, &pattern, DEFAULT_ENUMERATION_CAP).unwrap() {
                    for j in 0..u.0.len() {
                        if !u.0[j] {
                            let mut v = u.clone();
                            v.0[j] = true;
                            assert!(!v.is_feasible(&net) || !pattern.0[net.activity(j).buffer]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn lrfs_prefers_small_counters() {
        let net = rs();
        let mut s = SimState::new(&net, 0, 1, TieBreak::Lowest);
        s.add_job(&net, 0, 1);
        s.add_job(&net, 3, 2);
        let a = lrfs_decide(&mut s, &net, 0);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].activity, 0);
        assert_eq!(s.waiting_len(3), 1);

        let net = one_server();
        let mut s = SimState::new(&net, 0, 1, TieBreak::Lowest);
        s.add_job(&net, 0, 3);
        s.add_job(&net, 0, 3);
        s.add_job(&net, 1, 2);
        let a = lrfs_decide(&mut s, &net, 0);
        assert_eq!((a.len(), a[0].activity, a[0].counter), (1, 1, 2));
    }

    #[test]
    fn lrfs_on_empty_component_does_nothing() {
        let net = rs();
        let mut s = SimState::new(&net, 0, 1, TieBreak::Lowest);
        assert!(lrfs_decide(&mut s, &net, 0).is_empty());
        assert!(current_schedule(&s, &net, None).0.iter().all(|&b| !b));
    }

    #[test]
    fn ties_go_to_lowest_buffer_then_fifo() {
        let net = one_server();
        let mut s = SimState::new(&net, 0, 1, TieBreak::Lowest);
        s.add_job(&net, 1, 1);
        let first = s.add_job(&net, 0, 1);
        s.add_job(&net, 0, 1);
        let first_id = s.job(first).id;
        let a = lrfs_decide(&mut s, &net, 0);
        assert_eq!((a[0].activity, a[0].job_id), (0, first_id));
    }

    #[test]
    fn eps_zero_matches_lrfs_without_touching_the_coin() {
        let net = rs();
        let build = || {
            let mut s = SimState::new(&net, 0, 9, TieBreak::Lowest);
            s.add_job(&net, 0, 1);
            s.add_job(&net, 3, 5);
            s.add_job(&net, 1, 4);
            s.add_job(&net, 2, 2);
            s
        };
        let (mut a, mut b) = (build(), build());
        for h in 0..2 {
            assert_eq!(lrfs_decide(&mut a, &net, h), eps_lrfs_decide(&mut b, &net, h, 0.0));
        }
        assert_eq!(b.timer(0), 0.0);
    }

    #[test]
    fn eps_lrfs_serves_largest_counter_when_timer_expired() {
        let net = rs();
        let mut s = SimState::new(&net, 0, 1, TieBreak::Lowest);
        s.add_job(&net, 0, 1);
        s.add_job(&net, 3, 7);
        let a = eps_lrfs_decide(&mut s, &net, 0, 1.0);
        assert_eq!((a[0].activity, a[0].counter), (3, 7));
        assert_eq!(s.timer(0), 1.0);
        assert_eq!(s.waiting_len(0), 1);
    }

    #[test]
    fn running_timer_skips_the_largest_counter_step() {
        let net = rs();
        let mut s = SimState::new(&net, 0, 1, TieBreak::Lowest);
        s.set_timer(0);
        s.set_time(0.6);
        s.add_job(&net, 0, 1);
        s.add_job(&net, 3, 7);
        let a = eps_lrfs_decide(&mut s, &net, 0, 1.0);
        assert_eq!((a[0].activity, a[0].counter), (0, 1));
        assert!((s.timer(0) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn static_priority_follows_order() {
        let net = rs();
        let order = vec![3, 1, 0, 2];
        let mut s = SimState::new(&net, 0, 1, TieBreak::Lowest);
        assert!(static_priority_decide(&mut s, &net, 0, &order).is_empty());
        s.add_job(&net, 0, 1);
        s.add_job(&net, 3, 2);
        let a = static_priority_decide(&mut s, &net, 0, &order);
        assert_eq!(a[0].activity, 3);

        let mut s = SimState::new(&net, 0, 1, TieBreak::Lowest);
        s.add_job(&net, 2, 1);
        let a = static_priority_decide(&mut s, &net, 1, &order);
        assert_eq!(a[0].activity, 2);
    }

    #[test]
    fn decisions_leave_maximal_feasible_schedules() {
        let net = validate(examples::psn_a2()).unwrap();
        for policy in [
            PolicyKind::Lrfs,
            PolicyKind::EpsLrfs { epsilon: 0.5 },
            PolicyKind::StaticPriority { order: vec![2, 1, 0] },
        ] {
            let mut s = SimState::new(&net, 0, 3, TieBreak::Random);
            for (i, c) in [(0, 2), (0, 1), (1, 4), (2, 3), (1, 1)] {
                s.add_job(&net, i, c);
            }
            for h in 0..net.components().len() {
                decide(&mut s, &net, h, &policy);
                let u = current_schedule(&s, &net, Some(h));
                assert!(u.is_feasible(&net));
                assert!(is_maximal_wrt(&net, &u, &queue_vector(&s, &net, Some(h))));
            }
        }
    }

    #[test]
    fn policy_parameter_checks() {
        assert!(PolicyKind::EpsLrfs { epsilon: 1.5 }.check(2).is_err());
        assert!(PolicyKind::StaticPriority { order: vec![0, 0] }.check(2).is_err());
        assert!(PolicyKind::StaticPriority { order: vec![1, 0] }.check(2).is_ok());
    }
}
