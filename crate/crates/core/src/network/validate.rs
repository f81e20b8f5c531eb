use std::collections::BTreeSet;

use thiserror::Error;

use super::{Activity, NetworkSpec};
use crate::linalg::{self, Matrix};

/// Tolerance on the spectral radius of the routing matrix.
const RADIUS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network has no buffers")]
    NoBuffers,
    #[error("routing matrix must be {n}x{n}")]
    RoutingShape { n: usize },
    #[error("routing probability P[{}][{}] = {p} is outside [0, 1]", .from + 1, .to + 1)]
    RoutingProbability { from: usize, to: usize, p: f64 },
    #[error("routing row {} sums to {sum} > 1", .row + 1)]
    RoutingRowSum { row: usize, sum: f64 },
    #[error("routing matrix does not converge (spectral radius estimate {radius})")]
    NonConvergentRouting { radius: f64 },
    #[error("activity {}: {reason}", .activity + 1)]
    BadActivity { activity: usize, reason: String },
    #[error("buffer {}: {reason}", .buffer + 1)]
    BadBuffer { buffer: usize, reason: String },
    #[error("partition: {0}")]
    BadPartition(String),
    #[error("components {} and {} share processor {}", .first + 1, .second + 1, .processor + 1)]
    PartitionNotProcessorIndependent { first: usize, second: usize, processor: usize },
    #[error("synchronized network: {0}")]
    SynchronizedShapeViolation(String),
    #[error("no buffer has external arrivals")]
    NoExternalArrivals,
}

impl NetworkError {
    /// Stable identifier used in reports and CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            NetworkError::NoBuffers => "NoBuffers",
            NetworkError::RoutingShape { .. } => "RoutingShape",
            NetworkError::RoutingProbability { .. } => "RoutingProbability",
            NetworkError::RoutingRowSum { .. } => "RoutingRowSum",
            NetworkError::NonConvergentRouting { .. } => "NonConvergentRouting",
            NetworkError::BadActivity { .. } => "BadActivity",
            NetworkError::BadBuffer { .. } => "BadBuffer",
            NetworkError::BadPartition(_) => "BadPartition",
            NetworkError::PartitionNotProcessorIndependent { .. } => {
                "PartitionNotProcessorIndependent"
            }
            NetworkError::SynchronizedShapeViolation(_) => "SynchronizedShapeViolation",
            NetworkError::NoExternalArrivals => "NoExternalArrivals",
        }
    }
}

/// Effective arrival rates and nominal loads.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveLoad {
    /// Jobs per unit time entering each buffer, external plus routed.
    pub lambda: Vec<f64>,
    /// `rho_i = lambda_i * m_i`.
    pub rho: Vec<f64>,
}

/// Buffers of one partition element with the activities serving them and
/// the processors those activities use.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub buffers: Vec<usize>,
    pub activities: Vec<usize>,
    pub processors: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationPolicy {
    /// Reject networks in which no buffer receives external arrivals.
    pub require_arrivals: bool,
}

impl Default for ValidationPolicy {
    fn default() -> Self {
        Self { require_arrivals: true }
    }
}

/// A network that passed validation, with derived quantities cached.
/// Immutable; share it freely across simulation replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedNetwork {
    spec: NetworkSpec,
    buffer_activities: Vec<Vec<usize>>,
    components: Vec<Component>,
    component_of: Vec<usize>,
    load: EffectiveLoad,
    visit_work: Vec<f64>,
    next_work: Vec<f64>,
    spectral_radius: f64,
    route_bound: Option<usize>,
}

impl ValidatedNetwork {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn num_buffers(&self) -> usize {
        self.spec.buffers.len()
    }

    pub fn num_activities(&self) -> usize {
        self.spec.activities.len()
    }

    pub fn num_processors(&self) -> usize {
        self.spec.processors
    }

    pub fn activity(&self, j: usize) -> &Activity {
        &self.spec.activities[j]
    }

    /// `J_i`: activities able to serve buffer `i`, ascending.
    pub fn activities_of(&self, i: usize) -> &[usize] {
        &self.buffer_activities[i]
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component_of(&self, buffer: usize) -> usize {
        self.component_of[buffer]
    }

    pub fn load(&self) -> &EffectiveLoad {
        &self.load
    }

    pub fn means(&self) -> Vec<f64> {
        self.spec.means()
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.spec.buffers[i].service.mean()
    }

    pub fn routing(&self) -> &Matrix {
        &self.spec.routing
    }

    /// `(I - P)^{-1} m`: expected total work a job currently waiting in each
    /// buffer still generates, including the current visit.
    pub fn visit_work(&self) -> &[f64] {
        &self.visit_work
    }

    /// `P (I - P)^{-1} m`: expected work generated after leaving each buffer.
    pub fn next_work(&self) -> &[f64] {
        &self.next_work
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// Smallest `d` with `P^d = 0`, if routes are bounded.
    pub fn route_bound(&self) -> Option<usize> {
        self.route_bound
    }

    pub fn beta_min(&self) -> f64 {
        self.spec.activities.iter().map(|a| a.beta).fold(f64::INFINITY, f64::min)
    }
}

pub fn validate(spec: NetworkSpec) -> Result<ValidatedNetwork, Vec<NetworkError>> {
    validate_with(spec, ValidationPolicy::default())
}

pub fn validate_with(
    spec: NetworkSpec,
    policy: ValidationPolicy,
) -> Result<ValidatedNetwork, Vec<NetworkError>> {
    let n = spec.buffers.len();
    let k = spec.processors;
    let mut errors = Vec::new();
    if n == 0 {
        return Err(vec![NetworkError::NoBuffers]);
    }

    for (i, b) in spec.buffers.iter().enumerate() {
        if let Err(reason) = b.service.check() {
            errors.push(NetworkError::BadBuffer { buffer: i, reason });
        }
        let rate = b.arrival.rate();
        if !(rate.is_finite() && rate >= 0.0) {
            errors.push(NetworkError::BadBuffer {
                buffer: i,
                reason: format!("arrival rate must be finite and nonnegative, got {rate}"),
            });
        }
    }
    if policy.require_arrivals && spec.buffers.iter().all(|b| !(b.arrival.rate() > 0.0)) {
        errors.push(NetworkError::NoExternalArrivals);
    }

    let mut buffer_activities = vec![Vec::new(); n];
    for (j, a) in spec.activities.iter().enumerate() {
        if a.buffer >= n {
            errors.push(NetworkError::BadActivity {
                activity: j,
                reason: format!("buffer {} does not exist", a.buffer + 1),
            });
            continue;
        }
        if a.processors.is_empty() {
            errors.push(NetworkError::BadActivity {
                activity: j,
                reason: "processor set is empty".into(),
            });
        }
        if let Some(p) = a.processors.iter().find(|&&p| p >= k) {
            errors.push(NetworkError::BadActivity {
                activity: j,
                reason: format!("processor {} does not exist", p + 1),
            });
        }
        let distinct: BTreeSet<_> = a.processors.iter().collect();
        if distinct.len() != a.processors.len() {
            errors.push(NetworkError::BadActivity {
                activity: j,
                reason: "processor listed twice".into(),
            });
        }
        if !(a.beta.is_finite() && a.beta > 0.0) {
            errors.push(NetworkError::BadActivity {
                activity: j,
                reason: format!("rate beta must be positive, got {}", a.beta),
            });
        }
        buffer_activities[a.buffer].push(j);
    }

    let routing_ok = check_routing(&spec.routing, n, &mut errors);

    let partition: Vec<Vec<usize>> = if spec.partition.is_empty() {
        vec![(0..n).collect()]
    } else {
        spec.partition.clone()
    };
    let mut component_of = vec![usize::MAX; n];
    for (h, part) in partition.iter().enumerate() {
        if part.is_empty() {
            errors.push(NetworkError::BadPartition(format!("component {} is empty", h + 1)));
        }
        for &i in part {
            if i >= n {
                errors.push(NetworkError::BadPartition(format!("buffer {} does not exist", i + 1)));
            } else if component_of[i] != usize::MAX {
                errors.push(NetworkError::BadPartition(format!(
                    "buffer {} appears in more than one component",
                    i + 1
                )));
            } else {
                component_of[i] = h;
            }
        }
    }
    if let Some(i) = component_of.iter().position(|&h| h == usize::MAX) {
        errors.push(NetworkError::BadPartition(format!("buffer {} is in no component", i + 1)));
    }

    if spec.synchronized {
        for (i, b) in spec.buffers.iter().enumerate() {
            if !b.service.is_unit_deterministic() {
                errors.push(NetworkError::SynchronizedShapeViolation(format!(
                    "buffer {} service must be deterministic with mean 1",
                    i + 1
                )));
            }
            if !b.arrival.is_slotted() {
                errors.push(NetworkError::SynchronizedShapeViolation(format!(
                    "buffer {} arrivals must occur at integer epochs",
                    i + 1
                )));
            }
        }
        for (j, a) in spec.activities.iter().enumerate() {
            if a.beta != 1.0 {
                errors.push(NetworkError::SynchronizedShapeViolation(format!(
                    "activity {} rate must be 1, got {}",
                    j + 1,
                    a.beta
                )));
            }
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    let components: Vec<Component> = partition
        .iter()
        .map(|part| {
            let mut buffers = part.clone();
            buffers.sort_unstable();
            let mut activities: Vec<usize> =
                buffers.iter().flat_map(|&i| buffer_activities[i].iter().copied()).collect();
            activities.sort_unstable();
            let processors: BTreeSet<usize> = activities
                .iter()
                .flat_map(|&j| spec.activities[j].processors.iter().copied())
                .collect();
            Component { buffers, activities, processors: processors.into_iter().collect() }
        })
        .collect();
    let mut owner = vec![usize::MAX; k];
    for (h, c) in components.iter().enumerate() {
        for &p in &c.processors {
            if owner[p] != usize::MAX {
                errors.push(NetworkError::PartitionNotProcessorIndependent {
                    first: owner[p],
                    second: h,
                    processor: p,
                });
            } else {
                owner[p] = h;
            }
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    debug_assert!(routing_ok);
    let spectral_radius = linalg::spectral_radius_bound(&spec.routing);
    let means = spec.means();
    let load = match effective_rates(&spec.arrival_rates(), &spec.routing, &means) {
        Ok(l) => l,
        Err(e) => return Err(vec![e]),
    };
    let visit_work = match linalg::solve_identity_minus(&spec.routing, &means) {
        Some(v) => v,
        None => return Err(vec![NetworkError::NonConvergentRouting { radius: spectral_radius }]),
    };
    let next_work = linalg::mat_vec(&spec.routing, &visit_work);
    let route_bound = routes_bounded(&spec.routing);

    Ok(ValidatedNetwork {
        spec,
        buffer_activities,
        components,
        component_of,
        load,
        visit_work,
        next_work,
        spectral_radius,
        route_bound,
    })
}

fn check_routing(p: &Matrix, n: usize, errors: &mut Vec<NetworkError>) -> bool {
    if p.len() != n || p.iter().any(|row| row.len() != n) {
        errors.push(NetworkError::RoutingShape { n });
        return false;
    }
    let before = errors.len();
    for (i, row) in p.iter().enumerate() {
        for (l, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                errors.push(NetworkError::RoutingProbability { from: i, to: l, p: v });
            }
        }
        let sum: f64 = row.iter().sum();
        if sum > 1.0 + 1e-12 {
            errors.push(NetworkError::RoutingRowSum { row: i, sum });
        }
    }
    if errors.len() > before {
        return false;
    }
    let radius = linalg::spectral_radius_bound(p);
    if radius >= 1.0 - RADIUS_TOL {
        errors.push(NetworkError::NonConvergentRouting { radius });
        return false;
    }
    true
}

/// Effective arrival rates `lambda = alpha + P^T alpha + (P^T)^2 alpha + ...`
/// (flow from buffer `i` to `l` has weight `P[i][l]`) and nominal loads.
pub fn effective_rates(
    alpha: &[f64],
    routing: &Matrix,
    means: &[f64],
) -> Result<EffectiveLoad, NetworkError> {
    let radius = linalg::spectral_radius_bound(routing);
    if radius >= 1.0 - RADIUS_TOL {
        return Err(NetworkError::NonConvergentRouting { radius });
    }
    let pt = linalg::transpose(routing);
    let lambda = linalg::solve_identity_minus(&pt, alpha)
        .ok_or(NetworkError::NonConvergentRouting { radius })?;
    // Clamp round-off below zero; the series has nonnegative terms.
    let lambda: Vec<f64> = lambda.into_iter().map(|x| x.max(0.0)).collect();
    let rho = lambda.iter().zip(means).map(|(l, m)| l * m).collect();
    Ok(EffectiveLoad { lambda, rho })
}

/// Smallest `d >= 1` with `P^d = 0`, found on the support digraph of `P`
/// (edge `i -> l` iff `P[i][l] > 0`). `None` when the digraph has a cycle.
pub fn routes_bounded(routing: &Matrix) -> Option<usize> {
    let n = routing.len();
    // Longest path measured in vertices, via memoized DFS with cycle detection.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done(usize),
    }
    fn visit(v: usize, p: &Matrix, marks: &mut [Mark]) -> Option<usize> {
        match marks[v] {
            Mark::Done(d) => return Some(d),
            Mark::Active => return None,
            Mark::New => {}
        }
        marks[v] = Mark::Active;
        let mut best = 0;
        for (w, &pw) in p[v].iter().enumerate() {
            if pw > 0.0 {
                best = best.max(visit(w, p, marks)?);
            }
        }
        marks[v] = Mark::Done(best + 1);
        Some(best + 1)
    }
    let mut marks = vec![Mark::New; n];
    let mut longest = 1;
    for v in 0..n {
        longest = longest.max(visit(v, routing, &mut marks)?);
    }
    if n == 0 {
        return Some(1);
    }
    Some(longest)
}

/// Buffers `i` and `l` are activity-interchangeable when the families of
/// processor sets of their activities coincide.
pub fn activity_interchangeable(net: &ValidatedNetwork, i: usize, l: usize) -> bool {
    processor_family(net, i) == processor_family(net, l)
}

pub(crate) fn processor_family(net: &ValidatedNetwork, i: usize) -> BTreeSet<BTreeSet<usize>> {
    net.activities_of(i)
        .iter()
        .map(|&j| net.activity(j).processors.iter().copied().collect())
        .collect()
}

/// Replaces processor `k` of capacity `capacities[k]` by that many
/// unit-capacity copies. Each activity is replicated once per combination of
/// copies of the processors it uses.
pub fn expand_capacity(spec: &NetworkSpec, capacities: &[usize]) -> NetworkSpec {
    assert_eq!(capacities.len(), spec.processors, "one capacity per processor");
    let mut first_copy = Vec::with_capacity(spec.processors);
    let mut total = 0;
    for &c in capacities {
        assert!(c >= 1, "capacity must be at least 1");
        first_copy.push(total);
        total += c;
    }
    let mut activities = Vec::new();
    for a in &spec.activities {
        let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
        for &p in &a.processors {
            let base = first_copy[p];
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    (0..capacities[p]).map(move |copy| {
                        let mut v = prefix.clone();
                        v.push(base + copy);
                        v
                    })
                })
                .collect();
        }
        activities.extend(combos.into_iter().map(|processors| Activity {
            buffer: a.buffer,
            processors,
            beta: a.beta,
        }));
    }
    NetworkSpec { processors: total, activities, ..spec.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::linalg::mat_mul;
    use crate::network::{ArrivalModel, BufferSpec, ServiceDist};
    use proptest::prelude::*;

    fn buffer(rate: f64, mean: f64) -> BufferSpec {
        BufferSpec {
            name: String::new(),
            arrival: if rate > 0.0 { ArrivalModel::Poisson { rate } } else { ArrivalModel::None },
            service: ServiceDist::Deterministic { mean },
        }
    }

    fn two_buffer(p12: f64) -> NetworkSpec {
        NetworkSpec {
            name: "two".into(),
            processors: 2,
            buffers: vec![buffer(1.0, 0.2), buffer(0.0, 0.2)],
            activities: vec![
                Activity { buffer: 0, processors: vec![0], beta: 1.0 },
                Activity { buffer: 1, processors: vec![1], beta: 1.0 },
            ],
            routing: vec![vec![0.0, p12], vec![0.0, 0.0]],
            partition: vec![vec![0], vec![1]],
            synchronized: false,
        }
    }

    #[test]
    fn rybko_stolyar_is_valid() {
        let net = validate(examples::rybko_stolyar(&[0.1, 0.6, 0.1, 0.6])).unwrap();
        assert_eq!(net.activities_of(0), &[0]);
        assert_eq!(net.activity(0).processors, vec![0]);
        assert_eq!(net.load().lambda, vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(net.load().rho, vec![0.1, 0.6, 0.1, 0.6]);
        assert_eq!(net.route_bound(), Some(2));
    }

    #[test]
    fn absorbing_self_loop_is_rejected() {
        let mut spec = two_buffer(0.0);
        spec.routing[0][0] = 1.0;
        let errs = validate(spec).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, NetworkError::NonConvergentRouting { .. })));
    }

    #[test]
    fn shared_processor_across_components_is_rejected() {
        let mut spec = two_buffer(0.5);
        spec.activities[0].processors = vec![0, 1];
        let errs = validate(spec).unwrap_err();
        assert!(errs.iter().any(|e| e.code() == "PartitionNotProcessorIndependent"), "{errs:?}");
    }

    #[test]
    fn synchronized_shape_is_enforced() {
        let mut spec = two_buffer(0.5);
        spec.synchronized = true;
        let errs = validate(spec).unwrap_err();
        assert!(errs.iter().all(|e| e.code() == "SynchronizedShapeViolation"));
        assert!(!errs.is_empty());
    }

    #[test]
    fn effective_rates_examples() {
        let l = effective_rates(&[2.0, 3.0], &crate::linalg::zeros(2), &[1.0, 1.0]).unwrap();
        assert_eq!(l.lambda, vec![2.0, 3.0]);
        // Partial sums of the series to convergence.
        let p = vec![vec![0.0, 0.5], vec![0.0, 0.0]];
        let l = effective_rates(&[1.0, 0.0], &p, &[1.0, 1.0]).unwrap();
        let mut series = vec![1.0, 0.0];
        let mut term = vec![1.0, 0.0];
        for _ in 0..50 {
            term = crate::linalg::mat_t_vec(&p, &term);
            series[0] += term[0];
            series[1] += term[1];
        }
        assert!((l.lambda[0] - series[0]).abs() < 1e-15);
        assert!((l.lambda[1] - series[1]).abs() < 1e-15);
        assert!((l.lambda[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interchangeability() {
        let net = validate(examples::rybko_stolyar(&[0.1, 0.6, 0.1, 0.6])).unwrap();
        assert!(activity_interchangeable(&net, 2, 2));
        assert!(activity_interchangeable(&net, 0, 3));
        assert!(!activity_interchangeable(&net, 0, 1));
    }

    #[test]
    fn route_bounds() {
        assert_eq!(routes_bounded(&crate::linalg::zeros(3)), Some(1));
        let mut p = crate::linalg::zeros(2);
        p[0][0] = 0.5;
        assert_eq!(routes_bounded(&p), None);
    }

    #[test]
    fn capacity_expansion_copies_processors() {
        let spec = examples::single_server_two_buffers(0.3, 0.3);
        let expanded = expand_capacity(&spec, &[2]);
        assert_eq!(expanded.processors, 2);
        assert_eq!(expanded.activities.len(), 4);
        let net = validate(expanded).unwrap();
        assert!(activity_interchangeable(&net, 0, 1));
    }

    fn arb_routing(n: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, n), n).prop_map(
            move |mut m| {
                for row in &mut m {
                    // Sparsify and scale so every row sums to at most 0.9.
                    for v in row.iter_mut() {
                        if *v < 0.6 {
                            *v = 0.0;
                        }
                    }
                    let s: f64 = row.iter().sum();
                    if s > 0.0 {
                        for v in row.iter_mut() {
                            *v *= 0.9 / s.max(1.0);
                        }
                    }
                }
                m
            },
        )
    }

    proptest! {
        #[test]
        fn lambda_dominates_alpha(p in arb_routing(4), alpha in proptest::collection::vec(0.0f64..2.0, 4)) {
            let l = effective_rates(&alpha, &p, &[1.0; 4]).unwrap();
            for (lam, a) in l.lambda.iter().zip(&alpha) {
                prop_assert!(*lam >= a - 1e-12);
            }
        }

        #[test]
        fn route_bound_matches_matrix_powers(p in arb_routing(4)) {
            match routes_bounded(&p) {
                Some(d) => {
                    let mut pw = p.clone();
                    for _ in 1..d { pw = mat_mul(&pw, &p); }
                    prop_assert!(pw.iter().flatten().all(|&v| v == 0.0));
                    if d > 1 {
                        let mut prev = p.clone();
                        for _ in 1..d - 1 { prev = mat_mul(&prev, &p); }
                        prop_assert!(prev.iter().flatten().any(|&v| v > 0.0));
                    }
                }
                None => {
                    let mut pw = p.clone();
                    for _ in 0..8 { pw = mat_mul(&pw, &p); }
                    prop_assert!(pw.iter().flatten().any(|&v| v > 0.0));
                }
            }
        }

        #[test]
        fn validation_is_idempotent(p in arb_routing(2)) {
            let mut spec = two_buffer(0.0);
            spec.routing = p;
            if let Ok(net) = validate(spec) {
                let again = validate(net.spec().clone()).unwrap();
                prop_assert_eq!(net, again);
            }
        }
    }
}
