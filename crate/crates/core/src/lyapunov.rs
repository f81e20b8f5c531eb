//! Quadratic local Lyapunov certificates `L(x) = xᵀZx`: exhaustive checks,
//! maximal slack, a sampling oracle, structural conditions and the two
//! closed-form constructions.
//!
//! The drift inequality: `L(w + δ(u)) ≤ L(w) - η‖w‖₁ + C` for every
//! `w ≥ 0` and every `u` maximal for the support of `w`, where
//! `δ(u) = ρ + εm - s(u)` and `s(u)` is the per-buffer service rate.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::network::{activity_interchangeable, ValidatedNetwork};
use crate::scheduling::{
    enumerate_feasible, enumerate_maximal, open_buffers, EnumerationTooLarge, ScheduleVector, SupportPattern,
    DEFAULT_ENUMERATION_CAP,
};

/// Coefficients at or above `-STRICT` count as violations.
pub const STRICT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LyapunovError {
    #[error(transparent)]
    EnumerationTooLarge(#[from] EnumerationTooLarge),
    #[error("Z is {rows}x{cols} but the network has {buffers} buffers")]
    ShapeZ { rows: usize, cols: usize, buffers: usize },
    #[error("Z is not symmetric at ({i}, {l})")]
    NonSymmetricZ { i: usize, l: usize },
    #[error("Z has a negative entry at ({i}, {l})")]
    NegativeEntryZ { i: usize, l: usize },
    #[error("slack must be a nonnegative number, got {0}")]
    BadEpsilon(f64),
    #[error("assumption A1 fails: {0}")]
    AssumptionA1Violated(String),
    #[error("assumption A2 fails: {0}")]
    AssumptionA2Violated(String),
    #[error("assumption B1 fails: {0}")]
    AssumptionB1Violated(String),
    #[error("the network is not synchronized")]
    NotSynchronized,
}

impl LyapunovError {
    pub fn code(&self) -> &'static str {
        match self {
            LyapunovError::EnumerationTooLarge(_) => "EnumerationTooLarge",
            LyapunovError::ShapeZ { .. } => "ShapeZ",
            LyapunovError::NonSymmetricZ { .. } => "NonSymmetricZ",
            LyapunovError::NegativeEntryZ { .. } => "NegativeEntryZ",
            LyapunovError::BadEpsilon(_) => "BadEpsilon",
            LyapunovError::AssumptionA1Violated(_) => "AssumptionA1Violated",
            LyapunovError::AssumptionA2Violated(_) => "AssumptionA2Violated",
            LyapunovError::AssumptionB1Violated(_) => "AssumptionB1Violated",
            LyapunovError::NotSynchronized => "NotSynchronized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCertificate {
    pub z: Matrix,
    pub epsilon: f64,
    pub eta: f64,
    pub c: f64,
}

/// A support pattern `S`, a schedule `u ∈ M(S)` and a buffer `i ∈ S` with
/// `(Zδ(u))_i` not strictly negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub pattern: SupportPattern,
    pub schedule: ScheduleVector,
    pub buffer: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub holds: bool,
    pub eta: Option<f64>,
    pub c: Option<f64>,
    pub witness: Option<Witness>,
    /// Largest `(Zδ(u))_i` over all constrained triples.
    pub max_coefficient: f64,
    /// `max_u δ(u)ᵀZδ(u)` over feasible schedules.
    pub max_quadratic: f64,
}

impl CheckResult {
    pub fn certificate(&self, z: &Matrix, epsilon: f64) -> Option<QuadraticCertificate> {
        Some(QuadraticCertificate { z: z.clone(), epsilon, eta: self.eta?, c: self.c? })
    }
}

/// One linear constraint `offset + ε·slope < 0`, where `offset =
/// (Z(ρ - s(u)))_i` and `slope = (Zm)_i`, required for buffer `i` whenever
/// `u` is maximal for a pattern containing `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub schedule: usize,
    pub buffer: usize,
    pub offset: f64,
    pub slope: f64,
}

/// Feasible schedules and every constraint they induce.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub schedules: Vec<ScheduleVector>,
    pub constraints: Vec<LinearConstraint>,
}

pub fn check_matrix(z: &Matrix, n: usize) -> Result<(), LyapunovError> {
    let cols = z.first().map_or(0, Vec::len);
    if z.len() != n || z.iter().any(|r| r.len() != n) {
        return Err(LyapunovError::ShapeZ { rows: z.len(), cols, buffers: n });
    }
    for i in 0..n {
        for l in 0..n {
            if z[i][l] < 0.0 || z[i][l].is_nan() {
                return Err(LyapunovError::NegativeEntryZ { i, l });
            }
            if z[i][l] != z[l][i] {
                return Err(LyapunovError::NonSymmetricZ { i, l });
            }
        }
    }
    Ok(())
}

fn delta(net: &ValidatedNetwork, u: &ScheduleVector, epsilon: f64) -> Vec<f64> {
    let rho = &net.load().rho;
    let s = u.rates(net);
    (0..net.num_buffers()).map(|i| rho[i] + epsilon * net.mean(i) - s[i]).collect()
}

/// Enumerates the constraint set of `Z` on the network.
pub fn constraint_set(z: &Matrix, net: &ValidatedNetwork) -> Result<ConstraintSet, LyapunovError> {
    check_matrix(z, net.num_buffers())?;
    let schedules = enumerate_feasible(net, DEFAULT_ENUMERATION_CAP)?;
    let zm = linalg::mat_vec(z, &net.means());
    let constraints = schedules
        .par_iter()
        .enumerate()
        .map(|(k, u)| {
            let open = open_buffers(net, u);
            let zd = linalg::mat_vec(z, &delta(net, u, 0.0));
            (0..net.num_buffers())
                .filter(|&i| !open[i])
                .map(|i| LinearConstraint { schedule: k, buffer: i, offset: zd[i], slope: zm[i] })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(ConstraintSet { schedules, constraints })
}

/// Verifies the drift inequality at slack `epsilon` by the support
/// reduction: for every schedule `u` and every buffer `i` none of whose
/// activities could still be added to `u` (so `u` is maximal for `{i}`),
/// `(Zδ(u))_i < 0`.
pub fn check_local(z: &Matrix, net: &ValidatedNetwork, epsilon: f64) -> Result<CheckResult, LyapunovError> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(LyapunovError::BadEpsilon(epsilon));
    }
    let set = constraint_set(z, net)?;
    let max_quadratic = set
        .schedules
        .par_iter()
        .map(|u| linalg::quad_form(z, &delta(net, u, epsilon)))
        .reduce(|| f64::NEG_INFINITY, f64::max)
        .max(0.0);
    // Ties go to the lowest buffer, then the first schedule enumerated.
    let mut worst: Option<(f64, usize)> = None;
    for (k, con) in set.constraints.iter().enumerate() {
        let v = con.offset + epsilon * con.slope;
        let better = worst.is_none_or(|(w, kw)| v > w || (v == w && con.buffer < set.constraints[kw].buffer));
        if better {
            worst = Some((v, k));
        }
    }
    let c = max_quadratic + 1.0;
    let Some((max_coefficient, k)) = worst else {
        return Ok(CheckResult {
            holds: true,
            eta: Some(f64::INFINITY),
            c: Some(c),
            witness: None,
            max_coefficient: f64::NEG_INFINITY,
            max_quadratic,
        });
    };
    if max_coefficient < -STRICT {
        return Ok(CheckResult {
            holds: true,
            eta: Some(-2.0 * max_coefficient),
            c: Some(c),
            witness: None,
            max_coefficient,
            max_quadratic,
        });
    }
    let con = &set.constraints[k];
    let mut pattern = vec![false; net.num_buffers()];
    pattern[con.buffer] = true;
    Ok(CheckResult {
        holds: false,
        eta: None,
        c: None,
        witness: Some(Witness {
            pattern: SupportPattern(pattern),
            schedule: set.schedules[con.schedule].clone(),
            buffer: con.buffer,
            coefficient: max_coefficient,
        }),
        max_coefficient,
        max_quadratic,
    })
}

/// `sup{ε ≥ 0 : check_local holds}`; `None` when it fails at `ε = 0`,
/// infinity when no constraint ever binds.
pub fn max_slack(z: &Matrix, net: &ValidatedNetwork) -> Result<Option<f64>, LyapunovError> {
    let set = constraint_set(z, net)?;
    let mut eps = f64::INFINITY;
    for con in &set.constraints {
        if con.offset >= -STRICT {
            return Ok(None);
        }
        if con.slope > 0.0 {
            eps = eps.min(-(con.offset + STRICT) / con.slope);
        }
    }
    Ok(Some(eps))
}

/// A point `w = λ e_i` at which the drift inequality fails for the given `(η, C)`.
pub fn witness_point(
    z: &Matrix,
    net: &ValidatedNetwork,
    epsilon: f64,
    witness: &Witness,
    eta: f64,
    c: f64,
) -> Vec<f64> {
    let d = delta(net, &witness.schedule, epsilon);
    let slope = 2.0 * linalg::mat_vec(z, &d)[witness.buffer] + eta;
    let base = linalg::quad_form(z, &d);
    let lambda = if slope > 0.0 { ((c - base) / slope).max(0.0) * 2.0 + 1.0 } else { f64::INFINITY };
    let mut w = vec![0.0; net.num_buffers()];
    w[witness.buffer] = lambda;
    w
}

/// Whether the drift inequality holds at `(w, u)` for `L(x) = xᵀZx`.
pub fn drift_holds(
    z: &Matrix,
    net: &ValidatedNetwork,
    epsilon: f64,
    eta: f64,
    c: f64,
    w: &[f64],
    u: &ScheduleVector,
) -> bool {
    let d = delta(net, u, epsilon);
    let x: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a + b).collect();
    let lhs = linalg::quad_form(z, &x);
    let l1: f64 = w.iter().sum();
    let rhs = linalg::quad_form(z, w) - eta * l1 + c;
    lhs <= rhs + 1e-9 * lhs.abs().max(rhs.abs()).max(1.0)
}

/// Monte Carlo check of the drift inequality: random supports, log-uniform magnitudes up
/// to 1e4, schedules uniform over the maximal set of the support. Returns
/// the number of violating samples.
pub fn sample_check<R: Rng + ?Sized>(
    z: &Matrix,
    net: &ValidatedNetwork,
    epsilon: f64,
    eta: f64,
    c: f64,
    n: u64,
    rng: &mut R,
) -> Result<u64, LyapunovError> {
    check_matrix(z, net.num_buffers())?;
    let buffers = net.num_buffers();
    let mut cache: HashMap<Vec<bool>, Vec<ScheduleVector>> = HashMap::new();
    let mut violations = 0;
    for _ in 0..n {
        let w: Vec<f64> = (0..buffers)
            .map(|_| if rng.random_bool(0.5) { 10f64.powf(rng.random_range(-4.0..4.0)) } else { 0.0 })
            .collect();
        let pattern = SupportPattern::of(&w);
        let maximal = match cache.get(&pattern.0) {
            Some(m) => m,
            None => {
                let m = enumerate_maximal(net, &pattern, DEFAULT_ENUMERATION_CAP)?;
                cache.entry(pattern.0.clone()).or_insert(m)
            }
        };
        let u = &maximal[rng.random_range(0..maximal.len())];
        if !drift_holds(z, net, epsilon, eta, c, &w, u) {
            violations += 1;
        }
    }
    Ok(violations)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    C1,
    C2,
    C2p,
    C3,
    C3p,
}

impl std::str::FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "C1" => Ok(Condition::C1),
            "C2" => Ok(Condition::C2),
            "C2p" | "C2'" | "C2′" => Ok(Condition::C2p),
            "C3" => Ok(Condition::C3),
            "C3p" | "C3'" | "C3′" => Ok(Condition::C3p),
            other => Err(format!("unknown condition `{other}` (expected C1, C2, C2p, C3 or C3p)")),
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Condition::C1 => "C1",
            Condition::C2 => "C2",
            Condition::C2p => "C2p",
            Condition::C3 => "C3",
            Condition::C3p => "C3p",
        })
    }
}

fn couplings(z: &Matrix) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..z.len()).flat_map(move |i| (0..z.len()).filter(move |&l| z[i][l] != 0.0).map(move |l| (i, l)))
}

fn every_buffer_has_single(net: &ValidatedNetwork) -> bool {
    (0..net.num_buffers()).all(|i| net.activities_of(i).iter().any(|&j| net.activity(j).processors.len() == 1))
}

fn proc_set(net: &ValidatedNetwork, j: usize) -> BTreeSet<usize> {
    net.activity(j).processors.iter().copied().collect()
}

/// Every activity of `i` contains the processor set of some activity of `l`.
fn covered(net: &ValidatedNetwork, i: usize, l: usize) -> bool {
    net.activities_of(i).iter().all(|&j| {
        let kj = proc_set(net, j);
        net.activities_of(l).iter().any(|&jp| proc_set(net, jp).is_subset(&kj))
    })
}

/// Evaluates a structural condition on the couplings of `Z`.
pub fn check_structural(z: &Matrix, net: &ValidatedNetwork, condition: Condition) -> bool {
    match condition {
        Condition::C1 => {
            net.spec().synchronized && couplings(z).all(|(i, l)| net.component_of(i) == net.component_of(l))
        }
        Condition::C2p => couplings(z).all(|(i, l)| activity_interchangeable(net, i, l)),
        Condition::C2 => check_structural(z, net, Condition::C2p) && every_buffer_has_single(net),
        Condition::C3p => couplings(z).all(|(i, l)| covered(net, i, l) && covered(net, l, i)),
        Condition::C3 => check_structural(z, net, Condition::C3p) && every_buffer_has_single(net),
    }
}

/// Closed-form certificate for parallel server networks: `Z_{iℓ} = 1` iff
/// buffers `i`, `ℓ` share a complete bipartite block. The slack bound is
/// `min_h (β^(h) - ρ^(h)) / m^(h)` with `β^(h)` the service rate the block
/// is guaranteed when all of its processors work: the sum over its
/// processors of the slowest activity rate on that processor.
pub fn construct_psn(net: &ValidatedNetwork) -> Result<(Matrix, Option<f64>), LyapunovError> {
    for (j, a) in net.spec().activities.iter().enumerate() {
        if a.processors.len() != 1 {
            return Err(LyapunovError::AssumptionA1Violated(format!(
                "activity {} uses {} processors",
                j + 1,
                a.processors.len()
            )));
        }
    }
    let n = net.num_buffers();
    let procs: Vec<BTreeSet<usize>> = (0..n)
        .map(|i| net.activities_of(i).iter().map(|&j| net.activity(j).processors[0]).collect())
        .collect();
    let mut blocks: Vec<BTreeSet<usize>> = Vec::new();
    let mut block_of = vec![0; n];
    for i in 0..n {
        match blocks.iter().position(|b| *b == procs[i]) {
            Some(h) => block_of[i] = h,
            None => {
                if let Some(b) = blocks.iter().find(|b| !b.is_disjoint(&procs[i])) {
                    return Err(LyapunovError::AssumptionA2Violated(format!(
                        "buffer {} uses processors {:?}, overlapping but not equal to {:?}",
                        i + 1,
                        one_based(&procs[i]),
                        one_based(b)
                    )));
                }
                block_of[i] = blocks.len();
                blocks.push(procs[i].clone());
            }
        }
    }
    let mut z = linalg::zeros(n);
    for i in 0..n {
        for l in 0..n {
            if block_of[i] == block_of[l] {
                z[i][l] = 1.0;
            }
        }
    }
    let rho = &net.load().rho;
    let mut bound = f64::INFINITY;
    for (h, block) in blocks.iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&i| block_of[i] == h).collect();
        let beta: f64 = block
            .iter()
            .map(|&k| {
                net.spec()
                    .activities
                    .iter()
                    .filter(|a| a.processors[0] == k)
                    .map(|a| a.beta)
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        let load: f64 = members.iter().map(|&i| rho[i]).sum();
        let mass: f64 = members.iter().map(|&i| net.mean(i)).sum();
        if load >= beta {
            return Ok((z, None));
        }
        bound = bound.min((beta - load) / mass);
    }
    Ok((z, Some(bound)))
}

fn one_based(s: &BTreeSet<usize>) -> Vec<usize> {
    s.iter().map(|k| k + 1).collect()
}

/// Closed-form certificate for synchronized communication networks:
/// `Z_{iℓ} = |K_i ∩ K_ℓ|`, slack bound `min_k (1/max_i |K_i| - ρ^(k)) / m^(k)`.
pub fn construct_comm(net: &ValidatedNetwork) -> Result<(Matrix, Option<f64>), LyapunovError> {
    if !net.spec().synchronized {
        return Err(LyapunovError::NotSynchronized);
    }
    let n = net.num_buffers();
    for i in 0..n {
        let count = net.activities_of(i).len();
        if count != 1 {
            return Err(LyapunovError::AssumptionB1Violated(format!("buffer {} has {count} activities", i + 1)));
        }
    }
    let sets: Vec<BTreeSet<usize>> = (0..n).map(|i| proc_set(net, net.activities_of(i)[0])).collect();
    let mut z = linalg::zeros(n);
    for i in 0..n {
        for l in 0..n {
            z[i][l] = sets[i].intersection(&sets[l]).count() as f64;
        }
    }
    let widest = sets.iter().map(BTreeSet::len).max().unwrap_or(1) as f64;
    let rho = &net.load().rho;
    let mut bound = f64::INFINITY;
    for k in 0..net.num_processors() {
        let members: Vec<usize> = (0..n).filter(|&i| sets[i].contains(&k)).collect();
        if members.is_empty() {
            continue;
        }
        let load: f64 = members.iter().map(|&i| rho[i]).sum();
        let mass: f64 = members.iter().map(|&i| net.mean(i)).sum();
        if load >= 1.0 / widest {
            return Ok((z, None));
        }
        bound = bound.min((1.0 / widest - load) / mass);
    }
    Ok((z, Some(bound)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::network::{validate, validate_with, ValidationPolicy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rs_z() -> Matrix {
        vec![
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0],
        ]
    }

    fn rs(means: &[f64]) -> ValidatedNetwork {
        validate(examples::rybko_stolyar(means)).unwrap()
    }

    #[test]
    fn rybko_stolyar_holds() {
        let net = rs(&examples::RS_MEANS);
        let r = check_local(&rs_z(), &net, 0.1).unwrap();
        assert!(r.holds);
        assert!((r.eta.unwrap() - 0.46).abs() < 1e-12, "{:?}", r.eta);
    }

    #[test]
    fn overloaded_rybko_stolyar_has_witness_on_buffer_one() {
        let net = validate_with(examples::rybko_stolyar(&[0.3, 0.8, 0.3, 0.8]), ValidationPolicy::default()).unwrap();
        let r = check_local(&rs_z(), &net, 0.0).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert_eq!(w.buffer, 0);
        assert!(w.pattern.0[0]);
        assert!(w.coefficient >= 0.0);
        assert!((w.coefficient - 0.1).abs() < 1e-12);
        assert!(crate::scheduling::is_maximal_for(&net, &w.schedule, &w.pattern));
    }

    #[test]
    fn single_buffer_eta() {
        let mut spec = examples::single_server_two_buffers(0.5, 0.5);
        spec.buffers.truncate(1);
        spec.activities.truncate(1);
        spec.routing = linalg::zeros(1);
        spec.partition = vec![vec![0]];
        let net = validate(spec).unwrap();
        let r = check_local(&vec![vec![1.0]], &net, 0.2).unwrap();
        assert!((r.eta.unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn slack_examples() {
        let net = validate(examples::single_server_two_buffers(0.3, 0.3)).unwrap();
        let ones = vec![vec![1.0; 2]; 2];
        assert!((max_slack(&ones, &net).unwrap().unwrap() - 2.0 / 3.0).abs() < 1e-9);
        let net = rs(&examples::RS_MEANS);
        assert!((max_slack(&rs_z(), &net).unwrap().unwrap() - 3.0 / 7.0).abs() < 1e-9);
        let net = validate(examples::single_server_two_buffers(0.6, 0.6)).unwrap();
        assert_eq!(max_slack(&ones, &net).unwrap(), None);
    }

    #[test]
    fn rejects_bad_z() {
        let net = rs(&examples::RS_MEANS);
        let mut z = rs_z();
        z[0][1] = 0.5;
        assert!(matches!(check_local(&z, &net, 0.0), Err(LyapunovError::NonSymmetricZ { .. })));
        let mut z = rs_z();
        z[2][2] = -1.0;
        assert!(matches!(check_local(&z, &net, 0.0), Err(LyapunovError::NegativeEntryZ { .. })));
    }

    #[test]
    fn sampler_finds_claimed_constants_wrong() {
        let net = validate(examples::single_server_two_buffers(0.6, 0.6)).unwrap();
        let ones = vec![vec![1.0; 2]; 2];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_check(&ones, &net, 0.0, 0.1, 10.0, 10_000, &mut rng).unwrap() > 0);
        let r = check_local(&ones, &net, 0.0).unwrap();
        let wit = r.witness.unwrap();
        let w = witness_point(&ones, &net, 0.0, &wit, 0.1, 10.0);
        assert!(!drift_holds(&ones, &net, 0.0, 0.1, 10.0, &w, &wit.schedule));
    }

    #[test]
    fn zero_support_bounded_by_c() {
        let net = rs(&examples::RS_MEANS);
        let r = check_local(&rs_z(), &net, 0.1).unwrap();
        let u = ScheduleVector::zeros(4);
        assert!(drift_holds(&rs_z(), &net, 0.1, r.eta.unwrap(), r.c.unwrap(), &[0.0; 4], &u));
    }

    #[test]
    fn structural_conditions() {
        let net = rs(&examples::RS_MEANS);
        assert!(check_structural(&rs_z(), &net, Condition::C2));
        assert!(check_structural(&linalg::identity(4), &net, Condition::C2));
        assert!(!check_structural(&rs_z(), &net, Condition::C1));
        let wl = validate(examples::wireless_fig4()).unwrap();
        let (z, _) = construct_comm(&wl).unwrap();
        assert!(!check_structural(&z, &wl, Condition::C2));
        assert!(check_structural(&z, &wl, Condition::C1));
    }

    #[test]
    fn constructions() {
        let net = validate(examples::single_server_two_buffers(0.3, 0.3)).unwrap();
        let (z, eps) = construct_psn(&net).unwrap();
        assert_eq!(z, vec![vec![1.0; 2]; 2]);
        assert!((eps.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let (z, _) = construct_psn(&rs(&examples::RS_MEANS)).unwrap();
        assert_eq!(z, rs_z());

        let sw = validate(examples::switch_2x2(0.2)).unwrap();
        let (z, eps) = construct_comm(&sw).unwrap();
        assert!((eps.unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(z[0][0], 2.0);
        assert_eq!(z[0][3], 0.0);
        let wl = validate(examples::wireless_fig4()).unwrap();
        let (z, _) = construct_comm(&wl).unwrap();
        assert!((0..6).all(|i| z[i][i] == 2.0));
        assert!(matches!(construct_comm(&net), Err(LyapunovError::NotSynchronized)));
        assert!(matches!(construct_psn(&wl), Err(LyapunovError::AssumptionA1Violated(_))));
    }
}
