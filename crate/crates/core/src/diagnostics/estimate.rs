//! Empirical stability and drift evidence from sampled trajectories.

use crate::sim::Trajectory;

use super::DiagnosticsError;

pub const DEFAULT_SLOPE_THRESHOLD: f64 = 0.01;
pub const MIN_STABILITY_SAMPLES: usize = 100;
pub const MIN_DRIFT_INCREMENTS: usize = 30;
pub const DRIFT_BINS: usize = 8;
pub const MIN_BIN_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityVerdict {
    Diverging,
    BoundedEvidence,
    Inconclusive,
}

impl std::fmt::Display for StabilityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StabilityVerdict::Diverging => "diverging",
            StabilityVerdict::BoundedEvidence => "bounded-evidence",
            StabilityVerdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationStability {
    pub seed: u64,
    pub time_avg_norm: f64,
    pub tail_slope: f64,
    pub middle_avg: f64,
    pub tail_avg: f64,
    pub verdict: StabilityVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub replications: Vec<ReplicationStability>,
    pub time_avg_norm: f64,
    pub tail_slope: f64,
    pub threshold: f64,
    pub verdict: StabilityVerdict,
}

impl StabilityReport {
    pub fn diverging_count(&self) -> usize {
        self.replications.iter().filter(|r| r.verdict == StabilityVerdict::Diverging).count()
    }
}

/// Least-squares slope of `y` on `x`; zero when `x` is constant.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    affine_fit(x, y).1
}

/// Returns `(intercept, slope)`.
fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (0.0, 0.0);
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return (my, 0.0);
    }
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn within_ratio(a: f64, b: f64, ratio: f64) -> bool {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    hi <= 1e-12 || hi <= ratio * lo
}

fn judge(slope: f64, middle: f64, tail: f64, threshold: f64) -> StabilityVerdict {
    if slope > threshold {
        StabilityVerdict::Diverging
    } else if within_ratio(middle, tail, 2.0) {
        StabilityVerdict::BoundedEvidence
    } else {
        StabilityVerdict::Inconclusive
    }
}

fn replication(traj: &Trajectory, threshold: f64) -> Result<ReplicationStability, DiagnosticsError> {
    let n = traj.rows.len();
    if n < MIN_STABILITY_SAMPLES {
        return Err(DiagnosticsError::TrajectoryTooShort { samples: n, needed: MIN_STABILITY_SAMPLES });
    }
    let t = traj.times();
    let y = traj.norms();
    let (t0, t1) = (t[0], t[n - 1]);
    let half = t0 + 0.5 * (t1 - t0);
    let start = t.iter().position(|&s| s >= half).unwrap_or(0);
    let tail_slope = ls_slope(&t[start..], &y[start..]);
    let third = |k: f64| t.iter().position(|&s| s >= t0 + k * (t1 - t0) / 3.0).unwrap_or(n);
    let (a, b) = (third(1.0), third(2.0));
    let middle_avg = mean(&y[a..b]);
    let tail_avg = mean(&y[b..]);
    Ok(ReplicationStability {
        seed: traj.seed,
        time_avg_norm: traj.time_avg_norm(),
        tail_slope,
        middle_avg,
        tail_avg,
        verdict: judge(tail_slope, middle_avg, tail_avg, threshold),
    })
}

/// Slope of `|X|` over the final half of each run and a comparison of the
/// final and middle thirds. Evidence only.
pub fn stability_estimate(trajs: &[Trajectory], threshold: f64) -> Result<StabilityReport, DiagnosticsError> {
    if trajs.is_empty() {
        return Err(DiagnosticsError::TrajectoryTooShort { samples: 0, needed: MIN_STABILITY_SAMPLES });
    }
    let replications = trajs.iter().map(|t| replication(t, threshold)).collect::<Result<Vec<_>, _>>()?;
    let slope = mean(&replications.iter().map(|r| r.tail_slope).collect::<Vec<_>>());
    let middle = mean(&replications.iter().map(|r| r.middle_avg).collect::<Vec<_>>());
    let tail = mean(&replications.iter().map(|r| r.tail_avg).collect::<Vec<_>>());
    Ok(StabilityReport {
        time_avg_norm: mean(&replications.iter().map(|r| r.time_avg_norm).collect::<Vec<_>>()),
        tail_slope: slope,
        threshold,
        verdict: judge(slope, middle, tail, threshold),
        replications,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftBin {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub mean_increment: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    /// Bins with enough samples, by increasing `|Y|`.
    pub bins: Vec<DriftBin>,
    pub increments: usize,
    /// Fitted `Δ ≈ a - b|Y|`.
    pub a: f64,
    pub b: f64,
    pub drift_consistent: bool,
}

impl DriftReport {
    /// The `k` highest bins all have negative mean increments exceeding
    /// `z` standard errors in magnitude.
    pub fn top_bins_negative(&self, k: usize, z: f64) -> bool {
        self.bins.len() >= k
            && self.bins[self.bins.len() - k..]
                .iter()
                .all(|b| b.mean_increment < 0.0 && b.mean_increment.abs() > z * b.stderr)
    }

    pub fn bins_csv(&self) -> String {
        let mut out = String::from("|Y|_lo,|Y|_hi,n,mean_increment,stderr\n");
        for b in &self.bins {
            out.push_str(&format!(
                "{:.16e},{:.16e},{},{:.16e},{:.16e}\n",
                b.lo, b.hi, b.n, b.mean_increment, b.stderr
            ));
        }
        out
    }
}

/// Increments `L(Y((k+1)T)) - L(Y(kT))` of the probed Lyapunov value between
/// consecutive rows (rows must be sampled every `T`), binned
/// logarithmically by `|Y(kT)|`.
pub fn drift_estimate(trajs: &[Trajectory]) -> Result<DriftReport, DiagnosticsError> {
    let mut pairs = Vec::new();
    for traj in trajs {
        for w in traj.rows.windows(2) {
            let (Some(l0), Some(l1)) = (w[0].probe, w[1].probe) else {
                return Err(DiagnosticsError::MissingProbe);
            };
            pairs.push((w[0].norm, l1 - l0));
        }
    }
    if pairs.len() < MIN_DRIFT_INCREMENTS {
        return Err(DiagnosticsError::InsufficientSamples { increments: pairs.len(), needed: MIN_DRIFT_INCREMENTS });
    }
    let positive = pairs.iter().map(|p| p.0).filter(|&y| y > 0.0);
    let lo = positive.clone().fold(f64::INFINITY, f64::min);
    let hi = positive.fold(0.0, f64::max);
    let edges: Vec<f64> = if lo.is_finite() && hi > lo {
        (0..=DRIFT_BINS).map(|k| lo * (hi / lo).powf(k as f64 / DRIFT_BINS as f64)).collect()
    } else {
        let top = if hi > 0.0 { hi } else { 1.0 };
        vec![0.0, top]
    };
    let nbins = edges.len() - 1;
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); nbins];
    for &(y, d) in &pairs {
        let k = edges[1..nbins].iter().take_while(|&&e| y >= e).count();
        groups[k].push(d);
    }
    let bins = groups
        .iter()
        .enumerate()
        .filter(|(_, g)| g.len() >= MIN_BIN_SAMPLES)
        .map(|(k, g)| {
            let n = g.len();
            let m = mean(g);
            let var = g.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0);
            DriftBin {
                lo: if k == 0 { 0.0 } else { edges[k] },
                hi: edges[k + 1],
                n,
                mean_increment: m,
                stderr: (var / n as f64).sqrt(),
            }
        })
        .collect::<Vec<_>>();
    let ys: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ds: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (a, slope) = affine_fit(&ys, &ds);
    let b = -slope;
    let top_negative = bins.len() >= 2 && bins[bins.len() - 2..].iter().all(|x| x.mean_increment < 0.0);
    Ok(DriftReport { bins, increments: pairs.len(), a, b, drift_consistent: b > 0.0 && top_negative })
}
