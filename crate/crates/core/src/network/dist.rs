//! Arrival processes and service-time distributions with analytic moments.

use rand::Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::{Deserialize, Serialize};

/// External arrival model of a single buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArrivalModel {
    /// Poisson stream with the given rate (jobs per unit time).
    Poisson { rate: f64 },
    /// Arrivals only at integer epochs. Each epoch brings `floor(rate)` jobs
    /// plus one more with probability `rate - floor(rate)`.
    Slotted { rate: f64 },
    None,
}

impl ArrivalModel {
    /// Nominal rate `alpha_i`.
    pub fn rate(&self) -> f64 {
        match *self {
            ArrivalModel::Poisson { rate } | ArrivalModel::Slotted { rate } => rate,
            ArrivalModel::None => 0.0,
        }
    }

    pub fn is_slotted(&self) -> bool {
        !matches!(self, ArrivalModel::Poisson { .. })
    }

    /// Next arrival instant strictly after `now` and the batch size delivered
    /// there. `None` when the stream never fires again.
    pub fn next_after<R: Rng + ?Sized>(&self, now: f64, rng: &mut R) -> Option<(f64, u32)> {
        match *self {
            ArrivalModel::None => None,
            ArrivalModel::Poisson { rate } => {
                if rate <= 0.0 {
                    return None;
                }
                let gap = Exp::new(rate).expect("positive rate").sample(rng);
                Some((now + gap, 1))
            }
            ArrivalModel::Slotted { rate } => {
                if rate <= 0.0 {
                    return None;
                }
                let base = now.floor();
                let whole = rate.floor();
                let frac = rate - whole;
                if whole >= 1.0 {
                    let extra = u32::from(rng.random::<f64>() < frac);
                    return Some((base + 1.0, whole as u32 + extra));
                }
                // Bernoulli(frac) per epoch: jump straight to the next
                // successful epoch with a geometric gap.
                let u: f64 = rng.random();
                let gap = if frac >= 1.0 {
                    1.0
                } else {
                    ((1.0 - u).ln() / (1.0 - frac).ln()).floor() + 1.0
                };
                Some((base + gap.max(1.0), 1))
            }
        }
    }

    /// First arrival of the stream, counting epoch 0 for slotted streams.
    pub fn first<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(f64, u32)> {
        match self {
            ArrivalModel::Slotted { .. } => self.next_after(-1.0, rng),
            _ => self.next_after(0.0, rng),
        }
    }
}

/// Service-time distribution of a buffer. Every kind has a finite second
/// moment and closed-form truncated moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ServiceDist {
    Deterministic { mean: f64 },
    Exponential { mean: f64 },
    Uniform { lo: f64, hi: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl ServiceDist {
    pub fn mean(&self) -> f64 {
        match self {
            ServiceDist::Deterministic { mean } | ServiceDist::Exponential { mean } => *mean,
            ServiceDist::Uniform { lo, hi } => 0.5 * (lo + hi),
            ServiceDist::Discrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
        }
    }

    /// `E[Γ²]`.
    pub fn second_moment(&self) -> f64 {
        match self {
            ServiceDist::Deterministic { mean } => mean * mean,
            ServiceDist::Exponential { mean } => 2.0 * mean * mean,
            ServiceDist::Uniform { lo, hi } => (lo * lo + lo * hi + hi * hi) / 3.0,
            ServiceDist::Discrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * v * p).sum()
            }
        }
    }

    /// `E[(Γ - b)_+]`.
    pub fn excess_mean(&self, b: f64) -> f64 {
        match self {
            ServiceDist::Deterministic { mean } => (mean - b).max(0.0),
            ServiceDist::Exponential { mean } => {
                if b <= 0.0 {
                    mean - b
                } else {
                    mean * (-b / mean).exp()
                }
            }
            ServiceDist::Uniform { lo, hi } => {
                if b <= *lo {
                    0.5 * (lo + hi) - b
                } else if b >= *hi {
                    0.0
                } else {
                    (hi - b) * (hi - b) / (2.0 * (hi - lo))
                }
            }
            ServiceDist::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .map(|(v, p)| p * (v - b).max(0.0))
                .sum(),
        }
    }

    pub fn is_unit_deterministic(&self) -> bool {
        matches!(self, ServiceDist::Deterministic { mean } if *mean == 1.0)
    }

    /// Parameter sanity; returns a description of the first problem found.
    pub fn check(&self) -> Result<(), String> {
        match self {
            ServiceDist::Deterministic { mean } | ServiceDist::Exponential { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return Err(format!("mean must be positive and finite, got {mean}"));
                }
            }
            ServiceDist::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && hi > lo) {
                    return Err(format!("uniform needs 0 <= lo < hi, got [{lo}, {hi}]"));
                }
            }
            ServiceDist::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err("discrete needs matching non-empty values/probs".into());
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err("discrete values must be finite and nonnegative".into());
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    return Err("discrete probabilities must be nonnegative".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(format!("discrete probabilities sum to {total}, not 1"));
                }
                if self.mean() <= 0.0 {
                    return Err("discrete mean must be positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ServiceDist::Deterministic { mean } => *mean,
            ServiceDist::Exponential { mean } => Exp::new(1.0 / mean).expect("positive mean").sample(rng),
            ServiceDist::Uniform { lo, hi } => Uniform::new(*lo, *hi).expect("lo < hi").sample(rng),
            ServiceDist::Discrete { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("non-empty")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_moments() {
        let d = ServiceDist::Deterministic { mean: 0.6 };
        assert_eq!(d.mean(), 0.6);
        assert!((d.second_moment() / d.mean() - 0.6).abs() < 1e-15);
        assert_eq!(d.excess_mean(1.0), 0.0);
        assert!((d.excess_mean(0.25) - 0.35).abs() < 1e-15);
    }

    #[test]
    fn excess_mean_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dists = [
            ServiceDist::Exponential { mean: 0.8 },
            ServiceDist::Uniform { lo: 0.2, hi: 1.4 },
            ServiceDist::Discrete { values: vec![0.1, 0.5, 2.0], probs: vec![0.5, 0.3, 0.2] },
        ];
        for d in &dists {
            let n = 400_000;
            let (mut s1, mut s2, mut ex) = (0.0, 0.0, 0.0);
            for _ in 0..n {
                let x = d.sample(&mut rng);
                s1 += x;
                s2 += x * x;
                ex += (x - 0.7f64).max(0.0);
            }
            let n = n as f64;
            assert!((s1 / n - d.mean()).abs() < 0.01, "{d:?}");
            assert!((s2 / n - d.second_moment()).abs() < 0.03, "{d:?}");
            assert!((ex / n - d.excess_mean(0.7)).abs() < 0.01, "{d:?}");
        }
    }

    #[test]
    fn slotted_arrivals_land_on_integers_with_right_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for rate in [0.1, 0.4, 1.0, 2.3] {
            let a = ArrivalModel::Slotted { rate };
            let (mut t, mut n) = a.first(&mut rng).unwrap();
            let mut total = n as u64;
            while t < 100_000.0 {
                assert_eq!(t, t.floor());
                let (t2, b) = a.next_after(t, &mut rng).unwrap();
                assert!(t2 > t);
                t = t2;
                n = b;
                if t < 100_000.0 {
                    total += n as u64;
                }
            }
            let observed = total as f64 / 100_000.0;
            assert!((observed - rate).abs() < 0.02 * rate.max(1.0), "rate {rate}: {observed}");
        }
    }

    #[test]
    fn bad_parameters_are_reported() {
        assert!(ServiceDist::Deterministic { mean: 0.0 }.check().is_err());
        assert!(ServiceDist::Uniform { lo: 1.0, hi: 1.0 }.check().is_err());
        assert!(ServiceDist::Discrete { values: vec![1.0], probs: vec![0.5] }.check().is_err());
        assert!(ServiceDist::Exponential { mean: 2.0 }.check().is_ok());
    }
}
