//! Constants of the global Lyapunov function and its evaluation.

use crate::linalg;
use crate::lyapunov::QuadraticCertificate;
use crate::network::ValidatedNetwork;
use crate::sim::SimState;

use super::workload::counted_hat_levels;
use super::weights::total_weights;
use super::DiagnosticsError;

/// Cap on the number of exact terms of the tail series before the
/// geometric bound takes over.
const MAX_TAIL_TERMS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalConstants {
    /// `max_i E[Γ_i²] / m_i`.
    pub b_renewal: f64,
    /// Sampling period of the drift statement.
    pub t: u64,
    pub nu: f64,
    pub gamma: f64,
    /// Counter depth of the counted workloads and of the route pre-draw.
    pub d: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub upsilon: f64,
    /// Shared constant `C`.
    pub c: f64,
    pub xi: f64,
    pub beta_min: f64,
    pub m_min: f64,
    pub m_max: f64,
    /// When set, `D` is the route bound and the `G²` term is dropped.
    pub bounded_routes: bool,
}

/// Derives every constant from the network and a certificate that passed
/// [`crate::lyapunov::check_local`].
pub fn global_constants(net: &ValidatedNetwork, cert: &QuadraticCertificate) -> Result<GlobalConstants, DiagnosticsError> {
    let spec = net.spec();
    let m = net.means();
    let beta_min = net.beta_min();
    let m_min = m.iter().copied().fold(f64::INFINITY, f64::min);
    let m_max = m.iter().copied().fold(0.0, f64::max);
    let b_renewal = spec
        .buffers
        .iter()
        .map(|b| b.service.second_moment() / b.service.mean())
        .fold(0.0, f64::max);
    let j = net.num_activities() as f64;
    let k = net.num_processors() as i32;

    let first = (2.0 * j * b_renewal / beta_min + 1.0).ceil();
    let second = 2.0 * m_max + 2.0;
    let t = (first.floor() + 1.0).max(second.floor() + 1.0) as u64;

    let nu = spec
        .buffers
        .iter()
        .map(|b| b.service.mean() - b.service.excess_mean(beta_min))
        .fold(f64::INFINITY, f64::min);
    let gamma = cert.epsilon * nu / 2f64.powi(k + 2);

    let (d, bounded_routes) = match net.route_bound() {
        Some(bound) => (bound, true),
        None => {
            if gamma <= 0.0 {
                return Err(DiagnosticsError::SlackNonPositive(cert.epsilon));
            }
            (tail_depth(net, gamma / (t as f64 * m_max))?, false)
        }
    };

    let upsilon = cert.eta * m_min;
    let c = cert.c.max(1.0) + max_quadratic(net, &cert.z, cert.epsilon)?;
    let xi = upsilon * (upsilon / (2.0 * c)).powi(d as i32);
    Ok(GlobalConstants {
        b_renewal,
        t,
        nu,
        gamma,
        d,
        gamma1: 2.0 * gamma / (j * b_renewal),
        gamma2: m_min * gamma,
        upsilon,
        c,
        xi,
        beta_min,
        m_min,
        m_max,
        bounded_routes,
    })
}

fn max_quadratic(net: &ValidatedNetwork, z: &linalg::Matrix, epsilon: f64) -> Result<f64, DiagnosticsError> {
    Ok(crate::lyapunov::check_local(z, net, epsilon)?.max_quadratic)
}

/// Smallest `x ≥ 1` with `Σ_{d≥x} d ‖(Pᵀ)^d α‖₁ ≤ threshold`. Terms are
/// summed exactly until a geometric bound with ratio `r` (spectral radius
/// estimate plus 1e-6) makes the rest negligible.
pub fn tail_depth(net: &ValidatedNetwork, threshold: f64) -> Result<usize, DiagnosticsError> {
    let r = net.spectral_radius() + 1e-6;
    if r >= 1.0 {
        return Err(DiagnosticsError::TailSeriesDiverges(r));
    }
    let geometric = |n: usize, a: f64| a * (n as f64 / (1.0 - r) + r / ((1.0 - r) * (1.0 - r)));
    let p = net.routing();
    let mut v = net.spec().arrival_rates();
    let mut terms = vec![0.0];
    let mut n = 1;
    let tail = loop {
        v = linalg::mat_t_vec(p, &v);
        let a: f64 = v.iter().map(|x| x.abs()).sum();
        let g = geometric(n, a);
        if g <= 1e-3 * threshold || a == 0.0 {
            break g;
        }
        if n >= MAX_TAIL_TERMS {
            return Err(DiagnosticsError::TailSeriesDiverges(r));
        }
        terms.push(n as f64 * a);
        n += 1;
    };
    // terms[d] = d a_d for d < n; the tail from n on is bounded by `tail`.
    let mut s = tail;
    let mut x = n;
    while x > 1 && s + terms[x - 1] <= threshold {
        s += terms[x - 1];
        x -= 1;
    }
    Ok(x)
}

/// Squared Euclidean and plain sums of the per-activity remaining services.
fn residuals(state: &SimState) -> (f64, f64) {
    state.serving().fold((0.0, 0.0), |(sq, l1), (_, _, v)| (sq + v * v, l1 + v))
}

/// `Σ_{c=1}^{D} (υ/2C)^c L(Ŵ_{≤c}) + (2C/β_min)‖V‖₂²`, plus `(ξ/2C) G²` with
/// `G = M1 + M2 + γ1‖V‖₁` when routes are unbounded.
pub fn eval_global(
    state: &SimState,
    net: &ValidatedNetwork,
    k: &GlobalConstants,
    cert: &QuadraticCertificate,
) -> Result<f64, DiagnosticsError> {
    if state.depth() < k.d {
        return Err(DiagnosticsError::PredrawDepthInsufficient { needed: k.d, depth: state.depth() });
    }
    let ratio = k.upsilon / (2.0 * k.c);
    let mut total = 0.0;
    let mut weight = 1.0;
    for hat in counted_hat_levels(state, net, k.d)? {
        weight *= ratio;
        total += weight * linalg::quad_form(&cert.z, &hat);
    }
    let (sq, l1) = residuals(state);
    total += 2.0 * k.c / k.beta_min * sq;
    if !k.bounded_routes {
        let w = total_weights(state, net);
        let g = w.m1 + w.m2 + k.gamma1 * l1;
        total += k.xi / (2.0 * k.c) * g * g;
    }
    Ok(total)
}
