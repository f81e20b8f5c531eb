//! Builtin networks.

use thiserror::Error;

use crate::linalg;
use crate::network::{Activity, ArrivalModel, BufferSpec, NetworkSpec, ServiceDist};

pub const NAMES: [&str; 7] = [
    "rybko-stolyar",
    "tandem",
    "single-server-2buf",
    "psn-a2",
    "reentrant-line",
    "switch-2x2",
    "wireless-fig4",
];

/// Service means of the default Rybko-Stolyar instance: loads 0.7 on both
/// processors while `m_2 + m_4 > 1`.
pub const RS_MEANS: [f64; 4] = [0.1, 0.6, 0.1, 0.6];
/// A harsher variant for the priority instability (`m_2 + m_4 = 1.6`).
pub const RS_UNSTABLE_MEANS: [f64; 4] = [0.05, 0.8, 0.05, 0.8];

#[derive(Debug, Clone, PartialEq, Error)]
#[error("unknown example `{0}` (known: {known})", known = NAMES.join(", "))]
pub struct UnknownExample(pub String);

/// Builds a builtin example by name. `unstable` selects the
/// priority-instability parameters and only affects `rybko-stolyar`.
pub fn build(name: &str, unstable: bool) -> Result<NetworkSpec, UnknownExample> {
    Ok(match name {
        "rybko-stolyar" if unstable => rybko_stolyar(&RS_UNSTABLE_MEANS),
        "rybko-stolyar" => rybko_stolyar(&RS_MEANS),
        "tandem" => tandem(),
        "single-server-2buf" => single_server_two_buffers(0.3, 0.3),
        "psn-a2" => psn_a2(),
        "reentrant-line" => reentrant_line(),
        "switch-2x2" => switch_2x2(0.2),
        "wireless-fig4" => wireless_fig4(),
        other => return Err(UnknownExample(other.to_string())),
    })
}

fn buffer(name: &str, arrival: ArrivalModel, service: ServiceDist) -> BufferSpec {
    BufferSpec { name: name.to_string(), arrival, service }
}

fn single(buffer: usize, processor: usize) -> Activity {
    Activity { buffer, processors: vec![processor], beta: 1.0 }
}

fn unit_slotted(name: &str, rate: f64) -> BufferSpec {
    let arrival = if rate > 0.0 { ArrivalModel::Slotted { rate } } else { ArrivalModel::None };
    buffer(name, arrival, ServiceDist::Deterministic { mean: 1.0 })
}

/// Two processors, routes 1 -> 2 and 3 -> 4, rate-1 Poisson arrivals at
/// buffers 1 and 3, deterministic services with the given means. Processor 1
/// serves buffers 1 and 4, processor 2 serves buffers 2 and 3.
pub fn rybko_stolyar(means: &[f64]) -> NetworkSpec {
    assert_eq!(means.len(), 4, "Rybko-Stolyar has four buffers");
    let poisson = ArrivalModel::Poisson { rate: 1.0 };
    let buffers = means
        .iter()
        .enumerate()
        .map(|(i, &mean)| {
            let arrival = if i % 2 == 0 { poisson.clone() } else { ArrivalModel::None };
            buffer(&(i + 1).to_string(), arrival, ServiceDist::Deterministic { mean })
        })
        .collect();
    let mut routing = linalg::zeros(4);
    routing[0][1] = 1.0;
    routing[2][3] = 1.0;
    NetworkSpec {
        name: "rybko-stolyar".into(),
        processors: 2,
        buffers,
        activities: vec![single(0, 0), single(1, 1), single(2, 1), single(3, 0)],
        routing,
        partition: vec![vec![0, 3], vec![1, 2]],
        synchronized: false,
    }
}

/// One processor shared by two buffers with rate-1 Poisson arrivals and
/// deterministic services.
pub fn single_server_two_buffers(ma: f64, mb: f64) -> NetworkSpec {
    let poisson = ArrivalModel::Poisson { rate: 1.0 };
    NetworkSpec {
        name: "single-server-2buf".into(),
        processors: 1,
        buffers: vec![
            buffer("a", poisson.clone(), ServiceDist::Deterministic { mean: ma }),
            buffer("b", poisson, ServiceDist::Deterministic { mean: mb }),
        ],
        activities: vec![single(0, 0), single(1, 0)],
        routing: linalg::zeros(2),
        partition: vec![vec![0, 1]],
        synchronized: false,
    }
}

/// Two exponential stations in series.
pub fn tandem() -> NetworkSpec {
    let mut routing = linalg::zeros(2);
    routing[0][1] = 1.0;
    NetworkSpec {
        name: "tandem".into(),
        processors: 2,
        buffers: vec![
            buffer("1", ArrivalModel::Poisson { rate: 1.0 }, ServiceDist::Exponential { mean: 0.5 }),
            buffer("2", ArrivalModel::None, ServiceDist::Exponential { mean: 0.6 }),
        ],
        activities: vec![single(0, 0), single(1, 1)],
        routing,
        partition: vec![vec![0], vec![1]],
        synchronized: false,
    }
}

/// Parallel server network with two complete bipartite components: buffers
/// 1, 2 on processors 1, 2 (processor 2 is faster), and buffer 3 alone on
/// processor 3. Feedback between buffers 1 and 3.
pub fn psn_a2() -> NetworkSpec {
    let mut routing = linalg::zeros(3);
    routing[0][2] = 0.5;
    routing[2][0] = 0.2;
    let fast = |buffer| Activity { buffer, processors: vec![1], beta: 1.25 };
    NetworkSpec {
        name: "psn-a2".into(),
        processors: 3,
        buffers: vec![
            buffer("1", ArrivalModel::Poisson { rate: 0.8 }, ServiceDist::Exponential { mean: 1.0 }),
            buffer("2", ArrivalModel::Poisson { rate: 0.6 }, ServiceDist::Uniform { lo: 0.5, hi: 1.5 }),
            buffer("3", ArrivalModel::None, ServiceDist::Exponential { mean: 0.5 }),
        ],
        activities: vec![single(0, 0), fast(0), single(1, 0), fast(1), single(2, 2)],
        routing,
        partition: vec![vec![0, 1], vec![2]],
        synchronized: false,
    }
}

/// Route 1 -> 2 -> 3 with buffers 1 and 3 sharing processor 1.
pub fn reentrant_line() -> NetworkSpec {
    let mut routing = linalg::zeros(3);
    routing[0][1] = 1.0;
    routing[1][2] = 1.0;
    NetworkSpec {
        name: "reentrant-line".into(),
        processors: 2,
        buffers: vec![
            buffer("1", ArrivalModel::Poisson { rate: 1.0 }, ServiceDist::Exponential { mean: 0.2 }),
            buffer("2", ArrivalModel::None, ServiceDist::Exponential { mean: 0.5 }),
            buffer("3", ArrivalModel::None, ServiceDist::Exponential { mean: 0.3 }),
        ],
        activities: vec![single(0, 0), single(1, 1), single(2, 0)],
        routing,
        partition: vec![vec![0, 2], vec![1]],
        synchronized: false,
    }
}

/// 2x2 input-queued switch: one virtual output queue per (input, output)
/// pair, each transmission holding its input and output port. Processors
/// 1, 2 are inputs and 3, 4 outputs.
pub fn switch_2x2(rate: f64) -> NetworkSpec {
    let mut buffers = Vec::new();
    let mut activities = Vec::new();
    for input in 0..2 {
        for output in 0..2 {
            activities.push(Activity {
                buffer: buffers.len(),
                processors: vec![input, 2 + output],
                beta: 1.0,
            });
            buffers.push(unit_slotted(&format!("in{}-out{}", input + 1, output + 1), rate));
        }
    }
    NetworkSpec {
        name: "switch-2x2".into(),
        processors: 4,
        buffers,
        activities,
        routing: linalg::zeros(4),
        partition: vec![(0..4).collect()],
        synchronized: true,
    }
}

/// Four wireless nodes under primary interference with paths 1->2, 2->1,
/// 1->3, 3->1 and 2->4->3. One buffer per directed hop; a transmission holds
/// both its sender and receiver. Every node carries load 0.4.
pub fn wireless_fig4() -> NetworkSpec {
    let hops = [(1, 2, 0.1), (2, 1, 0.1), (1, 3, 0.1), (3, 1, 0.1), (2, 4, 0.2), (4, 3, 0.0)];
    let buffers = hops.iter().map(|&(a, b, r)| unit_slotted(&format!("{a}->{b}"), r)).collect();
    let activities = hops
        .iter()
        .enumerate()
        .map(|(i, &(a, b, _))| Activity { buffer: i, processors: vec![a - 1, b - 1], beta: 1.0 })
        .collect();
    let mut routing = linalg::zeros(6);
    routing[4][5] = 1.0;
    NetworkSpec {
        name: "wireless-fig4".into(),
        processors: 4,
        buffers,
        activities,
        routing,
        partition: vec![(0..6).collect()],
        synchronized: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate;

    #[test]
    fn every_example_validates() {
        for name in NAMES {
            let net = validate(build(name, false).unwrap()).unwrap_or_else(|e| panic!("{name}: {e:?}"));
            assert_eq!(net.spec().name, name);
        }
        validate(build("rybko-stolyar", true).unwrap()).unwrap();
    }

    #[test]
    fn unknown_name() {
        assert_eq!(build("nope", false), Err(UnknownExample("nope".into())));
    }

    #[test]
    fn rybko_stolyar_loads() {
        let net = validate(build("rybko-stolyar", false).unwrap()).unwrap();
        let rho = &net.load().rho;
        assert!((rho[0] + rho[3] - 0.7).abs() < 1e-12);
        assert!((rho[1] + rho[2] - 0.7).abs() < 1e-12);
        let m = net.means();
        assert!(m[1] + m[3] > 1.0);
    }

    #[test]
    fn wireless_node_loads_are_four_tenths() {
        let net = validate(wireless_fig4()).unwrap();
        let mut per_node = [0.0; 4];
        for (j, a) in net.spec().activities.iter().enumerate() {
            for &k in &a.processors {
                per_node[k] += net.load().rho[net.activity(j).buffer];
            }
        }
        for load in per_node {
            assert!((load - 0.4).abs() < 1e-12, "{per_node:?}");
        }
        assert_eq!(net.spec().activities.len(), 6);
        assert!(net.spec().activities.iter().all(|a| a.processors.len() == 2));
    }
}
