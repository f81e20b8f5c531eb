//! Static description of a stochastic processing network (buffers,
//! activities, processors, routing, arrivals, services) and the quantities
//! derived from it once it has been validated.

mod config;
mod dist;
mod validate;

pub use config::{matrix_to_toml, parse_matrix, ConfigError, SpecFile, SPEC_VERSION};
pub use dist::{ArrivalModel, ServiceDist};
pub use validate::{
    activity_interchangeable, effective_rates, expand_capacity, routes_bounded, validate,
    validate_with, Component, EffectiveLoad, NetworkError, ValidatedNetwork, ValidationPolicy,
};

use crate::linalg::Matrix;

/// One buffer: its external arrival stream and the service-time law of jobs
/// served from it.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferSpec {
    pub name: String,
    pub arrival: ArrivalModel,
    pub service: ServiceDist,
}

/// A processing mode: serves `buffer` while holding every processor in
/// `processors`, depleting work at rate `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Activity {
    pub buffer: usize,
    pub processors: Vec<usize>,
    pub beta: f64,
}

/// Full static description of a network. Indices are zero-based here; the
/// configuration file uses one-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub name: String,
    pub processors: usize,
    pub buffers: Vec<BufferSpec>,
    pub activities: Vec<Activity>,
    /// `routing[i][l]` is the probability that a job leaving buffer `i`
    /// joins buffer `l`.
    pub routing: Matrix,
    /// Buffers grouped into scheduling components. Empty means one component
    /// holding every buffer.
    pub partition: Vec<Vec<usize>>,
    pub synchronized: bool,
}

impl NetworkSpec {
    pub fn num_buffers(&self) -> usize {
        self.buffers.len()
    }

    pub fn num_activities(&self) -> usize {
        self.activities.len()
    }

    pub fn means(&self) -> Vec<f64> {
        self.buffers.iter().map(|b| b.service.mean()).collect()
    }

    pub fn arrival_rates(&self) -> Vec<f64> {
        self.buffers.iter().map(|b| b.arrival.rate()).collect()
    }
}
