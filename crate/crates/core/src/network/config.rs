//! TOML schema for network specifications and certificate matrices.
//!
//! ```toml
//! spec_version = 1
//! name = "rybko-stolyar"
//! synchronized = false
//! processors = 2
//! buffers = ["1", "2", "3", "4"]
//! partition = [[1, 4], [2, 3]]
//!
//! [[activities]]
//! buffer = 1
//! processors = [1]
//! beta = 1.0
//!
//! [routing]
//! sparse = [{ from = 1, to = 2, p = 1.0 }, { from = 3, to = 4, p = 1.0 }]
//! # or: dense = [[0.0, 1.0, 0.0, 0.0], ...]
//!
//! [[arrivals]]
//! kind = "poisson"
//! rate = 1.0
//!
//! [[services]]
//! kind = "deterministic"
//! mean = 0.1
//! ```
//!
//! Buffer, processor and activity indices are one-based in the file.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Activity, ArrivalModel, BufferSpec, NetworkSpec, ServiceDist};
use crate::linalg::{self, Matrix};

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("unsupported spec_version {0} (expected {SPEC_VERSION})")]
    Version(u32),
    #[error("{0}")]
    Shape(String),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Parse(_) => "Parse",
            ConfigError::Version(_) => "Version",
            ConfigError::Shape(_) => "Shape",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityEntry {
    pub buffer: usize,
    pub processors: Vec<usize>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingTriplet {
    pub from: usize,
    pub to: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparse: Option<Vec<RoutingTriplet>>,
}

/// On-disk form of a [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub spec_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub synchronized: bool,
    pub processors: usize,
    pub buffers: Vec<String>,
    #[serde(default)]
    pub partition: Vec<Vec<usize>>,
    pub activities: Vec<ActivityEntry>,
    #[serde(default)]
    pub routing: RoutingEntry,
    pub arrivals: Vec<ArrivalModel>,
    pub services: Vec<ServiceDist>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    spec_version: u32,
    z: Vec<Vec<f64>>,
}

fn one_based(idx: usize, what: &str) -> Result<usize, ConfigError> {
    idx.checked_sub(1)
        .ok_or_else(|| ConfigError::Shape(format!("{what} indices are one-based; got 0")))
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let file: SpecFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if file.spec_version != SPEC_VERSION {
            return Err(ConfigError::Version(file.spec_version));
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec file serializes")
    }

    pub fn into_spec(self) -> Result<NetworkSpec, ConfigError> {
        let n = self.buffers.len();
        if self.arrivals.len() != n || self.services.len() != n {
            return Err(ConfigError::Shape(format!(
                "{n} buffers but {} arrivals and {} services",
                self.arrivals.len(),
                self.services.len()
            )));
        }
        let activities = self
            .activities
            .iter()
            .map(|a| {
                Ok(Activity {
                    buffer: one_based(a.buffer, "buffer")?,
                    processors: a
                        .processors
                        .iter()
                        .map(|&p| one_based(p, "processor"))
                        .collect::<Result<_, _>>()?,
                    beta: a.beta,
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let routing = match (self.routing.dense, self.routing.sparse) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Shape("routing: give either dense or sparse".into()))
            }
            (Some(dense), None) => dense,
            (None, sparse) => {
                let mut m = linalg::zeros(n);
                for t in sparse.unwrap_or_default() {
                    let (i, l) = (one_based(t.from, "buffer")?, one_based(t.to, "buffer")?);
                    if i >= n || l >= n {
                        return Err(ConfigError::Shape(format!(
                            "routing entry {} -> {} out of range",
                            t.from, t.to
                        )));
                    }
                    m[i][l] += t.p;
                }
                m
            }
        };
        let partition = self
            .partition
            .iter()
            .map(|part| part.iter().map(|&i| one_based(i, "buffer")).collect())
            .collect::<Result<Vec<Vec<usize>>, _>>()?;
        let buffers = self
            .buffers
            .into_iter()
            .zip(self.arrivals)
            .zip(self.services)
            .map(|((name, arrival), service)| BufferSpec { name, arrival, service })
            .collect();
        Ok(NetworkSpec {
            name: self.name,
            processors: self.processors,
            buffers,
            activities,
            routing,
            partition,
            synchronized: self.synchronized,
        })
    }

    pub fn from_spec(spec: &NetworkSpec) -> Self {
        let sparse: Vec<RoutingTriplet> = spec
            .routing
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(move |(l, &p)| RoutingTriplet { from: i + 1, to: l + 1, p })
            })
            .collect();
        SpecFile {
            spec_version: SPEC_VERSION,
            name: spec.name.clone(),
            synchronized: spec.synchronized,
            processors: spec.processors,
            buffers: spec.buffers.iter().map(|b| b.name.clone()).collect(),
            partition: spec
                .partition
                .iter()
                .map(|p| p.iter().map(|i| i + 1).collect())
                .collect(),
            activities: spec
                .activities
                .iter()
                .map(|a| ActivityEntry {
                    buffer: a.buffer + 1,
                    processors: a.processors.iter().map(|p| p + 1).collect(),
                    beta: a.beta,
                })
                .collect(),
            routing: RoutingEntry { dense: None, sparse: Some(sparse) },
            arrivals: spec.buffers.iter().map(|b| b.arrival.clone()).collect(),
            services: spec.buffers.iter().map(|b| b.service.clone()).collect(),
        }
    }
}

/// Parses a certificate matrix file (`spec_version = 1`, `z = [[...], ...]`).
pub fn parse_matrix(text: &str) -> Result<Matrix, ConfigError> {
    let file: MatrixFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    if file.spec_version != SPEC_VERSION {
        return Err(ConfigError::Version(file.spec_version));
    }
    Ok(file.z)
}

pub fn matrix_to_toml(z: &Matrix) -> String {
    toml::to_string(&MatrixFile { spec_version: SPEC_VERSION, z: z.clone() })
        .expect("matrix serializes")
}
