//! Simulation and Lyapunov certification for stochastic processing networks
//! scheduled by least-routed-first-served policies.

pub mod examples;
pub mod linalg;
pub mod network;
pub mod diagnostics;
pub mod lyapunov;
pub mod scheduling;
pub mod sim;
