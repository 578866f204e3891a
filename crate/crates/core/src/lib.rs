//! Compiler toolkit for distributed measurement-based quantum computing.
//!
//! A program enters as a gate circuit ([`frontend`]), becomes a computation
//! graph with measurement dependencies ([`model`]), is split across QPUs
//! ([`partition`]), packed into execution layers per QPU ([`qpu`]), and the
//! layers are timed across QPUs ([`schedule`]) to minimise the required photon
//! lifetime ([`metrics`]). [`pipeline`] wires the stages together.

pub mod frontend;
pub mod metrics;
pub mod model;
pub mod partition;
pub mod pipeline;
pub mod qpu;
pub mod schedule;
