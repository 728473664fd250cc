//! Simulator for a wireless quantum mesh backbone network.
//!
//! Neighbouring nodes share partially entangled GHZ triples
//! `(|000⟩ + n|111⟩)/√(1+n²)`. A route is discovered by flooding route
//! requests (QRR); the reply (QRF) walks back to the source performing one
//! entanglement swap per node and piggybacking the measurement results, and a
//! final result packet lets the destination recover the teleported qubit
//! with a probabilistic amplitude correction.
//!
//! Modules, bottom up:
//!
//! - [`quantum`]: exact state vectors, gates and measurements.
//! - [`chain`]: channel coefficient algebra, Pauli corrections, the
//!   closed-form success probability and the exhaustive state-vector oracle.
//! - [`topology`]: random geometric mesh generation and minimum-hop paths.
//! - [`routing`]: discrete-event simulation of the QRR/QRF/RESULT protocol.
//! - [`experiments`]: seeded Monte Carlo sweeps and CSV output.

pub mod chain;
pub mod error;
pub mod experiments;
pub mod quantum;
pub mod routing;
pub mod topology;

pub use chain::{
    analytic_success, compose_corrections, correction_unitary, exact_chain_success, initial_coeffs,
    pauli_for, random_input, simulate_chain, swap_update, track_chain, ChainResult, ChannelCoeffs,
    EntanglementDegree, HopMeasurement, MeasurementLog,
};
pub use error::{Error, Result};
pub use quantum::{BellOutcome, BitOutcome, ComplexAmp, PauliOp, QubitId, StateVector};

pub use experiments::{fig2_data, packet_comparison, sweep, RowRecord, SuccessMode, SweepConfig};
pub use routing::{
    format_trace, run_session, Mode, PacketCounts, QuantumMode, SessionReport, SimConfig,
};
pub use topology::{NodeId, Point, Role, Topology, TopologyConfig};
