//! Heralded KLM-state generation for solid-state emitters coupled to 1D waveguides.
//!
//! A single ancilla photon is routed through linear optics and scattered off
//! N emitters. Imperfect scattering (finite Purcell factor, detuning) is
//! heralded into monitor detectors, so a click on an output detector leaves
//! the emitters in the KLM state after a σ_z feedforward.
//!
//! - [`scatter`]: closed-form reflection/transmission amplitudes and wave plates.
//! - [`state`]: sparse photon ⊗ emitter state with probability sinks.
//! - [`circuit`]: straight-line circuits, executor and traces.
//! - [`protocols`]: two-, three- and N-emitter circuit builders and feedforward.
//! - [`analysis`]: success probabilities, broadening-averaged fidelities, sweeps.
//! - [`netlist`]: the `.wgq` text format for circuits.
//!
//! ```
//! use wgklm_core::{run_protocol, EmitterParams, ProtocolKind, ProtocolParams, Purcell};
//!
//! let params = ProtocolParams::new(2, EmitterParams::new(Purcell::Finite(100.0), 0.0));
//! let run = run_protocol(&params, ProtocolKind::TwoQubit).unwrap();
//! assert!((run.success_probability() - 0.960980).abs() < 1e-6);
//! ```

pub mod analysis;
pub mod circuit;
pub mod error;
pub mod netlist;
pub mod protocols;
pub mod scatter;
pub mod state;

pub use analysis::{
    averaged_fidelity, conditioned_fidelity, success_probability, sweep, AveragedFidelity, BroadeningModel,
    FidelityMode, Method, SweepKind, SweepResult,
};
pub use circuit::{
    check_passive_unitarity, execute, Circuit, Coefficient, Component, Correction, Environment, Execution,
    ExecutionTrace, FeedforwardRule, MixerKind, PassivityReport, PhotonInput,
};
pub use error::{Error, Result};
pub use protocols::{
    apply_feedforward, build, build_n_qubit, build_three_qubit, build_two_qubit, build_two_qubit_with, klm_target,
    run_circuit, run_protocol, BuildOptions, HeraldedOutcome, KlmTarget, ProtocolKind, ProtocolParams, ProtocolRun,
};
pub use scatter::{
    heralded_z_success, hwp_matrix, scatter_coeffs, EmitterParams, PolarizationMatrix, Purcell, ScatterCoeffs,
};
pub use state::{
    Basis, DetectorId, DetectorOutcome, EmitterConfig, EmitterState, PmLabel, Polarization, SinkId, Slot, SpatialMode,
    SystemState,
};
