//! Dense quantum-state engine: gates, channels, observables and sampling.

mod density;
mod gate;
pub(crate) mod kernels;
mod oracle;
mod pauli;
mod state;

pub use density::{qubit_projector, DensityMatrix, Qubit2x2};
pub use gate::{inverse_sequence, Gate, GateMatrix, Targets};
pub use oracle::{dense_unitary_oracle, embed_gate, unitarity_deviation, ORACLE_MAX_QUBITS};
pub use pauli::{Pauli, PauliString};
pub use state::{Histogram, StateVector};

pub(crate) use state::{sample_from_probs, z_features_from_probs};
