//! Two-qubit gate geometry and gate-quality measures.

pub mod fidelity;
pub mod functionals;
pub mod local;
pub mod named;
pub mod random;
pub mod report;
pub mod weyl;

pub use fidelity::{avg_gate_error, avg_gate_error_map, avg_gate_fidelity, avg_gate_fidelity_map, closest_unitary, pop_loss};
pub use functionals::{FunctionalValue, Objective};
pub use local::{fit_local_operations, LocalFit};
pub use weyl::{gate_concurrence, is_perfect_entangler, local_invariants, pe_distance, weyl_coordinates, LocalInvariants, WeylCoords};
pub use report::GateReport;
