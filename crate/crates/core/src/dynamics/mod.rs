//! Hamiltonian assembly and master-equation integration.

mod config;
mod hamiltonian;
mod lindblad;
mod oracle;
mod solver;

pub use config::{pulse_amplitude, PulseProfile, PulseShape, SystemConfig};
pub use hamiltonian::{
    build_hamiltonian, collapse_operators, frame_rotate_operator, to_rotating_frame, Model, RotatingFrame,
};
pub use lindblad::{lindblad_rhs, LindbladGenerator, TimeTerm};
pub use oracle::{
    config_expm_oracle, expm_multiply, liouvillian, liouvillian_expm_oracle, unvectorize, vectorize, ConstantSystem,
};
pub use solver::{
    evolve, evolve_model, initial_state, integrate, sample_grid, samples_for, SolverOptions, SolverStats, Trajectory,
};
