//! Ground-state analysis of finite lattice Hamiltonians H = K + V through
//! their exact probabilistic representation: matrix elements of e^{−Ht} are
//! expectations of an explicit stochastic functional over the jump chain that
//! the kinetic part defines, so spectral quantities can be estimated by Monte
//! Carlo and cross-checked against deterministic solvers on the same graph.
//!
//! The crate is organized around that split:
//!
//! * [`fock`] — state graphs: potentials, signed kinetic links, jump kernels,
//!   invariant measures, cavity/reservoir partitions, restricted and
//!   absorbing-wall operators;
//! * [`spectral`] — deterministic reference solvers: dense and Lanczos ground
//!   states, matrix-exponential actions, partition energy reports, phase
//!   classification, cavity-coupling estimates, first-exit rate operators;
//! * [`epr`] — the stochastic side: trajectory sampling in two jump modes,
//!   propagator-sum and ground-energy estimators, first-exit sampling, the
//!   exit-identity check, and the cavity series reconstruction;
//! * [`models`] — reproducible model builders (free hypercube, two-level
//!   dilution model, random-potential ensembles, Gaussian random-energy
//!   model) plus a text format for archiving instances;
//! * [`rpm`] — the analytic fixed-point solver for random-potential ground
//!   energies, its two-level closed form, and the dilute-limit phase
//!   predictor.

pub mod epr;
pub mod fock;
pub mod io;
pub mod models;
pub mod rng;
pub mod rpm;
pub mod spectral;

mod quad;

pub use epr::{
    check_exit_lemma, estimate_ground_energy, estimate_propagator_sum, sample_first_exit,
    sample_trajectory, series_reconstruction, EnergyFit, EprError, EprEstimate, FirstExit,
    JumpMode, LemmaCheck, SeriesReconstruction, Trajectory,
};
pub use fock::{FockError, Hamiltonian, LevelDensity, Link, Partition, TransitionKernel};
pub use io::{parse_model, write_model, ParseError, ParsedModel};
pub use models::{
    hypercube_free, qrem, random_potential_model, randomize_potential, two_level_rpm,
    KineticSpec, ModelError, ModelSpec,
};
pub use rpm::{
    critical_condition, is_critical, predict_phase_dilute, solve_e1f, two_level_closed_form,
    DilutePrediction, RpmError, RpmSpec,
};
pub use spectral::{
    coupling_report, coupling_report_from, exit_rate_hamiltonian, finite_size_prediction,
    ground_state, ground_state_with, partition_energies, partition_grounds, propagator_apply,
    propagator_apply_with, subspace_ground, theorem_prediction, CouplingReport, ExitRateReport,
    PartitionEnergies, PartitionGrounds, Phase, Propagator, SolverPath, SpectralError,
    SpectralResult, SubspaceGround,
};
