//! Classical engine for generative-model-assisted selected configuration
//! interaction.
//!
//! The pipeline ingests molecular integrals (FCIDUMP), screens an initial
//! configuration support with perturbative measures, merges it with
//! measurement-style samples, and then alternates subspace diagonalization
//! with generative-model-driven configuration discovery until the
//! ground-state energy is converged.

pub mod error;
pub mod fermion;
pub mod hamiltonian;
pub mod integrals;
pub mod rbm;
pub mod recovery;
pub mod sampler;
pub mod screen;
pub mod seed;

pub use error::{Error, Result};
pub use fermion::{
    enumerate_symmetry_space, symmetry_filter, BitstringLayout, ConfigurationSet, Determinant,
    OrbitalBasis, Provenance,
};
pub use hamiltonian::{
    davidson_ground_state, dense_fci_oracle, project_hamiltonian, slater_condon_element,
    CIVector, SparseSubspaceHamiltonian,
};
pub use integrals::{
    mp2_amplitudes, mp2_energy, orbital_energies, parse_fcidump, read_fcidump, AmplitudeTensor,
    IntegralSet, TwoElectronOrdering,
};
pub use rbm::{build_training_distribution, symmetry_constrained_generate, RBMModel};
pub use recovery::{
    blacklist_screen, initialize_state, macro_cycle, run_recovery, LoopConfig, RecoveryMode,
    RecoveryReport, RecoveryState,
};
pub use sampler::{load_counts, sample_from_state, save_counts, Counts, NoiseSpec};
pub use screen::{
    build_scatterers, operation_count_report, perturbative_support, select_doubles,
    select_quadruples_symbolic, select_triples_symbolic, CostRecord, ExcitationSignature,
    ScattererSet,
};
pub use seed::derive_seed;
