//! Self-consistent fermionic state reconstruction.
//!
//! Each macro-cycle diagonalizes the current subspace, moves sub-threshold
//! configurations to a permanent blacklist, trains the generative model on
//! the dominant coefficients (micro-cycle), generates new sector-conserving
//! candidates, screens them against the blacklist, and expands the subspace
//! with the survivors. The loop stops when successive energies agree within
//! `eps_energy` or generation stops producing new states.

use std::collections::HashSet;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fermion::{
    random_sector_determinant, ConfigurationSet, Determinant, OrbitalBasis, Provenance,
};
use crate::hamiltonian::{davidson_ground_state, project_hamiltonian, CIVector};
use crate::integrals::IntegralSet;
use crate::rbm::{build_training_distribution, symmetry_constrained_generate, RBMModel};
use crate::seed::derive_seed;

/// Run-level parameters of the recovery loop.
#[derive(Debug, Clone)]
pub struct LoopConfig {
    /// Coefficient magnitude below which a configuration is blacklisted.
    pub eps_coeff: f64,
    /// Convergence threshold on successive macro-cycle energies (hartree).
    pub eps_energy: f64,
    /// Generation budget per macro-cycle as a percentage of `d_Q`.
    pub x_percent: f64,
    /// Lower bound on the per-cycle generation budget.
    pub n_gen_floor: usize,
    pub rbm_epochs: usize,
    /// Gibbs sweeps inside each contrastive-divergence update.
    pub rbm_gibbs_steps: usize,
    /// Gibbs sweeps applied to each generation seed.
    pub generation_steps: usize,
    pub learning_rate: f64,
    /// Training multiset size drawn in proportion to CI coefficients.
    pub training_set_size: usize,
    /// Extra resampling rounds for sector-violating generated strings.
    pub retry_rounds: usize,
    pub max_macro: usize,
    pub seed: u64,
    /// Optional external reference energy for report deltas.
    pub reference_energy: Option<f64>,
    /// Reinitialize the model each macro-cycle instead of warm-starting.
    pub cold_start: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            eps_coeff: 1e-10,
            eps_energy: 1e-5,
            x_percent: 2.0,
            n_gen_floor: 8,
            rbm_epochs: 3,
            rbm_gibbs_steps: 20,
            generation_steps: 1,
            learning_rate: 0.001,
            training_set_size: 4000,
            retry_rounds: 10,
            max_macro: 100,
            seed: 1,
            reference_energy: None,
            cold_start: false,
        }
    }
}

/// One row of the per-cycle table.
#[derive(Debug, Clone, Serialize)]
pub struct CycleRecord {
    pub macro_index: usize,
    /// Ground-state energy of this cycle's diagonalization (hartree).
    pub energy: f64,
    /// `energy - reference` when a reference was supplied.
    pub delta_vs_reference: Option<f64>,
    /// Dimension of this cycle's diagonalization space.
    pub n_det: usize,
    pub blacklist_size: usize,
    pub search_space_size: usize,
    /// Sector-valid configurations produced by generation.
    pub generated: usize,
    /// Generated configurations that survived blacklist screening and were
    /// new to the subspace.
    pub survivors: usize,
    pub shortfall: usize,
}

/// Mutable state threaded through macro-cycles.
#[derive(Debug, Clone)]
pub struct RecoveryState {
    subspace: ConfigurationSet,
    /// Canonically sorted for binary-search screening.
    blacklist: Vec<Determinant>,
    ci: Option<CIVector>,
    /// Determinants the stored CI vector is aligned with.
    ci_basis: Vec<Determinant>,
    history: Vec<CycleRecord>,
    /// Every determinant ever diagonalized, blacklisted, or generated.
    search_space: HashSet<Determinant>,
    rng: ChaCha8Rng,
    basis: OrbitalBasis,
}

impl RecoveryState {
    pub fn subspace(&self) -> &ConfigurationSet {
        &self.subspace
    }

    pub fn blacklist(&self) -> &[Determinant] {
        &self.blacklist
    }

    pub fn ci(&self) -> Option<&CIVector> {
        self.ci.as_ref()
    }

    pub fn history(&self) -> &[CycleRecord] {
        &self.history
    }

    pub fn search_space_size(&self) -> usize {
        self.search_space.len()
    }

    pub fn basis(&self) -> &OrbitalBasis {
        &self.basis
    }

    fn note_explored(&mut self, d: Determinant) {
        self.search_space.insert(d);
    }
}

/// Ordered union of the measurement-derived and perturbative sets, with the
/// reference determinant guaranteed present and an empty blacklist.
pub fn initialize_state(
    hardware: &ConfigurationSet,
    perturbative: &ConfigurationSet,
    basis: &OrbitalBasis,
    seed: u64,
) -> Result<RecoveryState> {
    for set in [hardware, perturbative] {
        for (d, _, _) in set.iter() {
            if !basis.contains(d) {
                return Err(Error::SectorMismatch);
            }
        }
    }
    let mut subspace = hardware.union(perturbative);
    subspace.insert(basis.reference_determinant(), Provenance::Reference, 1);
    let search_space: HashSet<Determinant> = subspace.determinants().iter().copied().collect();
    Ok(RecoveryState {
        subspace,
        blacklist: Vec::new(),
        ci: None,
        ci_basis: Vec::new(),
        history: Vec::new(),
        search_space,
        rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, "recovery-loop")),
        basis: *basis,
    })
}

/// Candidates minus blacklist, order preserved; membership by binary search
/// over the sorted blacklist.
pub fn blacklist_screen(
    candidates: &ConfigurationSet,
    blacklist: &[Determinant],
) -> ConfigurationSet {
    let mut out = ConfigurationSet::new();
    for (d, tag, freq) in candidates.iter() {
        if blacklist.binary_search(d).is_err() {
            out.insert(*d, tag, freq);
        }
    }
    out
}

fn insert_blacklist(blacklist: &mut Vec<Determinant>, d: Determinant) {
    if let Err(pos) = blacklist.binary_search(&d) {
        blacklist.insert(pos, d);
    }
}

/// Generation strategy of a macro-cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryMode {
    /// Train the model each cycle and sample from it.
    Rbm,
    /// Uniform draws from the symmetry space with identical budgets.
    Random,
}

/// Per-cycle generation budget: `ceil(x% of d_Q)`, floored so tiny spaces
/// still make progress.
pub fn generation_budget(basis: &OrbitalBasis, cfg: &LoopConfig) -> usize {
    let d_q = basis.symmetry_space_dimension() as f64;
    let raw = (cfg.x_percent / 100.0 * d_q).ceil() as usize;
    raw.max(cfg.n_gen_floor)
}

/// Runs one diagonalize / filter / train / generate / screen / expand pass.
/// `model` is ignored under [`RecoveryMode::Random`].
pub fn macro_cycle(
    state: &mut RecoveryState,
    s: &IntegralSet,
    model: &mut RBMModel,
    cfg: &LoopConfig,
    mode: RecoveryMode,
) -> Result<()> {
    debug_assert!(state
        .subspace
        .determinants()
        .iter()
        .all(|d| state.blacklist.binary_search(d).is_err()));
    let macro_index = state.history.len() + 1;
    let basis = state.basis;
    let reference = basis.reference_determinant();

    // (1) project + diagonalize
    let h = project_hamiltonian(&state.subspace, s)?;
    let guess = warm_start_guess(state, h.basis_order().determinants());
    let ci = davidson_ground_state(&h, guess.as_ref())?;
    let n_det = h.dimension();
    let energy = ci.energy;

    // (2)+(3a) split by eps_coeff; build the training distribution from the
    // dominant part (reference excluded)
    let diagonalized = state.subspace.clone();
    let training = if mode == RecoveryMode::Rbm {
        match build_training_distribution(
            &ci,
            &diagonalized,
            &basis,
            cfg.eps_coeff,
            cfg.training_set_size,
            &reference,
            &mut state.rng,
        ) {
            Ok((training, below)) => {
                apply_blacklist(state, &below, &reference)?;
                Some(training)
            }
            Err(e) => return Err(e),
        }
    } else {
        let below = below_threshold(&ci, &diagonalized, cfg.eps_coeff);
        apply_blacklist(state, &below, &reference)?;
        None
    };

    state.ci = Some(ci.clone());
    state.ci_basis = diagonalized.determinants().to_vec();

    // (3b)+(4) micro-cycle and generation
    let n_gen = generation_budget(&basis, cfg);
    let (generated, stats) = match mode {
        RecoveryMode::Rbm => {
            if cfg.cold_start {
                *model = RBMModel::new(
                    model.n_visible(),
                    model.n_hidden(),
                    derive_seed(cfg.seed, &format!("rbm-cold-{macro_index}")),
                );
            }
            let training = training.expect("training set exists in rbm mode");
            model.cd_train(&training, cfg.rbm_epochs, cfg.rbm_gibbs_steps, cfg.learning_rate)?;
            let mut pool = |rng: &mut ChaCha8Rng| random_sector_determinant(&basis, rng);
            symmetry_constrained_generate(
                model,
                &basis,
                n_gen,
                cfg.generation_steps,
                cfg.retry_rounds,
                &mut state.rng,
                &mut pool,
            )?
        }
        RecoveryMode::Random => {
            let mut set = ConfigurationSet::new();
            for _ in 0..n_gen {
                set.insert(
                    random_sector_determinant(&basis, &mut state.rng),
                    Provenance::Generated,
                    1,
                );
            }
            let stats = crate::rbm::GenerationStats {
                requested: n_gen,
                produced: n_gen,
                shortfall: 0,
            };
            (set, stats)
        }
    };
    for (d, _, _) in generated.iter() {
        state.note_explored(*d);
    }

    // (5)+(6) blacklist screen, expand, re-add the reference
    let screened = blacklist_screen(&generated, &state.blacklist);
    let mut survivors = 0;
    for (d, tag, freq) in screened.iter() {
        if state.subspace.insert(*d, tag, freq) {
            survivors += 1;
        }
    }
    state.subspace.insert(reference, Provenance::Reference, 1);

    state.history.push(CycleRecord {
        macro_index,
        energy,
        delta_vs_reference: cfg.reference_energy.map(|r| energy - r),
        n_det,
        blacklist_size: state.blacklist.len(),
        search_space_size: state.search_space.len(),
        generated: stats.produced,
        survivors,
        shortfall: stats.shortfall,
    });
    Ok(())
}

/// The random-sampling baseline: identical loop with the train/generate
/// steps replaced by uniform symmetry-space draws.
pub fn random_baseline_cycle(
    state: &mut RecoveryState,
    s: &IntegralSet,
    cfg: &LoopConfig,
) -> Result<()> {
    // model is untouched in random mode
    let mut unused = RBMModel::new(1, 1, 0);
    macro_cycle(state, s, &mut unused, cfg, RecoveryMode::Random)
}

fn warm_start_guess(state: &RecoveryState, dets: &[Determinant]) -> Option<CIVector> {
    let ci = state.ci.as_ref()?;
    let old: std::collections::HashMap<Determinant, f64> = state
        .ci_basis
        .iter()
        .copied()
        .zip(ci.coefficients.iter().copied())
        .collect();
    let mut coeffs = vec![0.0; dets.len()];
    let mut norm = 0.0;
    for (i, d) in dets.iter().enumerate() {
        if let Some(&c) = old.get(d) {
            coeffs[i] = c;
            norm += c * c;
        }
    }
    if norm < 0.5 {
        return None;
    }
    Some(CIVector { coefficients: coeffs, energy: ci.energy })
}

fn below_threshold(
    ci: &CIVector,
    space: &ConfigurationSet,
    eps_coeff: f64,
) -> ConfigurationSet {
    let mut below = ConfigurationSet::new();
    for (idx, (d, tag, freq)) in space.iter().enumerate() {
        if ci.coefficients[idx].abs() <= eps_coeff {
            below.insert(*d, tag, freq);
        }
    }
    below
}

fn apply_blacklist(
    state: &mut RecoveryState,
    below: &ConfigurationSet,
    reference: &Determinant,
) -> Result<()> {
    for (d, _, _) in below.iter() {
        if d == reference {
            continue;
        }
        state.subspace.remove(d);
        insert_blacklist(&mut state.blacklist, *d);
        state.note_explored(*d);
    }
    if state.subspace.is_empty() {
        return Err(Error::EmptyDominantSet);
    }
    Ok(())
}

/// Full run summary plus the data behind the coefficient-fidelity plots.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub final_energy: f64,
    pub converged: bool,
    pub stop_reason: String,
    pub n_macro_cycles: usize,
    pub final_n_det: usize,
    pub blacklist_size: usize,
    pub search_space_size: usize,
    pub d_q: u128,
    pub mode: RecoveryMode,
    pub reference_energy: Option<f64>,
    pub final_error_vs_reference: Option<f64>,
    pub cycles: Vec<CycleRecord>,
    /// Final `|c|` values sorted ascending.
    pub coefficient_magnitudes: Vec<f64>,
}

/// Drives macro-cycles to convergence: stops when successive energies agree
/// within `eps_energy`, when two consecutive cycles produce no new states,
/// or (flagged, not fatal) at `max_macro`.
pub fn run_recovery(
    s: &IntegralSet,
    basis: &OrbitalBasis,
    hardware: &ConfigurationSet,
    perturbative: &ConfigurationSet,
    cfg: &LoopConfig,
    mode: RecoveryMode,
) -> Result<(RecoveryReport, RecoveryState)> {
    let mut state = initialize_state(hardware, perturbative, basis, cfg.seed)?;
    let m = basis.n_spin_orbitals();
    let mut model = RBMModel::new(m, m, derive_seed(cfg.seed, "rbm"));
    let mut prev_energy = f64::INFINITY;
    let mut empty_rounds = 0usize;
    let mut converged = false;
    let mut stop_reason = String::from("max_macro reached");

    for _ in 0..cfg.max_macro {
        macro_cycle(&mut state, s, &mut model, cfg, mode)?;
        let row = state.history.last().expect("cycle just ran");
        let energy = row.energy;
        if row.survivors == 0 {
            empty_rounds += 1;
        } else {
            empty_rounds = 0;
        }
        if (energy - prev_energy).abs() <= cfg.eps_energy {
            converged = true;
            stop_reason = "energy converged".into();
            break;
        }
        if empty_rounds >= 2 {
            converged = true;
            stop_reason = "no new states".into();
            break;
        }
        prev_energy = energy;
    }

    let final_energy = state.history.last().map(|r| r.energy).unwrap_or(f64::NAN);
    let mut magnitudes: Vec<f64> = state
        .ci
        .as_ref()
        .map(|v| v.coefficients.iter().map(|c| c.abs()).collect())
        .unwrap_or_default();
    magnitudes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let report = RecoveryReport {
        final_energy,
        converged,
        stop_reason,
        n_macro_cycles: state.history.len(),
        final_n_det: state.subspace.len(),
        blacklist_size: state.blacklist.len(),
        search_space_size: state.search_space.len(),
        d_q: basis.symmetry_space_dimension(),
        mode,
        reference_energy: cfg.reference_energy,
        final_error_vs_reference: cfg.reference_energy.map(|r| final_energy - r),
        cycles: state.history.clone(),
        coefficient_magnitudes: magnitudes,
    };
    Ok((report, state))
}
