//! Slater-Condon matrix elements, subspace Hamiltonian assembly, and
//! eigensolvers.
//!
//! Matrix elements between determinants of mutual excitation rank 0, 1, 2
//! follow the Slater-Condon rules with fermionic permutation signs from
//! occupation parity; rank > 2 vanishes. The core energy sits on the
//! diagonal so eigenvalues are total energies.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fermion::{enumerate_symmetry_space, ConfigurationSet, Determinant, OrbitalBasis, Provenance};
use crate::integrals::IntegralSet;

/// Ground-state eigenpair over a configuration basis.
#[derive(Debug, Clone)]
pub struct CIVector {
    pub coefficients: Vec<f64>,
    pub energy: f64,
}

impl CIVector {
    /// Normalizes and fixes the overall sign so the largest-magnitude
    /// coefficient is positive.
    fn canonicalize(mut self) -> Self {
        let norm: f64 = self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.0 {
            for c in &mut self.coefficients {
                *c /= norm;
            }
        }
        let mut max_idx = 0;
        let mut max_abs = 0.0;
        for (i, c) in self.coefficients.iter().enumerate() {
            if c.abs() > max_abs {
                max_abs = c.abs();
                max_idx = i;
            }
        }
        if self.coefficients.get(max_idx).copied().unwrap_or(0.0) < 0.0 {
            for c in &mut self.coefficients {
                *c = -*c;
            }
        }
        self
    }
}

/// Symmetric sparse matrix over a fixed configuration ordering.
#[derive(Debug, Clone)]
pub struct SparseSubspaceHamiltonian {
    dimension: usize,
    /// Off-diagonal entries per row, column-sorted.
    rows: Vec<Vec<(u32, f64)>>,
    diagonal: Vec<f64>,
    basis_order: ConfigurationSet,
}

impl SparseSubspaceHamiltonian {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn basis_order(&self) -> &ConfigurationSet {
        &self.basis_order
    }

    pub fn rows(&self) -> &[Vec<(u32, f64)>] {
        &self.rows
    }

    /// `y = H x`, row-parallel with a deterministic per-row reduction.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .par_iter()
            .zip(self.diagonal.par_iter())
            .enumerate()
            .map(|(i, (row, &d))| {
                let mut acc = d * x[i];
                for &(j, v) in row {
                    acc += v * x[j as usize];
                }
                acc
            })
            .collect()
    }

    /// Number of stored entries including the diagonal.
    pub fn n_entries(&self) -> usize {
        self.dimension + self.rows.iter().map(Vec::len).sum::<usize>()
    }

    /// Coordinate text dump `i j value` (0-based, upper triangle), for
    /// external cross-checks.
    pub fn write_coordinate_format<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        for i in 0..self.dimension {
            writeln!(w, "{i} {i} {:.17e}", self.diagonal[i])?;
            for &(j, v) in &self.rows[i] {
                if j as usize > i {
                    writeln!(w, "{i} {j} {v:.17e}")?;
                }
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dimension, self.dimension);
        for i in 0..self.dimension {
            m[(i, i)] = self.diagonal[i];
            for &(j, v) in &self.rows[i] {
                m[(i, j as usize)] = v;
            }
        }
        m
    }
}

#[inline]
fn between_mask(a: usize, b: usize) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if hi - lo <= 1 {
        return 0;
    }
    ((1u64 << hi) - 1) & !((1u64 << (lo + 1)) - 1)
}

/// Parity sign of moving one electron `from -> to` within a channel mask.
#[inline]
fn single_parity(mask: u64, from: usize, to: usize) -> f64 {
    if (mask & between_mask(from, to)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `<Phi_a | H | Phi_b>` (electronic part only; no core energy).
///
/// Errors when the two determinants carry different electron counts.
pub fn slater_condon_element(
    a: &Determinant,
    b: &Determinant,
    s: &IntegralSet,
) -> Result<f64> {
    if a.n_alpha() != b.n_alpha() || a.n_beta() != b.n_beta() {
        return Err(Error::SectorMismatch);
    }
    Ok(slater_condon_unchecked(a, b, s))
}

fn slater_condon_unchecked(a: &Determinant, b: &Determinant, s: &IntegralSet) -> f64 {
    let n = s.n_spatial();
    let xa = a.alpha_mask() ^ b.alpha_mask();
    let xb = a.beta_mask() ^ b.beta_mask();
    match (xa.count_ones() + xb.count_ones()) / 2 {
        0 => diagonal_element(a, s),
        1 => {
            let (mask, hole, part, offset) = if xa != 0 {
                let hole = (xa & a.alpha_mask()).trailing_zeros() as usize;
                let part = (xa & b.alpha_mask()).trailing_zeros() as usize;
                (a.alpha_mask(), hole, part, 0)
            } else {
                let hole = (xb & a.beta_mask()).trailing_zeros() as usize;
                let part = (xb & b.beta_mask()).trailing_zeros() as usize;
                (a.beta_mask(), hole, part, n)
            };
            let sign = single_parity(mask, hole, part);
            let (so_hole, so_part) = (hole + offset, part + offset);
            let mut val = s.one_electron(s.so_spatial(so_hole), s.so_spatial(so_part));
            for q in a.occupied_spin_orbitals(n) {
                if q == so_hole {
                    continue;
                }
                val += s.antisymmetrized(so_hole, q, so_part, q);
            }
            sign * val
        }
        2 => {
            if xa != 0 && xb != 0 {
                // one excitation per channel
                let ha = (xa & a.alpha_mask()).trailing_zeros() as usize;
                let pa = (xa & b.alpha_mask()).trailing_zeros() as usize;
                let hb = (xb & a.beta_mask()).trailing_zeros() as usize;
                let pb = (xb & b.beta_mask()).trailing_zeros() as usize;
                let sign = single_parity(a.alpha_mask(), ha, pa)
                    * single_parity(a.beta_mask(), hb, pb);
                sign * s.antisymmetrized(ha, hb + n, pa, pb + n)
            } else {
                // both excitations in one channel
                let (mask_a, mask_b, x, offset) = if xa != 0 {
                    (a.alpha_mask(), b.alpha_mask(), xa, 0)
                } else {
                    (a.beta_mask(), b.beta_mask(), xb, n)
                };
                let mut holes = x & mask_a;
                let h1 = holes.trailing_zeros() as usize;
                holes &= holes - 1;
                let h2 = holes.trailing_zeros() as usize;
                let mut parts = x & mask_b;
                let p1 = parts.trailing_zeros() as usize;
                parts &= parts - 1;
                let p2 = parts.trailing_zeros() as usize;
                // sequential parity: h1 -> p1 on the original mask, then
                // h2 -> p2 on the updated occupation
                let sign1 = single_parity(mask_a, h1, p1);
                let interim = (mask_a & !(1 << h1)) | (1 << p1);
                let sign2 = single_parity(interim, h2, p2);
                sign1
                    * sign2
                    * s.antisymmetrized(h1 + offset, h2 + offset, p1 + offset, p2 + offset)
            }
        }
        _ => 0.0,
    }
}

fn diagonal_element(d: &Determinant, s: &IntegralSet) -> f64 {
    let occ = d.occupied_spin_orbitals(s.n_spatial());
    let mut e = 0.0;
    for &p in &occ {
        let sp = s.so_spatial(p);
        e += s.one_electron(sp, sp);
    }
    for (idx, &p) in occ.iter().enumerate() {
        for &q in &occ[idx + 1..] {
            e += s.antisymmetrized(p, q, p, q);
        }
    }
    e
}

/// Assembles the symmetric subspace matrix; pairs above excitation rank 2
/// are skipped by an XOR-popcount prefilter before any integral work.
pub fn project_hamiltonian(
    c: &ConfigurationSet,
    s: &IntegralSet,
) -> Result<SparseSubspaceHamiltonian> {
    if c.is_empty() {
        return Err(Error::EmptyConfigurationSet);
    }
    let dets = c.determinants();
    let first = &dets[0];
    for d in dets {
        if d.n_alpha() != first.n_alpha() || d.n_beta() != first.n_beta() {
            return Err(Error::SectorMismatch);
        }
    }
    let n = dets.len();
    let e_core = s.e_core();
    let results: Vec<(Vec<(u32, f64)>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let di = &dets[i];
            let mut row = Vec::new();
            for (j, dj) in dets.iter().enumerate() {
                if i == j {
                    continue;
                }
                let rank = di.excitation_rank_unchecked(dj);
                if rank > 2 {
                    continue;
                }
                let v = slater_condon_unchecked(di, dj, s);
                if v != 0.0 {
                    row.push((j as u32, v));
                }
            }
            (row, diagonal_element(di, s) + e_core)
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut diagonal = Vec::with_capacity(n);
    for (row, d) in results {
        rows.push(row);
        diagonal.push(d);
    }
    Ok(SparseSubspaceHamiltonian {
        dimension: n,
        rows,
        diagonal,
        basis_order: c.clone(),
    })
}

/// Solver statistics; `expansions` counts subspace vectors added beyond the
/// initial guess.
#[derive(Debug, Clone, Copy)]
pub struct DavidsonStats {
    pub iterations: usize,
    pub expansions: usize,
    pub final_residual: f64,
}

const DAVIDSON_TOL: f64 = 1e-8;
const DAVIDSON_MAX_ITER: usize = 200;
const DAVIDSON_MAX_SUBSPACE: usize = 24;

/// Lowest eigenpair by the Davidson method with a diagonal (Jacobi)
/// preconditioner. Deterministic given the guess.
pub fn davidson_ground_state(
    h: &SparseSubspaceHamiltonian,
    guess: Option<&CIVector>,
) -> Result<CIVector> {
    davidson_with_stats(h, guess).map(|(v, _)| v)
}

pub fn davidson_with_stats(
    h: &SparseSubspaceHamiltonian,
    guess: Option<&CIVector>,
) -> Result<(CIVector, DavidsonStats)> {
    let n = h.dimension();
    if n == 1 {
        return Ok((
            CIVector { coefficients: vec![1.0], energy: h.diagonal()[0] },
            DavidsonStats { iterations: 0, expansions: 0, final_residual: 0.0 },
        ));
    }

    let start = match guess {
        Some(g) => {
            if g.coefficients.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: g.coefficients.len() });
            }
            normalize(g.coefficients.clone())
        }
        None => {
            let k = argmin(h.diagonal());
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            v
        }
    };

    let mut basis: Vec<Vec<f64>> = vec![start];
    let mut products: Vec<Vec<f64>> = vec![h.matvec(&basis[0])];
    let mut expansions = 0usize;
    let mut residual_norm = f64::INFINITY;

    for iter in 0..DAVIDSON_MAX_ITER {
        let k = basis.len();
        let mut proj = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..=a {
                let val = dot(&basis[a], &products[b]);
                proj[(a, b)] = val;
                proj[(b, a)] = val;
            }
        }
        let eig = proj.symmetric_eigen();
        let lowest = argmin(eig.eigenvalues.as_slice());
        let theta = eig.eigenvalues[lowest];
        let y = eig.eigenvectors.column(lowest);

        let mut x = vec![0.0; n];
        let mut hx = vec![0.0; n];
        for a in 0..k {
            let w = y[a];
            for i in 0..n {
                x[i] += w * basis[a][i];
                hx[i] += w * products[a][i];
            }
        }
        let mut r = vec![0.0; n];
        for i in 0..n {
            r[i] = hx[i] - theta * x[i];
        }
        residual_norm = dot(&r, &r).sqrt();
        if residual_norm <= DAVIDSON_TOL {
            let v = CIVector { coefficients: x, energy: theta }.canonicalize();
            return Ok((
                v,
                DavidsonStats { iterations: iter, expansions, final_residual: residual_norm },
            ));
        }
        if k == n {
            // subspace saturated the full space; the Ritz pair is exact up to
            // round-off
            let v = CIVector { coefficients: x, energy: theta }.canonicalize();
            return Ok((
                v,
                DavidsonStats { iterations: iter, expansions, final_residual: residual_norm },
            ));
        }

        if k >= DAVIDSON_MAX_SUBSPACE.min(n) {
            // collapse to the current best estimate
            basis = vec![normalize(x.clone())];
            products = vec![h.matvec(&basis[0])];
            continue;
        }

        // Jacobi preconditioner
        let mut t = vec![0.0; n];
        for i in 0..n {
            let mut denom = theta - h.diagonal()[i];
            if denom.abs() < 1e-6 {
                denom = if denom < 0.0 { -1e-6 } else { 1e-6 };
            }
            t[i] = r[i] / denom;
        }
        match orthonormal_against(&t, &basis) {
            Some(t) => {
                products.push(h.matvec(&t));
                basis.push(t);
                expansions += 1;
            }
            None => {
                // stagnated direction; fall back to the lowest-diagonal unit
                // vector not yet represented
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| {
                    h.diagonal()[a]
                        .partial_cmp(&h.diagonal()[b])
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
                let mut added = false;
                for k in order {
                    let mut e = vec![0.0; n];
                    e[k] = 1.0;
                    if let Some(t) = orthonormal_against(&e, &basis) {
                        products.push(h.matvec(&t));
                        basis.push(t);
                        expansions += 1;
                        added = true;
                        break;
                    }
                }
                if !added {
                    return Err(Error::NonConvergence { iterations: iter, residual: residual_norm });
                }
            }
        }
    }
    Err(Error::NonConvergence { iterations: DAVIDSON_MAX_ITER, residual: residual_norm })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = dot(&v, &v).sqrt();
    for x in &mut v {
        *x /= norm;
    }
    v
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Two-pass modified Gram-Schmidt; None when the remainder is negligible.
fn orthonormal_against(v: &[f64], basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut t = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = dot(&t, b);
            for i in 0..t.len() {
                t[i] -= c * b[i];
            }
        }
    }
    let norm = dot(&t, &t).sqrt();
    if norm < 1e-10 {
        return None;
    }
    for x in &mut t {
        *x /= norm;
    }
    Some(t)
}

/// Dense lowest eigenpair via a full symmetric eigendecomposition; the
/// reference route for small subspaces.
pub fn dense_ground_state(h: &SparseSubspaceHamiltonian) -> CIVector {
    let m = h.to_dense();
    let eig = m.symmetric_eigen();
    let lowest = argmin(eig.eigenvalues.as_slice());
    CIVector {
        coefficients: eig.eigenvectors.column(lowest).iter().copied().collect(),
        energy: eig.eigenvalues[lowest],
    }
    .canonicalize()
}

/// Threshold below which the FCI oracle uses the dense eigensolver.
const FCI_DENSE_CUTOFF: usize = 1200;

/// Exact ground state over the full symmetry space.
///
/// Uses a dense eigendecomposition for small spaces and the Davidson solver
/// beyond; errors when the space dimension exceeds `cap`.
pub fn dense_fci_oracle(
    basis: &OrbitalBasis,
    s: &IntegralSet,
    cap: u64,
) -> Result<(CIVector, ConfigurationSet)> {
    let space = ConfigurationSet::from_determinants(
        enumerate_symmetry_space(basis, cap)?,
        Provenance::Reference,
    );
    let h = project_hamiltonian(&space, s)?;
    let v = if h.dimension() <= FCI_DENSE_CUTOFF {
        dense_ground_state(&h)
    } else {
        davidson_ground_state(&h, None)?
    };
    Ok((v, space))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrals::TwoElectronOrdering;
    use approx::assert_relative_eq;

    /// Hand-set 2-spatial-orbital integrals with every distinct value tagged.
    fn toy_integrals() -> IntegralSet {
        let n = 2;
        let mut v = vec![0.0; 16];
        let mut put = |p: usize, q: usize, r: usize, s: usize, val: f64| {
            for (a, b) in [(p, q), (q, p)] {
                for (c, d) in [(r, s), (s, r)] {
                    v[((a * n + b) * n + c) * n + d] = val;
                    v[((c * n + d) * n + a) * n + b] = val;
                }
            }
        };
        put(0, 0, 0, 0, 0.6744);
        put(1, 1, 1, 1, 0.6975);
        put(0, 0, 1, 1, 0.6634);
        put(0, 1, 0, 1, 0.1813);
        put(0, 0, 0, 1, 0.0412);
        put(1, 1, 0, 1, 0.0227);
        let h = [-1.2528, -0.0312, -0.0312, -0.4759];
        IntegralSet::from_dense(2, &h, &v, 0.7137, TwoElectronOrdering::Chemists).unwrap()
    }

    #[test]
    fn rank_three_pairs_vanish() {
        let basis = OrbitalBasis::new(4, 2, 2).unwrap();
        let s = IntegralSet::from_dense(
            4,
            &vec![0.1; 16],
            &vec![0.0; 256],
            0.0,
            TwoElectronOrdering::Chemists,
        )
        .unwrap();
        let hf = basis.reference_determinant();
        let triple = Determinant::from_occupied(&[2, 3], &[1, 3], &basis).unwrap();
        assert_eq!(hf.excitation_rank(&triple).unwrap(), 3);
        assert_eq!(slater_condon_element(&hf, &triple, &s).unwrap(), 0.0);
    }

    #[test]
    fn single_excitation_three_term_sum() {
        let s = toy_integrals();
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let hf = basis.reference_determinant();
        let single = Determinant::from_occupied(&[1], &[0], &basis).unwrap();
        // <HF|H|Phi_0a^1a> = h_01 + <0a 0b || 1a 0b> = h_01 + (01|00)
        let expect = -0.0312 + 0.0412;
        assert_relative_eq!(
            slater_condon_element(&hf, &single, &s).unwrap(),
            expect,
            epsilon = 1e-14
        );
    }

    #[test]
    fn sector_mismatch_is_an_error() {
        let s = toy_integrals();
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let hf = basis.reference_determinant();
        let other = Determinant::from_occupied(&[0, 1], &[], &basis).unwrap();
        assert!(slater_condon_element(&hf, &other, &s).is_err());
    }

    #[test]
    fn projection_rejects_empty_set() {
        let s = toy_integrals();
        assert!(matches!(
            project_hamiltonian(&ConfigurationSet::new(), &s),
            Err(Error::EmptyConfigurationSet)
        ));
    }

    #[test]
    fn singleton_projection_is_diagonal_plus_core() {
        let s = toy_integrals();
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let hf = basis.reference_determinant();
        let set = ConfigurationSet::from_determinants([hf], Provenance::Reference);
        let h = project_hamiltonian(&set, &s).unwrap();
        assert_eq!(h.dimension(), 1);
        // E_HF = 2 h_00 + (00|00) + e_core
        let expect = 2.0 * -1.2528 + 0.6744 + 0.7137;
        assert_relative_eq!(h.diagonal()[0], expect, epsilon = 1e-12);
    }

    #[test]
    fn insertion_order_does_not_change_matrix() {
        let s = toy_integrals();
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let dets: Vec<_> = enumerate_symmetry_space(&basis, 10).unwrap().collect();
        let fwd = ConfigurationSet::from_determinants(dets.clone(), Provenance::Reference);
        let rev =
            ConfigurationSet::from_determinants(dets.into_iter().rev(), Provenance::Reference);
        let hf = project_hamiltonian(&fwd, &s).unwrap();
        let hr = project_hamiltonian(&rev, &s).unwrap();
        assert_eq!(hf.to_dense(), hr.to_dense());
    }

    #[test]
    fn hermiticity_on_toy_space() {
        let s = toy_integrals();
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let set = ConfigurationSet::from_determinants(
            enumerate_symmetry_space(&basis, 10).unwrap(),
            Provenance::Reference,
        );
        let h = project_hamiltonian(&set, &s).unwrap().to_dense();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                assert!((h[(i, j)] - h[(j, i)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn one_by_one_davidson() {
        let s = toy_integrals();
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let set = ConfigurationSet::from_determinants(
            [basis.reference_determinant()],
            Provenance::Reference,
        );
        let h = project_hamiltonian(&set, &s).unwrap();
        let v = davidson_ground_state(&h, None).unwrap();
        assert_relative_eq!(v.energy, h.diagonal()[0]);
        assert_eq!(v.coefficients, vec![1.0]);
    }

    #[test]
    fn restart_from_converged_vector_needs_no_expansion() {
        let s = toy_integrals();
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let set = ConfigurationSet::from_determinants(
            enumerate_symmetry_space(&basis, 10).unwrap(),
            Provenance::Reference,
        );
        let h = project_hamiltonian(&set, &s).unwrap();
        let first = davidson_ground_state(&h, None).unwrap();
        let (again, stats) = davidson_with_stats(&h, Some(&first)).unwrap();
        assert_eq!(stats.expansions, 0);
        assert_relative_eq!(again.energy, first.energy, epsilon = 1e-12);
    }

    #[test]
    fn davidson_matches_dense_on_random_sparse() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for &n in &[20usize, 80, 240] {
            let mut dense = DMatrix::zeros(n, n);
            for i in 0..n {
                // Hamiltonian-like: dominant spread diagonal, sparse couplings
                dense[(i, i)] = -2.0 + 0.05 * i as f64 + 0.1 * rng.gen::<f64>();
                for j in 0..i {
                    if rng.gen::<f64>() < 0.15 {
                        let v = 0.02 * (rng.gen::<f64>() - 0.5);
                        dense[(i, j)] = v;
                        dense[(j, i)] = v;
                    }
                }
            }
            let mut rows = vec![Vec::new(); n];
            let mut diagonal = vec![0.0; n];
            for i in 0..n {
                diagonal[i] = dense[(i, i)];
                for j in 0..n {
                    if i != j && dense[(i, j)] != 0.0 {
                        rows[i].push((j as u32, dense[(i, j)]));
                    }
                }
            }
            let h = SparseSubspaceHamiltonian {
                dimension: n,
                rows,
                diagonal,
                basis_order: ConfigurationSet::new(),
            };
            let iterative = davidson_ground_state(&h, None).unwrap();
            let exact = dense_ground_state(&h);
            assert!(
                (iterative.energy - exact.energy).abs() <= 1e-9,
                "n={n}: davidson {} vs dense {}",
                iterative.energy,
                exact.energy
            );
        }
    }

    #[test]
    fn fully_filled_sector_is_single_determinant() {
        let s = toy_integrals();
        let basis = OrbitalBasis::new(2, 2, 2).unwrap();
        let (v, space) = dense_fci_oracle(&basis, &s, 100).unwrap();
        assert_eq!(space.len(), 1);
        let h = project_hamiltonian(&space, &s).unwrap();
        assert_relative_eq!(v.energy, h.diagonal()[0], epsilon = 1e-12);
    }

    #[test]
    fn oracle_respects_cap() {
        let s = toy_integrals();
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        assert!(dense_fci_oracle(&basis, &s, 3).is_err());
    }

    #[test]
    fn variational_bound_under_subspace_growth() {
        let s = toy_integrals();
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let (full, space) = dense_fci_oracle(&basis, &s, 100).unwrap();
        let mut subset = ConfigurationSet::new();
        let mut last = f64::INFINITY;
        for (d, tag, f) in space.iter() {
            subset.insert(*d, tag, f);
            let h = project_hamiltonian(&subset, &s).unwrap();
            let v = dense_ground_state(&h);
            assert!(v.energy <= last + 1e-12, "energy rose when adding a configuration");
            assert!(v.energy >= full.energy - 1e-12, "subspace energy fell below FCI");
            last = v.energy;
        }
        assert_relative_eq!(last, full.energy, epsilon = 1e-12);
    }
}
