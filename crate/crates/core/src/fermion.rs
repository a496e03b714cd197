//! Occupation-number representation of electronic configurations.
//!
//! A [`Determinant`] stores one bitmask per spin channel over spatial-orbital
//! indices; bit `p` of the alpha mask set means alpha spin orbital `p` is
//! occupied. Spin orbitals use the blocked global layout: indices
//! `[0, n_spatial)` are alpha, `[n_spatial, 2*n_spatial)` are beta. Text
//! bitstrings follow the same layout with the leftmost character holding
//! spin-orbital index 0.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Electron-count bookkeeping for one molecular-orbital basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrbitalBasis {
    n_spatial: usize,
    n_alpha: usize,
    n_beta: usize,
}

impl OrbitalBasis {
    pub fn new(n_spatial: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if n_spatial > 64 {
            return Err(Error::BasisTooWide(n_spatial));
        }
        if n_alpha > n_spatial || n_beta > n_spatial {
            return Err(Error::InvalidBasis(format!(
                "cannot place {n_alpha} alpha / {n_beta} beta electrons in {n_spatial} spatial orbitals"
            )));
        }
        Ok(Self { n_spatial, n_alpha, n_beta })
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    /// Total number of spin orbitals, `M = 2 * n_spatial`.
    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n_spatial
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    /// The aufbau reference determinant: lowest orbitals filled per channel.
    pub fn reference_determinant(&self) -> Determinant {
        Determinant {
            alpha_mask: low_bits(self.n_alpha),
            beta_mask: low_bits(self.n_beta),
        }
    }

    /// Number of determinants conserving both electron counts:
    /// `C(n_spatial, n_alpha) * C(n_spatial, n_beta)`.
    pub fn symmetry_space_dimension(&self) -> u128 {
        binomial(self.n_spatial as u64, self.n_alpha as u64)
            * binomial(self.n_spatial as u64, self.n_beta as u64)
    }

    /// Whether `d` lies in this basis's particle sector.
    pub fn contains(&self, d: &Determinant) -> bool {
        d.alpha_mask.count_ones() as usize == self.n_alpha
            && d.beta_mask.count_ones() as usize == self.n_beta
            && d.alpha_mask & !low_bits(self.n_spatial) == 0
            && d.beta_mask & !low_bits(self.n_spatial) == 0
    }
}

fn low_bits(n: usize) -> u64 {
    if n == 0 {
        0
    } else if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Exact binomial coefficient; arguments stay small enough for u128.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out * (n - i) as u128 / (i + 1) as u128;
    }
    out
}

/// One electronic configuration: a pair of occupation bitmasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Determinant {
    alpha_mask: u64,
    beta_mask: u64,
}

impl Determinant {
    /// Builds a determinant from explicit occupation lists.
    pub fn from_occupied(
        alpha_occupied: &[usize],
        beta_occupied: &[usize],
        basis: &OrbitalBasis,
    ) -> Result<Self> {
        let mut masks = [0u64; 2];
        for (mask, occ) in masks.iter_mut().zip([alpha_occupied, beta_occupied]) {
            for &p in occ {
                if p >= basis.n_spatial() {
                    return Err(Error::IndexOutOfRange { index: p, n_spatial: basis.n_spatial() });
                }
                if *mask >> p & 1 == 1 {
                    return Err(Error::DuplicateIndex(p));
                }
                *mask |= 1 << p;
            }
        }
        Ok(Self { alpha_mask: masks[0], beta_mask: masks[1] })
    }

    pub fn from_masks(alpha_mask: u64, beta_mask: u64) -> Self {
        Self { alpha_mask, beta_mask }
    }

    pub fn alpha_mask(&self) -> u64 {
        self.alpha_mask
    }

    pub fn beta_mask(&self) -> u64 {
        self.beta_mask
    }

    pub fn n_alpha(&self) -> usize {
        self.alpha_mask.count_ones() as usize
    }

    pub fn n_beta(&self) -> usize {
        self.beta_mask.count_ones() as usize
    }

    /// Occupied spin orbitals in the blocked global layout, ascending.
    pub fn occupied_spin_orbitals(&self, n_spatial: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_alpha() + self.n_beta());
        out.extend(BitIter(self.alpha_mask));
        out.extend(BitIter(self.beta_mask).map(|p| p + n_spatial));
        out
    }

    /// Whether blocked spin orbital `so` is occupied.
    pub fn spin_orbital_occupied(&self, so: usize, n_spatial: usize) -> bool {
        if so < n_spatial {
            self.alpha_mask >> so & 1 == 1
        } else {
            self.beta_mask >> (so - n_spatial) & 1 == 1
        }
    }

    /// Half the XOR popcount; number of hole-particle pairs separating the two
    /// determinants. Errors when the particle sectors differ.
    pub fn excitation_rank(&self, reference: &Determinant) -> Result<u32> {
        if self.n_alpha() != reference.n_alpha() || self.n_beta() != reference.n_beta() {
            return Err(Error::SectorMismatch);
        }
        Ok(self.excitation_rank_unchecked(reference))
    }

    /// Rank without the sector check; callers must guarantee matching sectors.
    #[inline]
    pub fn excitation_rank_unchecked(&self, reference: &Determinant) -> u32 {
        ((self.alpha_mask ^ reference.alpha_mask).count_ones()
            + (self.beta_mask ^ reference.beta_mask).count_ones())
            / 2
    }

    /// Renders the blocked text form, leftmost character = spin orbital 0.
    pub fn to_bitstring(&self, basis: &OrbitalBasis) -> String {
        let n = basis.n_spatial();
        let mut s = String::with_capacity(2 * n);
        for p in 0..n {
            s.push(if self.alpha_mask >> p & 1 == 1 { '1' } else { '0' });
        }
        for p in 0..n {
            s.push(if self.beta_mask >> p & 1 == 1 { '1' } else { '0' });
        }
        s
    }

    /// Parses a text bitstring of length `2 * n_spatial`.
    pub fn from_bitstring(s: &str, basis: &OrbitalBasis, layout: BitstringLayout) -> Result<Self> {
        let n = basis.n_spatial();
        if s.len() != 2 * n {
            return Err(Error::BitstringLength { got: s.len(), expected: 2 * n });
        }
        let mut alpha = 0u64;
        let mut beta = 0u64;
        for (pos, ch) in s.chars().enumerate() {
            let bit = match ch {
                '0' => 0u64,
                '1' => 1u64,
                other => return Err(Error::BitstringChar(other)),
            };
            let (is_alpha, p) = match layout {
                BitstringLayout::Blocked => (pos < n, if pos < n { pos } else { pos - n }),
                BitstringLayout::Interleaved => (pos % 2 == 0, pos / 2),
            };
            if is_alpha {
                alpha |= bit << p;
            } else {
                beta |= bit << p;
            }
        }
        Ok(Self { alpha_mask: alpha, beta_mask: beta })
    }
}

impl PartialOrd for Determinant {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Determinant {
    /// Lexicographic on (alpha_mask, beta_mask); the canonical set order.
    fn cmp(&self, other: &Self) -> Ordering {
        (self.alpha_mask, self.beta_mask).cmp(&(other.alpha_mask, other.beta_mask))
    }
}

impl fmt::Display for Determinant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a:{:b} b:{:b}", self.alpha_mask, self.beta_mask)
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let p = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(p)
    }
}

/// Ordering convention of text bitstrings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitstringLayout {
    /// Characters `[0, M/2)` are alpha orbitals, `[M/2, M)` beta.
    #[default]
    Blocked,
    /// Characters alternate alpha/beta per spatial orbital.
    Interleaved,
}

/// Where a configuration entered the workflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Hardware,
    Perturbative,
    Generated,
    Reference,
}

/// Ordered, duplicate-free collection of determinants.
///
/// Members are kept in the canonical lexicographic mask order, so set
/// operations and downstream matrix assembly are reproducible. Each member
/// carries a provenance tag and an observation frequency (1 unless the set
/// was built from measurement counts).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigurationSet {
    dets: Vec<Determinant>,
    tags: Vec<Provenance>,
    freqs: Vec<u64>,
}

impl ConfigurationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.dets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    pub fn determinants(&self) -> &[Determinant] {
        &self.dets
    }

    pub fn provenance(&self, idx: usize) -> Provenance {
        self.tags[idx]
    }

    pub fn frequency(&self, idx: usize) -> u64 {
        self.freqs[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Determinant, Provenance, u64)> {
        self.dets
            .iter()
            .zip(self.tags.iter())
            .zip(self.freqs.iter())
            .map(|((d, &t), &f)| (d, t, f))
    }

    pub fn contains(&self, d: &Determinant) -> bool {
        self.position(d).is_some()
    }

    pub fn position(&self, d: &Determinant) -> Option<usize> {
        self.dets.binary_search(d).ok()
    }

    /// Inserts keeping canonical order. Re-inserting an existing member adds
    /// its frequency and keeps the original tag; returns false in that case.
    pub fn insert(&mut self, d: Determinant, tag: Provenance, freq: u64) -> bool {
        match self.dets.binary_search(&d) {
            Ok(i) => {
                self.freqs[i] += freq;
                false
            }
            Err(i) => {
                self.dets.insert(i, d);
                self.tags.insert(i, tag);
                self.freqs.insert(i, freq);
                true
            }
        }
    }

    pub fn from_determinants<I: IntoIterator<Item = Determinant>>(
        iter: I,
        tag: Provenance,
    ) -> Self {
        let mut set = Self::new();
        for d in iter {
            set.insert(d, tag, 1);
        }
        set
    }

    /// Ordered union. On duplicates the left-hand tag wins and frequencies add.
    pub fn union(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (d, tag, freq) in other.iter() {
            out.insert(*d, tag, freq);
        }
        out
    }

    /// Members of `self` absent from `other`, order preserved.
    pub fn difference(&self, other: &Self) -> Self {
        let mut out = Self::new();
        for (d, tag, freq) in self.iter() {
            if !other.contains(d) {
                out.insert(*d, tag, freq);
            }
        }
        out
    }

    pub fn remove(&mut self, d: &Determinant) -> bool {
        match self.dets.binary_search(d) {
            Ok(i) => {
                self.dets.remove(i);
                self.tags.remove(i);
                self.freqs.remove(i);
                true
            }
            Err(_) => false,
        }
    }
}

/// Retains sector-conserving bitstrings, deduplicates, records frequencies.
///
/// Input is a multiset of `(bitstring, count)` pairs in the blocked text
/// convention. Strings whose alpha or beta popcount differs from the basis
/// are discarded.
pub fn symmetry_filter<'a, I>(raw_bitstrings: I, basis: &OrbitalBasis) -> Result<ConfigurationSet>
where
    I: IntoIterator<Item = (&'a str, u64)>,
{
    symmetry_filter_with_layout(raw_bitstrings, basis, BitstringLayout::Blocked)
}

pub fn symmetry_filter_with_layout<'a, I>(
    raw_bitstrings: I,
    basis: &OrbitalBasis,
    layout: BitstringLayout,
) -> Result<ConfigurationSet>
where
    I: IntoIterator<Item = (&'a str, u64)>,
{
    let mut set = ConfigurationSet::new();
    for (s, count) in raw_bitstrings {
        let d = Determinant::from_bitstring(s, basis, layout)?;
        if d.n_alpha() == basis.n_alpha() && d.n_beta() == basis.n_beta() {
            set.insert(d, Provenance::Hardware, count);
        }
    }
    Ok(set)
}

/// Streams every determinant of the symmetry space in canonical order.
///
/// Errors when the space dimension exceeds `cap`.
pub fn enumerate_symmetry_space(
    basis: &OrbitalBasis,
    cap: u64,
) -> Result<impl Iterator<Item = Determinant>> {
    let dim = basis.symmetry_space_dimension();
    if dim > cap as u128 {
        return Err(Error::CapExceeded { dim, cap: cap as u128 });
    }
    let alphas: Vec<u64> = CombinationMasks::new(basis.n_spatial(), basis.n_alpha()).collect();
    let betas: Vec<u64> = CombinationMasks::new(basis.n_spatial(), basis.n_beta()).collect();
    Ok(alphas.into_iter().flat_map(move |a| {
        betas
            .clone()
            .into_iter()
            .map(move |b| Determinant::from_masks(a, b))
    }))
}

/// Uniform draw from the symmetry space: one random k-combination per spin
/// channel via partial Fisher-Yates.
pub fn random_sector_determinant(
    basis: &OrbitalBasis,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Determinant {
    use rand::Rng;
    let mut channel = |k: usize| -> u64 {
        let n = basis.n_spatial();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut mask = 0u64;
        for slot in 0..k {
            let pick = rng.gen_range(slot..n);
            idx.swap(slot, pick);
            mask |= 1 << idx[slot];
        }
        mask
    };
    let alpha = channel(basis.n_alpha());
    let beta = channel(basis.n_beta());
    Determinant::from_masks(alpha, beta)
}

/// All n-bit masks with exactly k bits set, in increasing numeric order
/// (Gosper's hack).
pub(crate) struct CombinationMasks {
    next: Option<u64>,
    limit: u64,
}

impl CombinationMasks {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        if k > n {
            return Self { next: None, limit: 0 };
        }
        Self { next: Some(low_bits(k)), limit: low_bits(n) }
    }
}

impl Iterator for CombinationMasks {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let cur = self.next?;
        if cur > self.limit {
            self.next = None;
            return None;
        }
        self.next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            if r == 0 {
                None
            } else {
                Some(r | ((cur ^ r) >> (c.trailing_zeros() + 2)))
            }
        };
        Some(cur)
    }
}
