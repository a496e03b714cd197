//! Physics-informed configuration screening.
//!
//! Rank-2 configurations come straight from the pruned MP2 amplitudes.
//! Higher ranks are selected symbolically: integrals whose index pattern has
//! net excitation rank one (scatterers) are joined against already-selected
//! excitations through shared contractible indices, without ever summing the
//! contraction numerically. Outer indices compose the candidate signature;
//! one shared contractible value is enough to retain it.
//!
//! Joins operate on grouped views (outer indices -> sorted contractible
//! values), bucketed by the spin of the contractible index so incompatible
//! group pairs are never examined. Every examined pair increments an
//! operation counter that backs the cost report.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fermion::{ConfigurationSet, Determinant, OrbitalBasis, Provenance};
use crate::integrals::{
    mp2_amplitudes, occupied_spin_orbitals, virtual_spin_orbitals, AmplitudeTensor, IntegralSet,
};

/// Canonical hole/particle index lists of one excited configuration.
///
/// Holes are occupied spin orbitals of the reference, particles virtual
/// ones; both strictly increasing. The signature acts as a selection flag,
/// not a numeric amplitude.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExcitationSignature {
    holes: Vec<u16>,
    particles: Vec<u16>,
}

impl ExcitationSignature {
    /// Builds a signature from unsorted index lists; None when an index
    /// repeats (Pauli exclusion).
    pub fn try_new(mut holes: Vec<u16>, mut particles: Vec<u16>) -> Option<Self> {
        holes.sort_unstable();
        particles.sort_unstable();
        if holes.windows(2).any(|w| w[0] == w[1]) || particles.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        if holes.len() != particles.len() {
            return None;
        }
        Some(Self { holes, particles })
    }

    pub fn rank(&self) -> usize {
        self.holes.len()
    }

    pub fn holes(&self) -> &[u16] {
        &self.holes
    }

    pub fn particles(&self) -> &[u16] {
        &self.particles
    }

    /// Net M_s change; zero for every physically reachable configuration.
    pub fn spin_balance(&self, n_spatial: usize) -> i32 {
        let ms = |so: u16| if (so as usize) < n_spatial { 1i32 } else { -1i32 };
        self.particles.iter().map(|&p| ms(p)).sum::<i32>()
            - self.holes.iter().map(|&h| ms(h)).sum::<i32>()
    }

    /// Applies the excitation to the reference determinant.
    pub fn to_determinant(&self, basis: &OrbitalBasis) -> Determinant {
        let n = basis.n_spatial();
        let reference = basis.reference_determinant();
        let mut alpha = reference.alpha_mask();
        let mut beta = reference.beta_mask();
        for &h in &self.holes {
            let h = h as usize;
            if h < n {
                alpha &= !(1u64 << h);
            } else {
                beta &= !(1u64 << (h - n));
            }
        }
        for &p in &self.particles {
            let p = p as usize;
            if p < n {
                alpha |= 1u64 << p;
            } else {
                beta |= 1u64 << (p - n);
            }
        }
        Determinant::from_masks(alpha, beta)
    }
}

/// `v_ij^am`-pattern integral tuple: two holes, one particle, one occupied
/// contractible index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoleScatterer {
    pub i: u16,
    pub j: u16,
    pub a: u16,
    pub m: u16,
}

/// `v_ie^ab`-pattern integral tuple: one hole, one virtual contractible
/// index, two particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParticleScatterer {
    pub i: u16,
    pub e: u16,
    pub a: u16,
    pub b: u16,
}

/// Grouped view: outer (non-contractible) indices mapped to the sorted list
/// of contractible values they pair with.
#[derive(Debug, Clone)]
pub struct OuterGroup<K> {
    pub key: K,
    pub contractibles: Vec<u16>,
}

/// Pruned scatterer tuples plus grouped views for symbolic joins.
#[derive(Debug, Clone)]
pub struct ScattererSet {
    hole_type: Vec<HoleScatterer>,
    particle_type: Vec<ParticleScatterer>,
    /// (i, j, a) -> {m}; the contractible values of one group share a spin.
    hole_groups: Vec<OuterGroup<(u16, u16, u16)>>,
    /// (i, a, b) -> {e}.
    particle_groups: Vec<OuterGroup<(u16, u16, u16)>>,
    n_spatial: usize,
}

impl ScattererSet {
    pub fn hole_type(&self) -> &[HoleScatterer] {
        &self.hole_type
    }

    pub fn particle_type(&self) -> &[ParticleScatterer] {
        &self.particle_type
    }

    pub fn hole_groups(&self) -> &[OuterGroup<(u16, u16, u16)>] {
        &self.hole_groups
    }

    pub fn particle_groups(&self) -> &[OuterGroup<(u16, u16, u16)>] {
        &self.particle_groups
    }

    /// Total number of stored tuples, `N_s`.
    pub fn len(&self) -> usize {
        self.hole_type.len() + self.particle_type.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hole_type.is_empty() && self.particle_type.is_empty()
    }
}

#[inline]
fn is_alpha(so: u16, n_spatial: usize) -> bool {
    (so as usize) < n_spatial
}

/// Enumerates all spin-conserving scatterer tuples with antisymmetrized
/// integral magnitude strictly above `eps_int`, spin case by spin case.
pub fn build_scatterers(s: &IntegralSet, basis: &OrbitalBasis, eps_int: f64) -> ScattererSet {
    let n = basis.n_spatial();
    let occ = occupied_spin_orbitals(basis);
    let virt = virtual_spin_orbitals(basis);
    let occ_a: Vec<u16> = occ.iter().filter(|&&p| p < n).map(|&p| p as u16).collect();
    let occ_b: Vec<u16> = occ.iter().filter(|&&p| p >= n).map(|&p| p as u16).collect();
    let virt_a: Vec<u16> = virt.iter().filter(|&&p| p < n).map(|&p| p as u16).collect();
    let virt_b: Vec<u16> = virt.iter().filter(|&&p| p >= n).map(|&p| p as u16).collect();

    let mut hole_type = Vec::new();
    let mut push_hole = |i: u16, j: u16, a: u16, m: u16| {
        let v = s.antisymmetrized(i as usize, j as usize, a as usize, m as usize);
        if v.abs() > eps_int {
            hole_type.push(HoleScatterer { i, j, a, m });
        }
    };
    // same-spin hole pairs
    for (occ_s, virt_s) in [(&occ_a, &virt_a), (&occ_b, &virt_b)] {
        for (ii, &i) in occ_s.iter().enumerate() {
            for &j in &occ_s[ii + 1..] {
                for &a in virt_s.iter() {
                    for &m in occ_s.iter() {
                        push_hole(i, j, a, m);
                    }
                }
            }
        }
    }
    // mixed-spin hole pairs: i alpha, j beta; the particle may sit in either
    // channel, the contractible index takes the other
    for &i in &occ_a {
        for &j in &occ_b {
            for &a in &virt_a {
                for &m in &occ_b {
                    push_hole(i, j, a, m);
                }
            }
            for &a in &virt_b {
                for &m in &occ_a {
                    push_hole(i, j, a, m);
                }
            }
        }
    }

    let mut particle_type = Vec::new();
    let mut push_particle = |i: u16, e: u16, a: u16, b: u16| {
        let v = s.antisymmetrized(i as usize, e as usize, a as usize, b as usize);
        if v.abs() > eps_int {
            particle_type.push(ParticleScatterer { i, e, a, b });
        }
    };
    for (occ_s, virt_s, virt_o) in [(&occ_a, &virt_a, &virt_b), (&occ_b, &virt_b, &virt_a)] {
        for &i in occ_s.iter() {
            // same-spin particle pairs
            for (ai, &a) in virt_s.iter().enumerate() {
                for &b in &virt_s[ai + 1..] {
                    for &e in virt_s.iter() {
                        push_particle(i, e, a, b);
                    }
                }
            }
            // mixed particle pairs; the contractible virtual takes the spin
            // opposite to the hole
            for &a in virt_s.iter() {
                for &b in virt_o.iter() {
                    let (a, b) = if a < b { (a, b) } else { (b, a) };
                    for &e in virt_o.iter() {
                        push_particle(i, e, a, b);
                    }
                }
            }
        }
    }
    particle_type.sort_by_key(|t| (t.i, t.a, t.b, t.e));
    particle_type.dedup_by_key(|t| (t.i, t.a, t.b, t.e));
    hole_type.sort_by_key(|t| (t.i, t.j, t.a, t.m));

    let mut hole_map: BTreeMap<(u16, u16, u16), Vec<u16>> = BTreeMap::new();
    for t in &hole_type {
        hole_map.entry((t.i, t.j, t.a)).or_default().push(t.m);
    }
    let mut particle_map: BTreeMap<(u16, u16, u16), Vec<u16>> = BTreeMap::new();
    for t in &particle_type {
        particle_map.entry((t.i, t.a, t.b)).or_default().push(t.e);
    }
    let to_groups = |map: BTreeMap<(u16, u16, u16), Vec<u16>>| {
        map.into_iter()
            .map(|(key, mut contractibles)| {
                contractibles.sort_unstable();
                contractibles.dedup();
                OuterGroup { key, contractibles }
            })
            .collect()
    };
    ScattererSet {
        hole_type,
        particle_type,
        hole_groups: to_groups(hole_map),
        particle_groups: to_groups(particle_map),
        n_spatial: n,
    }
}

/// One rank-2 signature per stored amplitude key.
pub fn select_doubles(t: &AmplitudeTensor) -> Vec<ExcitationSignature> {
    let mut out: Vec<ExcitationSignature> = t
        .entries()
        .iter()
        .map(|e| ExcitationSignature { holes: vec![e.i, e.j], particles: vec![e.a, e.b] })
        .collect();
    out.sort_unstable();
    out
}

/// Join bookkeeping for one selection pass.
#[derive(Debug, Clone, Default)]
pub struct SelectionOutcome {
    pub signatures: Vec<ExcitationSignature>,
    /// Examined (scatterer-group, candidate-group) pairs.
    pub join_ops: u64,
    /// Individual contractible-value comparisons inside those examinations.
    pub comparisons: u64,
}

/// Returns true when the sorted lists share at least one value; walks both
/// lists with an early exit on the first match.
fn shares_value(a: &[u16], b: &[u16], comparisons: &mut u64) -> bool {
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        *comparisons += 1;
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Equal => return true,
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
        }
    }
    false
}

/// Candidate-side grouped entries: outer key -> sorted removed (contractible)
/// values, pre-split by the spin of the removed index.
struct SpinBuckets<K> {
    alpha: Vec<OuterGroup<K>>,
    beta: Vec<OuterGroup<K>>,
}

impl<K: Ord + Copy> SpinBuckets<K> {
    fn build(entries: impl Iterator<Item = (K, u16)>, n_spatial: usize) -> Self {
        let mut map: BTreeMap<K, Vec<u16>> = BTreeMap::new();
        for (key, removed) in entries {
            map.entry(key).or_default().push(removed);
        }
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        for (key, mut values) in map {
            values.sort_unstable();
            values.dedup();
            // a group may mix spins only if the key itself is spin-ambiguous,
            // which cannot happen for sector-conserving tuples; split anyway
            let (va, vb): (Vec<u16>, Vec<u16>) =
                values.into_iter().partition(|&v| is_alpha(v, n_spatial));
            if !va.is_empty() {
                alpha.push(OuterGroup { key, contractibles: va });
            }
            if !vb.is_empty() {
                beta.push(OuterGroup { key, contractibles: vb });
            }
        }
        Self { alpha, beta }
    }

    fn bucket(&self, contractible_is_alpha: bool) -> &[OuterGroup<K>] {
        if contractible_is_alpha {
            &self.alpha
        } else {
            &self.beta
        }
    }
}

/// Grouped `(consumed, open)` pairs keyed by outer indices, split by the
/// spin of the consumed value and sorted on it for merge joins.
struct PairBuckets<K> {
    alpha: BTreeMap<K, Vec<(u16, u16)>>,
    beta: BTreeMap<K, Vec<(u16, u16)>>,
}

impl<K: Ord + Copy> PairBuckets<K> {
    fn build(entries: impl Iterator<Item = (K, (u16, u16))>, n_spatial: usize) -> Self {
        let mut alpha: BTreeMap<K, Vec<(u16, u16)>> = BTreeMap::new();
        let mut beta: BTreeMap<K, Vec<(u16, u16)>> = BTreeMap::new();
        for (key, pair) in entries {
            let target = if is_alpha(pair.0, n_spatial) { &mut alpha } else { &mut beta };
            target.entry(key).or_default().push(pair);
        }
        for map in [&mut alpha, &mut beta] {
            for v in map.values_mut() {
                v.sort_unstable();
                v.dedup();
            }
        }
        Self { alpha, beta }
    }

    fn bucket(&self, consumed_is_alpha: bool) -> &BTreeMap<K, Vec<(u16, u16)>> {
        if consumed_is_alpha {
            &self.alpha
        } else {
            &self.beta
        }
    }
}

/// Composes rank-3 signatures by joining scatterers with rank-2 signatures
/// through a shared contractible index.
pub fn select_triples_symbolic(
    sc: &ScattererSet,
    doubles: &[ExcitationSignature],
) -> SelectionOutcome {
    let n = sc.n_spatial;
    let mut outcome = SelectionOutcome::default();
    if doubles.is_empty() || sc.is_empty() {
        return outcome;
    }

    // double entries with one hole removed: key (kept hole, p1, p2)
    let hole_removed = SpinBuckets::build(
        doubles.iter().flat_map(|d| {
            let (h1, h2) = (d.holes[0], d.holes[1]);
            let (p1, p2) = (d.particles[0], d.particles[1]);
            [((h2, p1, p2), h1), ((h1, p1, p2), h2)]
        }),
        n,
    );
    // double entries with one particle removed: key (h1, h2, kept particle)
    let particle_removed = SpinBuckets::build(
        doubles.iter().flat_map(|d| {
            let (h1, h2) = (d.holes[0], d.holes[1]);
            let (p1, p2) = (d.particles[0], d.particles[1]);
            [((h1, h2, p2), p1), ((h1, h2, p1), p2)]
        }),
        n,
    );

    let mut raw = Vec::new();
    for group in &sc.hole_groups {
        let m_alpha = is_alpha(group.contractibles[0], n);
        let (i, j, a) = group.key;
        for cand in hole_removed.bucket(m_alpha) {
            outcome.join_ops += 1;
            if !shares_value(&group.contractibles, &cand.contractibles, &mut outcome.comparisons)
            {
                continue;
            }
            let (kept, p1, p2) = cand.key;
            if let Some(sig) =
                ExcitationSignature::try_new(vec![i, j, kept], vec![a, p1, p2])
            {
                raw.push(sig);
            }
        }
    }
    for group in &sc.particle_groups {
        let e_alpha = is_alpha(group.contractibles[0], n);
        let (i, a, b) = group.key;
        for cand in particle_removed.bucket(e_alpha) {
            outcome.join_ops += 1;
            if !shares_value(&group.contractibles, &cand.contractibles, &mut outcome.comparisons)
            {
                continue;
            }
            let (h1, h2, kept) = cand.key;
            if let Some(sig) =
                ExcitationSignature::try_new(vec![i, h1, h2], vec![a, b, kept])
            {
                raw.push(sig);
            }
        }
    }
    raw.sort_unstable();
    raw.dedup();
    outcome.signatures = raw;
    outcome
}

/// Intermediate from a scatterer-scatterer join: fixed outer indices plus
/// the set of still-open contractible values awaiting the rank-2 partner.
type OccOpenKey = ([u16; 3], [u16; 2]);
type VirtOpenKey = ([u16; 2], [u16; 3]);

/// Composes rank-4 signatures from two factorizations: grouped
/// scatterer-scatterer intermediates joined with rank-2 signatures, and
/// scatterers joined with the symbolic rank-3 output.
pub fn select_quadruples_symbolic(
    sc: &ScattererSet,
    doubles: &[ExcitationSignature],
) -> SelectionOutcome {
    let triples = select_triples_symbolic(sc, doubles);
    select_quadruples_with_triples(sc, doubles, &triples.signatures)
}

pub(crate) fn select_quadruples_with_triples(
    sc: &ScattererSet,
    doubles: &[ExcitationSignature],
    triples: &[ExcitationSignature],
) -> SelectionOutcome {
    let n = sc.n_spatial;
    let mut outcome = SelectionOutcome::default();
    if doubles.is_empty() || sc.is_empty() {
        return outcome;
    }

    // ---- stage A: scatterer-scatterer intermediates ----
    // right-operand reorganizations keyed by the surviving outer indices,
    // carrying (consumed value, open contractible) pairs; split by the spin
    // of the consumed index because one key can host both spins
    let hole_consumed_hole = PairBuckets::build(
        sc.hole_type
            .iter()
            .flat_map(|t| [((t.j, t.a), (t.i, t.m)), ((t.i, t.a), (t.j, t.m))]),
        n,
    );
    let hole_consumed_particle = PairBuckets::build(
        sc.hole_type.iter().map(|t| ((t.i, t.j), (t.a, t.m))),
        n,
    );
    let particle_consumed_hole = PairBuckets::build(
        sc.particle_type.iter().map(|t| ((t.a, t.b), (t.i, t.e))),
        n,
    );
    let particle_consumed_particle = PairBuckets::build(
        sc.particle_type
            .iter()
            .flat_map(|t| [((t.i, t.b), (t.a, t.e)), ((t.i, t.a), (t.b, t.e))]),
        n,
    );

    let mut occ_open: BTreeMap<OccOpenKey, Vec<u16>> = BTreeMap::new();
    let mut virt_open: BTreeMap<VirtOpenKey, Vec<u16>> = BTreeMap::new();

    // collects every (consumed, open) whose consumed value appears in the
    // left group's contractible list
    let mut match_pairs =
        |left: &[u16], right: &[(u16, u16)], ops: &mut u64, cmps: &mut u64| -> Vec<u16> {
            *ops += 1;
            let mut open = Vec::new();
            let (mut x, mut y) = (0, 0);
            while x < left.len() && y < right.len() {
                *cmps += 1;
                match left[x].cmp(&right[y].0) {
                    std::cmp::Ordering::Equal => {
                        open.push(right[y].1);
                        y += 1;
                    }
                    std::cmp::Ordering::Less => x += 1,
                    std::cmp::Ordering::Greater => y += 1,
                }
            }
            open
        };

    // HH and HP: left hole-type group consumes an occupied index
    for group in &sc.hole_groups {
        let (i, j, a) = group.key;
        let m_alpha = is_alpha(group.contractibles[0], n);
        for (&(kept, r), entries) in hole_consumed_hole.bucket(m_alpha) {
            let open = match_pairs(
                &group.contractibles,
                entries,
                &mut outcome.join_ops,
                &mut outcome.comparisons,
            );
            if open.is_empty() {
                continue;
            }
            if let Some(holes) = distinct3(i, j, kept) {
                if let Some(parts) = distinct2(a, r) {
                    merge_open(&mut occ_open, (holes, parts), &open);
                }
            }
        }
        for (&(c1, c2), entries) in particle_consumed_hole.bucket(m_alpha) {
            let open = match_pairs(
                &group.contractibles,
                entries,
                &mut outcome.join_ops,
                &mut outcome.comparisons,
            );
            if open.is_empty() {
                continue;
            }
            if let Some(holes) = distinct2(i, j) {
                if let Some(parts) = distinct3(a, c1, c2) {
                    merge_open(&mut virt_open, (holes, parts), &open);
                }
            }
        }
    }
    // PP and PH: left particle-type group consumes a virtual index
    for group in &sc.particle_groups {
        let (i, a, b) = group.key;
        let e_alpha = is_alpha(group.contractibles[0], n);
        for (&(h, kept), entries) in particle_consumed_particle.bucket(e_alpha) {
            let open = match_pairs(
                &group.contractibles,
                entries,
                &mut outcome.join_ops,
                &mut outcome.comparisons,
            );
            if open.is_empty() {
                continue;
            }
            if let Some(holes) = distinct2(i, h) {
                if let Some(parts) = distinct3(a, b, kept) {
                    merge_open(&mut virt_open, (holes, parts), &open);
                }
            }
        }
        for (&(p, q), entries) in hole_consumed_particle.bucket(e_alpha) {
            let open = match_pairs(
                &group.contractibles,
                entries,
                &mut outcome.join_ops,
                &mut outcome.comparisons,
            );
            if open.is_empty() {
                continue;
            }
            if let Some(holes) = distinct3(i, p, q) {
                if let Some(parts) = distinct2(a, b) {
                    merge_open(&mut occ_open, (holes, parts), &open);
                }
            }
        }
    }

    // ---- stage B: intermediates joined with rank-2 signatures ----
    let hole_removed = SpinBuckets::build(
        doubles.iter().flat_map(|d| {
            let (h1, h2) = (d.holes[0], d.holes[1]);
            let (p1, p2) = (d.particles[0], d.particles[1]);
            [((h2, p1, p2), h1), ((h1, p1, p2), h2)]
        }),
        n,
    );
    let particle_removed = SpinBuckets::build(
        doubles.iter().flat_map(|d| {
            let (h1, h2) = (d.holes[0], d.holes[1]);
            let (p1, p2) = (d.particles[0], d.particles[1]);
            [((h1, h2, p2), p1), ((h1, h2, p1), p2)]
        }),
        n,
    );

    let mut raw = Vec::new();
    for ((holes, parts), open) in &occ_open {
        let open_alpha = is_alpha(open[0], n);
        for cand in hole_removed.bucket(open_alpha) {
            outcome.join_ops += 1;
            if !shares_value(open, &cand.contractibles, &mut outcome.comparisons) {
                continue;
            }
            let (kept, p1, p2) = cand.key;
            if let Some(sig) = ExcitationSignature::try_new(
                vec![holes[0], holes[1], holes[2], kept],
                vec![parts[0], parts[1], p1, p2],
            ) {
                raw.push(sig);
            }
        }
    }
    for ((holes, parts), open) in &virt_open {
        let open_alpha = is_alpha(open[0], n);
        for cand in particle_removed.bucket(open_alpha) {
            outcome.join_ops += 1;
            if !shares_value(open, &cand.contractibles, &mut outcome.comparisons) {
                continue;
            }
            let (h1, h2, kept) = cand.key;
            if let Some(sig) = ExcitationSignature::try_new(
                vec![holes[0], holes[1], h1, h2],
                vec![parts[0], parts[1], parts[2], kept],
            ) {
                raw.push(sig);
            }
        }
    }

    // ---- stage C: scatterers joined with the rank-3 output ----
    if !triples.is_empty() {
        let triple_hole_removed = SpinBuckets::build(
            triples.iter().flat_map(|t| {
                let h = &t.holes;
                let p = [t.particles[0], t.particles[1], t.particles[2]];
                [
                    (([h[1], h[2]], p), h[0]),
                    (([h[0], h[2]], p), h[1]),
                    (([h[0], h[1]], p), h[2]),
                ]
            }),
            n,
        );
        let triple_particle_removed = SpinBuckets::build(
            triples.iter().flat_map(|t| {
                let h = [t.holes[0], t.holes[1], t.holes[2]];
                let p = &t.particles;
                [
                    ((h, [p[1], p[2]]), p[0]),
                    ((h, [p[0], p[2]]), p[1]),
                    ((h, [p[0], p[1]]), p[2]),
                ]
            }),
            n,
        );
        for group in &sc.hole_groups {
            let (i, j, a) = group.key;
            let m_alpha = is_alpha(group.contractibles[0], n);
            for cand in triple_hole_removed.bucket(m_alpha) {
                outcome.join_ops += 1;
                if !shares_value(&group.contractibles, &cand.contractibles, &mut outcome.comparisons)
                {
                    continue;
                }
                let (kept, parts) = cand.key;
                if let Some(sig) = ExcitationSignature::try_new(
                    vec![i, j, kept[0], kept[1]],
                    vec![a, parts[0], parts[1], parts[2]],
                ) {
                    raw.push(sig);
                }
            }
        }
        for group in &sc.particle_groups {
            let (i, a, b) = group.key;
            let e_alpha = is_alpha(group.contractibles[0], n);
            for cand in triple_particle_removed.bucket(e_alpha) {
                outcome.join_ops += 1;
                if !shares_value(&group.contractibles, &cand.contractibles, &mut outcome.comparisons)
                {
                    continue;
                }
                let (holes, kept) = cand.key;
                if let Some(sig) = ExcitationSignature::try_new(
                    vec![i, holes[0], holes[1], holes[2]],
                    vec![a, b, kept[0], kept[1]],
                ) {
                    raw.push(sig);
                }
            }
        }
    }

    raw.sort_unstable();
    raw.dedup();
    outcome.signatures = raw;
    outcome
}

fn distinct2(a: u16, b: u16) -> Option<[u16; 2]> {
    if a == b {
        return None;
    }
    Some(if a < b { [a, b] } else { [b, a] })
}

fn distinct3(a: u16, b: u16, c: u16) -> Option<[u16; 3]> {
    let mut v = [a, b, c];
    v.sort_unstable();
    if v[0] == v[1] || v[1] == v[2] {
        return None;
    }
    Some(v)
}

fn merge_open<K: Ord>(map: &mut BTreeMap<K, Vec<u16>>, key: K, open: &[u16]) {
    let entry = map.entry(key).or_default();
    entry.extend_from_slice(open);
    entry.sort_unstable();
    entry.dedup();
}

/// Singly excited configurations retained by the explicit second-order
/// measure `|c_i^a| > eps_int`, with exact (unpruned) amplitudes inside the
/// contraction sums.
pub fn select_singles_numeric(
    s: &IntegralSet,
    basis: &OrbitalBasis,
    eps_int: f64,
) -> Vec<ExcitationSignature> {
    let occ = occupied_spin_orbitals(basis);
    let virt = virtual_spin_orbitals(basis);
    let t_exact = |i: usize, j: usize, a: usize, b: usize| -> f64 {
        let num = s.antisymmetrized(i, j, a, b);
        if num == 0.0 {
            return 0.0;
        }
        num / (s.so_eps(i) + s.so_eps(j) - s.so_eps(a) - s.so_eps(b))
    };
    let mut out = Vec::new();
    for &i in &occ {
        for &a in &virt {
            let delta = s.so_eps(i) - s.so_eps(a);
            if delta.abs() < 1e-12 {
                continue;
            }
            let mut acc = 0.0;
            for &m in &occ {
                for &nn in &occ {
                    for &e in &virt {
                        let v = s.antisymmetrized(i, e, m, nn);
                        if v != 0.0 {
                            acc += v * t_exact(m, nn, a, e);
                        }
                    }
                }
            }
            for &m in &occ {
                for &e in &virt {
                    for &f in &virt {
                        let v = s.antisymmetrized(e, f, a, m);
                        if v != 0.0 {
                            acc += v * t_exact(i, m, e, f);
                        }
                    }
                }
            }
            if (acc / delta).abs() > eps_int {
                out.push(ExcitationSignature {
                    holes: vec![i as u16],
                    particles: vec![a as u16],
                });
            }
        }
    }
    out.sort_unstable();
    out
}

/// Flat cost record backing the screening report.
#[derive(Debug, Clone, Serialize)]
pub struct CostRecord {
    pub n_scatterers_hole: u64,
    pub n_scatterers_particle: u64,
    pub n_doubles: u64,
    pub triples_join_ops: u64,
    pub triples_comparisons: u64,
    pub triples_emitted: u64,
    /// Worst-case flat join bound `N_s * N_d`.
    pub triples_bound: u64,
    pub quadruples_join_ops: u64,
    pub quadruples_comparisons: u64,
    pub quadruples_emitted: u64,
    /// Worst-case nested bound `N_s^2 * N_d`.
    pub quadruples_bound: u64,
    /// Dense-contraction scale figure `n_occ^3 * n_virt^3` (spin orbitals).
    pub dense_triples_contraction: u64,
}

/// Runs both symbolic selections with counters enabled and assembles the
/// cost record against the analytic bounds.
pub fn operation_count_report(
    sc: &ScattererSet,
    doubles: &[ExcitationSignature],
    basis: &OrbitalBasis,
) -> CostRecord {
    let triples = select_triples_symbolic(sc, doubles);
    let quads = select_quadruples_with_triples(sc, doubles, &triples.signatures);
    let n_s = sc.len() as u64;
    let n_d = doubles.len() as u64;
    let n_occ = (basis.n_alpha() + basis.n_beta()) as u64;
    let n_virt = (2 * basis.n_spatial()) as u64 - n_occ;
    CostRecord {
        n_scatterers_hole: sc.hole_type.len() as u64,
        n_scatterers_particle: sc.particle_type.len() as u64,
        n_doubles: n_d,
        triples_join_ops: triples.join_ops,
        triples_comparisons: triples.comparisons,
        triples_emitted: triples.signatures.len() as u64,
        triples_bound: n_s * n_d,
        quadruples_join_ops: quads.join_ops,
        quadruples_comparisons: quads.comparisons,
        quadruples_emitted: quads.signatures.len() as u64,
        quadruples_bound: n_s * n_s * n_d,
        dense_triples_contraction: n_occ.pow(3) * n_virt.pow(3),
    }
}

/// Union of the reference determinant and the selected rank-1..4
/// configurations up to `n_max`, materialized as determinants.
pub fn perturbative_support(
    s: &IntegralSet,
    basis: &OrbitalBasis,
    eps_int: f64,
    n_max: u32,
) -> Result<ConfigurationSet> {
    if !(2..=4).contains(&n_max) {
        return Err(Error::InvalidConfig(format!(
            "n_max must be 2, 3, or 4 (got {n_max})"
        )));
    }
    let mut set = ConfigurationSet::new();
    set.insert(basis.reference_determinant(), Provenance::Reference, 1);
    let t = mp2_amplitudes(s, basis, eps_int)?;
    let doubles = select_doubles(&t);
    for sig in &doubles {
        set.insert(sig.to_determinant(basis), Provenance::Perturbative, 1);
    }
    if n_max >= 3 {
        let sc = build_scatterers(s, basis, eps_int);
        for sig in select_singles_numeric(s, basis, eps_int) {
            set.insert(sig.to_determinant(basis), Provenance::Perturbative, 1);
        }
        let triples = select_triples_symbolic(&sc, &doubles);
        for sig in &triples.signatures {
            set.insert(sig.to_determinant(basis), Provenance::Perturbative, 1);
        }
        if n_max == 4 {
            let quads = select_quadruples_with_triples(&sc, &doubles, &triples.signatures);
            for sig in &quads.signatures {
                set.insert(sig.to_determinant(basis), Provenance::Perturbative, 1);
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrals::TwoElectronOrdering;

    fn empty_integrals(n: usize) -> IntegralSet {
        IntegralSet::from_dense(
            n,
            &vec![0.0; n * n],
            &vec![0.0; n * n * n * n],
            0.0,
            TwoElectronOrdering::Chemists,
        )
        .unwrap()
    }

    #[test]
    fn zero_tensor_gives_empty_scatterers() {
        let basis = OrbitalBasis::new(4, 2, 2).unwrap();
        let mut s = empty_integrals(4);
        s.set_eps(vec![-1.0, -0.5, 0.5, 1.0]);
        let sc = build_scatterers(&s, &basis, 1e-10);
        assert!(sc.is_empty());
        assert!(sc.hole_groups().is_empty());
    }

    #[test]
    fn grouped_views_partition_flat_lists() {
        let basis = OrbitalBasis::new(3, 1, 1).unwrap();
        let n = 3;
        let mut v = vec![0.0; n * n * n * n];
        // fill a generic symmetric tensor so many scatterers survive
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s_ in 0..=r {
                        let val = 0.1 + 0.01 * (p + q + r + s_) as f64
                            + 0.003 * (p * q + r * s_) as f64;
                        for (a, b) in [(p, q), (q, p)] {
                            for (c, d) in [(r, s_), (s_, r)] {
                                v[((a * n + b) * n + c) * n + d] = val;
                                v[((c * n + d) * n + a) * n + b] = val;
                            }
                        }
                    }
                }
            }
        }
        let mut s =
            IntegralSet::from_dense(n, &vec![0.0; n * n], &v, 0.0, TwoElectronOrdering::Chemists)
                .unwrap();
        s.set_eps(vec![-1.0, 0.3, 0.9]);
        let sc = build_scatterers(&s, &basis, 1e-12);
        let grouped_hole: usize = sc.hole_groups().iter().map(|g| g.contractibles.len()).sum();
        assert_eq!(grouped_hole, sc.hole_type().len());
        let grouped_part: usize =
            sc.particle_groups().iter().map(|g| g.contractibles.len()).sum();
        assert_eq!(grouped_part, sc.particle_type().len());
    }

    #[test]
    fn empty_inputs_yield_empty_selections() {
        let basis = OrbitalBasis::new(4, 2, 2).unwrap();
        let mut s = empty_integrals(4);
        s.set_eps(vec![-1.0, -0.5, 0.5, 1.0]);
        let sc = build_scatterers(&s, &basis, 1e-10);
        let t = mp2_amplitudes(&s, &basis, 1e-10).unwrap();
        let doubles = select_doubles(&t);
        assert!(doubles.is_empty());
        let trip = select_triples_symbolic(&sc, &doubles);
        assert!(trip.signatures.is_empty());
        assert_eq!(trip.join_ops, 0);
        let quad = select_quadruples_symbolic(&sc, &doubles);
        assert!(quad.signatures.is_empty());
        let report = operation_count_report(&sc, &doubles, &basis);
        assert_eq!(report.triples_join_ops, 0);
        assert_eq!(report.quadruples_join_ops, 0);
    }

    #[test]
    fn single_pair_join_composes_one_triple() {
        // hand-built scatterer (i=0, e=6, a=2, b=3) in spin orbitals of a
        // 4-spatial basis, joined with double (1,5 -> 6,7) sharing only e=6
        let basis = OrbitalBasis::new(4, 2, 2).unwrap();
        let sc = ScattererSet {
            hole_type: vec![],
            particle_type: vec![ParticleScatterer { i: 0, e: 6, a: 2, b: 3 }],
            hole_groups: vec![],
            particle_groups: vec![OuterGroup { key: (0, 2, 3), contractibles: vec![6] }],
            n_spatial: 4,
        };
        let double =
            ExcitationSignature::try_new(vec![1, 5], vec![6, 7]).unwrap();
        let out = select_triples_symbolic(&sc, &[double]);
        assert_eq!(out.signatures.len(), 1);
        let sig = &out.signatures[0];
        assert_eq!(sig.holes(), &[0, 1, 5]);
        assert_eq!(sig.particles(), &[2, 3, 7]);
        assert_eq!(sig.spin_balance(basis.n_spatial()), 0);
    }

    #[test]
    fn pauli_collisions_are_discarded() {
        // scatterer particle 'a' collides with the double's kept particle
        let sc = ScattererSet {
            hole_type: vec![],
            particle_type: vec![ParticleScatterer { i: 0, e: 6, a: 7, b: 3 }],
            hole_groups: vec![],
            particle_groups: vec![OuterGroup { key: (0, 3, 7), contractibles: vec![6] }],
            n_spatial: 4,
        };
        let double = ExcitationSignature::try_new(vec![1, 5], vec![6, 7]).unwrap();
        let out = select_triples_symbolic(&sc, &[double]);
        assert!(out.signatures.is_empty());
    }

    #[test]
    fn support_monotone_in_rank() {
        let basis = OrbitalBasis::new(4, 2, 2).unwrap();
        let mut s = empty_integrals(4);
        s.set_eps(vec![-1.0, -0.5, 0.5, 1.0]);
        // zero integrals: only the reference survives at any rank
        for n_max in 2..=4 {
            let sup = perturbative_support(&s, &basis, 1e-10, n_max).unwrap();
            assert_eq!(sup.len(), 1);
            assert_eq!(sup.provenance(0), Provenance::Reference);
        }
    }

    #[test]
    fn n_max_out_of_range_rejected() {
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let s = empty_integrals(2);
        assert!(perturbative_support(&s, &basis, 1e-10, 5).is_err());
        assert!(perturbative_support(&s, &basis, 1e-10, 1).is_err());
    }

    #[test]
    fn signature_determinant_round_trip() {
        let basis = OrbitalBasis::new(4, 2, 2).unwrap();
        let sig = ExcitationSignature::try_new(vec![1, 5], vec![2, 6]).unwrap();
        let det = sig.to_determinant(&basis);
        assert_eq!(det.n_alpha(), 2);
        assert_eq!(det.n_beta(), 2);
        let hf = basis.reference_determinant();
        assert_eq!(det.excitation_rank(&hf).unwrap(), 2);
    }
}
