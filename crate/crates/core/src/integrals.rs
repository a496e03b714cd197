//! Molecular integrals, FCIDUMP ingestion, and the MP2 front end.
//!
//! Spatial-orbital tensors are stored once with full 8-fold permutational
//! symmetry; spin-orbital quantities are evaluated on demand against the
//! blocked layout (alpha `[0, n)`, beta `[n, 2n)`) rather than materializing
//! the `M^4` spin-orbital tensor.

use std::io::BufRead;

use crate::error::{Error, Result};
use crate::fermion::OrbitalBasis;

/// Index convention of a two-electron tensor as supplied by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TwoElectronOrdering {
    /// `(pq|rs)`: electron 1 carries p,q; electron 2 carries r,s.
    #[default]
    Chemists,
    /// `<pq|rs>`: bra holds p,q; ket holds r,s.
    Physicists,
}

/// One- and two-electron integrals in a molecular-orbital basis, plus the
/// core energy and canonical orbital energies (all hartree).
#[derive(Debug, Clone)]
pub struct IntegralSet {
    n_spatial: usize,
    /// Symmetric one-electron matrix, dense row-major.
    h: Vec<f64>,
    /// Two-electron integrals in chemists' notation, canonical 8-fold storage.
    v: Vec<f64>,
    e_core: f64,
    eps: Vec<f64>,
    ordering: TwoElectronOrdering,
}

#[inline]
fn pair_index(p: usize, q: usize) -> usize {
    if p >= q {
        p * (p + 1) / 2 + q
    } else {
        q * (q + 1) / 2 + p
    }
}

impl IntegralSet {
    /// Validates symmetries of dense input tensors and stores them
    /// canonically. `v_dense` is indexed `[p][q][r][s]` flattened, in the
    /// given ordering.
    pub fn from_dense(
        n_spatial: usize,
        h: &[f64],
        v_dense: &[f64],
        e_core: f64,
        ordering: TwoElectronOrdering,
    ) -> Result<Self> {
        let n = n_spatial;
        if h.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: h.len() });
        }
        if v_dense.len() != n * n * n * n {
            return Err(Error::DimensionMismatch { expected: n * n * n * n, got: v_dense.len() });
        }
        for p in 0..n {
            for q in 0..p {
                if (h[p * n + q] - h[q * n + p]).abs() > 1e-12 {
                    return Err(Error::SymmetryViolation(format!(
                        "h[{p},{q}] != h[{q},{p}]"
                    )));
                }
            }
        }
        // map to chemists' ordering: <pq|rs> = (pr|qs)
        let chem = |p: usize, q: usize, r: usize, s: usize| -> f64 {
            match ordering {
                TwoElectronOrdering::Chemists => v_dense[((p * n + q) * n + r) * n + s],
                TwoElectronOrdering::Physicists => v_dense[((p * n + r) * n + q) * n + s],
            }
        };
        let npair = n * (n + 1) / 2;
        let mut v = vec![0.0; npair * (npair + 1) / 2];
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s in 0..=r {
                        if pair_index(p, q) < pair_index(r, s) {
                            continue;
                        }
                        let val = chem(p, q, r, s);
                        // verify the full 8-fold orbit of this canonical value
                        for (a, b) in [(p, q), (q, p)] {
                            for (c, d) in [(r, s), (s, r)] {
                                for (x, y, z, w) in [(a, b, c, d), (c, d, a, b)] {
                                    if (chem(x, y, z, w) - val).abs() > 1e-12 {
                                        return Err(Error::SymmetryViolation(format!(
                                            "v({x},{y},{z},{w}) breaks 8-fold symmetry"
                                        )));
                                    }
                                }
                            }
                        }
                        v[pair_index(pair_index(p, q), pair_index(r, s))] = val;
                    }
                }
            }
        }
        let mut set = Self { n_spatial: n, h: h.to_vec(), v, e_core, eps: Vec::new(), ordering };
        set.eps = vec![0.0; n];
        Ok(set)
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    pub fn e_core(&self) -> f64 {
        self.e_core
    }

    pub fn ordering(&self) -> TwoElectronOrdering {
        self.ordering
    }

    /// Canonical orbital energies; populated by [`orbital_energies`] or the
    /// FCIDUMP parser.
    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn set_eps(&mut self, eps: Vec<f64>) {
        self.eps = eps;
    }

    /// One-electron integral `h_pq` over spatial orbitals.
    #[inline]
    pub fn one_electron(&self, p: usize, q: usize) -> f64 {
        self.h[p * self.n_spatial + q]
    }

    /// Chemists' `(pq|rs)` over spatial orbitals.
    #[inline]
    pub fn coulomb(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.v[pair_index(pair_index(p, q), pair_index(r, s))]
    }

    // ---- spin-orbital layer (blocked layout) ----

    #[inline]
    pub fn so_spatial(&self, so: usize) -> usize {
        if so < self.n_spatial {
            so
        } else {
            so - self.n_spatial
        }
    }

    #[inline]
    pub fn so_is_alpha(&self, so: usize) -> bool {
        so < self.n_spatial
    }

    /// Orbital energy of a spin orbital.
    #[inline]
    pub fn so_eps(&self, so: usize) -> f64 {
        self.eps[self.so_spatial(so)]
    }

    /// Physicists' `<PQ|RS>` over spin orbitals with spin integration.
    #[inline]
    pub fn physicists_so(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        if self.so_is_alpha(p) != self.so_is_alpha(r)
            || self.so_is_alpha(q) != self.so_is_alpha(s)
        {
            return 0.0;
        }
        self.coulomb(
            self.so_spatial(p),
            self.so_spatial(r),
            self.so_spatial(q),
            self.so_spatial(s),
        )
    }

    /// Antisymmetrized `<PQ||RS> = <PQ|RS> - <PQ|SR>` over spin orbitals.
    #[inline]
    pub fn antisymmetrized(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.physicists_so(p, q, r, s) - self.physicists_so(p, q, s, r)
    }
}

/// Canonical closed-shell orbital energies from the stored integrals:
/// `eps_p = h_pp + sum_i [2 (pp|ii) - (pi|ip)]` over occupied spatial `i`.
pub fn orbital_energies(s: &IntegralSet, n_alpha: usize, n_beta: usize) -> Result<Vec<f64>> {
    if n_alpha != n_beta {
        return Err(Error::OpenShell);
    }
    let n = s.n_spatial();
    let mut eps = Vec::with_capacity(n);
    for p in 0..n {
        let mut e = s.one_electron(p, p);
        for i in 0..n_alpha {
            e += 2.0 * s.coulomb(p, p, i, i) - s.coulomb(p, i, i, p);
        }
        eps.push(e);
    }
    Ok(eps)
}

/// Sparse second-order amplitudes `t_ij^ab` over spin orbitals, canonical
/// keys `j > i`, `b > a`, magnitudes strictly above the pruning threshold.
#[derive(Debug, Clone)]
pub struct AmplitudeTensor {
    entries: Vec<Amplitude>,
    threshold: f64,
}

/// One stored amplitude; indices are blocked spin orbitals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitude {
    pub i: u16,
    pub j: u16,
    pub a: u16,
    pub b: u16,
    pub value: f64,
}

impl AmplitudeTensor {
    pub fn entries(&self) -> &[Amplitude] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Looks up `t_ij^ab` for arbitrary index order, applying antisymmetry
    /// signs; zero when the canonical key is not stored.
    pub fn get(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        if i == j || a == b {
            return 0.0;
        }
        let mut sign = 1.0;
        let (i, j) = if i < j {
            (i, j)
        } else {
            sign = -sign;
            (j, i)
        };
        let (a, b) = if a < b {
            (a, b)
        } else {
            sign = -sign;
            (b, a)
        };
        let key = (i as u16, j as u16, a as u16, b as u16);
        match self
            .entries
            .binary_search_by(|e| (e.i, e.j, e.a, e.b).cmp(&key))
        {
            Ok(idx) => sign * self.entries[idx].value,
            Err(_) => 0.0,
        }
    }
}

/// Builds the pruned MP2 amplitude tensor `t_ij^ab = <ij||ab> / D_ij^ab`.
///
/// Denominators smaller than 1e-12 in magnitude are a hard error; no level
/// shift is applied.
pub fn mp2_amplitudes(
    s: &IntegralSet,
    basis: &OrbitalBasis,
    eps_int: f64,
) -> Result<AmplitudeTensor> {
    let occ = occupied_spin_orbitals(basis);
    let virt = virtual_spin_orbitals(basis);
    let mut entries = Vec::new();
    for (oi, &i) in occ.iter().enumerate() {
        for &j in &occ[oi + 1..] {
            for (ai, &a) in virt.iter().enumerate() {
                for &b in &virt[ai + 1..] {
                    let numerator = s.antisymmetrized(i, j, a, b);
                    if numerator == 0.0 {
                        continue;
                    }
                    let delta = s.so_eps(i) + s.so_eps(j) - s.so_eps(a) - s.so_eps(b);
                    if delta.abs() < 1e-12 {
                        return Err(Error::DegenerateDenominator {
                            i,
                            j,
                            a,
                            b,
                            delta: delta.abs(),
                        });
                    }
                    let t = numerator / delta;
                    if t.abs() > eps_int {
                        entries.push(Amplitude {
                            i: i as u16,
                            j: j as u16,
                            a: a as u16,
                            b: b as u16,
                            value: t,
                        });
                    }
                }
            }
        }
    }
    entries.sort_by(|x, y| (x.i, x.j, x.a, x.b).cmp(&(y.i, y.j, y.a, y.b)));
    Ok(AmplitudeTensor { entries, threshold: eps_int })
}

/// `E_MP2 = sum_{i<j, a<b} t_ij^ab <ij||ab>`; exact when built with a zero
/// threshold.
pub fn mp2_energy(t: &AmplitudeTensor, s: &IntegralSet) -> f64 {
    t.entries
        .iter()
        .map(|e| {
            e.value
                * s.antisymmetrized(e.i as usize, e.j as usize, e.a as usize, e.b as usize)
        })
        .sum()
}

/// Occupied blocked spin orbitals of the reference determinant, ascending.
pub fn occupied_spin_orbitals(basis: &OrbitalBasis) -> Vec<usize> {
    let n = basis.n_spatial();
    (0..basis.n_alpha())
        .chain((0..basis.n_beta()).map(|p| p + n))
        .collect()
}

/// Virtual blocked spin orbitals, ascending.
pub fn virtual_spin_orbitals(basis: &OrbitalBasis) -> Vec<usize> {
    let n = basis.n_spatial();
    (basis.n_alpha()..n)
        .chain((basis.n_beta()..n).map(|p| p + n))
        .collect()
}

/// Parses an FCIDUMP stream.
///
/// Header: `&FCI NORB=..,NELEC=..,MS2=..` with optional ORBSYM/ISYM entries,
/// closed by `&END` or `/`. Body lines are `value p q r s` with 1-based
/// indices: `(p q 0 0)` one-electron, `(0 0 0 0)` core energy, `(p 0 0 0)`
/// orbital-energy records (accepted, ignored). Returns the integral set with
/// orbital energies populated, plus the electron-count basis from the header.
pub fn parse_fcidump<R: BufRead>(reader: R) -> Result<(IntegralSet, OrbitalBasis)> {
    let mut norb: Option<usize> = None;
    let mut nelec: Option<usize> = None;
    let mut ms2: i64 = 0;
    let mut in_header = true;
    let mut header_text = String::new();

    let mut h: Vec<f64> = Vec::new();
    let mut v: Vec<f64> = Vec::new();
    let mut e_core = 0.0;

    let parse_err = |line: usize, msg: String| Error::FcidumpParse { line, msg };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if in_header {
            header_text.push(' ');
            header_text.push_str(trimmed);
            let closes = trimmed.ends_with("&END")
                || trimmed.ends_with("/")
                || trimmed.ends_with("$END");
            if closes {
                for field in header_text
                    .replace("&FCI", " ")
                    .replace("&END", " ")
                    .replace("$END", " ")
                    .replace('/', " ")
                    .split(|c: char| c == ',' || c.is_whitespace())
                {
                    let field = field.trim();
                    if let Some((key, value)) = field.split_once('=') {
                        match key.trim().to_ascii_uppercase().as_str() {
                            "NORB" => {
                                norb = Some(value.trim().parse().map_err(|_| {
                                    parse_err(lineno, format!("bad NORB value {value:?}"))
                                })?)
                            }
                            "NELEC" => {
                                nelec = Some(value.trim().parse().map_err(|_| {
                                    parse_err(lineno, format!("bad NELEC value {value:?}"))
                                })?)
                            }
                            "MS2" => {
                                ms2 = value.trim().parse().map_err(|_| {
                                    parse_err(lineno, format!("bad MS2 value {value:?}"))
                                })?
                            }
                            _ => {}
                        }
                    }
                }
                let n = norb
                    .ok_or_else(|| parse_err(lineno, "header missing NORB".into()))?;
                nelec.ok_or_else(|| parse_err(lineno, "header missing NELEC".into()))?;
                h = vec![0.0; n * n];
                let npair = n * (n + 1) / 2;
                v = vec![0.0; npair * (npair + 1) / 2];
                in_header = false;
            }
            continue;
        }

        let mut fields = trimmed.split_whitespace();
        let value_str = fields
            .next()
            .ok_or_else(|| parse_err(lineno, "missing value field".into()))?;
        let value: f64 = value_str
            .replace(['D', 'd'], "E")
            .parse()
            .map_err(|_| parse_err(lineno, format!("non-numeric value {value_str:?}")))?;
        let mut idx = [0usize; 4];
        for slot in idx.iter_mut() {
            let tok = fields
                .next()
                .ok_or_else(|| parse_err(lineno, "expected four indices".into()))?;
            *slot = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad index {tok:?}")))?;
        }
        if fields.next().is_some() {
            return Err(parse_err(lineno, "trailing fields".into()));
        }
        let n = norb.unwrap();
        for &i in &idx {
            if i > n {
                return Err(parse_err(lineno, format!("index {i} exceeds NORB={n}")));
            }
        }
        match idx {
            [0, 0, 0, 0] => e_core = value,
            [p, 0, 0, 0] => {
                // orbital-energy record; canonical energies are recomputed
                let _ = p;
            }
            [p, q, 0, 0] => {
                h[(p - 1) * n + (q - 1)] = value;
                h[(q - 1) * n + (p - 1)] = value;
            }
            [_, _, 0, _] | [_, 0, _, _] | [0, _, _, _] => {
                return Err(parse_err(lineno, "zero index inside a two-electron label".into()));
            }
            [p, q, r, s] => {
                v[pair_index(pair_index(p - 1, q - 1), pair_index(r - 1, s - 1))] = value;
            }
        }
    }

    if in_header {
        return Err(Error::FcidumpParse { line: 0, msg: "missing FCIDUMP header".into() });
    }
    let n = norb.unwrap();
    let nelec = nelec.unwrap();
    if ms2 != 0 || nelec % 2 != 0 {
        return Err(Error::OpenShell);
    }
    let n_alpha = nelec / 2;
    let basis = OrbitalBasis::new(n, n_alpha, n_alpha)?;
    let mut set = IntegralSet {
        n_spatial: n,
        h,
        v,
        e_core,
        eps: Vec::new(),
        ordering: TwoElectronOrdering::Chemists,
    };
    set.eps = orbital_energies(&set, n_alpha, n_alpha)?;
    Ok((set, basis))
}

/// Convenience file loader.
pub fn read_fcidump(path: &std::path::Path) -> Result<(IntegralSet, OrbitalBasis)> {
    let file = std::fs::File::open(path)?;
    parse_fcidump(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_one_orbital() -> IntegralSet {
        // h_11 = -1.25, (11|11) = 0.675, e_core = 0.71
        IntegralSet::from_dense(
            1,
            &[-1.25],
            &[0.675],
            0.71,
            TwoElectronOrdering::Chemists,
        )
        .unwrap()
    }

    #[test]
    fn minimal_dump_maps_fields() {
        let text = "&FCI NORB=1,NELEC=2,MS2=0,\n ORBSYM=1,\n ISYM=1,\n&END\n\
                    0.675 1 1 1 1\n-1.25 1 1 0 0\n0.71 0 0 0 0\n";
        let (s, basis) = parse_fcidump(text.as_bytes()).unwrap();
        assert_eq!(s.n_spatial(), 1);
        assert_eq!(basis.n_alpha(), 1);
        assert_relative_eq!(s.one_electron(0, 0), -1.25);
        assert_relative_eq!(s.coulomb(0, 0, 0, 0), 0.675);
        assert_relative_eq!(s.e_core(), 0.71);
        assert_relative_eq!(s.eps()[0], -0.575);
    }

    #[test]
    fn off_diagonal_one_electron_symmetrized() {
        let text = "&FCI NORB=2,NELEC=2,MS2=0,\n&END\n0.5 1 2 0 0\n";
        let (s, _) = parse_fcidump(text.as_bytes()).unwrap();
        assert_relative_eq!(s.one_electron(0, 1), 0.5);
        assert_relative_eq!(s.one_electron(1, 0), 0.5);
    }

    #[test]
    fn parser_rejects_malformed_input() {
        assert!(parse_fcidump("no header\n".as_bytes()).is_err());
        let bad_index = "&FCI NORB=1,NELEC=2,MS2=0,\n&END\n0.5 2 1 0 0\n";
        assert!(matches!(
            parse_fcidump(bad_index.as_bytes()),
            Err(Error::FcidumpParse { .. })
        ));
        let bad_value = "&FCI NORB=1,NELEC=2,MS2=0,\n&END\nxyz 1 1 0 0\n";
        assert!(matches!(
            parse_fcidump(bad_value.as_bytes()),
            Err(Error::FcidumpParse { .. })
        ));
    }

    #[test]
    fn fortran_exponent_accepted() {
        let text = "&FCI NORB=1,NELEC=2,MS2=0,\n&END\n1.0D-01 1 1 0 0\n";
        let (s, _) = parse_fcidump(text.as_bytes()).unwrap();
        assert_relative_eq!(s.one_electron(0, 0), 0.1);
    }

    #[test]
    fn single_orbital_energy() {
        let s = toy_one_orbital();
        let eps = orbital_energies(&s, 1, 1).unwrap();
        assert_relative_eq!(eps[0], -0.575, epsilon = 1e-14);
    }

    #[test]
    fn zero_two_electron_gives_bare_h() {
        let h = [-0.9, 0.1, 0.1, -0.4];
        let v = vec![0.0; 16];
        let s = IntegralSet::from_dense(2, &h, &v, 0.0, TwoElectronOrdering::Chemists).unwrap();
        let eps = orbital_energies(&s, 1, 1).unwrap();
        assert_relative_eq!(eps[0], -0.9);
        assert_relative_eq!(eps[1], -0.4);
    }

    #[test]
    fn open_shell_is_rejected() {
        let s = toy_one_orbital();
        assert!(matches!(orbital_energies(&s, 1, 0), Err(Error::OpenShell)));
    }

    #[test]
    fn antisymmetrized_spin_cases() {
        // 2 spatial orbitals with distinct integrals
        let n = 2;
        let mut v = vec![0.0; 16];
        let mut set = |p: usize, q: usize, r: usize, s: usize, val: f64| {
            for (a, b) in [(p, q), (q, p)] {
                for (c, d) in [(r, s), (s, r)] {
                    v[((a * n + b) * n + c) * n + d] = val;
                    v[((c * n + d) * n + a) * n + b] = val;
                }
            }
        };
        set(0, 0, 0, 0, 0.60);
        set(1, 1, 1, 1, 0.55);
        set(0, 0, 1, 1, 0.45);
        set(0, 1, 0, 1, 0.20);
        set(0, 0, 0, 1, 0.15);
        set(1, 1, 0, 1, 0.10);
        let h = [-1.0, 0.0, 0.0, -0.5];
        let s = IntegralSet::from_dense(2, &h, &v, 0.0, TwoElectronOrdering::Chemists).unwrap();

        // opposite spins: exchange term vanishes. P=0a, Q=0b, R=1a, S=1b
        let bare = s.physicists_so(0, 2, 1, 3);
        assert_relative_eq!(s.antisymmetrized(0, 2, 1, 3), bare);
        // same spin, <pp||pp> = 0 for real orbitals
        assert_relative_eq!(s.antisymmetrized(0, 0, 0, 0), 0.0);
        // sign flip under ket swap in the same-spin channel
        assert_relative_eq!(
            s.antisymmetrized(0, 1, 0, 1),
            -s.antisymmetrized(0, 1, 1, 0)
        );
    }

    #[test]
    fn physicists_input_ordering_round_trips() {
        // build physicists' dense tensor from a chemists' reference and check
        // both constructions agree on lookups
        let n = 2;
        let mut chem = vec![0.0; 16];
        let vals = [
            (0, 0, 0, 0, 0.7),
            (1, 1, 1, 1, 0.6),
            (0, 0, 1, 1, 0.3),
            (0, 1, 0, 1, 0.12),
        ];
        for &(p, q, r, s, val) in &vals {
            for (a, b) in [(p, q), (q, p)] {
                for (c, d) in [(r, s), (s, r)] {
                    chem[((a * n + b) * n + c) * n + d] = val;
                    chem[((c * n + d) * n + a) * n + b] = val;
                }
            }
        }
        let mut phys = vec![0.0; 16];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s_ in 0..n {
                        // <pq|rs> = (pr|qs)
                        phys[((p * n + q) * n + r) * n + s_] =
                            chem[((p * n + r) * n + q) * n + s_];
                    }
                }
            }
        }
        let h = [0.0; 4];
        let a = IntegralSet::from_dense(2, &h, &chem, 0.0, TwoElectronOrdering::Chemists)
            .unwrap();
        let b = IntegralSet::from_dense(2, &h, &phys, 0.0, TwoElectronOrdering::Physicists)
            .unwrap();
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s_ in 0..n {
                        assert_relative_eq!(
                            a.coulomb(p, q, r, s_),
                            b.coulomb(p, q, r, s_),
                            epsilon = 1e-14
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn empty_amplitudes_when_threshold_dominates() {
        let s = toy_one_orbital();
        let basis = OrbitalBasis::new(1, 1, 1).unwrap();
        // no virtuals at all; tensor must be empty
        let t = mp2_amplitudes(&s, &basis, 0.0).unwrap();
        assert!(t.is_empty());
        assert_relative_eq!(mp2_energy(&t, &s), 0.0);
    }
}
