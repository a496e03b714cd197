//! Measurement-style bitstring sampling and counts-file ingestion.
//!
//! Stands in for a quantum processor: draws configurations from a reference
//! CI distribution with `|c|^2` probabilities, applies independent per-bit
//! flip noise, and tabulates frequencies. The same plain-text counts format
//! is read and written, so externally produced measurement data can enter
//! the pipeline through [`load_counts`].

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fermion::{
    symmetry_filter_with_layout, BitstringLayout, ConfigurationSet, OrbitalBasis,
};
use crate::hamiltonian::CIVector;

/// Frequency table of measured bitstrings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counts {
    entries: BTreeMap<String, u64>,
    n_shots: u64,
}

impl Counts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, bitstring: String, count: u64) {
        *self.entries.entry(bitstring).or_insert(0) += count;
        self.n_shots += count;
    }

    pub fn n_shots(&self) -> u64 {
        self.n_shots
    }

    pub fn entries(&self) -> &BTreeMap<String, u64> {
        &self.entries
    }

    pub fn get(&self, bitstring: &str) -> u64 {
        self.entries.get(bitstring).copied().unwrap_or(0)
    }
}

/// Independent per-bit flip noise.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub bitflip_p: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(bitflip_p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&bitflip_p) {
            return Err(Error::InvalidNoise(bitflip_p));
        }
        Ok(Self { bitflip_p, seed })
    }

    pub fn noiseless(seed: u64) -> Self {
        Self { bitflip_p: 0.0, seed }
    }
}

/// Draws `n_shots` configurations with probability `|c|^2`, renders each as
/// a blocked bitstring, and flips each bit independently with probability
/// `bitflip_p`. Deterministic for a fixed seed.
pub fn sample_from_state(
    v: &CIVector,
    c: &ConfigurationSet,
    basis: &OrbitalBasis,
    n_shots: u64,
    noise: &NoiseSpec,
) -> Result<Counts> {
    if v.coefficients.len() != c.len() {
        return Err(Error::DimensionMismatch { expected: c.len(), got: v.coefficients.len() });
    }
    if c.is_empty() {
        return Err(Error::EmptyConfigurationSet);
    }
    let total: f64 = v.coefficients.iter().map(|x| x * x).sum();
    let mut cumulative = Vec::with_capacity(c.len());
    let mut acc = 0.0;
    for coeff in &v.coefficients {
        acc += coeff * coeff / total;
        cumulative.push(acc);
    }
    let strings: Vec<String> =
        c.determinants().iter().map(|d| d.to_bitstring(basis)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut counts = Counts::new();
    let m = basis.n_spin_orbitals();
    let mut buf = vec![0u8; m];
    for _ in 0..n_shots {
        let x: f64 = rng.gen();
        let idx = cumulative.partition_point(|&cum| cum < x).min(c.len() - 1);
        buf.copy_from_slice(strings[idx].as_bytes());
        if noise.bitflip_p > 0.0 {
            for b in buf.iter_mut() {
                if rng.gen::<f64>() < noise.bitflip_p {
                    *b = if *b == b'0' { b'1' } else { b'0' };
                }
            }
        }
        counts.record(String::from_utf8(buf.clone()).expect("ascii bitstring"), 1);
    }
    Ok(counts)
}

/// Writes the `bitstring count` text format, one entry per line.
pub fn save_counts<W: Write>(counts: &Counts, w: &mut W) -> Result<()> {
    for (bitstring, count) in counts.entries() {
        writeln!(w, "{bitstring} {count}")?;
    }
    Ok(())
}

/// Parses the `bitstring count` text format; `#` starts a comment.
pub fn load_counts<R: BufRead>(r: R) -> Result<Counts> {
    let mut counts = Counts::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in r.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut fields = content.split_whitespace();
        let bitstring = fields.next().unwrap();
        let count_tok = fields.next().ok_or(Error::CountsParse {
            line: lineno,
            msg: "expected `bitstring count`".into(),
        })?;
        if fields.next().is_some() {
            return Err(Error::CountsParse { line: lineno, msg: "trailing fields".into() });
        }
        if bitstring.bytes().any(|b| b != b'0' && b != b'1') {
            return Err(Error::CountsParse {
                line: lineno,
                msg: format!("invalid bitstring {bitstring:?}"),
            });
        }
        match width {
            None => width = Some(bitstring.len()),
            Some(w) if w != bitstring.len() => {
                return Err(Error::CountsParse {
                    line: lineno,
                    msg: format!(
                        "inconsistent bitstring length {} (expected {w})",
                        bitstring.len()
                    ),
                });
            }
            _ => {}
        }
        let count: u64 = count_tok.parse().map_err(|_| Error::CountsParse {
            line: lineno,
            msg: format!("bad count {count_tok:?}"),
        })?;
        counts.record(bitstring.to_string(), count);
    }
    Ok(counts)
}

/// Filters the counts down to sector-conserving configurations with
/// provenance `hardware`.
pub fn counts_to_configurations(
    k: &Counts,
    basis: &OrbitalBasis,
    layout: BitstringLayout,
) -> Result<ConfigurationSet> {
    symmetry_filter_with_layout(
        k.entries().iter().map(|(s, &c)| (s.as_str(), c)),
        basis,
        layout,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion::{Determinant, Provenance};

    fn two_config_state(basis: &OrbitalBasis) -> (CIVector, ConfigurationSet) {
        let hf = basis.reference_determinant();
        let excited = Determinant::from_occupied(&[1], &[1], basis).unwrap();
        let mut set = ConfigurationSet::new();
        set.insert(hf, Provenance::Reference, 1);
        set.insert(excited, Provenance::Perturbative, 1);
        // |c|^2 = 0.8 / 0.2 after alignment with canonical order (hf first)
        let v = CIVector {
            coefficients: vec![0.8f64.sqrt(), 0.2f64.sqrt()],
            energy: 0.0,
        };
        (v, set)
    }

    #[test]
    fn pure_state_noiseless_sampling_is_constant() {
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let hf = basis.reference_determinant();
        let set = ConfigurationSet::from_determinants([hf], Provenance::Reference);
        let v = CIVector { coefficients: vec![1.0], energy: 0.0 };
        let counts =
            sample_from_state(&v, &set, &basis, 1000, &NoiseSpec::noiseless(3)).unwrap();
        assert_eq!(counts.n_shots(), 1000);
        assert_eq!(counts.get(&hf.to_bitstring(&basis)), 1000);
    }

    #[test]
    fn frequencies_follow_squared_coefficients() {
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let (v, set) = two_config_state(&basis);
        let n: u64 = 100_000;
        let counts =
            sample_from_state(&v, &set, &basis, n, &NoiseSpec::noiseless(17)).unwrap();
        let hf_str = set.determinants()[0].to_bitstring(&basis);
        let observed = counts.get(&hf_str) as f64;
        let expect = 0.8 * n as f64;
        let sigma = (n as f64 * 0.8 * 0.2).sqrt();
        assert!(
            (observed - expect).abs() < 4.0 * sigma,
            "observed {observed}, expected {expect} +/- {sigma}"
        );
    }

    #[test]
    fn counts_round_trip_through_text() {
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let (v, set) = two_config_state(&basis);
        let counts =
            sample_from_state(&v, &set, &basis, 5000, &NoiseSpec::new(0.05, 9).unwrap())
                .unwrap();
        let mut buf = Vec::new();
        save_counts(&counts, &mut buf).unwrap();
        let loaded = load_counts(&buf[..]).unwrap();
        assert_eq!(loaded, counts);
    }

    #[test]
    fn load_counts_basics() {
        let counts = load_counts("0011 5\n0101 3\n".as_bytes()).unwrap();
        assert_eq!(counts.n_shots(), 8);
        assert_eq!(counts.get("0011"), 5);

        let empty = load_counts("# nothing here\n".as_bytes()).unwrap();
        assert_eq!(empty.n_shots(), 0);

        assert!(load_counts("0011 x\n".as_bytes()).is_err());
        assert!(load_counts("0011\n".as_bytes()).is_err());
        assert!(load_counts("0011 5\n01 1\n".as_bytes()).is_err());
    }

    #[test]
    fn configurations_from_counts_filter_sector() {
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let mut counts = Counts::new();
        counts.record("1010".into(), 7); // alpha {0}, beta {0}: in sector
        counts.record("1110".into(), 2); // alpha popcount 2: discarded
        let set = counts_to_configurations(&counts, &basis, BitstringLayout::Blocked).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.frequency(0), 7);
        assert_eq!(set.provenance(0), Provenance::Hardware);
    }

    #[test]
    fn noise_survival_matches_direct_filter() {
        let basis = OrbitalBasis::new(3, 2, 1).unwrap();
        let (v, set) = {
            let hf = basis.reference_determinant();
            let set = ConfigurationSet::from_determinants([hf], Provenance::Reference);
            (CIVector { coefficients: vec![1.0], energy: 0.0 }, set)
        };
        let counts =
            sample_from_state(&v, &set, &basis, 20_000, &NoiseSpec::new(0.05, 21).unwrap())
                .unwrap();
        let filtered =
            counts_to_configurations(&counts, &basis, BitstringLayout::Blocked).unwrap();
        let survived: u64 = filtered.iter().map(|(_, _, f)| f).sum();
        let direct: u64 = counts
            .entries()
            .iter()
            .filter(|(s, _)| {
                let d = Determinant::from_bitstring(s, &basis, BitstringLayout::Blocked)
                    .unwrap();
                basis.contains(&d)
            })
            .map(|(_, &c)| c)
            .sum();
        assert_eq!(survived, direct);
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let (v, set) = two_config_state(&basis);
        let a = sample_from_state(&v, &set, &basis, 2000, &NoiseSpec::new(0.02, 5).unwrap())
            .unwrap();
        let b = sample_from_state(&v, &set, &basis, 2000, &NoiseSpec::new(0.02, 5).unwrap())
            .unwrap();
        assert_eq!(a, b);
    }
}
