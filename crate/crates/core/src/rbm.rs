//! Restricted Boltzmann machine over occupation bitstrings.
//!
//! Binary visible units mirror spin-orbital occupations (blocked layout);
//! the hidden layer has the same width under the default configuration.
//! Training uses contrastive divergence with mean-field positive-phase
//! hidden terms and sampled states inside the chain; generation runs
//! alternating conditional sweeps from symmetry-space seeds and rejects
//! outputs that leave the particle sector.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fermion::{ConfigurationSet, Determinant, OrbitalBasis, Provenance};
use crate::hamiltonian::CIVector;

/// Weight matrix and bias vectors of the bipartite energy model, plus the
/// seeded generator that makes every stochastic step reproducible.
#[derive(Debug, Clone)]
pub struct RBMModel {
    n_visible: usize,
    n_hidden: usize,
    weights: DMatrix<f64>,
    visible_bias: DVector<f64>,
    hidden_bias: DVector<f64>,
    rng: ChaCha8Rng,
    seed: u64,
}

impl RBMModel {
    /// Weights drawn uniformly from (-0.01, 0.01), biases zero; the small
    /// scale keeps early conditionals near 0.5.
    pub fn new(n_visible: usize, n_hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights =
            DMatrix::from_fn(n_visible, n_hidden, |_, _| rng.gen_range(-0.01..0.01));
        Self {
            n_visible,
            n_hidden,
            weights,
            visible_bias: DVector::zeros(n_visible),
            hidden_bias: DVector::zeros(n_hidden),
            rng,
            seed,
        }
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn visible_bias(&self) -> &DVector<f64> {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &DVector<f64> {
        &self.hidden_bias
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `E(g, h) = -g^T W h - y.h - u.g`.
    pub fn energy(&self, g: &DVector<f64>, h: &DVector<f64>) -> Result<f64> {
        self.check_visible(g)?;
        if h.len() != self.n_hidden {
            return Err(Error::DimensionMismatch { expected: self.n_hidden, got: h.len() });
        }
        Ok(-(g.transpose() * &self.weights * h)[(0, 0)]
            - self.hidden_bias.dot(h)
            - self.visible_bias.dot(g))
    }

    /// `p(h_j = 1 | g) = sigma(sum_i g_i W_ij + y_j)`.
    pub fn hidden_conditional(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_visible(g)?;
        let mut act = self.weights.transpose() * g + &self.hidden_bias;
        act.apply(|x| *x = sigmoid(*x));
        Ok(act)
    }

    /// `p(g_i = 1 | h) = sigma(sum_j W_ij h_j + u_i)`.
    pub fn visible_conditional(&self, h: &DVector<f64>) -> Result<DVector<f64>> {
        if h.len() != self.n_hidden {
            return Err(Error::DimensionMismatch { expected: self.n_hidden, got: h.len() });
        }
        let mut act = &self.weights * h + &self.visible_bias;
        act.apply(|x| *x = sigmoid(*x));
        Ok(act)
    }

    fn check_visible(&self, g: &DVector<f64>) -> Result<()> {
        if g.len() != self.n_visible {
            return Err(Error::DimensionMismatch { expected: self.n_visible, got: g.len() });
        }
        Ok(())
    }

    fn sample(&mut self, probs: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            probs.len(),
            probs.iter().map(|&p| if self.rng.gen::<f64>() < p { 1.0 } else { 0.0 }),
        )
    }

    /// Contrastive-divergence training: positive phase from the data,
    /// negative phase from `k_gibbs` alternating sweeps, full-batch updates
    /// averaged over the training multiset once per epoch.
    pub fn cd_train(
        &mut self,
        data: &TrainingDistribution,
        epochs: usize,
        k_gibbs: usize,
        learning_rate: f64,
    ) -> Result<()> {
        if data.samples.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        for s in &data.samples {
            self.check_visible(s)?;
        }
        let n = data.samples.len() as f64;
        for _ in 0..epochs {
            let mut dw = DMatrix::zeros(self.n_visible, self.n_hidden);
            let mut du = DVector::zeros(self.n_visible);
            let mut dy = DVector::zeros(self.n_hidden);
            for g0 in &data.samples {
                let h0 = self.hidden_conditional(g0)?;
                let mut g = g0.clone();
                for _ in 0..k_gibbs {
                    let h = self.hidden_conditional(&g)?;
                    let h_state = self.sample(&h);
                    let v = self.visible_conditional(&h_state)?;
                    g = self.sample(&v);
                }
                let hk = self.hidden_conditional(&g)?;
                dw += g0 * h0.transpose() - &g * hk.transpose();
                du += g0 - &g;
                dy += h0 - hk;
            }
            let scale = learning_rate / n;
            self.weights += dw * scale;
            self.visible_bias += du * scale;
            self.hidden_bias += dy * scale;
            if !self.is_finite() {
                return Err(Error::InvalidConfig(
                    "non-finite model parameters after update".into(),
                ));
            }
        }
        Ok(())
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().all(|x| x.is_finite())
            && self.visible_bias.iter().all(|x| x.is_finite())
            && self.hidden_bias.iter().all(|x| x.is_finite())
    }

    /// Runs `steps` alternating h|g, g|h stochastic sweeps from each seed;
    /// zero steps returns the seeds unchanged.
    pub fn gibbs_generate(
        &mut self,
        seeds: &[DVector<f64>],
        steps: usize,
    ) -> Result<Vec<DVector<f64>>> {
        let mut out = Vec::with_capacity(seeds.len());
        for seed in seeds {
            self.check_visible(seed)?;
            let mut g = seed.clone();
            for _ in 0..steps {
                let h = self.hidden_conditional(&g)?;
                let h_state = self.sample(&h);
                let v = self.visible_conditional(&h_state)?;
                g = self.sample(&v);
            }
            out.push(g);
        }
        Ok(out)
    }

    /// Writes a restorable text checkpoint (dimensions, seed, generator
    /// position, parameters at full precision).
    pub fn save<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "rbm-checkpoint v1")?;
        writeln!(
            w,
            "{} {} {} {}",
            self.n_visible,
            self.n_hidden,
            self.seed,
            self.rng.get_word_pos()
        )?;
        let dump = |w: &mut W, it: &mut dyn Iterator<Item = &f64>| -> Result<()> {
            let vals: Vec<String> = it.map(|x| format!("{x:.17e}")).collect();
            writeln!(w, "{}", vals.join(" "))?;
            Ok(())
        };
        dump(w, &mut self.visible_bias.iter())?;
        dump(w, &mut self.hidden_bias.iter())?;
        for i in 0..self.n_visible {
            dump(w, &mut self.weights.row(i).iter().collect::<Vec<_>>().into_iter())?;
        }
        Ok(())
    }

    pub fn load<R: std::io::BufRead>(r: &mut R) -> Result<Self> {
        let mut lines = r.lines();
        let bad = |msg: &str| Error::InvalidConfig(format!("rbm checkpoint: {msg}"));
        let header = lines.next().ok_or_else(|| bad("empty file"))??;
        if header.trim() != "rbm-checkpoint v1" {
            return Err(bad("unknown header"));
        }
        let meta = lines.next().ok_or_else(|| bad("missing dimensions"))??;
        let fields: Vec<&str> = meta.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(bad("dimension line needs 4 fields"));
        }
        let n_visible: usize = fields[0].parse().map_err(|_| bad("bad n_visible"))?;
        let n_hidden: usize = fields[1].parse().map_err(|_| bad("bad n_hidden"))?;
        let seed: u64 = fields[2].parse().map_err(|_| bad("bad seed"))?;
        let word_pos: u128 = fields[3].parse().map_err(|_| bad("bad generator position"))?;
        let mut read_vec = |len: usize| -> Result<Vec<f64>> {
            let line = lines.next().ok_or_else(|| bad("missing parameter line"))??;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad("bad float")))
                .collect::<Result<_>>()?;
            if vals.len() != len {
                return Err(bad("parameter line length mismatch"));
            }
            Ok(vals)
        };
        let u = read_vec(n_visible)?;
        let y = read_vec(n_hidden)?;
        let mut weights = DMatrix::zeros(n_visible, n_hidden);
        for i in 0..n_visible {
            let row = read_vec(n_hidden)?;
            for (j, v) in row.into_iter().enumerate() {
                weights[(i, j)] = v;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(word_pos);
        Ok(Self {
            n_visible,
            n_hidden,
            weights,
            visible_bias: DVector::from_vec(u),
            hidden_bias: DVector::from_vec(y),
            rng,
            seed,
        })
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Multiset of visible vectors drawn in proportion to CI coefficients.
#[derive(Debug, Clone)]
pub struct TrainingDistribution {
    pub samples: Vec<DVector<f64>>,
    pub n_distinct: usize,
}

/// Visible vector of a determinant in the blocked layout.
pub fn determinant_to_visible(d: &Determinant, basis: &OrbitalBasis) -> DVector<f64> {
    let n = basis.n_spatial();
    DVector::from_fn(2 * n, |so, _| {
        if d.spin_orbital_occupied(so, n) {
            1.0
        } else {
            0.0
        }
    })
}

/// Determinant of a binary visible vector.
pub fn visible_to_determinant(g: &DVector<f64>, basis: &OrbitalBasis) -> Determinant {
    let n = basis.n_spatial();
    let mut alpha = 0u64;
    let mut beta = 0u64;
    for (so, &x) in g.iter().enumerate() {
        if x > 0.5 {
            if so < n {
                alpha |= 1 << so;
            } else {
                beta |= 1 << (so - n);
            }
        }
    }
    Determinant::from_masks(alpha, beta)
}

/// Builds the training multiset from a CI vector: keeps `|c| > eps_coeff`,
/// drops the reference determinant, and draws `target_size` samples with
/// probability proportional to `|c|`. Also returns the sub-threshold
/// configurations for blacklisting.
pub fn build_training_distribution(
    v: &CIVector,
    c: &ConfigurationSet,
    basis: &OrbitalBasis,
    eps_coeff: f64,
    target_size: usize,
    reference: &Determinant,
    rng: &mut ChaCha8Rng,
) -> Result<(TrainingDistribution, ConfigurationSet)> {
    if v.coefficients.len() != c.len() {
        return Err(Error::DimensionMismatch { expected: c.len(), got: v.coefficients.len() });
    }
    let mut kept: Vec<(Determinant, f64)> = Vec::new();
    let mut below = ConfigurationSet::new();
    for (idx, (d, tag, freq)) in c.iter().enumerate() {
        let weight = v.coefficients[idx].abs();
        if weight <= eps_coeff {
            below.insert(*d, tag, freq);
        } else if d != reference {
            kept.push((*d, weight));
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let total: f64 = kept.iter().map(|(_, w)| w).sum();
    let mut cumulative = Vec::with_capacity(kept.len());
    let mut acc = 0.0;
    for (_, w) in &kept {
        acc += w / total;
        cumulative.push(acc);
    }
    let mut samples = Vec::with_capacity(target_size);
    for _ in 0..target_size {
        let x: f64 = rng.gen();
        let idx = cumulative.partition_point(|&cum| cum < x).min(kept.len() - 1);
        samples.push(determinant_to_visible(&kept[idx].0, basis));
    }
    Ok((TrainingDistribution { samples, n_distinct: kept.len() }, below))
}

/// Outcome bookkeeping for one generation call.
#[derive(Debug, Clone, Copy, Default)]
pub struct GenerationStats {
    pub requested: usize,
    pub produced: usize,
    pub shortfall: usize,
}

/// Draws seeds from the symmetry space, runs one stochastic reconstruction
/// pass per seed, keeps sector-conserving outputs, and resamples rejected
/// slots for up to `retry_rounds` extra rounds. Shortfall is reported, not
/// fatal.
pub fn symmetry_constrained_generate(
    model: &mut RBMModel,
    basis: &OrbitalBasis,
    n_gen: usize,
    steps: usize,
    retry_rounds: usize,
    rng: &mut ChaCha8Rng,
    pool: &mut dyn FnMut(&mut ChaCha8Rng) -> Determinant,
) -> Result<(ConfigurationSet, GenerationStats)> {
    let mut out = ConfigurationSet::new();
    let mut produced = 0usize;
    let mut remaining = n_gen;
    for _round in 0..=retry_rounds {
        if remaining == 0 {
            break;
        }
        let seeds: Vec<DVector<f64>> = (0..remaining)
            .map(|_| determinant_to_visible(&pool(rng), basis))
            .collect();
        let outputs = model.gibbs_generate(&seeds, steps)?;
        let mut still_invalid = 0;
        for g in outputs {
            let d = visible_to_determinant(&g, basis);
            if basis.contains(&d) {
                out.insert(d, Provenance::Generated, 1);
                produced += 1;
            } else {
                still_invalid += 1;
            }
        }
        remaining = still_invalid;
    }
    Ok((out, GenerationStats { requested: n_gen, produced, shortfall: remaining }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn energy_of_zero_state_is_zero() {
        let m = RBMModel::new(4, 4, 1);
        let g = DVector::zeros(4);
        let h = DVector::zeros(4);
        assert_eq!(m.energy(&g, &h).unwrap(), 0.0);
    }

    #[test]
    fn energy_single_coupling_term() {
        let mut m = RBMModel::new(2, 2, 1);
        m.weights.fill(0.0);
        m.weights[(0, 0)] = 2.0;
        let g = DVector::from_vec(vec![1.0, 0.0]);
        let h = DVector::from_vec(vec![1.0, 0.0]);
        assert_relative_eq!(m.energy(&g, &h).unwrap(), -2.0);
    }

    #[test]
    fn energy_matches_naive_triple_loop() {
        let m = RBMModel::new(5, 3, 42);
        let g = DVector::from_vec(vec![1.0, 0.0, 1.0, 1.0, 0.0]);
        let h = DVector::from_vec(vec![0.0, 1.0, 1.0]);
        let mut expect = 0.0;
        for i in 0..5 {
            for j in 0..3 {
                expect -= g[i] * m.weights[(i, j)] * h[j];
            }
        }
        for j in 0..3 {
            expect -= m.hidden_bias[j] * h[j];
        }
        for i in 0..5 {
            expect -= m.visible_bias[i] * g[i];
        }
        assert_relative_eq!(m.energy(&g, &h).unwrap(), expect, epsilon = 1e-14);
    }

    #[test]
    fn zero_model_conditionals_are_half() {
        let mut m = RBMModel::new(3, 3, 1);
        m.weights.fill(0.0);
        let g = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        for p in m.hidden_conditional(&g).unwrap().iter() {
            assert_relative_eq!(*p, 0.5);
        }
        for p in m.visible_conditional(&g).unwrap().iter() {
            assert_relative_eq!(*p, 0.5);
        }
    }

    #[test]
    fn saturated_bias_pins_probability() {
        let mut m = RBMModel::new(2, 2, 1);
        m.weights.fill(0.0);
        m.hidden_bias[0] = 50.0;
        let g = DVector::zeros(2);
        let p = m.hidden_conditional(&g).unwrap();
        assert!(p[0] >= 1.0 - 1e-20);
    }

    #[test]
    fn transposed_model_swaps_roles() {
        let m = RBMModel::new(4, 4, 9);
        let mut m_t = m.clone();
        m_t.weights = m.weights.transpose();
        std::mem::swap(&mut m_t.visible_bias, &mut m_t.hidden_bias);
        let x = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        let a = m.hidden_conditional(&x).unwrap();
        let b = m_t.visible_conditional(&x).unwrap();
        for (p, q) in a.iter().zip(b.iter()) {
            assert_relative_eq!(p, q, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut m = RBMModel::new(4, 4, 3);
        let before = m.clone();
        let data = TrainingDistribution {
            samples: vec![DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0])],
            n_distinct: 1,
        };
        m.cd_train(&data, 3, 5, 0.0).unwrap();
        assert_eq!(m.weights, before.weights);
        assert_eq!(m.visible_bias, before.visible_bias);
        assert_eq!(m.hidden_bias, before.hidden_bias);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let mut m = RBMModel::new(2, 2, 1);
        let data = TrainingDistribution { samples: vec![], n_distinct: 0 };
        assert!(matches!(m.cd_train(&data, 1, 1, 0.1), Err(Error::EmptyTrainingSet)));
    }

    #[test]
    fn zero_steps_returns_seeds() {
        let mut m = RBMModel::new(3, 3, 5);
        let seeds = vec![DVector::from_vec(vec![1.0, 0.0, 1.0])];
        let out = m.gibbs_generate(&seeds, 0).unwrap();
        assert_eq!(out, seeds);
    }

    #[test]
    fn saturated_model_generates_fixed_pattern() {
        let mut m = RBMModel::new(3, 3, 5);
        // huge biases toward pattern 101 regardless of hidden state
        m.weights.fill(0.0);
        m.visible_bias = DVector::from_vec(vec![60.0, -60.0, 60.0]);
        let seeds = vec![DVector::zeros(3); 16];
        for g in m.gibbs_generate(&seeds, 1).unwrap() {
            assert_eq!(g.as_slice(), &[1.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn determinism_under_fixed_seed() {
        let run = || {
            let mut m = RBMModel::new(4, 4, 11);
            let data = TrainingDistribution {
                samples: vec![
                    DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]),
                    DVector::from_vec(vec![0.0, 1.0, 0.0, 1.0]),
                ],
                n_distinct: 2,
            };
            m.cd_train(&data, 3, 20, 0.001).unwrap();
            let seeds = vec![DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]); 8];
            m.gibbs_generate(&seeds, 1).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoint_round_trip_preserves_stream() {
        let mut m = RBMModel::new(3, 3, 77);
        let data = TrainingDistribution {
            samples: vec![DVector::from_vec(vec![1.0, 1.0, 0.0])],
            n_distinct: 1,
        };
        m.cd_train(&data, 2, 4, 0.001).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let mut restored = RBMModel::load(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(restored.weights, m.weights);
        // the restored generator must continue the exact same stream
        let seeds = vec![DVector::from_vec(vec![0.0, 1.0, 1.0]); 4];
        assert_eq!(
            m.gibbs_generate(&seeds, 1).unwrap(),
            restored.gibbs_generate(&seeds, 1).unwrap()
        );
    }

    #[test]
    fn generation_respects_sector() {
        let basis = OrbitalBasis::new(3, 1, 2).unwrap();
        let mut m = RBMModel::new(6, 6, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pool =
            |r: &mut ChaCha8Rng| crate::fermion::random_sector_determinant(&basis, r);
        let (set, stats) =
            symmetry_constrained_generate(&mut m, &basis, 20, 1, 10, &mut rng, &mut pool)
                .unwrap();
        for (d, tag, _) in set.iter() {
            assert_eq!(d.n_alpha(), 1);
            assert_eq!(d.n_beta(), 2);
            assert_eq!(tag, Provenance::Generated);
        }
        assert_eq!(stats.produced + stats.shortfall, stats.requested);
    }

    #[test]
    fn retry_cap_zero_reports_shortfall() {
        let basis = OrbitalBasis::new(2, 1, 1).unwrap();
        let mut m = RBMModel::new(4, 4, 13);
        // adversarial model: always emits the all-ones string (wrong sector)
        m.weights.fill(0.0);
        m.visible_bias = DVector::from_vec(vec![80.0; 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pool =
            |r: &mut ChaCha8Rng| crate::fermion::random_sector_determinant(&basis, r);
        let (set, stats) =
            symmetry_constrained_generate(&mut m, &basis, 10, 1, 0, &mut rng, &mut pool)
                .unwrap();
        assert!(set.is_empty());
        assert_eq!(stats.shortfall, 10);
    }
}
