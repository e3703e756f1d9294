//! Binary on–off concentration shift keying over the tap channel.
//!
//! Bit 1 releases `n1` molecules at the start of its slot, bit 0 releases
//! `n0`. A molecule emitted in slot k is counted in slot k + j − 1 with
//! probability p_j, independently of all other molecules. The detector
//! compares the slot count with a threshold τ and decides 1 when count ≥ τ.
//!
//! The Monte Carlo engine scatters emissions instead of gathering per-slot
//! binomials: each emission of `A` molecules yields Binomial(A, Σp) counted
//! molecules, each landing in slot offset j with probability p_j/Σp. Every
//! slot count then has exactly the distribution of the per-slot sum of
//! independent binomials, at a cost proportional to the number of counted
//! molecules rather than to n_bits·L.
//!
//! Counted mass beyond the last explicit tap, F(α, ∞) − F(α, L·t_s), is added
//! to every slot as a Poisson variate with the mean contribution of an i.i.d.
//! past, (prior1·n1 + (1 − prior1)·n0)·tail. [`received_count`] follows the
//! per-slot definition literally and ignores that tail.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::channel::TapVector;
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Symbols per RNG stream. Blocks are the unit of parallel work.
const BLOCK: usize = 1 << 16;

/// Treatment of counted mass that arrives after the last explicit tap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailModel {
    /// Drop it; counts use the explicit taps only.
    Ignore,
    /// Add a Poisson variate with the steady-state mean of the tail.
    #[default]
    MeanField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    taps: TapVector,
    n1: u64,
    n0: u64,
    threshold: u64,
    n_bits: u64,
    seed: u64,
    prior1: f64,
    tail: TailModel,
}

impl LinkConfig {
    /// Equiprobable bits and the mean-field tail.
    pub fn new(taps: TapVector, n1: u64, n0: u64, threshold: u64, n_bits: u64, seed: u64) -> Result<Self> {
        if n1 <= n0 {
            return Err(Error::domain(
                "n1",
                n1 as f64,
                "bit-1 amount must exceed the bit-0 amount",
            ));
        }
        if n_bits == 0 {
            return Err(Error::domain("n_bits", 0.0, "need at least one bit"));
        }
        Ok(LinkConfig {
            taps,
            n1,
            n0,
            threshold,
            n_bits,
            seed,
            prior1: 0.5,
            tail: TailModel::default(),
        })
    }

    pub fn with_prior1(mut self, prior1: f64) -> Result<Self> {
        if !(prior1 > 0.0 && prior1 < 1.0) {
            return Err(Error::domain("prior1", prior1, "must lie in (0, 1)"));
        }
        self.prior1 = prior1;
        Ok(self)
    }

    pub fn with_threshold(mut self, threshold: u64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tail(mut self, tail: TailModel) -> Self {
        self.tail = tail;
        self
    }

    pub fn taps(&self) -> &TapVector {
        &self.taps
    }

    pub fn n1(&self) -> u64 {
        self.n1
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn n_bits(&self) -> u64 {
        self.n_bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn prior1(&self) -> f64 {
        self.prior1
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    fn amount(&self, bit: bool) -> u64 {
        if bit {
            self.n1
        } else {
            self.n0
        }
    }

    fn tail_mean(&self) -> f64 {
        match self.tail {
            TailModel::Ignore => 0.0,
            TailModel::MeanField => {
                let mean_amount = self.prior1 * self.n1 as f64 + (1.0 - self.prior1) * self.n0 as f64;
                mean_amount * self.taps.tail_mass()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerResult {
    pub ber: f64,
    pub errors: u64,
    pub bits: u64,
    /// 1.96·√(ber(1 − ber)/bits).
    pub confidence_halfwidth_95: f64,
    pub threshold: u64,
}

impl BerResult {
    fn new(errors: u64, bits: u64, threshold: u64) -> Self {
        let ber = errors as f64 / bits as f64;
        BerResult {
            ber,
            errors,
            bits,
            confidence_halfwidth_95: 1.96 * (ber * (1.0 - ber) / bits as f64).sqrt(),
            threshold,
        }
    }
}

/// Molecules counted in slot `k` (0-based) from the emissions of slots
/// k, k − 1, …, k − L + 1: Σⱼ Binomial(amount(bits[k − j]), p_{j+1}).
pub fn received_count<R: Rng + ?Sized>(bits: &[bool], k: usize, cfg: &LinkConfig, rng: &mut R) -> u64 {
    assert!(
        k < bits.len(),
        "symbol index {k} outside a sequence of {} bits",
        bits.len()
    );
    let taps = cfg.taps.taps();
    let reach = (k + 1).min(taps.len());
    (0..reach)
        .map(|j| {
            let n = cfg.amount(bits[k - j]);
            if n == 0 || taps[j] == 0.0 {
                0
            } else {
                Binomial::new(n, taps[j])
                    .expect("tap probabilities lie in [0, 1]")
                    .sample(rng)
            }
        })
        .sum()
}

/// Decision rule: 1 when `count >= threshold`.
pub fn detect(count: u64, threshold: u64) -> bool {
    count >= threshold
}

/// One simulated transmission: the sent bits and the per-slot counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub bits: Vec<bool>,
    pub counts: Vec<u64>,
}

impl Transmission {
    pub fn errors(&self, threshold: u64) -> u64 {
        self.bits
            .iter()
            .zip(&self.counts)
            .filter(|(&b, &c)| detect(c, threshold) != b)
            .count() as u64
    }
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

struct Emitter {
    slot: Option<WeightedAliasIndex<f64>>,
    counted1: Binomial,
    counted0: Binomial,
    tail: Option<Poisson<f64>>,
}

impl Emitter {
    fn new(cfg: &LinkConfig) -> Result<Self> {
        let window = cfg.taps.window_cdf().clamp(0.0, 1.0);
        let slot = if window > 0.0 {
            Some(
                WeightedAliasIndex::new(cfg.taps.taps().to_vec())
                    .map_err(|e| Error::Numeric(format!("tap sampler: {e}")))?,
            )
        } else {
            None
        };
        let binomial =
            |n| Binomial::new(n, window).map_err(|e| Error::Numeric(format!("binomial({n}, {window}): {e}")));
        let lambda = cfg.tail_mean();
        let tail = if lambda > 0.0 {
            Some(Poisson::new(lambda).map_err(|e| Error::Numeric(format!("poisson({lambda}): {e}")))?)
        } else {
            None
        };
        Ok(Emitter {
            slot,
            counted1: binomial(cfg.n1)?,
            counted0: binomial(cfg.n0)?,
            tail,
        })
    }
}

/// Bits and scattered counts of one block. `counts` covers slots
/// `start .. start + bits.len() + L − 1`.
fn run_block(cfg: &LinkConfig, em: &Emitter, seed: u64, block: u64) -> (Vec<bool>, Vec<u64>) {
    let start = block as usize * BLOCK;
    let len = BLOCK.min(cfg.n_bits as usize - start);
    let mut rng = block_rng(seed, block);
    let bits: Vec<bool> = (0..len).map(|_| rng.random_bool(cfg.prior1)).collect();
    let mut counts = vec![0u64; len + cfg.taps.len() - 1];
    if let Some(slot) = &em.slot {
        for (i, &b) in bits.iter().enumerate() {
            let counted = if b { &em.counted1 } else { &em.counted0 };
            for _ in 0..counted.sample(&mut rng) {
                counts[i + slot.sample(&mut rng)] += 1;
            }
        }
    }
    if let Some(tail) = &em.tail {
        for c in counts.iter_mut().take(len) {
            *c += tail.sample(&mut rng) as u64;
        }
    }
    (bits, counts)
}

/// Simulates `cfg.n_bits` slots with the given seed.
pub fn transmit(cfg: &LinkConfig, seed: u64, exec: Execution) -> Result<Transmission> {
    let em = Emitter::new(cfg)?;
    let n = cfg.n_bits as usize;
    let blocks = n.div_ceil(BLOCK) as u64;
    let parts = exec.map(0..blocks, |b| run_block(cfg, &em, seed, b));
    let mut bits = Vec::with_capacity(n);
    let mut counts = vec![0u64; n];
    for (b, (block_bits, block_counts)) in parts.into_iter().enumerate() {
        let start = b * BLOCK;
        bits.extend_from_slice(&block_bits);
        for (i, c) in block_counts.into_iter().enumerate() {
            if let Some(slot) = counts.get_mut(start + i) {
                *slot += c;
            }
        }
    }
    Ok(Transmission { bits, counts })
}

/// Error rate of `cfg.n_bits` i.i.d. bits at the configured threshold.
pub fn ber_monte_carlo(cfg: &LinkConfig) -> Result<BerResult> {
    ber_monte_carlo_with(cfg, Execution::default())
}

pub fn ber_monte_carlo_with(cfg: &LinkConfig, exec: Execution) -> Result<BerResult> {
    let tx = transmit(cfg, cfg.seed, exec)?;
    Ok(BerResult::new(tx.errors(cfg.threshold), cfg.n_bits, cfg.threshold))
}

/// Seed of the training run used to pick τ, kept apart from the evaluation
/// seed so the reported BER is not measured on the samples it was tuned on.
pub fn training_seed(seed: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// τ ∈ [0, n1] with the fewest errors on `tx`; ties go to the smaller τ.
pub fn best_threshold(tx: &Transmission, n1: u64) -> (u64, u64) {
    let top = n1 as usize;
    // hist[c] for c in 0..=n1; larger counts share the last bin, which every
    // τ ≤ n1 classifies as 1
    let mut ones = vec![0u64; top + 2];
    let mut zeros = vec![0u64; top + 2];
    for (&b, &c) in tx.bits.iter().zip(&tx.counts) {
        let bin = (c as usize).min(top + 1);
        if b {
            ones[bin] += 1;
        } else {
            zeros[bin] += 1;
        }
    }
    // τ = 0: every bit-0 is an error
    let mut errors: u64 = zeros.iter().sum();
    let mut best = (0, errors);
    for tau in 1..=top {
        // moving τ past count τ − 1 turns those slots into 0 decisions
        errors = errors + ones[tau - 1] - zeros[tau - 1];
        if errors < best.1 {
            best = (tau as u64, errors);
        }
    }
    best
}

/// Threshold minimising the Monte Carlo BER over τ ∈ [0, n1], estimated on
/// a training run with [`training_seed`]. `cfg.threshold` is ignored.
pub fn optimize_threshold(cfg: &LinkConfig) -> Result<u64> {
    optimize_threshold_with(cfg, Execution::default())
}

pub fn optimize_threshold_with(cfg: &LinkConfig, exec: Execution) -> Result<u64> {
    let tx = transmit(cfg, training_seed(cfg.seed), exec)?;
    Ok(best_threshold(&tx, cfg.n1).0)
}

/// Re-optimises τ, then measures the BER with the evaluation seed.
pub fn ber_with_optimal_threshold(cfg: &LinkConfig, exec: Execution) -> Result<BerResult> {
    let tau = optimize_threshold_with(cfg, exec)?;
    ber_monte_carlo_with(&cfg.clone().with_threshold(tau), exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelGeometry;
    use std::f64::consts::PI;

    fn tv(taps: Vec<f64>) -> TapVector {
        let s: f64 = taps.iter().sum();
        TapVector::from_parts(taps, 0.1, PI, ChannelGeometry::default(), s).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(LinkConfig::new(tv(vec![0.5]), 10, 10, 1, 10, 0).is_err());
        assert!(LinkConfig::new(tv(vec![0.5]), 10, 0, 1, 0, 0).is_err());
        let c = LinkConfig::new(tv(vec![0.5]), 10, 0, 1, 10, 0).unwrap();
        assert!(c.clone().with_prior1(0.0).is_err());
        assert!(c.clone().with_prior1(1.0).is_err());
        assert_eq!(c.prior1(), 0.5);
    }

    #[test]
    fn detection_boundary() {
        assert!(!detect(0, 1));
        assert!(detect(7, 7));
        assert!(detect(0, 0));
    }

    #[test]
    fn silent_bits_receive_nothing() {
        let c = LinkConfig::new(tv(vec![0.3, 0.1]), 100, 0, 1, 10, 0).unwrap();
        let mut rng = block_rng(1, 0);
        let bits = [false; 4];
        for k in 0..4 {
            assert_eq!(received_count(&bits, k, &c, &mut rng), 0);
        }
    }

    #[test]
    fn zero_taps_give_prior_error_rate() {
        let taps = TapVector::from_parts(vec![0.0, 0.0], 0.1, PI, ChannelGeometry::default(), 0.0).unwrap();
        let c = LinkConfig::new(taps, 50, 0, 1, 20_000, 3).unwrap();
        let r = ber_monte_carlo(&c).unwrap();
        let ones = transmit(&c, 3, Execution::Sequential)
            .unwrap()
            .bits
            .iter()
            .filter(|b| **b)
            .count();
        assert_eq!(r.errors, ones as u64);
        assert!((r.ber - 0.5).abs() < 4.0 * r.confidence_halfwidth_95);
    }

    #[test]
    fn perfect_channel_has_no_errors() {
        let c = LinkConfig::new(tv(vec![1.0]), 100, 0, 50, 10_000, 1).unwrap();
        assert_eq!(ber_monte_carlo(&c).unwrap().errors, 0);
        let tau = optimize_threshold(&c).unwrap();
        assert!(tau > 0 && tau <= 100);
        assert_eq!(tau, 1);
    }

    #[test]
    fn ties_prefer_the_smallest_threshold() {
        let tx = Transmission {
            bits: vec![true, false, true, false],
            counts: vec![9, 0, 9, 0],
        };
        assert_eq!(best_threshold(&tx, 20), (1, 0));
        // counts above n1 are still decided as 1
        let tx = Transmission {
            bits: vec![true, false],
            counts: vec![40, 3],
        };
        assert_eq!(best_threshold(&tx, 10), (4, 0));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let c = LinkConfig::new(tv(vec![0.3, 0.2, 0.1]), 40, 2, 10, 150_000, 11).unwrap();
        let a = transmit(&c, 5, Execution::Sequential).unwrap();
        let b = transmit(&c, 5, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn half_width_formula() {
        let r = BerResult::new(100, 10_000, 3);
        assert!((r.confidence_halfwidth_95 - 1.96 * (0.01f64 * 0.99 / 1e4).sqrt()).abs() < 1e-15);
        assert_eq!(BerResult::new(0, 10, 0).confidence_halfwidth_95, 0.0);
    }
}
