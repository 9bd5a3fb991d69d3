//! Deterministic random-number plumbing shared by every stage.
//!
//! All randomness in the pipeline flows from a single campaign seed through
//! the functions in this module; nothing reads a clock or OS entropy. The
//! exact integer operations are part of the artifact contract so that two
//! builds (or two machines) replay identical campaigns bit for bit.
//!
//! The generator is splitmix64: state advances by the 64-bit golden-ratio
//! constant and outputs are finalized with two xor-shift multiplies.

/// 2^64 / phi, the splitmix64 stream increment.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 output finalizer (Stafford mix 13).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of realization `index` from the campaign seed.
///
/// `seed_i = mix64(campaign_seed + (i + 1) * GOLDEN_GAMMA)` — a pure function
/// of `(campaign_seed, index)`, independent of iteration order.
#[inline]
pub fn realization_seed(campaign_seed: u64, index: u64) -> u64 {
    mix64(campaign_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Combine a seed with a stream label.
///
/// `mix64(seed ^ (label + 1) * GOLDEN_GAMMA)`; used to fan one seed out into
/// independent sub-streams (scene placement, per-actor detection, ...).
#[inline]
pub fn substream(seed: u64, label: u64) -> u64 {
    mix64(seed ^ label.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

/// A splitmix64 stream.
#[derive(Debug, Clone)]
pub struct SeedStream {
    state: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Stream keyed by (seed, label); see [`substream`].
    pub fn labeled(seed: u64, label: u64) -> Self {
        Self::new(substream(seed, label))
    }

    /// Counter-based stream for one (actor, tick) cell.
    ///
    /// Keyed as `substream(substream(run_seed, actor_ordinal), tick)`, so
    /// appending actors or extending the mission never perturbs the draws of
    /// existing (actor, tick) cells.
    pub fn for_actor_tick(run_seed: u64, actor_ordinal: u64, tick: u64) -> Self {
        Self::new(substream(substream(run_seed, actor_ordinal), tick))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform f64 in [0, 1) using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform f64 in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Unbiased uniform integer in [0, bound) via rejection of the biased tail.
    ///
    /// # Panics
    /// Panics if `bound` is zero.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be nonzero");
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Sample `k` distinct indices from [0, total), sorted ascending.
    ///
    /// Partial Fisher-Yates over the index vector; deterministic in the
    /// stream state.
    ///
    /// # Panics
    /// Panics if `k > total`.
    pub fn sample_distinct(&mut self, total: u64, k: usize) -> Vec<u64> {
        assert!(k as u64 <= total, "cannot sample {k} from {total}");
        let mut pool: Vec<u64> = (0..total).collect();
        for i in 0..k {
            let j = i as u64 + self.next_below(total - i as u64);
            pool.swap(i, j as usize);
        }
        let mut picked = pool[..k].to_vec();
        picked.sort_unstable();
        picked
    }
}
