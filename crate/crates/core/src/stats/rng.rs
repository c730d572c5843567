use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

/// Purpose-separated regions of one replicate's stream. Each lane owns
/// 2^40 words of the ChaCha keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Lane {
    Field = 0,
    LocalTime = 1,
    Minimum = 2,
    PairedField = 3,
    FreshField = 4,
    Auxiliary = 5,
}

const LANE_WORDS: u128 = 1 << 40;

/// Deterministic uniform stream addressed by `(seed, replicate, lane)`.
/// Draws are a pure function of the address and the position within the
/// lane, so replicates can be evaluated in any order or on any thread.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    seed: u64,
    replicate: u64,
}

impl RandomStream {
    pub fn new(seed: u64, replicate: u64, lane: Lane) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replicate);
        rng.set_word_pos(lane as u32 as u128 * LANE_WORDS);
        Self { rng, seed, replicate }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    /// Same replicate, another lane.
    pub fn lane(&self, lane: Lane) -> Self {
        Self::new(self.seed, self.replicate, lane)
    }

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inversion.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        standard_normal().inverse_cdf(self.uniform())
    }

    pub fn fill_normals(&mut self, out: &mut [f64]) {
        let n = standard_normal();
        for x in out {
            *x = n.inverse_cdf(self.uniform());
        }
    }
}

fn standard_normal() -> Normal {
    Normal::standard()
}
