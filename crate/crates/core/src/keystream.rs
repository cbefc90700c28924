//! Keyed deterministic randomness.
//!
//! Every random quantity in the crate comes from a [`Seed`] expanded by
//! SplitMix64. Streams are replayable: the same seed always yields the same
//! words, bits and derived draws, independent of thread scheduling.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A 64-bit seed. Equal seeds give bit-identical streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Seed(pub u64);

impl Seed {
    /// Word `index` of `expand(self)`, computed directly.
    ///
    /// Used to hand independent sub-seeds to Monte Carlo trials.
    pub fn child(self, index: u64) -> Seed {
        Seed(mix(self
            .0
            .wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1)))))
    }

    /// Seed of the stream used for frame `frame_index`: the SplitMix64
    /// generator is seeded with `seed XOR frame_index`.
    pub fn for_frame(self, frame_index: u64) -> Seed {
        Seed(self.0 ^ frame_index)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

/// Infinite SplitMix64 word stream.
#[derive(Debug, Clone)]
pub struct WordStream {
    state: u64,
}

impl WordStream {
    pub fn new(seed: Seed) -> Self {
        WordStream { state: seed.0 }
    }
}

impl Iterator for WordStream {
    type Item = u64;

    #[inline]
    fn next(&mut self) -> Option<u64> {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        Some(mix(self.state))
    }
}

/// Expand a seed into its word stream.
pub fn expand(seed: Seed) -> WordStream {
    WordStream::new(seed)
}

/// Bit-level view of a seed's word stream, most significant bit first.
#[derive(Debug, Clone)]
pub struct BitStream {
    seed: Seed,
    words: WordStream,
    current: u64,
    remaining: u32,
    position: u64,
    spare_normal: Option<f64>,
}

impl BitStream {
    pub fn new(seed: Seed) -> Self {
        BitStream {
            seed,
            words: WordStream::new(seed),
            current: 0,
            remaining: 0,
            position: 0,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    /// Number of bits consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    #[inline]
    fn next_word(&mut self) -> u64 {
        // WordStream never ends.
        self.words.next().unwrap_or_default()
    }

    /// Next bit (0 or 1).
    #[inline]
    pub fn next_bit(&mut self) -> u32 {
        if self.remaining == 0 {
            self.current = self.next_word();
            self.remaining = 64;
        }
        let bit = (self.current >> 63) as u32;
        self.current <<= 1;
        self.remaining -= 1;
        self.position += 1;
        bit
    }

    /// Next 64 bits, concatenated MSB first. Equals the next word when the
    /// stream sits on a word boundary.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.position += 64;
        if self.remaining == 0 {
            return self.next_word();
        }
        let word = self.next_word();
        let out = self.current | (word >> self.remaining);
        self.current = word << (64 - self.remaining);
        out
    }

    /// Next `k <= 64` bits as an integer, first bit most significant.
    pub fn next_bits(&mut self, k: u32) -> u64 {
        debug_assert!(k <= 64);
        if k == 0 {
            return 0;
        }
        if k == 64 {
            return self.next_u64();
        }
        if self.remaining == 0 {
            self.current = self.next_word();
            self.remaining = 64;
        }
        self.position += k as u64;
        if k <= self.remaining {
            let out = self.current >> (64 - k);
            self.current <<= k;
            self.remaining -= k;
            return out;
        }
        let have = self.remaining;
        let high = self.current >> (64 - have);
        let word = self.next_word();
        let need = k - have;
        let out = (high << need) | (word >> (64 - need));
        self.current = word << need;
        self.remaining = 64 - need;
        out
    }

    /// Bit 0 maps to `+1`, bit 1 to `-1`.
    #[inline]
    pub fn draw_sign(&mut self) -> i8 {
        1 - 2 * self.next_bit() as i8
    }

    /// Fill `out` with consecutive signs; identical to repeated [`draw_sign`](Self::draw_sign).
    pub fn fill_signs(&mut self, out: &mut [i8]) {
        let mut i = 0;
        while i < out.len() && self.remaining != 0 {
            out[i] = self.draw_sign();
            i += 1;
        }
        while out.len() - i >= 64 {
            let word = self.next_word();
            self.position += 64;
            for (b, slot) in out[i..i + 64].iter_mut().enumerate() {
                *slot = 1 - 2 * ((word >> (63 - b)) & 1) as i8;
            }
            i += 64;
        }
        while i < out.len() {
            out[i] = self.draw_sign();
            i += 1;
        }
    }

    /// Uniform integer in `[0, bound)` by 64-bit rejection sampling.
    ///
    /// Words at or above `floor(2^64 / bound) * bound` are rejected, the
    /// accepted word is reduced modulo `bound`.
    pub fn draw_index(&mut self, bound: u64) -> Result<u64> {
        if bound == 0 {
            return Err(Error::domain("draw_index bound must be positive"));
        }
        let zone = ((1u128 << 64) / bound as u128) * bound as u128;
        loop {
            let w = self.next_u64();
            if (w as u128) < zone {
                return Ok(w % bound);
            }
        }
    }

    /// Uniform double in `[0, 1)` from the top 53 bits of the next 64.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box–Muller, pairs cached).
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = math::sqrt(-2.0 * math::log(u1));
        let phase = 2.0 * core::f64::consts::PI * u2;
        self.spare_normal = Some(r * math::sin(phase));
        r * math::cos(phase)
    }

    /// Vector of i.i.d. standard normal draws.
    pub fn normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.next_normal()).collect()
    }
}

/// Per-class key hierarchy: `Key(A0)` plus `Key(C0) .. Key(C(w-2))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyChain {
    matrix_seed: Seed,
    flip_seeds: Vec<Seed>,
}

impl KeyChain {
    pub fn new(matrix_seed: Seed, flip_seeds: Vec<Seed>) -> Self {
        KeyChain {
            matrix_seed,
            flip_seeds,
        }
    }

    /// Derive a `w`-class chain from a master seed: the first word of
    /// `expand(master)` is `Key(A0)`, the next `w - 1` words are the flip keys.
    pub fn derive(master: Seed, w: usize) -> Result<Self> {
        if w == 0 {
            return Err(Error::domain("a key chain needs at least one class"));
        }
        let mut words = expand(master);
        let matrix_seed = Seed(words.next().unwrap_or_default());
        let flip_seeds = words.take(w - 1).map(Seed).collect();
        Ok(KeyChain {
            matrix_seed,
            flip_seeds,
        })
    }

    pub fn matrix_seed(&self) -> Seed {
        self.matrix_seed
    }

    pub fn flip_seeds(&self) -> &[Seed] {
        &self.flip_seeds
    }

    /// Number of classes `w` this chain can decode (flip seeds + 1).
    pub fn class_count(&self) -> usize {
        self.flip_seeds.len() + 1
    }

    /// Highest class this chain decodes.
    pub fn top_class(&self) -> usize {
        self.flip_seeds.len()
    }

    /// The chain handed to a class-`u` user: `Key(A0)` plus the first `u`
    /// flip seeds.
    pub fn for_class(&self, u: usize) -> Result<KeyChain> {
        if u > self.flip_seeds.len() {
            return Err(Error::KeyDeficit {
                requested: u,
                available: self.flip_seeds.len(),
            });
        }
        Ok(KeyChain {
            matrix_seed: self.matrix_seed,
            flip_seeds: self.flip_seeds[..u].to_vec(),
        })
    }
}
