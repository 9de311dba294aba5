//! Seeded randomness.
//!
//! Every random draw in the crate flows from an explicit [`Seed`]. The stream
//! is fully specified here so that other implementations can reproduce it
//! bit-for-bit:
//!
//! * **Seeding / sub-seeds** use SplitMix64:
//!   `s += 0x9E3779B97F4A7C15; z = s;`
//!   `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;`
//!   `z = (z ^ (z >> 27)) * 0x94D049BB133111EB;`
//!   `return z ^ (z >> 31)` (all arithmetic wrapping mod 2^64).
//! * **Generator** is xoshiro256\*\*: the four state words are the first four
//!   SplitMix64 outputs starting from `s = seed`. Each step returns
//!   `rotl(s1 * 5, 7) * 9`, then `t = s1 << 17; s2 ^= s0; s3 ^= s1; s1 ^= s2;`
//!   `s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)`.
//! * **Uniform** `[0, 1)`: `(next >> 11) * 2^-53`.
//! * **Standard normal**: Box-Muller on two uniforms `u1, u2`,
//!   `sqrt(-2 ln(1 - u1)) * cos(2π u2)`; the sine partner is discarded.
//! * **Integer in `[0, n)`**: `(next * n) >> 64` computed in 128 bits.
//! * **Shuffle**: Fisher-Yates from the last index down, `j = below(i + 1)`.
//! * **Derived seeds**: `Seed::derive(tags)` folds each tag `t` into the value
//!   `v` as `v = splitmix(v ^ splitmix(t))`, starting from the parent seed.

use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix_step(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn splitmix(value: u64) -> u64 {
    let mut s = value;
    splitmix_step(&mut s)
}

/// Root of a reproducible random stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn new(value: u64) -> Self {
        Seed(value)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Deterministic child seed for a labelled sub-stream.
    pub fn derive(self, tags: &[u64]) -> Seed {
        let v = tags
            .iter()
            .fold(self.0, |acc, &t| splitmix(acc ^ splitmix(t)));
        Seed(v)
    }

    pub fn rng(self) -> Rng {
        Rng::new(self)
    }
}

/// xoshiro256** generator.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: Seed) -> Self {
        let mut sm = seed.0;
        let s = [
            splitmix_step(&mut sm),
            splitmix_step(&mut sm),
            splitmix_step(&mut sm),
            splitmix_step(&mut sm),
        ];
        Rng { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn normal_with(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.normal()
    }

    /// Integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
