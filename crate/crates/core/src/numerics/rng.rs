//! Counter-based pseudo-random generator with labeled splitting. Every
//! consumer derives its own substream from the root seed, so adding or
//! reordering one consumer never shifts the draws seen by another.
//!
//! The stream is the SplitMix64 sequence: output i is a bijective mix of
//! `key + i*GOLDEN`. Splitting hashes the parent key with a label (or
//! index) under distinct salts, giving statistically independent children.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const LABEL_SALT: u64 = 0x1bd1_1bda_a9fc_1a22;
const INDEX_SALT: u64 = 0xd6e8_feb8_6659_fd93;

fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_label(label: &str) -> u64 {
    // FNV-1a over the label bytes.
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in label.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic splittable RNG.
#[derive(Debug, Clone)]
pub struct Rng {
    key: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            key: mix64(seed ^ GOLDEN),
            counter: 0,
        }
    }

    /// Derives an independent substream named by `label`. Splitting does
    /// not advance this generator.
    pub fn split(&self, label: &str) -> Rng {
        Rng {
            key: mix64(self.key ^ LABEL_SALT ^ mix64(hash_label(label))),
            counter: 0,
        }
    }

    /// Derives an independent substream for item `index`.
    pub fn split_index(&self, index: u64) -> Rng {
        Rng {
            key: mix64(self.key ^ INDEX_SALT ^ index.wrapping_mul(GOLDEN)),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in {0, 1, ..., n-1}. n must be positive.
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal draw via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i + 1);
            xs.swap(i, j);
        }
    }
}
