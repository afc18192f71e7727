//! Counter-based deterministic random numbers.
//!
//! Every random stream is a pure function of (seed, purpose path, draw index):
//! output_n = mix64(key + (n+1)·φ) with the SplitMix64 finalizer, where the key
//! hashes the seed and a path of u64 labels (chain index, role tags, ...).
//! Streams for different paths are independent of one another and of thread
//! scheduling, which is what makes run artifacts byte-reproducible.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: full-avalanche 64-bit mix.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic stream of random numbers identified by a hashed key.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Stream for `seed` specialized by a purpose path. Equal (seed, path)
    /// always yields the identical stream.
    pub fn from_path(seed: u64, path: &[u64]) -> Self {
        let mut key = mix64(seed ^ GOLDEN);
        for &p in path {
            key = mix64(key.wrapping_add(GOLDEN) ^ mix64(p));
        }
        CounterRng { key, counter: 0 }
    }

    /// Derive an independent sub-stream without disturbing this one.
    pub fn fork(&self, label: u64) -> Self {
        CounterRng {
            key: mix64(self.key.wrapping_add(GOLDEN) ^ mix64(label)),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in 0..n (rejection sampling, exactly unbiased).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0) has no support");
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Poisson draw by the product method; fine for the modest means used by
    /// the reference-measure samplers (requires mean ≤ 256 to stay far from
    /// underflow in the running product).
    pub fn poisson(&mut self, mean: f64) -> usize {
        assert!(
            mean.is_finite() && (0.0..=256.0).contains(&mean),
            "poisson mean {mean} out of supported range"
        );
        let limit = (-mean).exp();
        let mut k = 0usize;
        let mut prod = 1.0f64;
        loop {
            prod *= self.uniform();
            if prod <= limit {
                return k;
            }
            k += 1;
        }
    }
}
