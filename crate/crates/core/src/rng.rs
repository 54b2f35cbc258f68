//! Counter-based random streams.
//!
//! Every random quantity in the workspace is addressed, not drawn from a
//! shared mutable generator: matrix entry (i, j) of the sample with seed s
//! always sees the same stream, no matter which thread touches it or in
//! which order. That makes Monte Carlo runs reproducible bit for bit for
//! any worker count.
//!
//! The generator is the SplitMix64 finalizer applied to `key + k * GOLDEN`,
//! with the key itself derived by chaining the finalizer over the address
//! coordinates.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain tags keep unrelated consumers of the same seed decorrelated.
pub mod domain {
    pub const MATRIX: u64 = 1;
    pub const TRIAL: u64 = 2;
    pub const LIMIT_SAMPLE: u64 = 3;
    pub const SPHERE: u64 = 4;
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A stream of pseudo-random words addressed by (seed, domain, i, j).
#[derive(Clone, Debug)]
pub struct Stream {
    key: u64,
    ctr: u64,
}

impl Stream {
    pub fn for_cell(seed: u64, domain: u64, i: u64, j: u64) -> Stream {
        let mut k = mix(seed.wrapping_add(GOLDEN.wrapping_mul(domain)));
        k = mix(k.wrapping_add(GOLDEN.wrapping_mul(i)));
        k = mix(k.wrapping_add(GOLDEN.wrapping_mul(j)));
        Stream { key: k, ctr: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.ctr = self.ctr.wrapping_add(1);
        mix(self.key.wrapping_add(GOLDEN.wrapping_mul(self.ctr)))
    }

    /// Uniform on (0, 1]; never returns 0, so it is safe under `ln`.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal via Box-Muller.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let u = self.next_uniform();
        let v = self.next_uniform();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }

    /// Fair sign.
    #[inline]
    pub fn next_sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// The per-trial seed used by Monte Carlo drivers: a pure function of the
/// master seed and the trial index.
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    Stream::for_cell(master_seed, domain::TRIAL, trial_index, 0).next_u64()
}
