//! Counter-based splittable Gaussian random streams.
//!
//! Draw `k` of a stream is `mix(key + k·gamma)`, with `key` and the odd
//! increment `gamma` derived from `(seed, stream_id)`. Streams therefore
//! need no shared state and any draw is a pure function of
//! `(seed, stream_id, k)`. Normals come from the Box–Muller transform.

use std::f64::consts::TAU;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-task Gaussian stream. Not `Sync`-shared: one owner per stream.
#[derive(Debug, Clone, PartialEq)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    key: u64,
    gamma: u64,
    counter: u64,
    spare: Option<f64>,
}

pub fn gaussian_stream(seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(seed, stream_id)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let s = mix64(seed.wrapping_add(GOLDEN));
        let key = mix64(s ^ mix64(stream_id.wrapping_mul(GOLDEN).wrapping_add(0x632B_E59B_D9B4_E019)));
        let gamma = mix64(key.wrapping_add(stream_id).wrapping_add(GOLDEN)) | 1;
        Self {
            seed,
            stream_id,
            key,
            gamma,
            counter: 0,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 64-bit words consumed so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.key.wrapping_add(self.counter.wrapping_mul(self.gamma)));
        self.counter = self.counter.wrapping_add(1);
        v
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    pub fn next_open_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_open_unit();
        let u2 = self.next_open_unit();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.next_normal();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_streams_agree() {
        let mut a = gaussian_stream(7, 3);
        let mut b = gaussian_stream(7, 3);
        for _ in 0..100 {
            assert_eq!(a.next_normal().to_bits(), b.next_normal().to_bits());
        }
    }

    #[test]
    fn different_streams_differ() {
        let mut a = gaussian_stream(7, 3);
        let mut b = gaussian_stream(7, 4);
        let same = (0..100).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn moments_of_a_million_draws() {
        let n = 1_000_000;
        let mut s = gaussian_stream(20260101, 0);
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.next_normal();
            sum += z;
            sum2 += z * z;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        // 3/sqrt(N) for the mean, 3*sqrt(2/N) for the variance
        assert!(mean.abs() < 0.004, "mean {mean}");
        assert!((var - 1.0).abs() < 0.005, "var {var}");
    }

    #[test]
    fn cross_stream_correlation_is_small() {
        let n = 200_000;
        let mut a = gaussian_stream(1, 0);
        let mut b = gaussian_stream(1, 1);
        let c: f64 = (0..n).map(|_| a.next_normal() * b.next_normal()).sum::<f64>() / n as f64;
        assert!(c.abs() < 4.0 / (n as f64).sqrt(), "corr {c}");
    }
}
