//! Addressable space-time white noise.
//!
//! Every standard normal `Z[j][i]` for a given side is a pure function of
//! `(seed, stream_id, j, side, i)`: the ChaCha8 keystream is keyed by the
//! seed, the stream id selects the ChaCha stream, and each `(j, side)` row
//! starts at a fixed word offset. Rows can therefore be regenerated in any
//! order and from any thread.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::Side;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseField {
    seed: u64,
    stream_id: u64,
    n: usize,
    m: usize,
}

impl NoiseField {
    /// Field for a grid with `n` spatial intervals and `m` time steps.
    pub fn new(seed: u64, stream_id: u64, n: usize, m: usize) -> Self {
        Self {
            seed,
            stream_id,
            n,
            m,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn pairs_per_row(&self) -> u128 {
        (self.n as u128 + 2) / 2
    }

    /// Writes the `N+1` normals of row `(j, side)` into `out`.
    pub fn fill(&self, j: usize, side: Side, out: &mut [f64]) -> Result<()> {
        if j >= self.m {
            return Err(Error::NoiseIndex { j, m: self.m });
        }
        assert_eq!(out.len(), self.n + 1, "noise buffer has wrong length");
        let row = 2 * j as u128 + side.index() as u128;
        // Each Box-Muller pair consumes two u64 draws, i.e. four 32-bit words.
        let words_per_row = 4 * self.pairs_per_row();

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos(row * words_per_row);

        for chunk in out.chunks_mut(2) {
            let (a, b) = box_muller(rng.next_u64(), rng.next_u64());
            chunk[0] = a;
            if chunk.len() > 1 {
                chunk[1] = b;
            }
        }
        Ok(())
    }

    pub fn sample(&self, j: usize, side: Side) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n + 1];
        self.fill(j, side, &mut out)?;
        Ok(out)
    }
}

#[inline]
fn box_muller(a: u64, b: u64) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = ((a >> 11) + 1) as f64 * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_reproducible() {
        let nf = NoiseField::new(7, 3, 64, 100);
        let a = nf.sample(17, Side::One).unwrap();
        let b = nf.sample(17, Side::One).unwrap();
        assert_eq!(a, b);
        let copy = NoiseField::new(7, 3, 64, 100);
        assert_eq!(copy.sample(17, Side::One).unwrap(), a);
    }

    #[test]
    fn streams_sides_and_rows_differ() {
        let a = NoiseField::new(1, 0, 32, 10).sample(0, Side::One).unwrap();
        let b = NoiseField::new(1, 1, 32, 10).sample(0, Side::One).unwrap();
        let c = NoiseField::new(1, 0, 32, 10).sample(0, Side::Two).unwrap();
        let d = NoiseField::new(1, 0, 32, 10).sample(1, Side::One).unwrap();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(c, d);
    }

    #[test]
    fn out_of_range_row_is_an_error() {
        let nf = NoiseField::new(1, 0, 8, 5);
        assert!(matches!(nf.sample(5, Side::One), Err(Error::NoiseIndex { j: 5, m: 5 })));
    }

    #[test]
    fn odd_row_length_is_handled() {
        // N = 9 gives 10 values (5 full pairs), N = 10 gives 11 (last pair half used).
        let nf = NoiseField::new(2, 0, 10, 4);
        let row = nf.sample(3, Side::Two).unwrap();
        assert_eq!(row.len(), 11);
        assert!(row.iter().all(|z| z.is_finite()));
    }

    #[test]
    fn moments_of_a_million_variates() {
        let nf = NoiseField::new(12345, 0, 999, 500);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        let mut buf = vec![0.0; 1000];
        for j in 0..500 {
            for side in [Side::One, Side::Two] {
                nf.fill(j, side, &mut buf).unwrap();
                for &z in &buf {
                    sum += z;
                    sum_sq += z * z;
                    count += 1;
                }
            }
        }
        assert_eq!(count, 1_000_000);
        let mean = sum / count as f64;
        let var = sum_sq / count as f64 - mean * mean;
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
    }
}
