use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// A `t × cols` matrix with entries `±1/√t`, stored as packed sign bits.
/// Row `j` is drawn from its own ChaCha stream, so rows can be regenerated
/// independently from the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SignProjection {
    t: usize,
    cols: usize,
    seed: u64,
    words: usize,
    bits: Vec<u64>,
}

impl SignProjection {
    pub fn new(t: usize, cols: usize, seed: u64) -> Self {
        assert!(t >= 1, "projection needs at least one row");
        let words = cols.div_ceil(64);
        let mut bits = vec![0u64; t * words];
        bits.par_chunks_mut(words.max(1))
            .enumerate()
            .for_each(|(j, row)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j as u64);
                for w in row.iter_mut() {
                    *w = rng.next_u64();
                }
                if cols % 64 != 0 {
                    if let Some(last) = row.last_mut() {
                        *last &= (1u64 << (cols % 64)) - 1;
                    }
                }
            });
        SignProjection {
            t,
            cols,
            seed,
            words,
            bits,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scale(&self) -> f64 {
        1.0 / (self.t as f64).sqrt()
    }

    /// Sign of entry `(j, i)` as `±1`; a set bit means negative.
    pub fn sign(&self, j: usize, i: usize) -> f64 {
        let w = self.bits[j * self.words + i / 64];
        if (w >> (i % 64)) & 1 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn entry(&self, j: usize, i: usize) -> f64 {
        self.sign(j, i) * self.scale()
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        let s = self.scale();
        (0..self.cols).map(|i| self.sign(j, i) * s).collect()
    }

    /// `Q y`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.cols);
        let total: f64 = y.iter().sum();
        let s = self.scale();
        (0..self.t)
            .into_par_iter()
            .map(|j| {
                let row = &self.bits[j * self.words..(j + 1) * self.words];
                let mut neg = 0.0;
                for (wi, &w) in row.iter().enumerate() {
                    let mut w = w;
                    while w != 0 {
                        let b = w.trailing_zeros() as usize;
                        neg += y[wi * 64 + b];
                        w &= w - 1;
                    }
                }
                s * (total - 2.0 * neg)
            })
            .collect()
    }
}

pub fn jl_matrix(t: usize, cols: usize, seed: u64) -> SignProjection {
    SignProjection::new(t, cols, seed)
}

/// `⌈c · ln n / β²⌉`, at least 1.
pub fn jl_rows(n: usize, beta: f64, c_jl: f64) -> usize {
    let n = n.max(2) as f64;
    ((c_jl * n.ln() / (beta * beta)).ceil() as usize).max(1)
}
