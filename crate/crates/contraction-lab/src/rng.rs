//! Deterministic, documented randomness.
//!
//! All randomness in this crate flows from a single 64-bit seed through a
//! pinned generator so that results reproduce bit-for-bit across runs,
//! platforms, and reimplementations:
//!
//! - state expansion: SplitMix64 (Steele, Lea, Flood 2014);
//! - stream: xoshiro256** (Blackman, Vigna 2018);
//! - uniform doubles: the top 53 bits of each output, scaled by 2^-53;
//! - standard normals: Box-Muller on two fresh uniforms, cosine branch only.
//!
//! Do not swap either algorithm; recorded traces and golden files depend on
//! the exact stream.

use crate::matrix::{dot, norm, Matrix};

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// xoshiro256** stream seeded via SplitMix64.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let mut s = [0u64; 4];
        for slot in &mut s {
            *slot = splitmix64(&mut sm);
        }
        Rng { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1]
            .wrapping_mul(5)
            .rotate_left(7)
            .wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1): 53 significant bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        (self.uniform() * n as f64) as usize % n
    }

    /// Standard normal via Box-Muller (cosine branch). Each call consumes
    /// exactly two uniforms; no state is cached.
    pub fn normal(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn normal_vec(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.normal()).collect()
    }

    /// Random unit vector (normalized standard-normal draw).
    pub fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v = self.normal_vec(dim);
            let n = norm(&v);
            if n > 1e-8 {
                return v.iter().map(|x| x / n).collect();
            }
        }
    }

    /// Standard-normal matrix, filled row-major.
    pub fn normal_matrix(&mut self, dim: usize) -> Matrix {
        let mut m = Matrix::zero(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, self.normal());
            }
        }
        m
    }

    /// Random orthogonal matrix: modified Gram-Schmidt on the columns of a
    /// standard-normal matrix. The diagonal of the implicit R factor is
    /// positive by construction, so the result is a deterministic function of
    /// the stream.
    pub fn orthogonal(&mut self, dim: usize) -> Matrix {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
        while cols.len() < dim {
            let mut v = self.normal_vec(dim);
            for q in &cols {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
            let n = norm(&v);
            if n < 1e-8 {
                continue; // essentially never: redraw a dependent column
            }
            cols.push(v.iter().map(|x| x / n).collect());
        }
        Matrix::from_fn(dim, |i, j| cols[j][i])
    }

    /// Random rank-`rank` orthogonal projection: the Gram product of the
    /// first `rank` columns of a random orthogonal matrix.
    pub fn projection(&mut self, dim: usize, rank: usize) -> crate::symmat::SymMatrix {
        assert!(rank <= dim);
        let q = self.orthogonal(dim);
        let mut p = Matrix::zero(dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut s = 0.0;
                for c in 0..rank {
                    s += q.get(i, c) * q.get(j, c);
                }
                p.set(i, j, s);
            }
        }
        crate::symmat::SymMatrix::symmetrize(&p)
    }
}
