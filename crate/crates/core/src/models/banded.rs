//! Symmetric positive definite band matrices with an in-place Cholesky solve.

use crate::error::{Error, Result};

/// Lower band storage: `data[i * (bw + 1) + (i - j)]` holds `A[i][j]` for `i - bw <= j <= i`.
#[derive(Clone, Debug)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (i - j)
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`); requires `j <= i`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        let k = self.at(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.at(i, j)]
        }
    }

    /// Replaces row and column `dof` by the identity.
    pub fn constrain(&mut self, dof: usize) {
        for j in dof.saturating_sub(self.bw)..dof {
            let k = self.at(dof, j);
            self.data[k] = 0.0;
        }
        for i in dof + 1..(dof + self.bw + 1).min(self.n) {
            let k = self.at(i, dof);
            self.data[k] = 0.0;
        }
        let k = self.at(dof, dof);
        self.data[k] = 1.0;
    }

    /// Solves `A x = b`, consuming the matrix.
    pub fn solve(mut self, mut b: Vec<f64>) -> Result<Vec<f64>> {
        let (n, bw) = (self.n, self.bw);
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = self.data[self.at(i, j)];
                for k in lo.max(j.saturating_sub(bw))..j {
                    s -= self.data[self.at(i, k)] * self.data[self.at(j, k)];
                }
                let idx = self.at(i, j);
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::Singular(format!("band matrix not positive definite at row {i}")));
                    }
                    self.data[idx] = s.sqrt();
                } else {
                    self.data[idx] = s / self.data[self.at(j, j)];
                }
            }
        }
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.data[self.at(i, k)] * b[k];
            }
            b[i] = s / self.data[self.at(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.data[self.at(k, i)] * b[k];
            }
            b[i] = s / self.data[self.at(i, i)];
        }
        Ok(b)
    }
}
