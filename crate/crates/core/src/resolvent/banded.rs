//! Banded LU with partial pivoting.

use crate::error::{Error, Result};
use crate::linmap::C64;

/// Band storage with kl extra super-diagonals for pivot fill-in.
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    a: Vec<C64>,
    piv: Vec<usize>,
}

impl BandLu {
    /// `entry(i, j)` is read for |i − j| within the band.
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        entry: impl Fn(usize, usize) -> C64,
    ) -> Result<Self> {
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            width,
            a: vec![C64::new(0.0, 0.0); n * width],
            piv: vec![0; n],
        };
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                let k = lu.idx(i, j);
                lu.a[k] = entry(i, j);
            }
        }
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<()> {
        let n = self.n;
        let reach = self.ku + self.kl;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.a[self.idx(k, k)].norm();
            for i in k + 1..=last_row {
                let v = self.a[self.idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Breakdown(format!(
                    "zero pivot in banded LU at row {k}"
                )));
            }
            self.piv[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (x, y) = (self.idx(k, j), self.idx(p, j));
                    self.a.swap(x, y);
                }
            }
            let pivot = self.a[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.a[ik] / pivot;
                self.a[ik] = l;
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..=last_col {
                    let kj = self.a[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.a[ij] -= l * kj;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] -= self.a[self.idx(i, k)] * xk;
            }
        }
        let reach = self.ku + self.kl;
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                acc -= self.a[self.idx(i, j)] * x[j];
            }
            x[i] = acc / self.a[self.idx(i, i)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve_with_pivoting() {
        let n = 40;
        let (kl, ku) = (2, 1);
        let entry = |i: usize, j: usize| {
            let d = i as i64 - j as i64;
            if d > kl as i64 || -d > ku as i64 {
                C64::new(0.0, 0.0)
            } else if i == j {
                // small diagonal forces row swaps
                C64::new(1e-3 * (i % 3) as f64, 0.1)
            } else {
                C64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, (i + j) as f64 * 0.01)
            }
        };
        let lu = BandLu::factor(n, kl, ku, entry).unwrap();
        let m = DMatrix::from_fn(n, n, entry);
        let b = DVector::from_fn(n, |i, _| C64::new(i as f64, 1.0));
        let x = lu.solve(b.as_slice());
        let r = &m * DVector::from_vec(x) - &b;
        assert!(r.norm() < 1e-10 * b.norm());
    }
}
