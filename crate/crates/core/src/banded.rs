//! Banded LU factorization with partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout: column `j` holds rows
//! `j - ku - kl ..= j + kl`, the extra `kl` superdiagonals absorbing fill-in
//! from row interchanges. Pivot searches are confined to the `kl` rows below
//! the diagonal, which for collocation matrices is exactly the overlap of
//! neighbouring blocks.

use std::cell::Cell;

use crate::CollocationError;

thread_local! {
    static FACTORIZATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of factorizations performed on the current thread.
pub fn factorization_count() -> usize {
    FACTORIZATIONS.with(Cell::get)
}

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            data: vec![0.0; ld * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku + self.kl >= j && i <= j + self.kl, "({i}, {j}) outside band");
        j * self.ld + (self.kl + self.ku + i - j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku < j || i > j + self.kl {
            0.0
        } else {
            self.data[self.index(i, j)]
        }
    }

    /// Panics when `(i, j)` lies outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i + self.ku >= j && i <= j + self.kl, "({i}, {j}) outside band");
        let k = self.index(i, j);
        self.data[k] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(i + self.ku >= j && i <= j + self.kl, "({i}, {j}) outside band");
        let k = self.index(i, j);
        self.data[k] += value;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, o) in out.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            *o = (lo..=hi).map(|j| self.get(i, j) * x[j]).sum();
        }
        out
    }

    pub fn factor(mut self) -> Result<BandLu, CollocationError> {
        FACTORIZATIONS.with(|c| c.set(c.get() + 1));
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut pivots = Vec::with_capacity(n);
        for j in 0..n {
            let below = kl.min(n - 1 - j);
            let mut p = j;
            let mut best = self.data[self.index(j, j)].abs();
            for i in j + 1..=j + below {
                let v = self.data[self.index(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > scale * 1e-15) || !best.is_finite() {
                return Err(CollocationError::Singular {
                    column: j,
                    pivot: self.data[self.index(p, j)],
                });
            }
            pivots.push(p);
            let last = (j + ku + kl).min(n - 1);
            if p != j {
                for c in j..=last {
                    let (a, b) = (self.index(j, c), self.index(p, c));
                    self.data.swap(a, b);
                }
            }
            let diag = self.data[self.index(j, j)];
            for i in j + 1..=j + below {
                let li = self.index(i, j);
                let l = self.data[li] / diag;
                self.data[li] = l;
                if l != 0.0 {
                    for c in j + 1..=last {
                        let u = self.data[self.index(j, c)];
                        let k = self.index(i, c);
                        self.data[k] -= l * u;
                    }
                }
            }
        }
        Ok(BandLu { lu: self, pivots })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.lu.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let a = &self.lu;
        let n = a.n;
        assert_eq!(b.len(), n);
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                for i in j + 1..=(j + a.kl).min(n - 1) {
                    b[i] -= a.data[a.index(i, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let last = (j + a.ku + a.kl).min(n - 1);
            let mut s = b[j];
            for c in j + 1..=last {
                s -= a.data[a.index(j, c)] * b[c];
            }
            b[j] = s / a.data[a.index(j, j)];
        }
    }
}
