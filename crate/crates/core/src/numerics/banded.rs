use std::collections::VecDeque;

use super::{CsrMatrix, CsrPattern, Scalar};
use crate::error::{check_len, Error, Result};

/// Reverse Cuthill-McKee ordering of a structurally symmetric pattern.
///
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(pattern: &CsrPattern) -> Vec<usize> {
    let n = pattern.nrows();
    let degree: Vec<usize> = (0..n).map(|i| pattern.row(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| degree[i]);

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(pattern, seed, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = pattern
                .row(v)
                .iter()
                .copied()
                .filter(|&u| !visited[u])
                .collect();
            next.sort_by_key(|&u| degree[u]);
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Start node for a level structure: repeatedly jump to a far low-degree node.
fn pseudo_peripheral(pattern: &CsrPattern, seed: usize, degree: &[usize]) -> usize {
    let mut node = seed;
    let mut depth = 0;
    for _ in 0..8 {
        let (far, d) = farthest(pattern, node, degree);
        if d <= depth {
            break;
        }
        depth = d;
        node = far;
    }
    node
}

fn farthest(pattern: &CsrPattern, start: usize, degree: &[usize]) -> (usize, usize) {
    let n = pattern.nrows();
    let mut level = vec![usize::MAX; n];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut best = (start, 0);
    while let Some(v) = queue.pop_front() {
        let l = level[v];
        if l > best.1 || (l == best.1 && degree[v] < degree[best.0]) {
            best = (v, l);
        }
        for &u in pattern.row(v) {
            if level[u] == usize::MAX {
                level[u] = l + 1;
                queue.push_back(u);
            }
        }
    }
    best
}

/// Banded `L D L^T` factorization without pivoting, after RCM reordering.
///
/// Used for real SPD matrices and for complex symmetric `z M + S`, whose
/// rotated Hermitian part is positive definite so all pivots stay away from 0.
#[derive(Debug, Clone)]
pub struct BandLdlt<T> {
    n: usize,
    bw: usize,
    perm: Vec<usize>,
    inv: Vec<usize>,
    // row i holds L[i][i-bw..i] in slots i*bw..(i+1)*bw
    lower: Vec<T>,
    diag: Vec<T>,
}

impl<T: Scalar> BandLdlt<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        Self::factor_impl(a, false)
    }

    /// Like [`factor`](Self::factor) but rejects pivots that are not positive reals.
    pub fn factor_spd(a: &CsrMatrix<T>) -> Result<Self> {
        Self::factor_impl(a, true)
    }

    fn factor_impl(a: &CsrMatrix<T>, spd: bool) -> Result<Self> {
        let n = a.nrows();
        check_len(n, a.ncols())?;
        if !a.pattern().is_structurally_symmetric() {
            return Err(Error::InvalidArgument(
                "band factorization needs a structurally symmetric matrix".into(),
            ));
        }
        let perm = reverse_cuthill_mckee(a.pattern());
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut bw = 0;
        for r in 0..n {
            for (c, _) in a.row(r) {
                bw = bw.max(inv[r].abs_diff(inv[c]));
            }
        }
        let bw = bw.max(1);
        let mut lower = vec![T::zero(); n * bw];
        let mut diag = vec![T::zero(); n];
        let mut scale = 0.0f64;
        for r in 0..n {
            let i = inv[r];
            for (c, v) in a.row(r) {
                let j = inv[c];
                if j < i {
                    lower[i * bw + j + bw - i] = v;
                } else if j == i {
                    diag[i] = v;
                    scale = scale.max(v.modulus());
                }
            }
        }
        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);

        let mut work = vec![T::zero(); bw];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = lower[i * bw + j + bw - i];
                for k in jlo..j {
                    s -= work[k + bw - i] * lower[j * bw + k + bw - j];
                }
                let lij = s / diag[j];
                lower[i * bw + j + bw - i] = lij;
                work[j + bw - i] = lij * diag[j];
            }
            let mut d = diag[i];
            for k in lo..i {
                d -= work[k + bw - i] * lower[i * bw + k + bw - i];
            }
            if spd && !(d.re() > tiny && d.im() == 0.0) {
                return Err(Error::NotPositiveDefinite {
                    index: perm[i],
                    value: d.re(),
                });
            }
            if !(d.modulus() > tiny) {
                return Err(Error::SingularPivot { index: perm[i] });
            }
            diag[i] = d;
        }
        Ok(Self {
            n,
            bw,
            perm,
            inv,
            lower,
            diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let bw = self.bw;
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for k in lo..i {
                s -= self.lower[i * bw + k + bw - i] * y[k];
            }
            y[i] = s;
        }
        for (yi, &d) in y.iter_mut().zip(&self.diag) {
            *yi /= d;
        }
        for i in (0..self.n).rev() {
            let yi = y[i];
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                let l = self.lower[i * bw + k + bw - i];
                y[k] -= l * yi;
            }
        }
        (0..self.n).map(|old| y[self.inv[old]]).collect()
    }

    pub fn try_solve(&self, b: &[T]) -> Result<Vec<T>> {
        check_len(self.n, b.len())?;
        Ok(self.solve(b))
    }
}

impl BandLdlt<f64> {
    /// Solve with a complex right-hand side using the real factor.
    pub fn solve_complex(&self, b: &[super::C64]) -> Vec<super::C64> {
        let (re, im) = super::split(b);
        super::join(&self.solve(&re), &self.solve(&im))
    }
}
