//! Small dense helpers shared by the propagator and the spectral tools.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    if n == 1 {
        return (vec![h[(0, 0)].re], CMatrix::identity(1, 1));
    }
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Assigns each column of `next` to a column of `prev` maximizing
/// |⟨prev_i|next_j⟩|. Returns `perm` with `perm[i]` = column of `next` that
/// continues column `i` of `prev`.
pub fn match_by_overlap(prev: &CMatrix, next: &CMatrix) -> Vec<usize> {
    let n = prev.ncols();
    let overlaps = prev.adjoint() * next;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pairs.push((overlaps[(i, j)].norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (_, i, j) in pairs {
        if perm[i] == usize::MAX && !used[j] {
            perm[i] = j;
            used[j] = true;
        }
    }
    perm
}

/// Applies exp(-i h dt) to `psi` in place, where `h` may be non-Hermitian.
///
/// The action is evaluated with a truncated Taylor series on sub-intervals
/// short enough that the series converges to machine precision.
pub fn expm_apply(h: &CMatrix, dt: f64, psi: &mut CVector, work: &mut ExpWork) {
    let n = psi.len();
    let norm = one_norm(h) * dt.abs();
    let substeps = (norm / 0.5).ceil().max(1.0) as usize;
    let scale = Complex64::new(0.0, -dt / substeps as f64);
    work.resize(n);
    for _ in 0..substeps {
        work.term.copy_from(psi);
        for k in 1..=40 {
            // term <- (scale h) term / k
            work.tmp.gemv(scale / k as f64, h, &work.term, Complex64::new(0.0, 0.0));
            std::mem::swap(&mut work.term, &mut work.tmp);
            *psi += &work.term;
            let t = work.term.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let p = psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
            if t <= 1e-34 * p.max(1e-300) || t == 0.0 {
                break;
            }
        }
    }
}

/// Scratch buffers for [`expm_apply`].
#[derive(Debug, Default, Clone)]
pub struct ExpWork {
    term: CVector,
    tmp: CVector,
}

impl ExpWork {
    fn resize(&mut self, n: usize) {
        if self.term.len() != n {
            self.term = CVector::zeros(n);
            self.tmp = CVector::zeros(n);
        }
    }
}

pub fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_action_matches_dense_exponential() {
        let h = CMatrix::from_fn(4, 4, |r, c| {
            Complex64::new((r * 3 + c) as f64 * 0.7 - 2.0, if r == c { -0.3 } else { 0.1 * r as f64 })
        });
        let psi0 = CVector::from_fn(4, |i, _| Complex64::new(1.0 + i as f64, -(i as f64)));
        for dt in [1e-3, 0.37, 4.0] {
            let mut psi = psi0.clone();
            let mut work = ExpWork::default();
            expm_apply(&h, dt, &mut psi, &mut work);
            let dense = (h.clone() * Complex64::new(0.0, -dt)).exp() * &psi0;
            let err = (psi - dense).camax();
            assert!(err < 1e-10, "dt {dt}: {err}");
        }
    }

    #[test]
    fn eigh_sorted_and_matched() {
        let h = CMatrix::from_fn(3, 3, |r, c| {
            if r == c {
                Complex64::new([3.0, 1.0, 2.0][r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let (vals, vecs) = eigh(&h);
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        let perm = match_by_overlap(&vecs, &vecs);
        assert_eq!(perm, vec![0, 1, 2]);
    }
}
