//! LU factorization with partial pivoting for the small square systems
//! arising from per-stencil moment conditions, plus a Hager-style 1-norm
//! condition estimator and one step of iterative refinement.

use super::DMat;
use crate::error::{Error, Result};

pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &DMat) -> Result<Lu> {
        assert_eq!(a.rows(), a.cols());
        let n = a.rows();
        let mut lu = a.data().to_vec();
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for i in (k + 1)..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SolveFailure(format!(
                    "singular moment matrix (pivot {k} of {n})"
                )));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let l = lu[i * n + k] / pivot;
                lu[i * n + k] = l;
                for j in (k + 1)..n {
                    lu[i * n + j] -= l * lu[k * n + j];
                }
            }
        }
        Ok(Lu { n, lu, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        // multiplier rows were swapped in full during factorization, so all
        // pivot swaps must be applied before substitution starts
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for k in 0..n {
            let xk = x[k];
            for i in (k + 1)..n {
                x[i] -= self.lu[i * n + k] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in (k + 1)..n {
                acc -= self.lu[k * n + j] * x[j];
            }
            x[k] = acc / self.lu[k * n + k];
        }
        x
    }

    /// Solve `A^T x = b` using the same factorization.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        // U^T w = b (forward)
        for k in 0..n {
            let mut acc = x[k];
            for i in 0..k {
                acc -= self.lu[i * n + k] * x[i];
            }
            x[k] = acc / self.lu[k * n + k];
        }
        // L^T v = w (backward, unit diagonal)
        for k in (0..n).rev() {
            let mut acc = x[k];
            for i in (k + 1)..n {
                acc -= self.lu[i * n + k] * x[i];
            }
            x[k] = acc;
        }
        // x = P^T v
        for k in (0..n).rev() {
            x.swap(k, self.piv[k]);
        }
        x
    }

    /// Solve with one step of iterative refinement; returns the solution and
    /// the infinity norm of its final residual `A x - b`.
    pub fn solve_refined(&self, a: &DMat, b: &[f64]) -> (Vec<f64>, f64) {
        let mut x = self.solve(b);
        let mut r = residual(a, &x, b);
        let dx = self.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi -= di;
        }
        r = residual(a, &x, b);
        let rnorm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (x, rnorm)
    }

    /// 1-norm condition estimate `||A||_1 * est(||A^-1||_1)` via Hager's
    /// power iteration on the dual norm.
    pub fn condition_estimate(&self, a: &DMat) -> f64 {
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0f64;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.abs()).sum();
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&xi);
            let (mut jmax, mut zmax) = (0usize, 0.0f64);
            for (j, v) in z.iter().enumerate() {
                if v.abs() > zmax {
                    zmax = v.abs();
                    jmax = j;
                }
            }
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= zx {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        a.norm_1() * est
    }
}

fn residual(a: &DMat, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x);
    ax.iter().zip(b).map(|(p, q)| p - q).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, v: &[f64]) -> DMat {
        DMat::from_rows(rows, cols, v.to_vec())
    }

    #[test]
    fn solves_a_known_system() {
        let a = mat(3, 3, &[2.0, 1.0, 1.0, 1.0, 3.0, 2.0, 1.0, 0.0, 0.0]);
        let lu = Lu::factor(&a).unwrap();
        let x = lu.solve(&[4.0, 5.0, 6.0]);
        // exact solution (6, 15, -23)
        assert!((x[0] - 6.0).abs() < 1e-12);
        assert!((x[1] - 15.0).abs() < 1e-12);
        assert!((x[2] + 23.0).abs() < 1e-12);
    }

    #[test]
    fn transpose_solve_matches_explicit_transpose() {
        let a = mat(
            4,
            4,
            &[
                4.0, -2.0, 1.0, 3.0, 0.5, 6.0, -1.0, 2.0, 2.0, 1.0, 5.0, -3.0, 1.0, -1.0, 0.0, 7.0,
            ],
        );
        let b = [1.0, -2.0, 0.5, 3.0];
        let lu = Lu::factor(&a).unwrap();
        let xt = lu.solve_transpose(&b);
        let mut at = DMat::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                *at.at_mut(j, i) = a.at(i, j);
            }
        }
        let want = Lu::factor(&at).unwrap().solve(&b);
        for (p, q) in xt.iter().zip(&want) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = mat(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(Lu::factor(&a).is_err());
    }

    #[test]
    fn condition_estimate_tracks_the_true_condition() {
        // diag(1, 1e-6): cond_1 = 1e6
        let a = mat(2, 2, &[1.0, 0.0, 0.0, 1e-6]);
        let lu = Lu::factor(&a).unwrap();
        let est = lu.condition_estimate(&a);
        assert!((est - 1e6).abs() / 1e6 < 1e-10, "estimate {est}");
    }

    #[test]
    fn refinement_reduces_the_residual() {
        let n = 12;
        let mut a = DMat::zeros(n, n);
        let mut state = 7u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in 0..n {
                *a.at_mut(i, j) = rnd() + if i == j { 3.0 } else { 0.0 };
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rnd()).collect();
        let lu = Lu::factor(&a).unwrap();
        let (_, rnorm) = lu.solve_refined(&a, &b);
        assert!(rnorm < 1e-14, "residual {rnorm}");
    }
}
