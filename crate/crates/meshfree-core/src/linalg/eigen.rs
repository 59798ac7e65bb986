//! Eigenvalues of a real square matrix: Householder reduction to upper
//! Hessenberg form followed by Francis double-shift QR iteration with
//! deflation (the classic EISPACK `hqr` scheme, eigenvalues only).

use super::DMat;
use crate::error::{Error, Result};
use num_complex::Complex64;

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Reduce `a` to upper Hessenberg form in place by orthogonal similarity.
fn hessenberg(a: &mut DMat) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0f64; n];
    for k in 0..n - 2 {
        let mut xnorm2 = 0.0;
        for i in (k + 1)..n {
            xnorm2 += a.at(i, k) * a.at(i, k);
        }
        if xnorm2 == 0.0 {
            continue;
        }
        let xnorm = xnorm2.sqrt();
        let x0 = a.at(k + 1, k);
        let alpha = if x0 >= 0.0 { -xnorm } else { xnorm };
        v[k + 1] = x0 - alpha;
        for i in (k + 2)..n {
            v[i] = a.at(i, k);
        }
        let vtv: f64 = v[(k + 1)..n].iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        // left: A <- (I - beta v v^T) A on rows k+1.., cols k..
        for j in k..n {
            let mut s = 0.0;
            for i in (k + 1)..n {
                s += v[i] * a.at(i, j);
            }
            s *= beta;
            for i in (k + 1)..n {
                *a.at_mut(i, j) -= s * v[i];
            }
        }
        // right: A <- A (I - beta v v^T) on cols k+1..
        for i in 0..n {
            let mut s = 0.0;
            for j in (k + 1)..n {
                s += a.at(i, j) * v[j];
            }
            s *= beta;
            for j in (k + 1)..n {
                *a.at_mut(i, j) -= s * v[j];
            }
        }
        *a.at_mut(k + 1, k) = alpha;
        for i in (k + 2)..n {
            *a.at_mut(i, k) = 0.0;
        }
    }
}

/// All eigenvalues of a real square matrix. Complex pairs come out
/// conjugate; the result is sorted by (re, im) for determinism.
pub fn eigenvalues(mut a: DMat) -> Result<Vec<Complex64>> {
    if a.rows() != a.cols() {
        return Err(Error::invalid("eigenvalue solver needs a square matrix"));
    }
    if a.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    hessenberg(&mut a);
    let mut wr = vec![0.0f64; n];
    let mut wi = vec![0.0f64; n];
    hqr(&mut a, &mut wr, &mut wi)?;
    let mut out: Vec<Complex64> = wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex64::new(re, im))
        .collect();
    out.sort_by(|p, q| {
        p.re.partial_cmp(&q.re)
            .unwrap()
            .then(p.im.partial_cmp(&q.im).unwrap())
    });
    Ok(out)
}

/// Francis double-shift QR on an upper Hessenberg matrix, eigenvalues only.
#[allow(clippy::many_single_char_names)]
fn hqr(a: &mut DMat, wr: &mut [f64], wi: &mut [f64]) -> Result<()> {
    let n = a.rows();
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a.at(i, j).abs();
        }
    }
    if anorm == 0.0 {
        // zero matrix
        return Ok(());
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0f64;
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nnu = nn as usize;
            // look for a negligible subdiagonal element
            let mut l = 0usize;
            for ll in (1..=nnu).rev() {
                let s0 = a.at(ll - 1, ll - 1).abs() + a.at(ll, ll).abs();
                let s0 = if s0 == 0.0 { anorm } else { s0 };
                if a.at(ll, ll - 1).abs() <= eps * s0 {
                    *a.at_mut(ll, ll - 1) = 0.0;
                    l = ll;
                    break;
                }
            }
            let x = a.at(nnu, nnu);
            if l == nnu {
                // one real root
                wr[nnu] = x + t;
                wi[nnu] = 0.0;
                nn -= 1;
                break;
            }
            let y = a.at(nnu - 1, nnu - 1);
            let w = a.at(nnu, nnu - 1) * a.at(nnu - 1, nnu);
            if l + 1 == nnu {
                // a 2x2 block: two roots
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x = x + t;
                if q >= 0.0 {
                    let z = p + sign(z, p);
                    wr[nnu - 1] = x + z;
                    wr[nnu] = if z != 0.0 { x - w / z } else { x + z };
                    wi[nnu - 1] = 0.0;
                    wi[nnu] = 0.0;
                } else {
                    wr[nnu - 1] = x + p;
                    wr[nnu] = x + p;
                    wi[nnu - 1] = -z;
                    wi[nnu] = z;
                }
                nn -= 2;
                break;
            }
            if its == 40 {
                return Err(Error::NumericalFailure(
                    "QR iteration did not converge within 40 sweeps".into(),
                ));
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 || its == 30 {
                // exceptional shift
                t += x;
                for i in 0..=nnu {
                    *a.at_mut(i, i) -= x;
                }
                let s = a.at(nnu, nnu - 1).abs() + a.at(nnu - 1, nnu - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // find two consecutive small subdiagonals for the sweep start
            let mut m = l;
            let mut p = 0.0;
            let mut q = 0.0;
            let mut r = 0.0;
            for mm in (l..=nnu - 2).rev() {
                let z = a.at(mm, mm);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a.at(mm + 1, mm) + a.at(mm, mm + 1);
                q = a.at(mm + 1, mm + 1) - z - rr - ss;
                r = a.at(mm + 2, mm + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                m = mm;
                if mm == l {
                    break;
                }
                let u = a.at(mm, mm - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (a.at(mm - 1, mm - 1).abs() + z.abs() + a.at(mm + 1, mm + 1).abs());
                if u <= eps * v {
                    break;
                }
            }
            for i in (m + 2)..=nnu {
                *a.at_mut(i, i - 2) = 0.0;
                if i != m + 2 {
                    *a.at_mut(i, i - 3) = 0.0;
                }
            }
            // double QR sweep over rows m..nn
            for k in m..nnu {
                if k != m {
                    p = a.at(k, k - 1);
                    q = a.at(k + 1, k - 1);
                    r = if k + 1 != nnu { a.at(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        let v = -a.at(k, k - 1);
                        *a.at_mut(k, k - 1) = v;
                    }
                } else {
                    *a.at_mut(k, k - 1) = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                // row modification
                for j in k..=nnu {
                    let mut pp = a.at(k, j) + q * a.at(k + 1, j);
                    if k + 1 != nnu {
                        pp += r * a.at(k + 2, j);
                        *a.at_mut(k + 2, j) -= pp * z;
                    }
                    *a.at_mut(k + 1, j) -= pp * y;
                    *a.at_mut(k, j) -= pp * x;
                }
                // column modification
                let mmin = nnu.min(k + 3);
                for i in l..=mmin {
                    let mut pp = x * a.at(i, k) + y * a.at(i, k + 1);
                    if k + 1 != nnu {
                        pp += z * a.at(i, k + 2);
                        *a.at_mut(i, k + 2) -= pp * r;
                    }
                    *a.at_mut(i, k + 1) -= pp * q;
                    *a.at_mut(i, k) -= pp;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul(a: &DMat, b: &DMat) -> DMat {
        let mut c = DMat::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for k in 0..a.cols() {
                let v = a.at(i, k);
                for j in 0..b.cols() {
                    *c.at_mut(i, j) += v * b.at(k, j);
                }
            }
        }
        c
    }

    fn trace(a: &DMat) -> f64 {
        (0..a.rows()).map(|i| a.at(i, i)).sum()
    }

    fn rand_mat(n: usize, seed: u64, symmetric: bool) -> DMat {
        let mut state = seed.max(1);
        let mut rnd = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut a = DMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                *a.at_mut(i, j) = rnd();
            }
        }
        if symmetric {
            for i in 0..n {
                for j in 0..i {
                    let v = 0.5 * (a.at(i, j) + a.at(j, i));
                    *a.at_mut(i, j) = v;
                    *a.at_mut(j, i) = v;
                }
            }
        }
        a
    }

    #[test]
    fn diagonal_matrix_returns_its_diagonal() {
        let mut a = DMat::zeros(5, 5);
        for (i, v) in [3.0, -1.0, 0.5, 7.0, 2.0].iter().enumerate() {
            *a.at_mut(i, i) = *v;
        }
        let ev = eigenvalues(a).unwrap();
        let mut want = [3.0, -1.0, 0.5, 7.0, 2.0];
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (e, w) in ev.iter().zip(want) {
            assert!((e.re - w).abs() < 1e-12 && e.im == 0.0);
        }
    }

    #[test]
    fn tridiagonal_three_by_three_matches_cubic_roots() {
        // characteristic roots of [[2,1,0],[1,2,1],[0,1,2]]: 2, 2 +/- sqrt(2)
        let a = DMat::from_rows(3, 3, vec![2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
        let ev = eigenvalues(a).unwrap();
        let mut want = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (e, w) in ev.iter().zip(want) {
            assert!((e.re - w).abs() < 1e-12, "{} vs {}", e.re, w);
            assert!(e.im.abs() < 1e-14);
        }
    }

    #[test]
    fn rotation_block_gives_a_conjugate_pair() {
        let a = DMat::from_rows(2, 2, vec![0.0, -1.0, 1.0, 0.0]);
        let ev = eigenvalues(a).unwrap();
        assert!((ev[0].im + 1.0).abs() < 1e-14 && ev[0].re.abs() < 1e-14);
        assert!((ev[1].im - 1.0).abs() < 1e-14 && ev[1].re.abs() < 1e-14);
    }

    #[test]
    fn jordan_block_is_handled() {
        let a = DMat::from_rows(2, 2, vec![1.0, 1.0, 0.0, 1.0]);
        let ev = eigenvalues(a).unwrap();
        for e in ev {
            assert!((e.re - 1.0).abs() < 1e-7 && e.im.abs() < 1e-7);
        }
    }

    #[test]
    fn symmetric_spectrum_is_real_and_matches_power_traces() {
        let a = rand_mat(40, 77, true);
        let ev = eigenvalues(a.clone()).unwrap();
        assert!(ev.iter().all(|e| e.im.abs() < 1e-9));
        let a2 = matmul(&a, &a);
        let a3 = matmul(&a2, &a);
        // moment matching: sum(lambda^k) == trace(A^k)
        let s1: f64 = ev.iter().map(|e| e.re).sum();
        let m2: f64 = ev.iter().map(|e| (e * e).re).sum();
        let m3: f64 = ev.iter().map(|e| (e * e * e).re).sum();
        assert!((s1 - trace(&a)).abs() < 1e-8);
        assert!((m2 - trace(&a2)).abs() < 1e-8);
        assert!((m3 - trace(&a3)).abs() < 1e-8);
    }

    #[test]
    fn nonsymmetric_spectrum_matches_power_traces() {
        let a = rand_mat(30, 1234, false);
        let ev = eigenvalues(a.clone()).unwrap();
        let a2 = matmul(&a, &a);
        let a3 = matmul(&a2, &a);
        let s1: f64 = ev.iter().map(|e| e.re).sum();
        let m2: f64 = ev.iter().map(|e| (e * e).re).sum();
        let m3: f64 = ev.iter().map(|e| (e * e * e).re).sum();
        assert!((s1 - trace(&a)).abs() < 1e-9, "{s1} vs {}", trace(&a));
        assert!((m2 - trace(&a2)).abs() < 1e-8);
        assert!((m3 - trace(&a3)).abs() < 1e-8);
        // imaginary parts come in conjugate pairs
        let im_sum: f64 = ev.iter().map(|e| e.im).sum();
        assert!(im_sum.abs() < 1e-10);
    }

    #[test]
    fn permutation_similarity_preserves_the_spectrum() {
        let n = 24;
        let a = rand_mat(n, 9, false);
        // cyclic relabeling P A P^-1
        let mut b = DMat::zeros(n, n);
        let perm = |i: usize| (i * 7 + 3) % n;
        for i in 0..n {
            for j in 0..n {
                *b.at_mut(perm(i), perm(j)) = a.at(i, j);
            }
        }
        let ea = eigenvalues(a).unwrap();
        let eb = eigenvalues(b).unwrap();
        for (p, q) in ea.iter().zip(&eb) {
            assert!((p - q).norm() < 1e-8, "{p} vs {q}");
        }
    }
}
