//! Global operator assembly and its eigenvalue spectrum.

use super::OperatorProvider;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::linalg::{eigenvalues, DMat};
use crate::taylor::OperatorKind;
use num_complex::Complex64;
use std::io::Write;
use std::path::Path;

/// Dense global operator: row `i` carries the stencil weights of node `i`
/// with `-sum_j w_ji` on the diagonal, so `G phi` evaluates the discrete
/// operator at every node simultaneously.
pub fn assemble_global(
    provider: &dyn OperatorProvider,
    cloud: &PointCloud,
    kind: OperatorKind,
) -> Result<DMat> {
    if !cloud.domain.periodic[0] || !cloud.domain.periodic[1] {
        return Err(Error::invalid(
            "global operator assembly needs a fully periodic cloud",
        ));
    }
    let n = cloud.len();
    let mut g = DMat::zeros(n, n);
    for i in 0..n {
        let (st, w) = provider.weights(cloud, i, kind).map_err(|e| {
            Error::NumericalFailure(format!("provider failed at node {i}: {e}"))
        })?;
        let mut diag = 0.0;
        for (&j, &wv) in st.neighbors.iter().zip(&w.values) {
            *g.at_mut(i, j) += wv;
            diag += wv;
        }
        *g.at_mut(i, i) -= diag;
    }
    Ok(g)
}

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    /// Eigenvalues scaled by `spacing^m` to make them resolution-free.
    pub eigenvalues: Vec<Complex64>,
    pub node_count: usize,
    pub epsilon: f64,
    pub normalization: f64,
}

impl SpectrumReport {
    pub fn max_re(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.re).fold(f64::MIN, f64::max)
    }

    pub fn max_abs_re(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.re.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_im(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.im.abs()).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "re,im")?;
        for e in &self.eigenvalues {
            writeln!(f, "{:.12e},{:.12e}", e.re, e.im)?;
        }
        f.flush()?;
        Ok(())
    }
}

/// All eigenvalues of a global operator matrix, normalized by `s^m`.
pub fn eigen_spectrum(
    matrix: &DMat,
    spacing: f64,
    epsilon: f64,
    kind: OperatorKind,
) -> Result<SpectrumReport> {
    if matrix.rows() != matrix.cols() {
        return Err(Error::invalid("spectrum needs a square matrix"));
    }
    let normalization = spacing.powi(kind.derivative_order());
    let node_count = matrix.rows();
    let mut ev = eigenvalues(matrix.clone())?;
    for e in &mut ev {
        *e *= normalization;
    }
    Ok(SpectrumReport {
        eigenvalues: ev,
        node_count,
        epsilon,
        normalization,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{LabfmProvider, SphProvider};
    use super::*;
    use crate::classical::SphKernel;
    use crate::geometry::generate_perturbed_grid;
    use std::f64::consts::PI;

    #[test]
    fn global_rows_sum_to_zero() {
        let cloud = generate_perturbed_grid(12, 12, 1.0 / 12.0, 0.8, 4).unwrap();
        let labfm = LabfmProvider::new(2).with_stencil_n(16);
        let g = assemble_global(&labfm, &cloud, OperatorKind::Dx).unwrap();
        let ones = vec![1.0; cloud.len()];
        for v in g.matvec(&ones) {
            assert!(v.abs() < 1e-9, "row sum {v}");
        }
    }

    #[test]
    fn uniform_gradient_spectrum_matches_the_circulant_symbol() {
        // on a uniform periodic grid the global operator is block-circulant;
        // its eigenvalues are the Fourier symbol over the wavevector lattice
        let nx = 12usize;
        let s = 1.0 / nx as f64;
        let cloud = generate_perturbed_grid(nx, nx, s, 0.0, 0).unwrap();
        let sph = SphProvider::new(SphKernel::WendlandC2);
        let g = assemble_global(&sph, &cloud, OperatorKind::Dx).unwrap();
        let report = eigen_spectrum(&g, s, 0.0, OperatorKind::Dx).unwrap();

        // symbol oracle from the (identical) stencil of node 0
        let (st, w) = sph.weights(&cloud, 0, OperatorKind::Dx).unwrap();
        let mut want: Vec<Complex64> = Vec::with_capacity(nx * nx);
        for p in 0..nx {
            for q in 0..nx {
                let (kx, ky) = (2.0 * PI * p as f64, 2.0 * PI * q as f64);
                let mut acc = Complex64::new(0.0, 0.0);
                for (o, &wv) in st.offsets.iter().zip(&w.values) {
                    let phase = kx * o[0] + ky * o[1];
                    acc += Complex64::new(phase.cos() - 1.0, phase.sin()) * wv;
                }
                want.push(acc * s);
            }
        }
        // the spectrum is purely imaginary, so pair by imaginary part (the
        // real parts are rounding noise and would scramble a (re, im) sort)
        let by_im = |a: &Complex64, b: &Complex64| {
            a.im.partial_cmp(&b.im).unwrap().then(a.re.partial_cmp(&b.re).unwrap())
        };
        want.sort_by(by_im);
        let mut got = report.eigenvalues.clone();
        got.sort_by(by_im);
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
        // purely imaginary within tolerance
        assert!(report.max_abs_re() <= 1e-10, "max |Re| {}", report.max_abs_re());
    }

    #[test]
    fn morris_laplacian_spectrum_is_real_and_non_positive() {
        let cloud = generate_perturbed_grid(15, 15, 1.0 / 15.0, 1.0, 9).unwrap();
        let sph = SphProvider::new(SphKernel::QuinticSpline);
        let g = assemble_global(&sph, &cloud, OperatorKind::Laplacian).unwrap();
        let report = eigen_spectrum(&g, 1.0 / 15.0, 1.0, OperatorKind::Laplacian).unwrap();
        let scale = report.max_abs_re();
        assert!(report.max_abs_im() <= 1e-8 * scale);
        assert!(report.max_re() <= 1e-10);
    }

    #[test]
    fn relabeling_nodes_preserves_the_spectrum() {
        let nx = 10usize;
        let cloud = generate_perturbed_grid(nx, nx, 0.1, 0.7, 2).unwrap();
        let labfm = LabfmProvider::new(2).with_stencil_n(14);
        let g = assemble_global(&labfm, &cloud, OperatorKind::Dx).unwrap();
        let n = cloud.len();
        let perm = |i: usize| (i * 37 + 11) % n;
        let mut pg = DMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                *pg.at_mut(perm(i), perm(j)) = g.at(i, j);
            }
        }
        let a = eigen_spectrum(&g, 0.1, 0.7, OperatorKind::Dx).unwrap();
        let b = eigen_spectrum(&pg, 0.1, 0.7, OperatorKind::Dx).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).norm() < 1e-8);
        }
    }
}
