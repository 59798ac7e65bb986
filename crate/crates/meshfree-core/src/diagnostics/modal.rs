//! Modal (effective-wavenumber) response of discrete operators.
//!
//! Each stencil is probed with a single Fourier mode. For a first
//! derivative the effective wavenumber splits into a dispersive real part
//! `sum_j sin(k . x_ji) w_ji` and a dissipative imaginary part
//! `sum_j (1 - cos(k . x_ji)) w_ji`; the Laplacian response swaps the
//! roles. Curves are arithmetic means over all interior stencils.

use super::{is_interior, OperatorProvider};
use crate::classical::{OperatorWeights, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Stencil};
use crate::taylor::OperatorKind;
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Debug)]
pub struct ModalResponseReport {
    pub provider: String,
    pub kind: OperatorKind,
    /// k_y / k_x direction ratio of the probe mode.
    pub ratio: f64,
    /// Wavenumbers normalized by the Nyquist wavenumber pi/s.
    pub k_hat: Vec<f64>,
    /// Stencil-averaged real part of k_eff (gradient) or q2_eff (Laplacian).
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub k_nyquist: f64,
    pub stencil_count: usize,
}

impl ModalResponseReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "k_hat,re,im")?;
        for i in 0..self.k_hat.len() {
            writeln!(f, "{},{:.9e},{:.9e}", self.k_hat[i], self.re[i], self.im[i])?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Stencil-averaged modal response over a normalized wavenumber grid.
pub fn modal_response(
    provider: &dyn OperatorProvider,
    kind: OperatorKind,
    cloud: &PointCloud,
    k_hats: &[f64],
    ratio: f64,
) -> Result<ModalResponseReport> {
    if k_hats.is_empty() || k_hats.iter().any(|&k| !(0.0..=1.0).contains(&k) || k == 0.0) {
        return Err(Error::invalid("normalized wavenumbers must lie in (0, 1]"));
    }
    if kind == OperatorKind::Hyperviscous {
        return Err(Error::invalid(
            "modal response is defined for gradient and Laplacian operators",
        ));
    }
    let k_ny = std::f64::consts::PI / cloud.spacing;
    let reach = provider.support_radius(cloud.spacing);
    let rows: Vec<Result<Option<(Vec<f64>, Vec<f64>)>>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            if !is_interior(cloud, i, reach) {
                return Ok(None);
            }
            let (st, w) = provider.weights(cloud, i, kind)?;
            let mut re = vec![0.0; k_hats.len()];
            let mut im = vec![0.0; k_hats.len()];
            for (ki, &kh) in k_hats.iter().enumerate() {
                let kx = kh * k_ny;
                let ky = ratio * kx;
                let mut s_sin = 0.0;
                let mut s_cos = 0.0;
                for (o, &wv) in st.offsets.iter().zip(&w.values) {
                    let phase = kx * o[0] + ky * o[1];
                    s_sin += phase.sin() * wv;
                    s_cos += (1.0 - phase.cos()) * wv;
                }
                match kind {
                    OperatorKind::Dx | OperatorKind::Dy => {
                        re[ki] = s_sin;
                        im[ki] = s_cos;
                    }
                    OperatorKind::Laplacian => {
                        re[ki] = s_cos;
                        im[ki] = -s_sin;
                    }
                    OperatorKind::Hyperviscous => unreachable!(),
                }
            }
            Ok(Some((re, im)))
        })
        .collect();
    let mut re = vec![0.0; k_hats.len()];
    let mut im = vec![0.0; k_hats.len()];
    let mut count = 0usize;
    for row in rows {
        if let Some((r, i)) = row? {
            for k in 0..k_hats.len() {
                re[k] += r[k];
                im[k] += i[k];
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("no interior stencils for modal response"));
    }
    for k in 0..k_hats.len() {
        re[k] /= count as f64;
        im[k] /= count as f64;
    }
    Ok(ModalResponseReport {
        provider: provider.name(),
        kind,
        ratio,
        k_hat: k_hats.to_vec(),
        re,
        im,
        k_nyquist: k_ny,
        stencil_count: count,
    })
}

/// Analysis probe: the 1D central-difference pair embedded at `(+/-s, 0)`
/// on a uniform periodic grid. Its exact response is `sin(k s)/s`, which
/// pins the modal formulas.
pub struct CentralDifferenceProbe {
    pub nx: usize,
}

impl OperatorProvider for CentralDifferenceProbe {
    fn name(&self) -> String {
        "central-difference".into()
    }

    fn stencil(&self, cloud: &PointCloud, center: usize, _kind: OperatorKind) -> Result<Stencil> {
        let s = cloud.spacing;
        let row = center / self.nx;
        let col = center % self.nx;
        let east = row * self.nx + (col + 1) % self.nx;
        let west = row * self.nx + (col + self.nx - 1) % self.nx;
        Ok(Stencil {
            center,
            neighbors: vec![east, west],
            offsets: vec![[s, 0.0], [-s, 0.0]],
            d_n: s,
        })
    }

    fn weights_for(
        &self,
        cloud: &PointCloud,
        _stencil: &Stencil,
        kind: OperatorKind,
    ) -> Result<OperatorWeights> {
        if kind != OperatorKind::Dx {
            return Err(Error::invalid("probe only models d/dx"));
        }
        let s = cloud.spacing;
        OperatorWeights::new(
            kind,
            Provenance::Labfm,
            vec![0.5 / s, -0.5 / s],
        )
    }

    fn support_radius(&self, spacing: f64) -> f64 {
        spacing
    }

    fn supports(&self, kind: OperatorKind) -> bool {
        kind == OperatorKind::Dx
    }
}

#[cfg(test)]
mod tests {
    use super::super::{LabfmProvider, SphProvider};
    use super::*;
    use crate::classical::SphKernel;
    use crate::geometry::generate_perturbed_grid;

    #[test]
    fn central_difference_probe_matches_the_closed_form() {
        let nx = 16usize;
        let s = 1.0 / nx as f64;
        let cloud = generate_perturbed_grid(nx, nx, s, 0.0, 0).unwrap();
        let probe = CentralDifferenceProbe { nx };
        let k_hats = [0.1, 0.25, 0.5, 0.75, 1.0];
        let report = modal_response(&probe, OperatorKind::Dx, &cloud, &k_hats, 0.0).unwrap();
        for (i, &kh) in k_hats.iter().enumerate() {
            let k = kh * std::f64::consts::PI / s;
            let want = (k * s).sin() / s;
            assert!(
                (report.re[i] - want).abs() <= 1e-12 * want.abs().max(1.0),
                "k_hat {kh}: {} vs {want}",
                report.re[i]
            );
            assert!(report.im[i].abs() <= 1e-12 / s);
        }
    }

    #[test]
    fn low_wavenumber_limit_recovers_the_first_moment() {
        let nx = 24usize;
        let s = 1.0 / nx as f64;
        let cloud = generate_perturbed_grid(nx, nx, s, 1.0, 3).unwrap();
        for ratio in [0.0, 1.0] {
            let labfm = LabfmProvider::new(2);
            let report =
                modal_response(&labfm, OperatorKind::Dx, &cloud, &[0.01, 0.02], ratio).unwrap();
            for (i, &kh) in [0.01, 0.02].iter().enumerate() {
                let k = kh * report.k_nyquist;
                let r = report.re[i] / k;
                assert!(
                    (r - 1.0).abs() < 5e-3,
                    "ratio {ratio} k_hat {kh}: Re k_eff/k = {r}"
                );
            }
        }
    }

    #[test]
    fn dissipation_vanishes_toward_low_wavenumbers() {
        let nx = 24usize;
        let cloud = generate_perturbed_grid(nx, nx, 1.0 / nx as f64, 1.0, 5).unwrap();
        let labfm = LabfmProvider::new(2);
        let r = modal_response(&labfm, OperatorKind::Dx, &cloud, &[0.01, 0.1, 0.4], 0.0).unwrap();
        // normalized dissipation Im(k_eff)/k_ny decays toward k -> 0
        let im: Vec<f64> = r.im.iter().map(|v| v.abs() / r.k_nyquist).collect();
        assert!(im[0] < im[1] && im[1] < im[2], "dissipation {im:?}");
        assert!(im[0] < 1e-3);
    }

    #[test]
    fn laplacian_response_of_the_five_point_stencil() {
        // Morris weights on the uniform cross reduce to the classic
        // modified wavenumber 2(1-cos(ks))/s^2 once scaled by the moment sum
        let nx = 20usize;
        let s = 1.0 / nx as f64;
        let cloud = generate_perturbed_grid(nx, nx, s, 0.5, 7).unwrap();
        let sph = SphProvider::new(SphKernel::QuinticSpline);
        let report =
            modal_response(&sph, OperatorKind::Laplacian, &cloud, &[0.02, 0.05], 0.0).unwrap();
        for (i, &kh) in [0.02, 0.05].iter().enumerate() {
            let k = kh * report.k_nyquist;
            let r = report.re[i] / (k * k);
            assert!((r - 1.0).abs() < 0.2, "q2_eff/k^2 = {r} at k_hat {kh}");
        }
    }
}
