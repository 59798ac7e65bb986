//! Convergence of discrete derivatives of the analytic test field on
//! bounded disordered clouds, with log-log slope fits.

use super::{is_interior, relative_l2, OperatorProvider};
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, PointCloud};
use crate::taylor::{test_function, OperatorKind};
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Debug)]
pub struct ConvergenceSeries {
    pub provider: String,
    /// Relative L2 error per resolution, averaged over trials.
    pub errors: Vec<f64>,
    /// Nodes skipped because the provider failed, per resolution.
    pub skipped: Vec<usize>,
    /// Least-squares slope of log(err) against log(s) over the fit window.
    pub slope: f64,
    /// Index range of the fit window into `resolutions`.
    pub fit_window: (usize, usize),
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub kind: OperatorKind,
    pub epsilon: f64,
    pub resolutions: Vec<f64>,
    pub series: Vec<ConvergenceSeries>,
}

impl ConvergenceReport {
    pub fn series_for(&self, provider: &str) -> Option<&ConvergenceSeries> {
        self.series.iter().find(|s| s.provider == provider)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "provider,s,error,skipped,slope")?;
        for s in &self.series {
            for (i, res) in self.resolutions.iter().enumerate() {
                writeln!(
                    f,
                    "{},{res},{:.6e},{},{:.4}",
                    s.provider, s.errors[i], s.skipped[i], s.slope
                )?;
            }
        }
        f.flush()?;
        Ok(())
    }
}

fn exact_derivative(kind: OperatorKind, p: [f64; 2]) -> f64 {
    let (_, dx, dy, lap) = test_function(p);
    match kind {
        OperatorKind::Dx => dx,
        OperatorKind::Dy => dy,
        OperatorKind::Laplacian => lap,
        OperatorKind::Hyperviscous => f64::NAN,
    }
}

/// Relative L2 error of the discrete derivative of the test field against
/// its analytic values at the interior nodes of one cloud, plus the count
/// of nodes skipped because the provider failed.
pub fn field_error(
    provider: &dyn OperatorProvider,
    kind: OperatorKind,
    cloud: &PointCloud,
) -> Result<(f64, usize)> {
    let field: Vec<f64> = cloud.points().iter().map(|p| test_function(*p).0).collect();
    let reach = provider.support_radius(cloud.spacing);
    let per_node: Vec<Option<Result<(f64, f64)>>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            if !is_interior(cloud, i, reach) {
                return None;
            }
            let out = provider.weights(cloud, i, kind).and_then(|(st, w)| {
                if !is_interior(cloud, i, st.d_n) {
                    return Err(Error::DegenerateGeometry("stencil reaches boundary".into()));
                }
                Ok((w.apply(&st, &field), exact_derivative(kind, cloud.point(i))))
            });
            Some(out)
        })
        .collect();
    let mut approx = Vec::new();
    let mut exact = Vec::new();
    let mut skipped = 0usize;
    for r in per_node.into_iter().flatten() {
        match r {
            Ok((a, e)) => {
                approx.push(a);
                exact.push(e);
            }
            Err(_) => skipped += 1,
        }
    }
    if approx.len() < 16 {
        return Err(Error::invalid(
            "fewer than 16 interior nodes; refine the cloud or shrink the stencil",
        ));
    }
    Ok((relative_l2(&approx, &exact)?, skipped))
}

fn fit_slope(resolutions: &[f64], errors: &[f64], window: (usize, usize)) -> f64 {
    let (lo, hi) = window;
    let xs: Vec<f64> = resolutions[lo..=hi].iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors[lo..=hi].iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Default fit window: the three finest resolutions that still improve
/// on their coarser neighbor by at least 10 percent (pre-plateau).
fn default_window(errors: &[f64]) -> (usize, usize) {
    let n = errors.len();
    let mut finest_improving = 0usize;
    for i in 0..n - 1 {
        if errors[i + 1] < 0.9 * errors[i] {
            finest_improving = i + 1;
        } else {
            break;
        }
    }
    if finest_improving == 0 {
        // no decaying segment: fit over everything
        return (0, n - 1);
    }
    (finest_improving.saturating_sub(2), finest_improving)
}

/// Evaluate every provider on the test field over a set of resolutions.
/// Clouds live on the unit square centered at the origin with fully
/// clamped (non-periodic) boundaries; statistics use interior nodes only.
pub fn convergence_study(
    providers: &[&dyn OperatorProvider],
    kind: OperatorKind,
    resolutions: &[f64],
    epsilon: f64,
    trials: usize,
    seed: u64,
    fit_window: Option<(usize, usize)>,
) -> Result<ConvergenceReport> {
    if resolutions.len() < 3 {
        return Err(Error::invalid("need at least 3 resolutions"));
    }
    if kind == OperatorKind::Hyperviscous {
        return Err(Error::invalid(
            "the test field has no closed-form biharmonic reference here",
        ));
    }
    let mut sorted = resolutions.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut series = Vec::new();
    for provider in providers {
        let mut errors = Vec::with_capacity(sorted.len());
        let mut skipped = Vec::with_capacity(sorted.len());
        for (ri, &s) in sorted.iter().enumerate() {
            let nx = (1.0 / s).round() as usize;
            let mut err_acc = 0.0;
            let mut skip_acc = 0usize;
            for trial in 0..trials.max(1) {
                let spec = GridSpec::new(nx, nx, 1.0 / nx as f64, epsilon, {
                    seed.wrapping_add(1000 * ri as u64 + trial as u64)
                })
                .with_origin([-0.5, -0.5])
                .with_periodic([false, false]);
                let cloud = spec.generate()?;
                let (e, sk) = field_error(*provider, kind, &cloud)?;
                err_acc += e;
                skip_acc += sk;
            }
            errors.push(err_acc / trials.max(1) as f64);
            skipped.push(skip_acc);
        }
        let window = fit_window.unwrap_or_else(|| default_window(&errors));
        if window.1 >= sorted.len() || window.0 >= window.1 {
            return Err(Error::invalid("bad slope fit window"));
        }
        let slope = fit_slope(&sorted, &errors, window);
        series.push(ConvergenceSeries {
            provider: provider.name(),
            errors,
            skipped,
            slope,
            fit_window: window,
        });
    }
    Ok(ConvergenceReport {
        kind,
        epsilon,
        resolutions: sorted,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::super::LabfmProvider;
    use super::*;

    #[test]
    fn labfm_p2_gradient_converges_at_second_order() {
        let labfm = LabfmProvider::new(2);
        let report = convergence_study(
            &[&labfm],
            OperatorKind::Dx,
            &[1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0, 1.0 / 320.0],
            0.5,
            1,
            42,
            None,
        )
        .unwrap();
        let s = &report.series[0];
        assert!(
            (s.slope - 2.0).abs() <= 0.3,
            "slope {} errors {:?}",
            s.slope,
            s.errors
        );
        assert!(s.errors[2] < s.errors[1] && s.errors[1] < s.errors[0]);
    }

    #[test]
    fn labfm_slope_is_insensitive_to_disorder() {
        let labfm = LabfmProvider::new(2);
        let res = [1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0];
        let mut slopes = Vec::new();
        for eps in [0.1, 0.5, 1.0] {
            let report =
                convergence_study(&[&labfm], OperatorKind::Dx, &res, eps, 1, 7, None).unwrap();
            slopes.push(report.series[0].slope);
        }
        let spread = slopes.iter().cloned().fold(f64::MIN, f64::max)
            - slopes.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 0.3, "slope spread {spread} across eps; slopes {slopes:?}");
    }

    #[test]
    fn slope_fit_recovers_synthetic_power_laws() {
        let res = [0.1f64, 0.05, 0.025, 0.0125];
        let errors: Vec<f64> = res.iter().map(|&s| 3.0 * s * s).collect();
        let w = default_window(&errors);
        assert_eq!(w, (1, 3));
        let slope = fit_slope(&res, &errors, w);
        assert!((slope - 2.0).abs() < 1e-12);
        // a plateaued tail is excluded from the default window
        let flat = [1e-2, 5e-3, 4.9e-3, 4.9e-3];
        let w = default_window(&flat);
        assert_eq!(w.1, 1);
    }
}
