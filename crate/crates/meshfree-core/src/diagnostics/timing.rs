//! Wall-clock cost of weight construction per provider, paired with that
//! provider's accuracy so cost/accuracy tables can be emitted.

use super::OperatorProvider;
use crate::error::Result;
use crate::geometry::{PointCloud, Stencil};
use crate::taylor::OperatorKind;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct TimingRow {
    pub provider: String,
    pub median_seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub nodes: usize,
    /// Companion accuracy figure (e.g. a convergence-study error).
    pub error: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TimingReport {
    pub kind: OperatorKind,
    pub repeats: usize,
    /// When set, stencils were prebuilt and only weight computation was
    /// timed; otherwise neighbor search is included. Cloud generation is
    /// never timed.
    pub weights_only: bool,
    pub rows: Vec<TimingRow>,
}

impl TimingReport {
    pub fn row(&self, provider: &str) -> Option<&TimingRow> {
        self.rows.iter().find(|r| r.provider == provider)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "provider,median_seconds,min_seconds,max_seconds,nodes,error")?;
        for r in &self.rows {
            writeln!(
                f,
                "{},{:.6e},{:.6e},{:.6e},{},{}",
                r.provider,
                r.median_seconds,
                r.min_seconds,
                r.max_seconds,
                r.nodes,
                r.error.map(|e| format!("{e:.6e}")).unwrap_or_default()
            )?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Time each provider computing `kind` weights for every node of the
/// cloud, single-threaded, reporting the median over `repeats` runs.
/// `errors` pairs each provider with an accuracy figure for the
/// cost/accuracy table.
pub fn timing_harness(
    providers: &[&dyn OperatorProvider],
    cloud: &PointCloud,
    kind: OperatorKind,
    repeats: usize,
    weights_only: bool,
    errors: &[Option<f64>],
) -> Result<TimingReport> {
    let repeats = repeats.max(1);
    let mut rows = Vec::with_capacity(providers.len());
    for (pi, provider) in providers.iter().enumerate() {
        let prebuilt: Option<Vec<Stencil>> = if weights_only {
            let mut v = Vec::with_capacity(cloud.len());
            for i in 0..cloud.len() {
                v.push(provider.stencil(cloud, i, kind)?);
            }
            Some(v)
        } else {
            None
        };
        let mut times = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let t0 = Instant::now();
            match &prebuilt {
                Some(stencils) => {
                    for st in stencils {
                        let w = provider.weights_for(cloud, st, kind)?;
                        std::hint::black_box(&w);
                    }
                }
                None => {
                    for i in 0..cloud.len() {
                        let w = provider.weights(cloud, i, kind)?;
                        std::hint::black_box(&w);
                    }
                }
            }
            times.push(t0.elapsed().as_secs_f64());
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.push(TimingRow {
            provider: provider.name(),
            median_seconds: times[times.len() / 2],
            min_seconds: times[0],
            max_seconds: times[times.len() - 1],
            nodes: cloud.len(),
            error: errors.get(pi).copied().flatten(),
        });
    }
    Ok(TimingReport {
        kind,
        repeats,
        weights_only,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{LabfmProvider, SphProvider};
    use super::*;
    use crate::classical::SphKernel;
    use crate::geometry::generate_perturbed_grid;

    #[test]
    fn harness_reports_median_and_spread_for_each_provider() {
        let cloud = generate_perturbed_grid(20, 20, 0.05, 0.5, 1).unwrap();
        let sph = SphProvider::new(SphKernel::QuinticSpline);
        let labfm = LabfmProvider::new(2);
        let report = timing_harness(
            &[&sph, &labfm],
            &cloud,
            OperatorKind::Dx,
            5,
            true,
            &[Some(1e-2), Some(1e-4)],
        )
        .unwrap();
        assert_eq!(report.rows.len(), 2);
        for r in &report.rows {
            assert!(r.min_seconds <= r.median_seconds && r.median_seconds <= r.max_seconds);
            assert!(r.error.is_some());
            assert_eq!(r.nodes, 400);
        }
    }

    #[test]
    fn labfm_weight_construction_costs_more_than_sph() {
        let cloud = generate_perturbed_grid(24, 24, 0.05, 0.5, 3).unwrap();
        let sph = SphProvider::new(SphKernel::QuinticSpline);
        let labfm = LabfmProvider::new(2);
        let report = timing_harness(
            &[&sph, &labfm],
            &cloud,
            OperatorKind::Dx,
            5,
            true,
            &[None, None],
        )
        .unwrap();
        let t_sph = report.row("sph-quintic").unwrap().median_seconds;
        let t_labfm = report.row("labfm-p2").unwrap().median_seconds;
        assert!(
            t_labfm > t_sph,
            "linear solve ({t_labfm:.2e}s) should cost more than kernel evaluation ({t_sph:.2e}s)"
        );
    }
}
