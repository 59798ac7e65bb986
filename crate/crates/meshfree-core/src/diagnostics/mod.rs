//! Numerical-analysis harnesses, all parameterized over an abstract
//! weight provider: moment tables, convergence studies, global-operator
//! spectra, modal response curves and a cost/accuracy timing harness.

mod convergence;
mod modal;
mod moments;
mod spectrum;
mod timing;

pub use convergence::{convergence_study, field_error, ConvergenceReport, ConvergenceSeries};
pub use modal::{modal_response, CentralDifferenceProbe, ModalResponseReport};
pub use moments::{moment_table, MomentReport, MomentRow};
pub use spectrum::{assemble_global, eigen_spectrum, SpectrumReport};
pub use timing::{timing_harness, TimingReport, TimingRow};

use crate::classical::{
    labfm_weights, sph_gradient_weights, sph_laplacian_weights, LabfmConfig, OperatorWeights,
    SphConfig, SphKernel,
};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Stencil};
use crate::nemdo::NemdoModel;
use crate::taylor::OperatorKind;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

/// A stencil policy plus a weight rule: everything the diagnostics need
/// to evaluate a discrete operator at a node.
pub trait OperatorProvider: Sync {
    fn name(&self) -> String;

    /// Build this provider's stencil for `center`.
    fn stencil(&self, cloud: &PointCloud, center: usize, kind: OperatorKind) -> Result<Stencil>;

    /// Weights for a prebuilt stencil.
    fn weights_for(
        &self,
        cloud: &PointCloud,
        stencil: &Stencil,
        kind: OperatorKind,
    ) -> Result<OperatorWeights>;

    /// Reach of the stencil, used to restrict bounded-domain diagnostics
    /// to interior nodes.
    fn support_radius(&self, spacing: f64) -> f64;

    fn supports(&self, kind: OperatorKind) -> bool;

    fn weights(
        &self,
        cloud: &PointCloud,
        center: usize,
        kind: OperatorKind,
    ) -> Result<(Stencil, OperatorWeights)> {
        let st = self.stencil(cloud, center, kind)?;
        let w = self.weights_for(cloud, &st, kind)?;
        Ok((st, w))
    }
}

/// SPH kernels with radius stencils at the kernel support.
pub struct SphProvider {
    pub kernel: SphKernel,
    pub h_over_s: f64,
}

impl SphProvider {
    pub fn new(kernel: SphKernel) -> Self {
        SphProvider {
            kernel,
            h_over_s: 1.5,
        }
    }

    fn config(&self, cloud: &PointCloud) -> Result<SphConfig> {
        SphConfig::with_ratio(self.kernel, cloud.spacing, self.h_over_s)
    }
}

impl OperatorProvider for SphProvider {
    fn name(&self) -> String {
        format!("sph-{}", self.kernel.tag())
    }

    fn stencil(&self, cloud: &PointCloud, center: usize, _kind: OperatorKind) -> Result<Stencil> {
        cloud.radius_stencil(center, self.support_radius(cloud.spacing))
    }

    fn weights_for(
        &self,
        cloud: &PointCloud,
        stencil: &Stencil,
        kind: OperatorKind,
    ) -> Result<OperatorWeights> {
        let config = self.config(cloud)?;
        match kind {
            OperatorKind::Dx => Ok(sph_gradient_weights(stencil, &config)?.0),
            OperatorKind::Dy => Ok(sph_gradient_weights(stencil, &config)?.1),
            OperatorKind::Laplacian => sph_laplacian_weights(stencil, &config),
            OperatorKind::Hyperviscous => Err(Error::invalid(
                "SPH kernels provide no hyperviscous operator",
            )),
        }
    }

    fn support_radius(&self, spacing: f64) -> f64 {
        self.kernel.support() * self.h_over_s * spacing
    }

    fn supports(&self, kind: OperatorKind) -> bool {
        kind != OperatorKind::Hyperviscous
    }
}

/// LABFM with k-nearest-neighbor stencils.
pub struct LabfmProvider {
    pub order_p: usize,
    pub stencil_n: usize,
    pub condition_limit: f64,
}

impl LabfmProvider {
    /// Default stencil of 35 neighbors covers every order up to p = 4.
    pub fn new(order_p: usize) -> Self {
        LabfmProvider {
            order_p,
            stencil_n: 35,
            condition_limit: 1e12,
        }
    }

    pub fn with_stencil_n(mut self, n: usize) -> Self {
        self.stencil_n = n;
        self
    }
}

impl OperatorProvider for LabfmProvider {
    fn name(&self) -> String {
        format!("labfm-p{}", self.order_p)
    }

    fn stencil(&self, cloud: &PointCloud, center: usize, _kind: OperatorKind) -> Result<Stencil> {
        cloud.knn_stencil(center, self.stencil_n)
    }

    fn weights_for(
        &self,
        _cloud: &PointCloud,
        stencil: &Stencil,
        kind: OperatorKind,
    ) -> Result<OperatorWeights> {
        let mut config = LabfmConfig::for_stencil(self.order_p, stencil);
        config.condition_limit = self.condition_limit;
        labfm_weights(stencil, &config, kind)
    }

    fn support_radius(&self, spacing: f64) -> f64 {
        // generous knn reach estimate; interiority is re-checked per stencil
        spacing * ((self.stencil_n as f64 / std::f64::consts::PI).sqrt() + 2.0)
    }

    fn supports(&self, kind: OperatorKind) -> bool {
        self.order_p >= kind.min_order()
    }
}

/// Learned models, one per operator kind, sharing a stencil size.
pub struct NemdoProvider {
    models: HashMap<OperatorKind, NemdoModel>,
    label: String,
}

impl NemdoProvider {
    pub fn new(label: impl Into<String>) -> Self {
        NemdoProvider {
            models: HashMap::new(),
            label: label.into(),
        }
    }

    pub fn with_model(mut self, model: NemdoModel) -> Self {
        self.models.insert(model.config.kind, model);
        self
    }

    pub fn single(model: NemdoModel) -> Self {
        let label = format!(
            "nemdo-n{}-p{}",
            model.config.stencil_n, model.config.order_p
        );
        NemdoProvider::new(label).with_model(model)
    }

    pub fn model(&self, kind: OperatorKind) -> Option<&NemdoModel> {
        self.models.get(&kind)
    }

    fn require(&self, kind: OperatorKind) -> Result<&NemdoModel> {
        self.models.get(&kind).ok_or_else(|| {
            Error::invalid(format!("no trained model for {kind:?} in '{}'", self.label))
        })
    }
}

impl OperatorProvider for NemdoProvider {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn stencil(&self, cloud: &PointCloud, center: usize, kind: OperatorKind) -> Result<Stencil> {
        cloud.knn_stencil(center, self.require(kind)?.config.stencil_n)
    }

    fn weights_for(
        &self,
        _cloud: &PointCloud,
        stencil: &Stencil,
        kind: OperatorKind,
    ) -> Result<OperatorWeights> {
        self.require(kind)?.infer_weights(stencil)
    }

    fn support_radius(&self, spacing: f64) -> f64 {
        let n = self
            .models
            .values()
            .map(|m| m.config.stencil_n)
            .max()
            .unwrap_or(10);
        spacing * ((n as f64 / std::f64::consts::PI).sqrt() + 2.0)
    }

    fn supports(&self, kind: OperatorKind) -> bool {
        self.models.contains_key(&kind)
    }
}

/// `||approx - exact||_2 / ||exact||_2`
pub fn relative_l2(approx: &[f64], exact: &[f64]) -> Result<f64> {
    if approx.len() != exact.len() {
        return Err(Error::invalid("field length mismatch"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, e) in approx.iter().zip(exact) {
        num += (a - e) * (a - e);
        den += e * e;
    }
    if den == 0.0 {
        return Err(Error::invalid("reference field has zero norm"));
    }
    Ok((num / den).sqrt())
}

/// Interior nodes of a cloud for a given stencil reach: on periodic axes
/// every node qualifies, otherwise the stencil must not extend past the
/// boundary.
pub(crate) fn is_interior(cloud: &PointCloud, center: usize, reach: f64) -> bool {
    cloud.boundary_distance(cloud.point(center)) >= reach
}

/// Write a JSON metadata sidecar next to a report CSV.
pub fn write_sidecar(csv_path: &Path, metadata: &serde_json::Value) -> Result<()> {
    let path = csv_path.with_extension("json");
    let mut f = std::fs::File::create(path)?;
    f.write_all(
        serde_json::to_string_pretty(metadata)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?
            .as_bytes(),
    )?;
    Ok(())
}

/// Dump per-node stencil weights as `center,neighbor,dx,dy,weight` rows
/// for qualitative overlay plots.
pub fn dump_weights_csv(
    provider: &dyn OperatorProvider,
    cloud: &PointCloud,
    kind: OperatorKind,
    nodes: &[usize],
    path: &Path,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "center,neighbor,dx,dy,weight")?;
    for &i in nodes {
        let (st, w) = provider.weights(cloud, i, kind)?;
        for ((j, o), wv) in st.neighbors.iter().zip(&st.offsets).zip(&w.values) {
            writeln!(f, "{i},{j},{},{},{}", o[0], o[1], wv)?;
        }
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_perturbed_grid;

    #[test]
    fn weight_dump_rows_align_with_stencils() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.csv");
        let cloud = generate_perturbed_grid(12, 12, 0.1, 0.5, 4).unwrap();
        let labfm = LabfmProvider::new(2).with_stencil_n(12);
        dump_weights_csv(&labfm, &cloud, OperatorKind::Dx, &[3, 77], &path).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        let mut lines = body.lines();
        assert_eq!(lines.next(), Some("center,neighbor,dx,dy,weight"));
        assert_eq!(lines.count(), 24);
    }

    #[test]
    fn relative_l2_basics() {
        assert_eq!(relative_l2(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((relative_l2(&[2.0, 4.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        // ([1,2],[1,1]) -> sqrt(1)/sqrt(2)
        let r = relative_l2(&[1.0, 2.0], &[1.0, 1.0]).unwrap();
        assert!((r - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(relative_l2(&[1.0], &[0.0]).is_err());
    }
}
