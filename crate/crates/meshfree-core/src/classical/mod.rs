//! Classical mesh-free weight providers: SPH kernel operators and the
//! local anisotropic basis function method (LABFM).

mod kernels;
mod labfm;
mod sph;

pub use kernels::{kernel_eval, SphKernel};
pub use labfm::{abf_vector, hermite, labfm_weights, LabfmConfig};
pub use sph::{sph_gradient_weights, sph_laplacian_weights, SphConfig};

use crate::error::{Error, Result};
use crate::geometry::Stencil;
use crate::taylor::OperatorKind;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Sph,
    Labfm,
    Nemdo,
}

/// Stencil weights for one differential operator, aligned with the
/// neighbor order of the stencil they were built from.
#[derive(Clone, Debug)]
pub struct OperatorWeights {
    pub kind: OperatorKind,
    pub provenance: Provenance,
    pub values: Vec<f64>,
}

impl OperatorWeights {
    pub fn new(kind: OperatorKind, provenance: Provenance, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite weight in {:?} operator from {:?}",
                kind, provenance
            )));
        }
        Ok(OperatorWeights {
            kind,
            provenance,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Evaluate the discrete operator on a sampled field:
    /// `sum_j (phi_j - phi_i) w_ji`.
    pub fn apply(&self, stencil: &Stencil, field: &[f64]) -> f64 {
        debug_assert_eq!(self.values.len(), stencil.neighbors.len());
        let fi = field[stencil.center];
        let mut acc = 0.0;
        for (&j, &w) in stencil.neighbors.iter().zip(&self.values) {
            acc += (field[j] - fi) * w;
        }
        acc
    }
}
