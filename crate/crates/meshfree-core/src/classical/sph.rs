//! SPH operators in the anti-symmetric difference form: kernel-gradient
//! weights for first derivatives and the Morris form for the Laplacian.

use super::kernels::{kernel_eval, SphKernel};
use super::{OperatorWeights, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{norm, Stencil};
use crate::taylor::OperatorKind;
use serde::{Deserialize, Serialize};

/// SPH discretisation parameters. `h = h_over_s * spacing` and the nominal
/// particle volume is `spacing^2`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SphConfig {
    pub kernel: SphKernel,
    pub h_over_s: f64,
    /// Smoothing length (absolute).
    pub h: f64,
    /// Particle volume V_j (absolute).
    pub volume: f64,
}

impl SphConfig {
    pub fn new(kernel: SphKernel, spacing: f64) -> Result<Self> {
        Self::with_ratio(kernel, spacing, 1.5)
    }

    pub fn with_ratio(kernel: SphKernel, spacing: f64, h_over_s: f64) -> Result<Self> {
        if spacing <= 0.0 || h_over_s <= 0.0 {
            return Err(Error::invalid("spacing and h/s ratio must be positive"));
        }
        Ok(SphConfig {
            kernel,
            h_over_s,
            h: h_over_s * spacing,
            volume: spacing * spacing,
        })
    }

    /// Physical support radius: stencils must be built with this reach.
    pub fn support_radius(&self) -> f64 {
        self.kernel.support() * self.h
    }
}

/// Kernel-gradient factor `g(r) = -W'(r)/r >= 0`; the gradient of the
/// kernel with respect to the center position is `g(r) * x_ji`, pointing
/// from the center toward the neighbor for decreasing kernels.
fn gradient_factor(config: &SphConfig, r: f64) -> Result<f64> {
    let (_, dwdr) = kernel_eval(config.kernel, r / config.h, config.h)?;
    Ok(-dwdr / r)
}

/// First-derivative weights `w_ji = grad_i W(x_ji, h) V_j`, returned as the
/// x- and y-component weight sets.
pub fn sph_gradient_weights(
    stencil: &Stencil,
    config: &SphConfig,
) -> Result<(OperatorWeights, OperatorWeights)> {
    if stencil.is_empty() {
        return Err(Error::DegenerateGeometry(
            "SPH gradient on an empty stencil".into(),
        ));
    }
    let mut wx = Vec::with_capacity(stencil.len());
    let mut wy = Vec::with_capacity(stencil.len());
    for o in &stencil.offsets {
        let r = norm(*o);
        if r == 0.0 {
            return Err(Error::DegenerateGeometry("zero-length offset".into()));
        }
        let g = gradient_factor(config, r)? * config.volume;
        wx.push(g * o[0]);
        wy.push(g * o[1]);
    }
    Ok((
        OperatorWeights::new(OperatorKind::Dx, Provenance::Sph, wx)?,
        OperatorWeights::new(OperatorKind::Dy, Provenance::Sph, wy)?,
    ))
}

/// Morris Laplacian weights `w_ji = -2 W'(r)/r * V_j`, non-negative for
/// monotone-decreasing kernels.
pub fn sph_laplacian_weights(stencil: &Stencil, config: &SphConfig) -> Result<OperatorWeights> {
    if stencil.is_empty() {
        return Err(Error::DegenerateGeometry(
            "Morris Laplacian on an empty stencil".into(),
        ));
    }
    let mut w = Vec::with_capacity(stencil.len());
    for o in &stencil.offsets {
        let r = norm(*o);
        if r == 0.0 {
            return Err(Error::DegenerateGeometry("zero-length offset".into()));
        }
        w.push(2.0 * gradient_factor(config, r)? * config.volume);
    }
    OperatorWeights::new(OperatorKind::Laplacian, Provenance::Sph, w)
}
