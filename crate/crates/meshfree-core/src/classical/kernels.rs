//! 2D smoothing kernels. Distances are passed normalized, `q = |x|/h`.
//!
//! Quintic spline (support `q in [0,3]`, sigma = 7/(478 pi h^2)):
//!
//! ```text
//! W(q) = sigma * [ (3-q)^5 - 6(2-q)^5 + 15(1-q)^5 ]   0 <= q < 1
//!        sigma * [ (3-q)^5 - 6(2-q)^5 ]               1 <= q < 2
//!        sigma * [ (3-q)^5 ]                          2 <= q < 3
//! ```
//!
//! Wendland C2 (support `q in [0,2]`, sigma = 7/(4 pi h^2)):
//!
//! ```text
//! W(q) = sigma * (1 - q/2)^4 (1 + 2q)
//! ```
//!
//! Both integrate to one over the plane.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SphKernel {
    QuinticSpline,
    WendlandC2,
}

impl SphKernel {
    /// Support radius in units of the smoothing length.
    pub fn support(&self) -> f64 {
        match self {
            SphKernel::QuinticSpline => 3.0,
            SphKernel::WendlandC2 => 2.0,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SphKernel::QuinticSpline => "quintic",
            SphKernel::WendlandC2 => "wendland",
        }
    }
}

/// Kernel value and radial derivative `dW/dr` (with respect to the
/// physical distance `r = q h`) at normalized distance `q`.
pub fn kernel_eval(kernel: SphKernel, q: f64, h: f64) -> Result<(f64, f64)> {
    if q < 0.0 {
        return Err(Error::invalid("kernel distance must be non-negative"));
    }
    if h <= 0.0 {
        return Err(Error::invalid("smoothing length must be positive"));
    }
    let (f, df) = match kernel {
        SphKernel::QuinticSpline => quintic_shape(q),
        SphKernel::WendlandC2 => wendland_shape(q),
    };
    let sigma = match kernel {
        SphKernel::QuinticSpline => 7.0 / (478.0 * PI * h * h),
        SphKernel::WendlandC2 => 7.0 / (4.0 * PI * h * h),
    };
    Ok((sigma * f, sigma * df / h))
}

fn quintic_shape(q: f64) -> (f64, f64) {
    let p5 = |x: f64| x * x * x * x * x;
    let p4 = |x: f64| x * x * x * x;
    if q < 1.0 {
        (
            p5(3.0 - q) - 6.0 * p5(2.0 - q) + 15.0 * p5(1.0 - q),
            -5.0 * (p4(3.0 - q) - 6.0 * p4(2.0 - q) + 15.0 * p4(1.0 - q)),
        )
    } else if q < 2.0 {
        (
            p5(3.0 - q) - 6.0 * p5(2.0 - q),
            -5.0 * (p4(3.0 - q) - 6.0 * p4(2.0 - q)),
        )
    } else if q < 3.0 {
        (p5(3.0 - q), -5.0 * p4(3.0 - q))
    } else {
        (0.0, 0.0)
    }
}

fn wendland_shape(q: f64) -> (f64, f64) {
    if q >= 2.0 {
        return (0.0, 0.0);
    }
    let u = 1.0 - 0.5 * q;
    let u3 = u * u * u;
    (u3 * u * (1.0 + 2.0 * q), -5.0 * q * u3)
}
