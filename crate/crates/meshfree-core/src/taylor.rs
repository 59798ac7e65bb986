//! Taylor-monomial machinery shared by every operator provider.
//!
//! The basis lists exponent pairs `(a, b)` with `1 <= a+b <= p` in graded
//! order, x-power first within each degree, and each term carries the
//! factorial coefficient `1/(a! b!)`:
//!
//! ```text
//! x, y, x^2/2, xy, y^2/2, x^3/6, x^2 y/2, x y^2/2, y^3/6, ...
//! ```
//!
//! A discrete operator with weights `w_ji` identifies a differential
//! operator through its moments `sum_j X_ji w_ji`; the target vectors for
//! the supported operators are in [`target_moments`].

use crate::error::{Error, Result};
use crate::geometry::Point;
use serde::{Deserialize, Serialize};

/// Differential operators a weight set can represent, with the spatial
/// derivative order `m` used for rescaling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    Dx,
    Dy,
    Laplacian,
    /// Biharmonic-moment operator used as a dealiasing filter.
    Hyperviscous,
}

impl OperatorKind {
    /// Derivative order `m`: weights carry units of length^(-m).
    pub fn derivative_order(&self) -> i32 {
        match self {
            OperatorKind::Dx | OperatorKind::Dy => 1,
            OperatorKind::Laplacian => 2,
            OperatorKind::Hyperviscous => 4,
        }
    }

    /// Smallest consistency order that can express the target moments.
    pub fn min_order(&self) -> usize {
        match self {
            OperatorKind::Dx | OperatorKind::Dy => 1,
            OperatorKind::Laplacian => 2,
            OperatorKind::Hyperviscous => 4,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            OperatorKind::Dx => "dx",
            OperatorKind::Dy => "dy",
            OperatorKind::Laplacian => "laplacian",
            OperatorKind::Hyperviscous => "hyperviscous",
        }
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dx" | "x" => Ok(OperatorKind::Dx),
            "dy" | "y" => Ok(OperatorKind::Dy),
            "laplacian" | "lap" => Ok(OperatorKind::Laplacian),
            "hyperviscous" | "hyp" => Ok(OperatorKind::Hyperviscous),
            other => Err(Error::invalid(format!("unknown operator kind '{other}'"))),
        }
    }
}

/// Number of monomials with total degree in `1..=p` in two dimensions.
pub fn basis_len(p: usize) -> usize {
    (p * p + 3 * p) / 2
}

/// Graded monomial basis of order `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialBasis {
    pub order_p: usize,
    /// Exponent pairs `(a, b)` in graded order.
    pub exponents: Vec<(u32, u32)>,
    /// `1/(a! b!)` per term.
    pub coefficients: Vec<f64>,
}

impl MonomialBasis {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("basis order must be at least 1"));
        }
        let mut exponents = Vec::with_capacity(basis_len(p));
        let mut coefficients = Vec::with_capacity(basis_len(p));
        for deg in 1..=p as u32 {
            for b in 0..=deg {
                let a = deg - b;
                exponents.push((a, b));
                coefficients.push(1.0 / (factorial(a) * factorial(b)));
            }
        }
        debug_assert_eq!(exponents.len(), basis_len(p));
        Ok(MonomialBasis {
            order_p: p,
            exponents,
            coefficients,
        })
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Index of the term `x^a y^b`, if present.
    pub fn slot(&self, a: u32, b: u32) -> Option<usize> {
        self.exponents.iter().position(|&e| e == (a, b))
    }

    /// Evaluate all terms `x^a y^b / (a! b!)` at an offset.
    pub fn eval(&self, offset: Point, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        // powers up to p, computed once per call
        let mut xp = [1.0f64; 8];
        let mut yp = [1.0f64; 8];
        for k in 1..=self.order_p.min(7) {
            xp[k] = xp[k - 1] * offset[0];
            yp[k] = yp[k - 1] * offset[1];
        }
        for (i, &(a, b)) in self.exponents.iter().enumerate() {
            out[i] = xp[a as usize] * yp[b as usize] * self.coefficients[i];
        }
    }

    /// Human-readable column labels in table order (`x`, `y`, `x^2/2`, ...).
    pub fn labels(&self) -> Vec<String> {
        self.exponents
            .iter()
            .zip(&self.coefficients)
            .map(|(&(a, b), &c)| {
                let mono = match (a, b) {
                    (1, 0) => "x".to_string(),
                    (0, 1) => "y".to_string(),
                    (a, 0) => format!("x^{a}"),
                    (0, b) => format!("y^{b}"),
                    (1, 1) => "xy".to_string(),
                    (1, b) => format!("xy^{b}"),
                    (a, 1) => format!("x^{a}y"),
                    (a, b) => format!("x^{a}y^{b}"),
                };
                let denom = (1.0 / c).round() as u64;
                if denom == 1 {
                    mono
                } else {
                    format!("{mono}/{denom}")
                }
            })
            .collect()
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n as u64).product::<u64>() as f64
}

/// Taylor-monomial vector of an offset, in graded order.
pub fn monomial_vector(offset: Point, p: usize) -> Result<Vec<f64>> {
    let basis = MonomialBasis::new(p)?;
    let mut out = vec![0.0; basis.len()];
    basis.eval(offset, &mut out);
    Ok(out)
}

/// Target moment vector identifying `kind` at consistency order `p`.
///
/// Entries follow the basis order; e.g. the Laplacian places ones at the
/// `x^2/2` and `y^2/2` slots, and the hyperviscous (biharmonic) operator
/// places `1, 2, 1` at `x^4/24`, `x^2 y^2/4`, `y^4/24`.
pub fn target_moments(kind: OperatorKind, p: usize) -> Result<Vec<f64>> {
    if p < kind.min_order() {
        return Err(Error::invalid(format!(
            "order p={p} cannot express a {:?} operator (needs p >= {})",
            kind,
            kind.min_order()
        )));
    }
    let basis = MonomialBasis::new(p)?;
    let mut m = vec![0.0; basis.len()];
    let mut set = |a: u32, b: u32, v: f64| {
        let i = basis.slot(a, b).expect("slot in basis");
        m[i] = v;
    };
    match kind {
        OperatorKind::Dx => set(1, 0, 1.0),
        OperatorKind::Dy => set(0, 1, 1.0),
        OperatorKind::Laplacian => {
            set(2, 0, 1.0);
            set(0, 2, 1.0);
        }
        OperatorKind::Hyperviscous => {
            set(4, 0, 1.0);
            set(2, 2, 2.0);
            set(0, 4, 1.0);
        }
    }
    Ok(m)
}

/// Per-component moment residual `sum_j Xhat_ji what_ji - M^D` in
/// normalized coordinates: offsets are divided by `scale` and weights
/// multiplied by `scale^m`.
pub fn moment_residual(
    offsets: &[Point],
    weights: &[f64],
    kind: OperatorKind,
    p: usize,
    scale: f64,
) -> Result<Vec<f64>> {
    if offsets.len() != weights.len() {
        return Err(Error::invalid(format!(
            "offset/weight length mismatch: {} vs {}",
            offsets.len(),
            weights.len()
        )));
    }
    if scale <= 0.0 {
        return Err(Error::invalid("normalization scale must be positive"));
    }
    let basis = MonomialBasis::new(p)?;
    let target = target_moments(kind, p)?;
    let wscale = scale.powi(kind.derivative_order());
    let mut acc = vec![0.0; basis.len()];
    let mut term = vec![0.0; basis.len()];
    for (o, &w) in offsets.iter().zip(weights) {
        basis.eval([o[0] / scale, o[1] / scale], &mut term);
        let wh = w * wscale;
        for (acc_q, t_q) in acc.iter_mut().zip(&term) {
            *acc_q += t_q * wh;
        }
    }
    for (a, t) in acc.iter_mut().zip(&target) {
        *a -= t;
    }
    Ok(acc)
}

/// Smooth asymmetric test field with exact derivatives:
/// `phi = 1 + (xt*yt)^4 + sum_{n=1..6} (xt^n + yt^n)` where
/// `xt = x - 0.1453`, `yt = y - 0.16401`. Returns
/// `(phi, dphi/dx, dphi/dy, laplacian)`.
pub fn test_function(point: Point) -> (f64, f64, f64, f64) {
    let xt = point[0] - 0.1453;
    let yt = point[1] - 0.16401;
    let mut xp = [1.0f64; 7];
    let mut yp = [1.0f64; 7];
    for k in 1..=6 {
        xp[k] = xp[k - 1] * xt;
        yp[k] = yp[k - 1] * yt;
    }
    let mut value = 1.0 + xp[4] * yp[4];
    let mut dx = 4.0 * xp[3] * yp[4];
    let mut dy = 4.0 * xp[4] * yp[3];
    let mut lap = 12.0 * xp[2] * yp[4] + 12.0 * xp[4] * yp[2];
    for n in 1..=6usize {
        value += xp[n] + yp[n];
        dx += n as f64 * xp[n - 1];
        dy += n as f64 * yp[n - 1];
        if n >= 2 {
            lap += (n * (n - 1)) as f64 * (xp[n - 2] + yp[n - 2]);
        }
    }
    (value, dx, dy, lap)
}
