//! LABFM: stencil weights as a weighted sum of anisotropic basis functions
//! (Hermite polynomials windowed by a Wendland C2 RBF), with the coefficient
//! vector obtained from a per-stencil dense linear solve against the target
//! Taylor moments.

use super::{OperatorWeights, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{norm, Stencil};
use crate::linalg::{DMat, Lu};
use crate::taylor::{basis_len, target_moments, MonomialBasis, OperatorKind};
use serde::{Deserialize, Serialize};

/// Physicists' Hermite polynomial via the recurrence
/// `H_{a+1}(x) = 2x H_a(x) - 2a H_{a-1}(x)`.
pub fn hermite(a: usize, x: f64) -> f64 {
    match a {
        0 => 1.0,
        1 => 2.0 * x,
        _ => {
            let mut hm = 1.0;
            let mut h = 2.0 * x;
            for k in 1..a {
                let next = 2.0 * x * h - 2.0 * k as f64 * hm;
                hm = h;
                h = next;
            }
            h
        }
    }
}

/// Unnormalized Wendland C2 window used inside the basis functions; any
/// constant prefactor cancels in the linear solve.
fn psi(q: f64) -> f64 {
    if q >= 2.0 {
        return 0.0;
    }
    let u = 1.0 - 0.5 * q;
    u * u * u * u * (1.0 + 2.0 * q)
}

/// Anisotropic basis function vector for one offset: the q-th entry is
/// `psi(|x|/h) / sqrt(2^(a+b)) * H_a(x/(h sqrt 2)) * H_b(y/(h sqrt 2))`
/// with `(a, b)` running over the monomial basis of order `p`.
pub fn abf_vector(offset: [f64; 2], h: f64, p: usize) -> Result<Vec<f64>> {
    if h <= 0.0 {
        return Err(Error::invalid("ABF scale h must be positive"));
    }
    let basis = MonomialBasis::new(p)?;
    let window = psi(norm(offset) / h);
    let mut out = vec![0.0; basis.len()];
    if window == 0.0 {
        return Ok(out);
    }
    let xs = offset[0] / (h * std::f64::consts::SQRT_2);
    let ys = offset[1] / (h * std::f64::consts::SQRT_2);
    // Hermite values up to order p, evaluated once
    let mut hx = vec![0.0; p + 1];
    let mut hy = vec![0.0; p + 1];
    for a in 0..=p {
        hx[a] = hermite(a, xs);
        hy[a] = hermite(a, ys);
    }
    for (q, &(a, b)) in basis.exponents.iter().enumerate() {
        let scale = 1.0 / 2f64.powi((a + b) as i32).sqrt();
        out[q] = window * scale * hx[a as usize] * hy[b as usize];
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LabfmConfig {
    pub order_p: usize,
    /// RBF scale; half the stencil extent keeps the Wendland window
    /// covering every neighbor.
    pub h_i: f64,
    pub condition_limit: f64,
}

impl LabfmConfig {
    pub fn for_stencil(order_p: usize, stencil: &Stencil) -> Self {
        LabfmConfig {
            order_p,
            h_i: 0.5 * stencil.d_n,
            condition_limit: 1e12,
        }
    }
}

/// Solve the per-stencil moment system and return physical weights.
///
/// Assembly runs in coordinates scaled by `h_i`; the solved weights are
/// rescaled by `h_i^-m` afterwards. The solve uses dense LU with partial
/// pivoting plus one refinement step, and is rejected when the 1-norm
/// condition estimate exceeds the configured limit or the post-solve
/// moment residual is above 1e-8.
pub fn labfm_weights(
    stencil: &Stencil,
    config: &LabfmConfig,
    kind: OperatorKind,
) -> Result<OperatorWeights> {
    let p = config.order_p;
    let nb = basis_len(p);
    if stencil.len() < nb {
        return Err(Error::invalid(format!(
            "stencil of {} neighbors cannot support order p={p} (needs >= {nb})",
            stencil.len()
        )));
    }
    if config.h_i <= 0.0 {
        return Err(Error::invalid("LABFM h_i must be positive"));
    }
    let basis = MonomialBasis::new(p)?;
    let target = target_moments(kind, p)?;
    let h = config.h_i;

    // A = sum_j X_ji (x) W_ji in h-scaled coordinates
    let mut abfs = Vec::with_capacity(stencil.len());
    let mut a = DMat::zeros(nb, nb);
    let mut xv = vec![0.0; nb];
    for o in &stencil.offsets {
        let w = abf_vector(*o, h, p)?;
        basis.eval([o[0] / h, o[1] / h], &mut xv);
        for q in 0..nb {
            let xq = xv[q];
            if xq != 0.0 {
                for (r, wr) in w.iter().enumerate() {
                    *a.at_mut(q, r) += xq * wr;
                }
            }
        }
        abfs.push(w);
    }

    let lu = Lu::factor(&a).map_err(|_| {
        Error::SolveFailure(format!(
            "singular LABFM moment matrix at node {}",
            stencil.center
        ))
    })?;
    let estimate = lu.condition_estimate(&a);
    if !estimate.is_finite() || estimate > config.condition_limit {
        return Err(Error::IllConditionedStencil {
            node: stencil.center,
            estimate,
            limit: config.condition_limit,
        });
    }
    let (coeffs, rnorm) = lu.solve_refined(&a, &target);
    if !rnorm.is_finite() || rnorm > 1e-8 {
        return Err(Error::SolveFailure(format!(
            "LABFM moment residual {rnorm:.3e} exceeds 1e-8 at node {}",
            stencil.center
        )));
    }

    let rescale = h.powi(-kind.derivative_order());
    let values = abfs
        .iter()
        .map(|w| {
            let mut acc = 0.0;
            for (wq, cq) in w.iter().zip(&coeffs) {
                acc += wq * cq;
            }
            acc * rescale
        })
        .collect();
    OperatorWeights::new(kind, Provenance::Labfm, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_perturbed_grid;
    use crate::taylor::moment_residual;

    #[test]
    fn hermite_low_orders() {
        assert_eq!(hermite(0, 3.7), 1.0);
        assert_eq!(hermite(1, 2.0), 4.0);
        assert_eq!(hermite(2, 1.0), 2.0); // 4x^2 - 2
    }

    #[test]
    fn hermite_fifth_order_matches_explicit_coefficients() {
        let x: f64 = 0.7;
        let want = 32.0 * x.powi(5) - 160.0 * x.powi(3) + 120.0 * x;
        assert!((hermite(5, x) - want).abs() < 1e-12);
    }

    #[test]
    fn abf_vanishes_beyond_the_window() {
        let v = abf_vector([3.0, 0.0], 1.0, 3).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn abf_first_entry_reduces_to_psi_x_over_h() {
        // (a,b) = (1,0): psi * (1/sqrt 2) * 2 * (x/(h sqrt 2)) = psi * x/h
        let h = 1.3;
        let off = [0.8, -0.4];
        let v = abf_vector(off, h, 2).unwrap();
        let want = psi(norm(off) / h) * off[0] / h;
        assert!((v[0] - want).abs() < 1e-14);
    }

    #[test]
    fn abf_lengths_follow_the_rank_formula() {
        assert_eq!(abf_vector([0.1, 0.1], 1.0, 2).unwrap().len(), 5);
        assert_eq!(abf_vector([0.1, 0.1], 1.0, 4).unwrap().len(), 14);
    }

    #[test]
    fn labfm_moments_are_exact_by_construction() {
        let cloud = generate_perturbed_grid(24, 24, 0.1, 1.0, 17).unwrap();
        for (center, kind, p) in [
            (100, OperatorKind::Dx, 2),
            (205, OperatorKind::Laplacian, 2),
            (333, OperatorKind::Dx, 4),
            (41, OperatorKind::Hyperviscous, 4),
        ] {
            let st = cloud.knn_stencil(center, 35).unwrap();
            let config = LabfmConfig::for_stencil(p, &st);
            let w = labfm_weights(&st, &config, kind).unwrap();
            let r = moment_residual(&st.offsets, &w.values, kind, p, st.d_n).unwrap();
            let linf = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(linf <= 1e-10, "{kind:?} p={p}: residual {linf:.3e}");
        }
    }

    #[test]
    fn labfm_reproduces_monomial_derivatives_at_the_center() {
        let cloud = generate_perturbed_grid(20, 20, 0.05, 0.8, 3).unwrap();
        let st = cloud.knn_stencil(190, 35).unwrap();
        let config = LabfmConfig::for_stencil(3, &st);
        let w = labfm_weights(&st, &config, OperatorKind::Dx).unwrap();
        // d/dx of x^a y^b at the center (offset origin) is 1 for (1,0), else 0
        for (a, b, want) in [(1, 0, 1.0), (0, 1, 0.0), (2, 0, 0.0), (1, 1, 0.0), (0, 3, 0.0)] {
            let mut acc = 0.0;
            for (o, wv) in st.offsets.iter().zip(&w.values) {
                acc += o[0].powi(a) * o[1].powi(b) * wv;
            }
            assert!(
                (acc - want).abs() < 1e-8 / st.d_n,
                "x^{a} y^{b}: got {acc}, want {want}"
            );
        }
    }

    #[test]
    fn undersized_stencil_is_rejected() {
        let cloud = generate_perturbed_grid(10, 10, 0.1, 0.5, 1).unwrap();
        let st = cloud.knn_stencil(44, 4).unwrap();
        let config = LabfmConfig::for_stencil(2, &st);
        assert!(matches!(
            labfm_weights(&st, &config, OperatorKind::Dx),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn unreachable_condition_limit_reports_ill_conditioning() {
        let cloud = generate_perturbed_grid(20, 20, 0.1, 1.0, 5).unwrap();
        let st = cloud.knn_stencil(150, 35).unwrap();
        let mut config = LabfmConfig::for_stencil(4, &st);
        config.condition_limit = 1.0 + 1e-9;
        assert!(matches!(
            labfm_weights(&st, &config, OperatorKind::Dx),
            Err(Error::IllConditionedStencil { .. })
        ));
    }
}
