//! Closed-form decaying Taylor-Green vortex on the periodic unit square.

use std::f64::consts::PI;

/// Incompressible reference velocity at `point` and characteristic time
/// `t_star`.
pub fn tgv_exact(point: [f64; 2], t_star: f64, reynolds: f64) -> (f64, f64) {
    let decay = (-8.0 * PI * PI * t_star / reynolds).exp();
    let u = -decay * (2.0 * PI * point[0]).cos() * (2.0 * PI * point[1]).sin();
    let v = decay * (2.0 * PI * point[0]).sin() * (2.0 * PI * point[1]).cos();
    (u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_nodes_sit_on_the_quarter_lines() {
        for t in [0.0, 0.3, 2.0] {
            let (u, _) = tgv_exact([0.25, 0.25], t, 100.0);
            assert!(u.abs() < 1e-15);
        }
    }

    #[test]
    fn initial_speed_peaks_at_one() {
        let mut max: f64 = 0.0;
        for i in 0..64 {
            for j in 0..64 {
                let (u, v) = tgv_exact([i as f64 / 64.0, j as f64 / 64.0], 0.0, 100.0);
                max = max.max(u.abs()).max(v.abs());
            }
        }
        assert!((max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kinetic_energy_decays_at_twice_the_velocity_rate() {
        // E(t)/E(0) = exp(-16 pi^2 t / Re), checked by quadrature
        let re = 100.0;
        let t = 0.4;
        let n = 128;
        let mut e0 = 0.0;
        let mut et = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
                let (u0, v0) = tgv_exact(p, 0.0, re);
                let (u1, v1) = tgv_exact(p, t, re);
                e0 += 0.5 * (u0 * u0 + v0 * v0);
                et += 0.5 * (u1 * u1 + v1 * v1);
            }
        }
        let want = (-16.0 * PI * PI * t / re).exp();
        assert!(((et / e0) - want).abs() < 1e-10);
    }
}
