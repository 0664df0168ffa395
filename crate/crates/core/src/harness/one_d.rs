//! One-dimensional convergence study for the PPM scheme.

use std::f64::consts::PI;

use crate::error::Result;
use crate::ppm1d::{advect_step_1d, Boundary1D, Profile1D};

/// Smooth periodic bump on `[0, 1)`: `exp(kappa (cos 2 pi (x - 1/2) - 1))`,
/// a von Mises profile that behaves like a Gaussian of width
/// `1 / (2 pi sqrt(kappa))` near its peak.
pub fn periodic_bump(x: f64, kappa: f64) -> f64 {
    (kappa * ((2.0 * PI * (x - 0.5)).cos() - 1.0)).exp()
}

const GAUSS_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Mean of `f` over `[a, b]` by five-point Gauss-Legendre quadrature.
pub fn cell_average(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    0.5 * GAUSS_NODES.iter().zip(GAUSS_WEIGHTS).map(|(&x, w)| w * f(mid + half * x)).sum::<f64>()
}

/// Initial cell values of the bump on `n` cells, either point samples at
/// the centres or quadrature cell averages.
pub fn bump_profile(n: usize, kappa: f64, averaged: bool) -> Vec<f64> {
    let dx = 1.0 / n as f64;
    (0..n)
        .map(|i| {
            let a = i as f64 * dx;
            if averaged {
                cell_average(|x| periodic_bump(x, kappa), a, a + dx)
            } else {
                periodic_bump(a + 0.5 * dx, kappa)
            }
        })
        .collect()
}

/// Carries the bump once round the unit periodic domain at unit speed and
/// Courant number `courant`, returning the relative l2 error against the
/// initial profile for each resolution as `(dx, error)`.
///
/// `courant` times `n` must be a whole number of cells per revolution.
pub fn ppm_revolution_errors(resolutions: &[usize], courant: f64, kappa: f64, averaged: bool) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let dx = 1.0 / n as f64;
        let dt = courant * dx;
        let steps = (1.0 / dt).round() as usize;
        let initial = bump_profile(n, kappa, averaged);
        let mut profile = Profile1D::new(initial.clone(), dx, Boundary1D::Periodic)?;
        let u = vec![1.0; n + 1];
        for _ in 0..steps {
            profile = advect_step_1d(&profile, &u, dt)?;
        }
        let num: f64 = profile.values.iter().zip(&initial).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = initial.iter().map(|b| b * b).sum();
        out.push((dx, (num / den).sqrt()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_integrates_quintics_exactly() {
        let f = |x: f64| 3.0 * x.powi(5) - x.powi(2) + 1.0;
        // integral over [0, 2] = 32 - 8/3 + 2
        let exact = (32.0 - 8.0 / 3.0 + 2.0) / 2.0;
        assert!((cell_average(f, 0.0, 2.0) - exact).abs() < 1e-13);
    }

    #[test]
    fn averages_and_samples_agree_to_second_order() {
        let kappa = 10.0;
        let e1: f64 = bump_profile(80, kappa, true)
            .iter()
            .zip(bump_profile(80, kappa, false))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let e2: f64 = bump_profile(160, kappa, true)
            .iter()
            .zip(bump_profile(160, kappa, false))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!((e1 / e2 - 4.0).abs() < 0.2, "ratio {}", e1 / e2);
    }
}
