//! Error norms, convergence rates and operation counts.

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::mesh::PhysicalMesh;

use super::cases::SchemeId;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub linf: f64,
}

/// Volume-weighted relative norms of `field - reference`.
pub fn error_norms(field: &Field2D, reference: &Field2D, mesh: &PhysicalMesh) -> Result<ErrorNorms> {
    weighted_error_norms(field.as_slice(), reference.as_slice(), mesh.cell_volumes())
}

/// [`error_norms`] on raw slices with explicit cell volumes.
pub fn weighted_error_norms(field: &[f64], reference: &[f64], volumes: &[f64]) -> Result<ErrorNorms> {
    assert_eq!(field.len(), reference.len());
    assert_eq!(field.len(), volumes.len());
    let mut num = 0.0;
    let mut den = 0.0;
    let mut max_diff = 0.0_f64;
    let mut max_ref = 0.0_f64;
    for ((&f, &r), &v) in field.iter().zip(reference).zip(volumes) {
        let d = f - r;
        num += v * d * d;
        den += v * r * r;
        max_diff = max_diff.max(d.abs());
        max_ref = max_ref.max(r.abs());
    }
    if den == 0.0 || max_ref == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(ErrorNorms { l2: (num / den).sqrt(), linf: max_diff / max_ref })
}

/// Least-squares slope of `log error` against `log h`. With
/// `skip_coarsest` the point with the largest `h` is dropped first.
pub fn convergence_slope(points: &[(f64, f64)], skip_coarsest: bool) -> Result<f64> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    if skip_coarsest && !pts.is_empty() {
        let coarsest = pts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(k, _)| k)
            .unwrap_or(0);
        pts.remove(coarsest);
    }
    if pts.len() < 2 {
        return Err(Error::TooFewPoints);
    }
    if pts.iter().any(|&(h, e)| !(h > 0.0 && e > 0.0)) {
        return Err(Error::Config("convergence points need positive spacing and error".into()));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= f64::EPSILON * n {
        return Err(Error::Config("convergence points need distinct spacings".into()));
    }
    Ok(sxy / sxx)
}

/// Multiplications per cell per time step.
///
/// The split scheme costs 40. The explicit scheme does a 12-cell
/// reconstruction on each of four faces shared between two cells, twice:
/// 48. Each BiCG iteration of the implicit scheme costs 24, plus 48 for
/// every two outer iterations.
pub fn multiply_count(scheme: SchemeId, mean_iterations_per_step: f64, mean_outer_per_step: f64) -> f64 {
    match scheme {
        SchemeId::Split => 40.0,
        SchemeId::MolRk2 => 48.0,
        SchemeId::MolImplicit => mean_iterations_per_step * 24.0 + 48.0 * (mean_outer_per_step / 2.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_fields_have_zero_error() {
        let r = [0.2, 1.0, 0.5, 0.0];
        let e = weighted_error_norms(&r, &r, &[1.0; 4]).unwrap();
        assert_eq!((e.l2, e.linf), (0.0, 0.0));
    }

    #[test]
    fn constant_offset_gives_linf() {
        let r = [0.2, 1.0, 0.5, 0.0];
        let f: Vec<f64> = r.iter().map(|v| v + 0.03).collect();
        let e = weighted_error_norms(&f, &r, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((e.linf - 0.03).abs() < 1e-15);
    }

    #[test]
    fn hand_built_two_by_two() {
        // diffs (0.1, -0.2, 0, 0.5), volumes (1, 2, 1, 0.5), reference (1, 2, 0, 1)
        // num = 0.01 + 0.08 + 0 + 0.125 = 0.215; den = 1 + 8 + 0 + 0.5 = 9.5
        let reference = [1.0, 2.0, 0.0, 1.0];
        let field = [1.1, 1.8, 0.0, 1.5];
        let e = weighted_error_norms(&field, &reference, &[1.0, 2.0, 1.0, 0.5]).unwrap();
        assert!((e.l2 - (0.215_f64 / 9.5).sqrt()).abs() < 1e-15);
        assert!((e.linf - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_reference_is_an_error() {
        assert!(matches!(weighted_error_norms(&[1.0], &[0.0], &[1.0]), Err(Error::ZeroReference)));
    }

    #[test]
    fn slopes_of_power_laws() {
        for p in [2.0, 3.0] {
            let pts: Vec<(f64, f64)> = [0.4, 0.2, 0.1, 0.05].iter().map(|&h: &f64| (h, 7.0 * h.powf(p))).collect();
            assert!((convergence_slope(&pts, false).unwrap() - p).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_coarsest_point_is_skipped() {
        // Third order on the finest three points, saturated at the coarsest.
        let pts = [(0.4, 0.5), (0.2, 8e-3), (0.1, 1e-3), (0.05, 1.25e-4)];
        let all = convergence_slope(&pts, false).unwrap();
        let fine = convergence_slope(&pts, true).unwrap();
        assert!((fine - 3.0).abs() < 1e-12);
        assert!(all > 3.5);
    }

    #[test]
    fn slope_needs_two_points() {
        assert!(matches!(convergence_slope(&[(0.1, 1.0)], false), Err(Error::TooFewPoints)));
        assert!(matches!(convergence_slope(&[(0.1, 1.0), (0.2, 2.0)], true), Err(Error::TooFewPoints)));
    }

    #[test]
    fn reference_operation_counts() {
        assert_eq!(multiply_count(SchemeId::Split, 0.0, 0.0), 40.0);
        assert_eq!(multiply_count(SchemeId::MolRk2, 0.0, 0.0), 48.0);
        assert_eq!(multiply_count(SchemeId::MolImplicit, 6.5, 2.0), 204.0);
        assert_eq!(multiply_count(SchemeId::MolImplicit, 6.5, 4.0), 6.5 * 24.0 + 96.0);
    }
}
