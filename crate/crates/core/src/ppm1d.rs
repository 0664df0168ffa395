//! One-dimensional PPM without limiters, extended to arbitrary Courant
//! numbers by splitting the swept mass into whole cells (from a cumulative
//! mass) and a fractional parabola integral.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary1D {
    Periodic,
    /// Zero-gradient ghost cells and no flux through the two end faces.
    Closed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Profile1D {
    pub values: Vec<f64>,
    pub dx: f64,
    pub boundary: Boundary1D,
}

impl Profile1D {
    pub fn new(values: Vec<f64>, dx: f64, boundary: Boundary1D) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::Config(format!("1D profile needs at least 4 cells, got {}", values.len())));
        }
        if !(dx > 0.0) {
            return Err(Error::Config(format!("1D cell size must be positive, got {dx}")));
        }
        Ok(Self { values, dx, boundary })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }
}

#[inline]
fn ghost(values: &[f64], k: isize, boundary: Boundary1D) -> f64 {
    let n = values.len() as isize;
    match boundary {
        Boundary1D::Periodic => values[k.rem_euclid(n) as usize],
        Boundary1D::Closed => values[k.clamp(0, n - 1) as usize],
    }
}

/// Fourth-order edge estimates; entry `k` is the edge between cells `k-1`
/// and `k`, so there are `n + 1` of them.
pub fn edge_values(values: &[f64], boundary: Boundary1D) -> Vec<f64> {
    let n = values.len() as isize;
    (0..=n)
        .map(|k| {
            let a = ghost(values, k - 1, boundary) + ghost(values, k, boundary);
            let b = ghost(values, k - 2, boundary) + ghost(values, k + 1, boundary);
            7.0 / 12.0 * a - 1.0 / 12.0 * b
        })
        .collect()
}

/// Which end of the departure cell the swept fraction is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Upwind {
    /// Flow towards +x: the fraction next to the cell's right edge.
    Positive,
    /// Flow towards -x: the fraction next to the cell's left edge.
    Negative,
}

/// Integral of the cell parabola over the fraction `c_r` of the cell
/// adjacent to its downwind edge, in tracer times length.
pub fn parabola_flux_fraction(phi: f64, p_left: f64, p_right: f64, dx: f64, c_r: f64, dir: Upwind) -> f64 {
    let dp = p_right - p_left;
    let a6 = 6.0 * (phi - 0.5 * (p_left + p_right));
    let s = c_r;
    let curve = a6 * (0.5 * s * s - s * s * s / 3.0);
    let unit = match dir {
        Upwind::Positive => p_right * s - 0.5 * dp * s * s + curve,
        Upwind::Negative => p_left * s + 0.5 * dp * s * s + curve,
    };
    unit * dx
}

/// Courant number split into a signed whole part and a remainder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CourantSplit {
    pub c_n: i64,
    pub c_r: f64,
    pub positive: bool,
}

impl CourantSplit {
    /// Departure cell of edge `edge` (the edge between cells `edge-1` and `edge`).
    pub fn departure_cell(&self, edge: i64) -> i64 {
        if self.positive {
            edge - self.c_n - 1
        } else {
            edge - self.c_n
        }
    }
}

pub fn split_courant(u: f64, dt: f64, dx: f64) -> CourantSplit {
    split_courant_number(u * dt / dx)
}

pub fn split_courant_number(c: f64) -> CourantSplit {
    let whole = c.trunc();
    CourantSplit { c_n: whole as i64, c_r: (c - whole).abs(), positive: c > 0.0 }
}

/// Cumulative mass of a profile extended beyond its ends (periodic images
/// or constant ghost cells).
struct CumulativeMass<'a> {
    values: &'a [f64],
    prefix: Vec<f64>,
    dx: f64,
    boundary: Boundary1D,
}

impl<'a> CumulativeMass<'a> {
    fn new(values: &'a [f64], dx: f64, boundary: Boundary1D) -> Self {
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in values {
            acc += v * dx;
            prefix.push(acc);
        }
        Self { values, prefix, dx, boundary }
    }

    /// Mass of all cells with index below `k`, relative to cell 0.
    fn at(&self, k: i64) -> f64 {
        let n = self.values.len() as i64;
        match self.boundary {
            Boundary1D::Periodic => {
                let q = k.div_euclid(n);
                let r = k.rem_euclid(n);
                q as f64 * self.prefix[n as usize] + self.prefix[r as usize]
            }
            Boundary1D::Closed => {
                if k < 0 {
                    k as f64 * self.values[0] * self.dx
                } else if k > n {
                    self.prefix[n as usize] + (k - n) as f64 * self.values[n as usize - 1] * self.dx
                } else {
                    self.prefix[k as usize]
                }
            }
        }
    }
}

/// Signed mass crossing each edge in one step, for Courant numbers `c`
/// given per edge (`n + 1` entries, positive towards +x).
///
/// On closed profiles the two end edges carry no mass.
pub fn swept_masses(values: &[f64], dx: f64, courant: &[f64], boundary: Boundary1D) -> Result<Vec<f64>> {
    let n = values.len();
    debug_assert_eq!(courant.len(), n + 1);
    let edges = edge_values(values, boundary);
    let cum = CumulativeMass::new(values, dx, boundary);
    let ni = n as i64;

    let parabola = |cell: i64| -> (f64, f64, f64) {
        match boundary {
            Boundary1D::Periodic => {
                let c = cell.rem_euclid(ni) as usize;
                (values[c], edges[c], edges[c + 1])
            }
            Boundary1D::Closed => {
                if cell < 0 {
                    (values[0], values[0], values[0])
                } else if cell >= ni {
                    (values[n - 1], values[n - 1], values[n - 1])
                } else {
                    let c = cell as usize;
                    (values[c], edges[c], edges[c + 1])
                }
            }
        }
    };

    let mut out = vec![0.0; n + 1];
    for (e, &c) in courant.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        if boundary == Boundary1D::Closed && (e == 0 || e == n) {
            continue;
        }
        if boundary == Boundary1D::Periodic && c.abs() > n as f64 {
            return Err(Error::CourantExceedsDomain { face: e, courant: c, n });
        }
        let split = split_courant_number(c);
        let edge = e as i64;
        let d = split.departure_cell(edge);
        let (phi, pl, pr) = parabola(d);
        out[e] = if split.positive {
            let whole = cum.at(edge) - cum.at(edge - split.c_n);
            whole + parabola_flux_fraction(phi, pl, pr, dx, split.c_r, Upwind::Positive)
        } else {
            let whole = cum.at(edge - split.c_n) - cum.at(edge);
            -(whole + parabola_flux_fraction(phi, pl, pr, dx, split.c_r, Upwind::Negative))
        };
    }
    if boundary == Boundary1D::Periodic {
        // Both ends are the same face; keep the telescoping sum exact.
        out[n] = out[0];
    }
    Ok(out)
}

/// Face fluxes `u * phi_e` from edge velocities over one step.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceFlux1D {
    pub flux: Vec<f64>,
}

pub fn ppm_fluxes(profile: &Profile1D, u_faces: &[f64], dt: f64) -> Result<FaceFlux1D> {
    let courant: Vec<f64> = u_faces.iter().map(|u| u * dt / profile.dx).collect();
    let masses = swept_masses(&profile.values, profile.dx, &courant, profile.boundary)?;
    Ok(FaceFlux1D { flux: masses.into_iter().map(|m| m / dt).collect() })
}

pub fn advect_step_1d(profile: &Profile1D, u_faces: &[f64], dt: f64) -> Result<Profile1D> {
    let flux = ppm_fluxes(profile, u_faces, dt)?.flux;
    let k = dt / profile.dx;
    let values = profile
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v - k * (flux[i + 1] - flux[i]))
        .collect();
    Ok(Profile1D { values, dx: profile.dx, boundary: profile.boundary })
}
