//! Streamfunctions of the test cases, face fluxes and Courant diagnostics.
//!
//! Velocity follows `u = -dpsi/dy`, `v = dpsi/dx`, so the flux through a
//! face is the difference of the streamfunction between its two end
//! vertices and every cell is exactly divergence free.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::Vec2;
use crate::mesh::{FaceDir, FaceInfo, PhysicalMesh};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StreamfunctionSpec {
    /// `psi = A |x - x_c|^2`, anticlockwise rotation at angular velocity 2A.
    SolidBody { a: f64, centre: Vec2 },
    /// Horizontal wind `u(z)` rising from 0 below `z1` to `u0` above `z2`.
    Orography { u0: f64, z1: f64, z2: f64 },
    /// Reversing deformation superposed on a uniform wind crossing the
    /// periodic domain once per `period`.
    Deformational { psi_hat: f64, period: f64, lx: f64, ly: f64 },
}

impl StreamfunctionSpec {
    pub fn solid_body_default() -> Self {
        StreamfunctionSpec::SolidBody { a: 5.0 * PI / 3000.0, centre: Vec2::new(5000.0, 5000.0) }
    }

    pub fn orography_default() -> Self {
        StreamfunctionSpec::Orography { u0: 10.0, z1: 4000.0, z2: 5000.0 }
    }

    pub fn deformational_default() -> Self {
        StreamfunctionSpec::Deformational { psi_hat: 10.0, period: 5.0, lx: 2.0 * PI, ly: PI }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StreamfunctionSpec::SolidBody { a, .. } if !(a > 0.0) => {
                Err(Error::Config(format!("solid body rate A={a} must be positive")))
            }
            StreamfunctionSpec::Orography { z1, z2, .. } if !(z1 < z2) => {
                Err(Error::Config(format!("orography wind requires z1 < z2 (z1={z1}, z2={z2})")))
            }
            StreamfunctionSpec::Deformational { period, .. } if !(period > 0.0) => {
                Err(Error::Config(format!("deformational period T={period} must be positive")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, StreamfunctionSpec::Deformational { .. })
    }

    /// Orography wind profile.
    pub fn orography_wind(u0: f64, z1: f64, z2: f64, z: f64) -> f64 {
        if z >= z2 {
            u0
        } else if z > z1 {
            let s = (0.5 * PI * (z - z1) / (z2 - z1)).sin();
            u0 * s * s
        } else {
            0.0
        }
    }

    pub fn eval(&self, p: Vec2, t: f64) -> f64 {
        match *self {
            StreamfunctionSpec::SolidBody { a, centre } => {
                let d = p - centre;
                a * d.dot(d)
            }
            StreamfunctionSpec::Orography { u0, z1, z2 } => {
                let z = p.y;
                let depth = z2 - z1;
                if z <= z1 {
                    0.0
                } else if z <= z2 {
                    let s = z - z1;
                    -u0 * (0.5 * s - depth / (2.0 * PI) * (PI * s / depth).sin())
                } else {
                    -u0 * (0.5 * depth + (z - z2))
                }
            }
            StreamfunctionSpec::Deformational { psi_hat, period, lx, ly } => {
                let k = lx / (2.0 * PI);
                let sx = (2.0 * PI * (p.x / lx - t / period)).sin();
                let cy = (PI * p.y / ly).cos();
                psi_hat / period * k * k * sx * sx * cy * cy * (PI * t / period).cos() - lx * p.y / period
            }
        }
    }
}

/// Signed volumetric flux through every face, positive in the +x / +y
/// computational direction.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceFluxField {
    nx: usize,
    ny: usize,
    flux_x: Vec<f64>,
    flux_y: Vec<f64>,
    pub valid_time: f64,
}

impl FaceFluxField {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self { nx, ny, flux_x: vec![0.0; (nx + 1) * ny], flux_y: vec![0.0; nx * (ny + 1)], valid_time: 0.0 }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn fx(&self, i: usize, j: usize) -> f64 {
        self.flux_x[j * (self.nx + 1) + i]
    }

    #[inline]
    pub fn fy(&self, i: usize, j: usize) -> f64 {
        self.flux_y[j * self.nx + i]
    }

    pub fn set_fx(&mut self, i: usize, j: usize, value: f64) {
        self.flux_x[j * (self.nx + 1) + i] = value;
    }

    pub fn set_fy(&mut self, i: usize, j: usize, value: f64) {
        self.flux_y[j * self.nx + i] = value;
    }

    pub fn flux_x(&self) -> &[f64] {
        &self.flux_x
    }

    pub fn flux_y(&self) -> &[f64] {
        &self.flux_y
    }

    pub fn face(&self, face: &FaceInfo) -> f64 {
        match face.dir {
            FaceDir::X => self.fx(face.i, face.j),
            FaceDir::Y => self.fy(face.i, face.j),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            flux_x: self.flux_x.iter().map(|f| f * factor).collect(),
            flux_y: self.flux_y.iter().map(|f| f * factor).collect(),
            valid_time: self.valid_time,
        }
    }

    /// Zeroes the boundary fluxes of closed directions.
    pub fn close_walls(&mut self, x_walls: bool, y_walls: bool) {
        if x_walls {
            for j in 0..self.ny {
                self.set_fx(0, j, 0.0);
                self.set_fx(self.nx, j, 0.0);
            }
        }
        if y_walls {
            for i in 0..self.nx {
                self.set_fy(i, 0, 0.0);
                self.set_fy(i, self.ny, 0.0);
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.flux_x.iter().chain(&self.flux_y).fold(0.0_f64, |m, f| m.max(f.abs()))
    }

    /// Net outward flux of cell `(i, j)`.
    pub fn net_outflow(&self, i: usize, j: usize) -> f64 {
        self.fx(i + 1, j) - self.fx(i, j) + self.fy(i, j + 1) - self.fy(i, j)
    }
}

/// Face fluxes from vertex streamfunction differences.
///
/// On periodic directions the last face duplicates the first, so the
/// flux through a periodic seam is defined once.
pub fn face_fluxes(spec: &StreamfunctionSpec, mesh: &PhysicalMesh, t: f64) -> FaceFluxField {
    let grid = mesh.grid();
    let (nx, ny) = (grid.nx, grid.ny);
    let psi: Vec<f64> = mesh.vertices().iter().map(|&v| spec.eval(v, t)).collect();
    let at = |i: usize, j: usize| psi[grid.vertex(i, j)];
    let mut out = FaceFluxField::zeros(nx, ny);
    out.valid_time = t;
    for j in 0..ny {
        for i in 0..=nx {
            out.set_fx(i, j, at(i, j) - at(i, j + 1));
        }
        if grid.periodic_x {
            let seam = out.fx(0, j);
            out.set_fx(nx, j, seam);
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            out.set_fy(i, j, at(i + 1, j) - at(i, j));
        }
    }
    if grid.periodic_y {
        for i in 0..nx {
            let seam = out.fy(i, 0);
            out.set_fy(i, ny, seam);
        }
    }
    out
}

/// Courant numbers in computational space: the face-normal flux divided by
/// the face's share of `|J|^-1 dx dy`.
#[derive(Clone, Debug)]
pub struct ComputationalCourant {
    pub nx: usize,
    pub ny: usize,
    pub cx: Vec<f64>,
    pub cy: Vec<f64>,
}

impl ComputationalCourant {
    pub fn new(fluxes: &FaceFluxField, mesh: &PhysicalMesh, dt: f64) -> Self {
        let grid = mesh.grid();
        let dxdy = grid.dx * grid.dy;
        let cx = fluxes
            .flux_x()
            .iter()
            .zip(mesh.jac_inv_face_x())
            .map(|(f, j)| f * dt / (j * dxdy))
            .collect();
        let cy = fluxes
            .flux_y()
            .iter()
            .zip(mesh.jac_inv_face_y())
            .map(|(f, j)| f * dt / (j * dxdy))
            .collect();
        Self { nx: grid.nx, ny: grid.ny, cx, cy }
    }

    #[inline]
    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.cx[j * (self.nx + 1) + i]
    }

    #[inline]
    pub fn y(&self, i: usize, j: usize) -> f64 {
        self.cy[j * self.nx + i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CourantNumbers {
    /// Multi-dimensional Courant number `(1/2V) sum_f |flux_f| dt`.
    pub max_c: f64,
    /// Largest velocity-gradient term, differenced in index space.
    pub max_cd: f64,
}

impl CourantNumbers {
    pub fn merge(self, other: CourantNumbers) -> CourantNumbers {
        CourantNumbers { max_c: self.max_c.max(other.max_c), max_cd: self.max_cd.max(other.max_cd) }
    }
}

/// Maximum multi-dimensional and deformational Courant numbers.
///
/// The deformational number takes the largest of `|dc_x/di|`, `|dc_y/dj|`,
/// `|dc_x/dj|` and `|dc_y/di|`. Diagonal terms difference adjacent faces of
/// a cell; cross terms use central differences of cell-centred Courant
/// numbers, one-sided next to closed boundaries.
pub fn courant_numbers(fluxes: &FaceFluxField, mesh: &PhysicalMesh, dt: f64) -> CourantNumbers {
    let grid = mesh.grid();
    let (nx, ny) = (grid.nx, grid.ny);
    let mut max_c = 0.0_f64;
    for j in 0..ny {
        for i in 0..nx {
            let s = fluxes.fx(i, j).abs() + fluxes.fx(i + 1, j).abs() + fluxes.fy(i, j).abs() + fluxes.fy(i, j + 1).abs();
            max_c = max_c.max(s * dt / (2.0 * mesh.cell_volume(grid.cell(i, j))));
        }
    }

    let cc = ComputationalCourant::new(fluxes, mesh, dt);
    let mut ucell = vec![0.0; nx * ny];
    let mut vcell = vec![0.0; nx * ny];
    let mut max_cd = 0.0_f64;
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.cell(i, j);
            ucell[k] = 0.5 * (cc.x(i, j) + cc.x(i + 1, j));
            vcell[k] = 0.5 * (cc.y(i, j) + cc.y(i, j + 1));
            max_cd = max_cd.max((cc.x(i + 1, j) - cc.x(i, j)).abs());
            max_cd = max_cd.max((cc.y(i, j + 1) - cc.y(i, j)).abs());
        }
    }
    let diff = |v: &[f64], i: usize, j: usize, along_x: bool| -> f64 {
        let (n, periodic, idx) = if along_x { (nx, grid.periodic_x, i) } else { (ny, grid.periodic_y, j) };
        let at = |m: usize| if along_x { v[grid.cell(m, j)] } else { v[grid.cell(i, m)] };
        if periodic {
            0.5 * (at((idx + 1) % n) - at((idx + n - 1) % n))
        } else if idx == 0 {
            at(1) - at(0)
        } else if idx == n - 1 {
            at(n - 1) - at(n - 2)
        } else {
            0.5 * (at(idx + 1) - at(idx - 1))
        }
    };
    for j in 0..ny {
        for i in 0..nx {
            max_cd = max_cd.max(diff(&ucell, i, j, false).abs());
            max_cd = max_cd.max(diff(&vcell, i, j, true).abs());
        }
    }
    CourantNumbers { max_c, max_cd }
}

/// Velocity at a point by central differencing the streamfunction.
pub fn point_velocity(spec: &StreamfunctionSpec, p: Vec2, t: f64, h: f64) -> Vec2 {
    let dpsi_dx = (spec.eval(p + Vec2::new(h, 0.0), t) - spec.eval(p - Vec2::new(h, 0.0), t)) / (2.0 * h);
    let dpsi_dy = (spec.eval(p + Vec2::new(0.0, h), t) - spec.eval(p - Vec2::new(0.0, h), t)) / (2.0 * h);
    Vec2::new(-dpsi_dy, dpsi_dx)
}
