//! COSMIC splitting of the 1D long time-step PPM onto mapped meshes.
//!
//! Operators here include the factor `dt`, so for a cell of computational
//! size `dx dy` the conservative x operator is
//! `X_C = -(m_e - m_w)` with `m = |J|^-1_face * swept_mass / dx`, and the
//! advective operator adds back `phi_ij (mu_e - mu_w)` where
//! `mu = flux dt / (dx dy)`. With the same face quantities in both, a
//! uniform field is preserved exactly under divergence-free fluxes.

use log::warn;

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::mesh::PhysicalMesh;
use crate::ppm1d::{swept_masses, Boundary1D};
use crate::velocity::{ComputationalCourant, FaceFluxField};

/// Per-step face quantities shared by the four sweeps.
#[derive(Clone, Debug)]
pub struct SweepCoefficients {
    pub courant: ComputationalCourant,
    pub mu_x: Vec<f64>,
    pub mu_y: Vec<f64>,
}

impl SweepCoefficients {
    pub fn new(fluxes: &FaceFluxField, mesh: &PhysicalMesh, dt: f64) -> Self {
        let g = mesh.grid();
        let k = dt / (g.dx * g.dy);
        Self {
            courant: ComputationalCourant::new(fluxes, mesh, dt),
            mu_x: fluxes.flux_x().iter().map(|f| f * k).collect(),
            mu_y: fluxes.flux_y().iter().map(|f| f * k).collect(),
        }
    }
}

fn boundary(periodic: bool) -> Boundary1D {
    if periodic {
        Boundary1D::Periodic
    } else {
        Boundary1D::Closed
    }
}

/// Conservative operators `(X_C, Y_C)` applied to `phi`.
pub fn conservative_ops(mesh: &PhysicalMesh, phi: &Field2D, coeffs: &SweepCoefficients) -> Result<(Field2D, Field2D)> {
    Ok((conservative_x(mesh, phi, coeffs)?, conservative_y(mesh, phi, coeffs)?))
}

fn conservative_x(mesh: &PhysicalMesh, phi: &Field2D, coeffs: &SweepCoefficients) -> Result<Field2D> {
    let g = mesh.grid();
    let (nx, ny) = (g.nx, g.ny);
    let jf = mesh.jac_inv_face_x();
    let mut out = Field2D::zeros(nx, ny);
    let mut courant = vec![0.0; nx + 1];
    for j in 0..ny {
        for (i, c) in courant.iter_mut().enumerate() {
            *c = coeffs.courant.x(i, j);
        }
        let mass = swept_masses(phi.row(j), 1.0, &courant, boundary(g.periodic_x))?;
        let m = |i: usize| jf[g.face_x(i, j)] * mass[i];
        for i in 0..nx {
            out[(i, j)] = -(m(i + 1) - m(i));
        }
    }
    Ok(out)
}

fn conservative_y(mesh: &PhysicalMesh, phi: &Field2D, coeffs: &SweepCoefficients) -> Result<Field2D> {
    let g = mesh.grid();
    let (nx, ny) = (g.nx, g.ny);
    let jf = mesh.jac_inv_face_y();
    let mut out = Field2D::zeros(nx, ny);
    let mut courant = vec![0.0; ny + 1];
    for i in 0..nx {
        for (j, c) in courant.iter_mut().enumerate() {
            *c = coeffs.courant.y(i, j);
        }
        let mass = swept_masses(&phi.column(i), 1.0, &courant, boundary(g.periodic_y))?;
        let m = |j: usize| jf[g.face_y(i, j)] * mass[j];
        for j in 0..ny {
            out[(i, j)] = -(m(j + 1) - m(j));
        }
    }
    Ok(out)
}

/// Advective operators `(X_A, Y_A)` applied to `phi`.
pub fn advective_ops(mesh: &PhysicalMesh, phi: &Field2D, coeffs: &SweepCoefficients) -> Result<(Field2D, Field2D)> {
    let (xc, yc) = conservative_ops(mesh, phi, coeffs)?;
    Ok((advective_from_x(mesh, phi, coeffs, xc), advective_from_y(mesh, phi, coeffs, yc)))
}

fn advective_from_x(mesh: &PhysicalMesh, phi: &Field2D, coeffs: &SweepCoefficients, mut xc: Field2D) -> Field2D {
    let g = mesh.grid();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let div = coeffs.mu_x[g.face_x(i + 1, j)] - coeffs.mu_x[g.face_x(i, j)];
            xc[(i, j)] += phi[(i, j)] * div;
        }
    }
    xc
}

fn advective_from_y(mesh: &PhysicalMesh, phi: &Field2D, coeffs: &SweepCoefficients, mut yc: Field2D) -> Field2D {
    let g = mesh.grid();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let div = coeffs.mu_y[g.face_y(i, j + 1)] - coeffs.mu_y[g.face_y(i, j)];
            yc[(i, j)] += phi[(i, j)] * div;
        }
    }
    yc
}

/// One COSMIC update:
/// `phi + J (X_C(phi + J/2 Y_A(phi)) + Y_C(phi + J/2 X_A(phi)))`
/// with `J = dx dy / V` per cell.
pub fn cosmic_step(mesh: &PhysicalMesh, phi: &Field2D, fluxes: &FaceFluxField, dt: f64) -> Result<Field2D> {
    let coeffs = SweepCoefficients::new(fluxes, mesh, dt);
    cosmic_step_with(mesh, phi, &coeffs)
}

pub fn cosmic_step_with(mesh: &PhysicalMesh, phi: &Field2D, coeffs: &SweepCoefficients) -> Result<Field2D> {
    let (xa, ya) = advective_ops(mesh, phi, coeffs)?;
    let jac = mesh.jac_inv_cell();
    let (nx, ny) = (phi.nx(), phi.ny());
    let inner = |a: &Field2D| {
        Field2D::from_fn(nx, ny, |i, j| phi[(i, j)] + 0.5 * a[(i, j)] / jac[j * nx + i])
    };
    let xc = conservative_x(mesh, &inner(&ya), coeffs)?;
    let yc = conservative_y(mesh, &inner(&xa), coeffs)?;
    Ok(Field2D::from_fn(nx, ny, |i, j| phi[(i, j)] + (xc[(i, j)] + yc[(i, j)]) / jac[j * nx + i]))
}

/// Tracer state for the split scheme with a step counter for divergence
/// reporting.
#[derive(Clone, Debug)]
pub struct SplitState2D {
    pub phi: Field2D,
    pub step: usize,
}

impl SplitState2D {
    pub fn new(phi: Field2D) -> Self {
        Self { phi, step: 0 }
    }

    /// Advances one step. `max_cd` above 1 is allowed but logged, so that
    /// unstable configurations can still be run.
    pub fn advance(&mut self, mesh: &PhysicalMesh, fluxes: &FaceFluxField, dt: f64, max_cd: f64) -> Result<()> {
        if max_cd > 1.0 && self.step == 0 {
            warn!("deformational Courant number {max_cd:.3} exceeds 1; the split scheme may be unstable");
        }
        self.step += 1;
        let next = cosmic_step(mesh, &self.phi, fluxes, dt)?;
        if !next.all_finite() {
            return Err(Error::Diverged { step: self.step });
        }
        self.phi = next;
        Ok(())
    }
}

/// Total tracer content `sum |J|^-1 phi dx dy`.
pub fn tracer_mass(mesh: &PhysicalMesh, phi: &Field2D) -> f64 {
    phi.as_slice().iter().zip(mesh.cell_volumes()).map(|(p, v)| p * v).sum()
}
