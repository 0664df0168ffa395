//! Multi-dimensional method-of-lines scheme: Gauss divergence of face
//! values interpolated as a high-order correction on first-order upwind.
//!
//! Time stepping is either Heun (RK2) with the full operator, or
//! Crank-Nicolson with the correction deferred: the upwind part is implicit
//! and the correction is lagged over a fixed number of outer iterations.

pub mod stencil;

use log::info;

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::linsolve::{assemble, bicg_solve, Preconditioner, SolveReport, SolverSettings, SparseSystem};
use crate::mesh::PhysicalMesh;
use crate::velocity::FaceFluxField;

pub use stencil::{build_stencil, fit_weights, Basis, Orientation, Stencil, StencilFit, StencilSet};

/// Treatment of one non-periodic boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition {
    Periodic,
    /// Zero normal flow; the flux through the boundary is expected to be zero.
    Wall,
    /// Fixed value where the flow enters, zero normal gradient where it leaves.
    InflowOutflow { inflow_value: f64 },
}

/// Conditions on the west, east, south and north boundaries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Boundaries {
    pub west: BoundaryCondition,
    pub east: BoundaryCondition,
    pub south: BoundaryCondition,
    pub north: BoundaryCondition,
}

impl Boundaries {
    pub fn uniform(bc: BoundaryCondition) -> Self {
        Self { west: bc, east: bc, south: bc, north: bc }
    }

    pub fn validate(&self, mesh: &PhysicalMesh) -> Result<()> {
        let g = mesh.grid();
        let check = |a: BoundaryCondition, b: BoundaryCondition, periodic: bool, dir: &str| {
            let pa = matches!(a, BoundaryCondition::Periodic);
            let pb = matches!(b, BoundaryCondition::Periodic);
            if pa != periodic || pb != periodic {
                Err(Error::Config(format!("{dir} boundary conditions do not match the grid periodicity")))
            } else {
                Ok(())
            }
        };
        check(self.west, self.east, g.periodic_x, "x")?;
        check(self.south, self.north, g.periodic_y, "y")
    }

    fn inflow_value(bc: BoundaryCondition) -> f64 {
        match bc {
            BoundaryCondition::InflowOutflow { inflow_value } => inflow_value,
            _ => 0.0,
        }
    }
}

/// Per-step record for the implicit scheme.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepStats {
    pub outer: usize,
    pub reports: Vec<SolveReport>,
}

impl StepStats {
    pub fn iterations(&self) -> usize {
        self.reports.iter().map(|r| r.iterations).sum()
    }
}

/// Number of outer iterations for a given maximum Courant number.
pub fn outer_iterations_for(max_c: f64) -> usize {
    if max_c <= 1.1 {
        2
    } else {
        4
    }
}

/// Precomputed geometry of the MOL scheme on one mesh.
#[derive(Clone, Debug)]
pub struct MolScheme {
    stencils: StencilSet,
    boundaries: Boundaries,
    inv_volume: Vec<f64>,
    /// Boundary faces: (face index, owner cell, inflow value).
    boundary_faces: Vec<(usize, usize, f64)>,
    pub solver: SolverSettings,
}

impl MolScheme {
    pub fn new(mesh: &PhysicalMesh, boundaries: Boundaries) -> Result<Self> {
        boundaries.validate(mesh)?;
        let stencils = StencilSet::build(mesh)?;
        let g = mesh.grid();
        let mut boundary_faces = Vec::new();
        for (k, f) in mesh.faces().iter().enumerate() {
            let bc = match (f.left, f.right, f.dir) {
                (None, Some(_), crate::mesh::FaceDir::X) => boundaries.west,
                (Some(_), None, crate::mesh::FaceDir::X) => boundaries.east,
                (None, Some(_), crate::mesh::FaceDir::Y) => boundaries.south,
                (Some(_), None, crate::mesh::FaceDir::Y) => boundaries.north,
                _ => continue,
            };
            let owner = f.left.or(f.right).unwrap();
            boundary_faces.push((k, owner, Boundaries::inflow_value(bc)));
        }
        debug_assert!(g.n_cells() == mesh.cell_volumes().len());
        Ok(Self {
            stencils,
            boundaries,
            inv_volume: mesh.cell_volumes().iter().map(|v| 1.0 / v).collect(),
            boundary_faces,
            solver: SolverSettings::default(),
        })
    }

    pub fn stencils(&self) -> &StencilSet {
        &self.stencils
    }

    pub fn boundaries(&self) -> &Boundaries {
        &self.boundaries
    }

    fn fit_for(&self, face: usize, flux: f64) -> Option<&StencilFit> {
        let o = if flux >= 0.0 { Orientation::Positive } else { Orientation::Negative };
        self.stencils.get(face, o)
    }

    /// Interpolated value on an interior face; the stencil orientation
    /// follows the flux sign and zero flux uses the left (owner) side.
    pub fn face_value(&self, face: usize, flux: f64, phi: &[f64]) -> Option<f64> {
        let fit = self.fit_for(face, flux)?;
        Some(phi[fit.upwind] + correction(fit, phi))
    }

    /// Upwind part `(1/V) sum_f phi_up F_out`, including fixed inflow values
    /// on boundaries.
    fn upwind_divergence(&self, mesh: &PhysicalMesh, fluxes: &FaceFluxField, phi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let faces = mesh.faces();
        for face in faces {
            let (Some(l), Some(r)) = (face.left, face.right) else { continue };
            let f = fluxes.face(face);
            if f == 0.0 {
                continue;
            }
            let up = if f > 0.0 { l } else { r };
            let m = phi[up] * f;
            out[l] += m;
            out[r] -= m;
        }
        for &(k, owner, inflow) in &self.boundary_faces {
            let face = &faces[k];
            let f = fluxes.face(face);
            let outward = if face.left.is_some() { f } else { -f };
            let value = if outward > 0.0 { phi[owner] } else { inflow };
            out[owner] += value * outward;
        }
        for (o, iv) in out.iter_mut().zip(&self.inv_volume) {
            *o *= iv;
        }
    }

    /// High-order correction part `(1/V) sum_f (sum_c w_c phi_c) F_out`.
    fn correction_divergence(&self, mesh: &PhysicalMesh, fluxes: &FaceFluxField, phi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (k, face) in mesh.faces().iter().enumerate() {
            let (Some(l), Some(r)) = (face.left, face.right) else { continue };
            let f = fluxes.face(face);
            if f == 0.0 {
                continue;
            }
            let fit = self.fit_for(k, f).expect("interior face has both stencils");
            let m = correction(fit, phi) * f;
            out[l] += m;
            out[r] -= m;
        }
        for (o, iv) in out.iter_mut().zip(&self.inv_volume) {
            *o *= iv;
        }
    }

    /// Full divergence `(1/V) sum_f phi_f F_out`; the tendency is its negative.
    pub fn divergence(&self, mesh: &PhysicalMesh, fluxes: &FaceFluxField, phi: &[f64]) -> Vec<f64> {
        let n = phi.len();
        let mut up = vec![0.0; n];
        let mut corr = vec![0.0; n];
        self.upwind_divergence(mesh, fluxes, phi, &mut up);
        self.correction_divergence(mesh, fluxes, phi, &mut corr);
        up.iter().zip(&corr).map(|(a, b)| a + b).collect()
    }

    /// Heun step with the full high-order operator in both stages.
    pub fn rk2_step(&self, mesh: &PhysicalMesh, fluxes: &FaceFluxField, phi: &Field2D, dt: f64) -> Field2D {
        let p0 = phi.as_slice();
        let d0 = self.divergence(mesh, fluxes, p0);
        let p1: Vec<f64> = p0.iter().zip(&d0).map(|(p, d)| p - dt * d).collect();
        let d1 = self.divergence(mesh, fluxes, &p1);
        let next = (0..p0.len()).map(|k| 0.5 * (p0[k] + p1[k] - dt * d1[k])).collect();
        Field2D::from_vec(phi.nx(), phi.ny(), next)
    }

    /// Assembles the implicit matrix and its preconditioner for one step.
    pub fn implicit_system(&self, mesh: &PhysicalMesh, fluxes: &FaceFluxField, dt: f64) -> Result<ImplicitSystem> {
        let system = assemble(mesh, fluxes, dt, 0.5)?;
        let precond = Preconditioner::dilu(&system)?;
        Ok(ImplicitSystem { system, precond })
    }

    /// Crank-Nicolson step with `n_outer` outer iterations.
    ///
    /// Iteration `k` solves
    /// `(phi_k - phi_n)/dt = -1/2 [U(phi_n) + U(phi_k) + C(phi_n) + C(phi_{k-1})]`
    /// with `phi_0 = phi_n`, where `U` is the upwind and `C` the correction
    /// divergence. Two iterations give the usual two-solve scheme.
    pub fn cn_step(
        &self,
        mesh: &PhysicalMesh,
        fluxes: &FaceFluxField,
        implicit: &ImplicitSystem,
        phi: &Field2D,
        dt: f64,
        n_outer: usize,
    ) -> Result<(Field2D, StepStats)> {
        let pn = phi.as_slice();
        let n = pn.len();
        let mut up_n = vec![0.0; n];
        let mut corr_n = vec![0.0; n];
        self.upwind_divergence(mesh, fluxes, pn, &mut up_n);
        self.correction_divergence(mesh, fluxes, pn, &mut corr_n);
        // U(phi) = U_matrix phi + inflow terms; the inflow part appears at both
        // time levels, so the right-hand side carries U(phi_n) + inflow.
        let zeros = vec![0.0; n];
        let mut inflow = vec![0.0; n];
        self.upwind_divergence(mesh, fluxes, &zeros, &mut inflow);

        let mut latest = pn.to_vec();
        let mut corr_prev = corr_n.clone();
        let mut rhs = vec![0.0; n];
        let mut stats = StepStats { outer: n_outer, reports: Vec::with_capacity(n_outer) };
        for k in 0..n_outer {
            if k > 0 {
                self.correction_divergence(mesh, fluxes, &latest, &mut corr_prev);
            }
            for c in 0..n {
                rhs[c] = pn[c] - 0.5 * dt * (up_n[c] + inflow[c] + corr_n[c] + corr_prev[c]);
            }
            let report = bicg_solve(&implicit.system, &implicit.precond, &rhs, &mut latest, self.solver)?;
            stats.reports.push(report);
        }
        Ok((Field2D::from_vec(phi.nx(), phi.ny(), latest), stats))
    }
}

/// Matrix and preconditioner reused across outer iterations (and tracers).
#[derive(Clone, Debug)]
pub struct ImplicitSystem {
    pub system: SparseSystem,
    pub precond: Preconditioner,
}

#[inline]
fn correction(fit: &StencilFit, phi: &[f64]) -> f64 {
    fit.cells.iter().zip(&fit.weights).map(|(&c, w)| w * phi[c]).sum()
}

/// Tracer state for the MOL scheme.
#[derive(Clone, Debug)]
pub struct MolState {
    pub phi: Field2D,
    pub step: usize,
}

impl MolState {
    pub fn new(phi: Field2D) -> Self {
        Self { phi, step: 0 }
    }

    pub fn advance_rk2(&mut self, scheme: &MolScheme, mesh: &PhysicalMesh, fluxes: &FaceFluxField, dt: f64) -> Result<()> {
        self.step += 1;
        let next = scheme.rk2_step(mesh, fluxes, &self.phi, dt);
        if !next.all_finite() {
            return Err(Error::Diverged { step: self.step });
        }
        self.phi = next;
        Ok(())
    }

    pub fn advance_cn(
        &mut self,
        scheme: &MolScheme,
        mesh: &PhysicalMesh,
        fluxes: &FaceFluxField,
        implicit: &ImplicitSystem,
        dt: f64,
        n_outer: usize,
    ) -> Result<StepStats> {
        self.step += 1;
        let (next, stats) = scheme.cn_step(mesh, fluxes, implicit, &self.phi, dt, n_outer)?;
        for (k, r) in stats.reports.iter().enumerate() {
            info!("step={} outer={} iters={} res={:e}", self.step, k + 1, r.iterations, r.final_residual);
        }
        if !next.all_finite() {
            return Err(Error::Diverged { step: self.step });
        }
        self.phi = next;
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Vec2;
    use crate::mesh::{ComputationalGrid, MeshMapping};
    use crate::velocity::{courant_numbers, face_fluxes, StreamfunctionSpec};

    fn periodic_mesh(n: usize, mapping: MeshMapping) -> PhysicalMesh {
        let g = ComputationalGrid::covering(n, n, Vec2::ZERO, Vec2::new(1e4, 1e4), true, true).unwrap();
        PhysicalMesh::build(g, mapping).unwrap()
    }

    fn gaussian(mesh: &PhysicalMesh, centre: Vec2, width: f64) -> Field2D {
        let g = mesh.grid();
        Field2D::from_fn(g.nx, g.ny, |i, j| {
            let d = mesh.cell_centre(g.cell(i, j)) - centre;
            (-0.5 * d.dot(d) / (width * width)).exp()
        })
    }

    fn mass(mesh: &PhysicalMesh, phi: &Field2D) -> f64 {
        phi.as_slice().iter().zip(mesh.cell_volumes()).map(|(p, v)| p * v).sum()
    }

    #[test]
    fn constant_field_has_zero_divergence() {
        let mesh = periodic_mesh(16, MeshMapping::vmesh_default());
        let scheme = MolScheme::new(&mesh, Boundaries::uniform(BoundaryCondition::Periodic)).unwrap();
        let f = face_fluxes(&StreamfunctionSpec::solid_body_default(), &mesh, 0.0);
        let d = scheme.divergence(&mesh, &f, &vec![3.0; 256]);
        let scale = f.max_abs() / mesh.cell_volume(0);
        assert!(d.iter().all(|x| x.abs() < 1e-12 * scale));
    }

    #[test]
    fn periodic_divergence_sums_to_zero() {
        let mesh = periodic_mesh(16, MeshMapping::vmesh_default());
        let scheme = MolScheme::new(&mesh, Boundaries::uniform(BoundaryCondition::Periodic)).unwrap();
        let f = face_fluxes(&StreamfunctionSpec::solid_body_default(), &mesh, 0.0);
        let phi: Vec<f64> = (0..256).map(|k| ((k * 37 % 101) as f64).sin()).collect();
        let d = scheme.divergence(&mesh, &f, &phi);
        let total: f64 = d.iter().zip(mesh.cell_volumes()).map(|(a, v)| a * v).sum();
        assert!(total.abs() < 1e-10 * f.max_abs());
    }

    #[test]
    fn zero_corrections_reduce_to_upwind() {
        let mesh = periodic_mesh(8, MeshMapping::Identity);
        let mut scheme = MolScheme::new(&mesh, Boundaries::uniform(BoundaryCondition::Periodic)).unwrap();
        for fit in scheme.stencils.positive.iter_mut().chain(scheme.stencils.negative.iter_mut()).flatten() {
            fit.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let phi: Vec<f64> = (0..64).map(|k| k as f64).collect();
        let k = mesh.faces().iter().position(|f| f.left.is_some() && f.right.is_some()).unwrap();
        let face = mesh.faces()[k];
        assert_eq!(scheme.face_value(k, 1.0, &phi), Some(phi[face.left.unwrap()]));
        assert_eq!(scheme.face_value(k, -1.0, &phi), Some(phi[face.right.unwrap()]));
        assert_eq!(scheme.face_value(k, 0.0, &phi), Some(phi[face.left.unwrap()]));
    }

    #[test]
    fn steps_preserve_constants_and_mass() {
        let mesh = periodic_mesh(20, MeshMapping::vmesh_default());
        let scheme = MolScheme::new(&mesh, Boundaries::uniform(BoundaryCondition::Periodic)).unwrap();
        let f = face_fluxes(&StreamfunctionSpec::solid_body_default(), &mesh, 0.0);
        for dt in [2.0, 20.0] {
            let implicit = scheme.implicit_system(&mesh, &f, dt).unwrap();
            let c = courant_numbers(&f, &mesh, dt).max_c;
            let ones = Field2D::filled(20, 20, 1.0);
            let (next, _) = scheme.cn_step(&mesh, &f, &implicit, &ones, dt, outer_iterations_for(c)).unwrap();
            assert!(next.as_slice().iter().all(|v| (v - 1.0).abs() < 1e-7));

            let phi = gaussian(&mesh, Vec2::new(5000.0, 7500.0), 1000.0);
            let (next, stats) = scheme.cn_step(&mesh, &f, &implicit, &phi, dt, 4).unwrap();
            assert_eq!(stats.reports.len(), 4);
            let m0 = mass(&mesh, &phi);
            assert!((mass(&mesh, &next) - m0).abs() < 1e-7 * m0);
        }
        let phi = gaussian(&mesh, Vec2::new(5000.0, 7500.0), 1000.0);
        let next = scheme.rk2_step(&mesh, &f, &phi, 1.0);
        let m0 = mass(&mesh, &phi);
        assert!((mass(&mesh, &next) - m0).abs() < 1e-12 * m0);
        let ones = scheme.rk2_step(&mesh, &f, &Field2D::filled(20, 20, 1.0), 1.0);
        assert!(ones.as_slice().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn inflow_boundary_feeds_fixed_value() {
        let g = ComputationalGrid::covering(8, 8, Vec2::ZERO, Vec2::new(8.0, 8.0), false, true).unwrap();
        let mesh = PhysicalMesh::build(g, MeshMapping::Identity).unwrap();
        let bc = Boundaries {
            west: BoundaryCondition::InflowOutflow { inflow_value: 2.0 },
            east: BoundaryCondition::InflowOutflow { inflow_value: 2.0 },
            south: BoundaryCondition::Periodic,
            north: BoundaryCondition::Periodic,
        };
        let scheme = MolScheme::new(&mesh, bc).unwrap();
        let mut f = FaceFluxField::zeros(8, 8);
        for j in 0..8 {
            for i in 0..=8 {
                f.set_fx(i, j, 1.0);
            }
        }
        let implicit = scheme.implicit_system(&mesh, &f, 0.5).unwrap();
        let mut phi = Field2D::zeros(8, 8);
        for _ in 0..200 {
            phi = scheme.cn_step(&mesh, &f, &implicit, &phi, 0.5, 2).unwrap().0;
        }
        assert!(phi.as_slice().iter().all(|v| (v - 2.0).abs() < 1e-6), "{:?}", phi.row(3));
    }

    #[test]
    fn mismatched_boundaries_are_rejected() {
        let mesh = periodic_mesh(8, MeshMapping::Identity);
        assert!(MolScheme::new(&mesh, Boundaries::uniform(BoundaryCondition::Wall)).is_err());
    }

    #[test]
    fn divergence_converges_at_second_order() {
        let spec = StreamfunctionSpec::solid_body_default();
        let centre = Vec2::new(5000.0, 6500.0);
        let w = 500.0;
        let mut errs = Vec::new();
        for n in [50usize, 100, 200] {
            let g = ComputationalGrid::covering(n, n, Vec2::ZERO, Vec2::new(1e4, 1e4), false, false).unwrap();
            let mesh = PhysicalMesh::build(g, MeshMapping::Identity).unwrap();
            let scheme = MolScheme::new(&mesh, Boundaries::uniform(BoundaryCondition::InflowOutflow { inflow_value: 0.0 })).unwrap();
            let f = face_fluxes(&spec, &mesh, 0.0);
            let phi = gaussian(&mesh, centre, w);
            let d = scheme.divergence(&mesh, &f, phi.as_slice());
            // div(u phi) = u . grad phi for solid body flow.
            let StreamfunctionSpec::SolidBody { a, centre: xc } = spec else { unreachable!() };
            let mut num = 0.0;
            let mut den = 0.0;
            for (k, &dk) in d.iter().enumerate() {
                let p = mesh.cell_centre(k);
                let u = Vec2::new(-2.0 * a * (p.y - xc.y), 2.0 * a * (p.x - xc.x));
                let q = p - centre;
                let grad = q * (-phi.as_slice()[k] / (w * w));
                let exact = u.dot(grad);
                num += (dk - exact).powi(2);
                den += exact * exact;
            }
            errs.push((num / den).sqrt());
        }
        let s = (errs[1] / errs[2]).log2();
        assert!(s >= 1.8, "errors {errs:?}");
    }
}
