//! Test-case definitions and their analytic solutions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::{Field2D, Vec2};
use crate::mesh::{ComputationalGrid, MeshMapping, PhysicalMesh};
use crate::mol::{BoundaryCondition, Boundaries};
use crate::velocity::StreamfunctionSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseId {
    SolidBody,
    Orography,
    Deform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeId {
    Split,
    MolImplicit,
    MolRk2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MeshKind {
    Orthogonal,
    Distorted,
}

macro_rules! keyword_enum {
    ($ty:ident, $what:literal, $($variant:ident => $name:literal),+ $(,)?) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(concat!("unknown ", $what, " '{}'"), other))),
                }
            }
        }
    };
}

keyword_enum!(CaseId, "case", SolidBody => "solid_body", Orography => "orography", Deform => "deform");
keyword_enum!(SchemeId, "scheme", Split => "split", MolImplicit => "mol-implicit", MolRk2 => "mol-rk2");
keyword_enum!(MeshKind, "mesh", Orthogonal => "orthogonal", Distorted => "distorted");

impl SchemeId {
    pub fn is_mol(&self) -> bool {
        !matches!(self, SchemeId::Split)
    }
}

/// Initial tracer distributions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tracer {
    /// `exp(-|x - centre|^2 / (2 width^2))`.
    Gaussian { centre: Vec2, width: f64 },
    /// `cos^2(pi r / 2)` for `r <= 1`, with `r` the elliptical distance
    /// scaled by the half-widths.
    CosineBell { centre: Vec2, half_width_x: f64, half_width_z: f64 },
    /// Two Gaussian hills `amplitude exp(-|x - c|^2 / width)`.
    TwinHills { first: Vec2, second: Vec2, width: f64, amplitude: f64 },
}

/// Everything needed to set up and verify one run of a test case.
#[derive(Clone, Debug)]
pub struct CaseSpec {
    pub case: CaseId,
    pub mesh_kind: MeshKind,
    pub grid: ComputationalGrid,
    pub mapping: MeshMapping,
    pub streamfunction: StreamfunctionSpec,
    pub tracer: Tracer,
    pub t_end: f64,
    /// Time at which error norms are measured.
    pub error_time: f64,
    /// Boundary conditions for the method-of-lines schemes.
    pub boundaries: Boundaries,
    pub output_times: Vec<f64>,
}

pub const SOLID_BODY_SIZE: f64 = 10_000.0;
pub const OROGRAPHY_HALF_WIDTH: f64 = 150_000.0;
pub const OROGRAPHY_HEIGHT: f64 = 25_000.0;
pub const DEFAULT_MOUNTAIN_HEIGHT: f64 = 3000.0;

impl CaseSpec {
    /// Default number of rows for a case given `nx` columns, keeping the
    /// reference aspect ratio.
    pub fn default_ny(case: CaseId, nx: usize) -> usize {
        match case {
            CaseId::SolidBody => nx,
            CaseId::Orography => (nx / 6).max(1),
            CaseId::Deform => (nx / 2).max(1),
        }
    }

    pub fn default_t_end(case: CaseId) -> f64 {
        match case {
            CaseId::SolidBody => 600.0,
            CaseId::Orography => 10_000.0,
            CaseId::Deform => 5.0,
        }
    }

    /// Builds the case. The split scheme runs the solid body rotation on a
    /// doubly periodic domain; the method-of-lines schemes use inflow and
    /// outflow boundaries there instead.
    pub fn new(
        case: CaseId,
        mesh_kind: MeshKind,
        scheme: SchemeId,
        nx: usize,
        ny: usize,
        t_end: f64,
        mountain_height: Option<f64>,
    ) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::Config(format!("end time must be positive, got {t_end}")));
        }
        if mountain_height.is_some() && case != CaseId::Orography {
            return Err(Error::Config("--h0 only applies to the orography case".into()));
        }
        let distorted = mesh_kind == MeshKind::Distorted;
        let spec = match case {
            CaseId::SolidBody => {
                let periodic = !scheme.is_mol();
                let grid = ComputationalGrid::covering(
                    nx,
                    ny,
                    Vec2::ZERO,
                    Vec2::new(SOLID_BODY_SIZE, SOLID_BODY_SIZE),
                    periodic,
                    periodic,
                )?;
                let boundaries = if periodic {
                    Boundaries::uniform(BoundaryCondition::Periodic)
                } else {
                    Boundaries::uniform(BoundaryCondition::InflowOutflow { inflow_value: 0.0 })
                };
                CaseSpec {
                    case,
                    mesh_kind,
                    grid,
                    mapping: if distorted { MeshMapping::vmesh_default() } else { MeshMapping::Identity },
                    streamfunction: StreamfunctionSpec::solid_body_default(),
                    tracer: Tracer::Gaussian { centre: Vec2::new(5000.0, 7500.0), width: 500.0 },
                    t_end,
                    error_time: t_end.min(500.0),
                    boundaries,
                    output_times: regular_times(t_end, 100.0),
                }
            }
            CaseId::Orography => {
                let h0 = mountain_height.unwrap_or(DEFAULT_MOUNTAIN_HEIGHT);
                let grid = ComputationalGrid::covering(
                    nx,
                    ny,
                    Vec2::new(-OROGRAPHY_HALF_WIDTH, 0.0),
                    Vec2::new(OROGRAPHY_HALF_WIDTH, OROGRAPHY_HEIGHT),
                    true,
                    false,
                )?;
                CaseSpec {
                    case,
                    mesh_kind,
                    grid,
                    mapping: if distorted { MeshMapping::btf_default(h0) } else { MeshMapping::Identity },
                    streamfunction: StreamfunctionSpec::orography_default(),
                    tracer: Tracer::CosineBell {
                        centre: Vec2::new(-50_000.0, 9000.0),
                        half_width_x: 25_000.0,
                        half_width_z: 9000.0,
                    },
                    t_end,
                    error_time: t_end,
                    boundaries: channel_boundaries(),
                    output_times: regular_times(t_end, 5000.0),
                }
            }
            CaseId::Deform => {
                let grid = ComputationalGrid::covering(
                    nx,
                    ny,
                    Vec2::new(-PI, -0.5 * PI),
                    Vec2::new(PI, 0.5 * PI),
                    true,
                    false,
                )?;
                let lx = 2.0 * PI;
                CaseSpec {
                    case,
                    mesh_kind,
                    grid,
                    mapping: if distorted { MeshMapping::deform_default() } else { MeshMapping::Identity },
                    streamfunction: StreamfunctionSpec::deformational_default(),
                    tracer: Tracer::TwinHills {
                        first: Vec2::new(5.0 * lx / 12.0, 0.0),
                        second: Vec2::new(7.0 * lx / 12.0, 0.0),
                        width: 0.2,
                        amplitude: 0.95,
                    },
                    t_end,
                    error_time: t_end,
                    boundaries: channel_boundaries(),
                    output_times: regular_times(t_end, 1.0),
                }
            }
        };
        spec.mapping.validate()?;
        spec.streamfunction.validate()?;
        Ok(spec)
    }

    pub fn build_mesh(&self) -> Result<PhysicalMesh> {
        PhysicalMesh::build(self.grid.clone(), self.mapping)
    }

    fn periodic_width(&self) -> Option<f64> {
        self.grid.periodic_x.then(|| self.grid.width())
    }

    /// Tracer value at a physical point and time, where an exact solution
    /// is known. The deformational flow only has one at `t = 0` and at the
    /// end of the reversal period.
    pub fn exact_value(&self, p: Vec2, t: f64) -> Result<f64> {
        let period = self.periodic_width();
        let tracer_at = |q: Vec2| tracer_value(&self.tracer, q, period);
        match self.streamfunction {
            StreamfunctionSpec::SolidBody { a, centre } => {
                let Tracer::Gaussian { centre: start, width } = self.tracer else {
                    return Ok(tracer_at(p));
                };
                let r0 = start - centre;
                let angle = 2.0 * a * t;
                let (s, c) = angle.sin_cos();
                let moved = centre + Vec2::new(c * r0.x - s * r0.y, s * r0.x + c * r0.y);
                Ok(tracer_value(&Tracer::Gaussian { centre: moved, width }, p, None))
            }
            StreamfunctionSpec::Orography { u0, z1, z2 } => {
                let u = StreamfunctionSpec::orography_wind(u0, z1, z2, p.y);
                Ok(tracer_at(Vec2::new(p.x - u * t, p.y)))
            }
            StreamfunctionSpec::Deformational { period: tp, .. } => {
                let tol = 1e-9 * tp.max(1.0);
                if t.abs() <= tol || (t - tp).abs() <= tol {
                    Ok(tracer_at(p))
                } else {
                    Err(Error::NoAnalyticSolution { case: self.case.to_string(), time: t })
                }
            }
        }
    }
}

fn channel_boundaries() -> Boundaries {
    Boundaries {
        west: BoundaryCondition::Periodic,
        east: BoundaryCondition::Periodic,
        south: BoundaryCondition::Wall,
        north: BoundaryCondition::Wall,
    }
}

/// `0, every, 2 every, ...` up to and including `t_end`.
fn regular_times(t_end: f64, every: f64) -> Vec<f64> {
    let n = (t_end / every + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * every).collect();
    if (times[n] - t_end).abs() > 1e-9 * t_end {
        times.push(t_end);
    }
    times
}

fn wrap(d: f64, period: Option<f64>) -> f64 {
    match period {
        Some(l) => d - l * (d / l).round(),
        None => d,
    }
}

/// Tracer value at `p`. With a period, x distances use the nearest image.
pub fn tracer_value(tracer: &Tracer, p: Vec2, period: Option<f64>) -> f64 {
    let offset = |c: Vec2| Vec2::new(wrap(p.x - c.x, period), p.y - c.y);
    match *tracer {
        Tracer::Gaussian { centre, width } => {
            let d = offset(centre);
            (-0.5 * d.dot(d) / (width * width)).exp()
        }
        Tracer::CosineBell { centre, half_width_x, half_width_z } => {
            let d = offset(centre);
            let r = ((d.x / half_width_x).powi(2) + (d.y / half_width_z).powi(2)).sqrt();
            if r <= 1.0 {
                (0.5 * PI * r).cos().powi(2)
            } else {
                0.0
            }
        }
        Tracer::TwinHills { first, second, width, amplitude } => {
            let a = offset(first);
            let b = offset(second);
            amplitude * ((-a.dot(a) / width).exp() + (-b.dot(b) / width).exp())
        }
    }
}

/// Tracer sampled at cell centres (a second-order approximation of the
/// cell averages).
pub fn initial_field(spec: &CaseSpec, mesh: &PhysicalMesh) -> Field2D {
    let g = mesh.grid();
    let period = spec.periodic_width();
    Field2D::from_fn(g.nx, g.ny, |i, j| tracer_value(&spec.tracer, mesh.cell_centre(g.cell(i, j)), period))
}

pub fn analytic_solution(spec: &CaseSpec, mesh: &PhysicalMesh, t: f64) -> Result<Field2D> {
    let g = mesh.grid();
    let mut out = Field2D::zeros(g.nx, g.ny);
    for j in 0..g.ny {
        for i in 0..g.nx {
            out[(i, j)] = spec.exact_value(mesh.cell_centre(g.cell(i, j)), t)?;
        }
    }
    Ok(out)
}
