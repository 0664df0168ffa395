//! Computational grid, coordinate mappings and discrete mesh geometry.
//!
//! Every metric quantity (cell areas, face area vectors, Jacobian ratios) is
//! derived from the mapped vertex positions so that both transport schemes
//! see exactly the same discrete geometry.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::Vec2;

/// Uniform logically rectangular grid in computational coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComputationalGrid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x_min: f64,
    pub y_min: f64,
    pub periodic_x: bool,
    pub periodic_y: bool,
}

impl ComputationalGrid {
    pub fn new(
        nx: usize,
        ny: usize,
        dx: f64,
        dy: f64,
        origin: Vec2,
        periodic_x: bool,
        periodic_y: bool,
    ) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::Config(format!("grid {nx}x{ny} is below the 4x4 minimum")));
        }
        if !(dx > 0.0 && dy > 0.0) || !dx.is_finite() || !dy.is_finite() {
            return Err(Error::Config(format!("cell sizes must be positive (dx={dx}, dy={dy})")));
        }
        Ok(Self { nx, ny, dx, dy, x_min: origin.x, y_min: origin.y, periodic_x, periodic_y })
    }

    /// Grid covering `[x0, x1] x [y0, y1]` with `nx x ny` cells.
    pub fn covering(
        nx: usize,
        ny: usize,
        lower: Vec2,
        upper: Vec2,
        periodic_x: bool,
        periodic_y: bool,
    ) -> Result<Self> {
        let nxf = nx.max(1) as f64;
        let nyf = ny.max(1) as f64;
        Self::new(
            nx,
            ny,
            (upper.x - lower.x) / nxf,
            (upper.y - lower.y) / nyf,
            lower,
            periodic_x,
            periodic_y,
        )
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn vertex(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn face_x(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn face_y(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn vertex_position(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.x_min + i as f64 * self.dx, self.y_min + j as f64 * self.dy)
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.dy
    }
}

/// Mapping from computational to physical coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeshMapping {
    Identity,
    /// Piecewise-linear vertical stretching about a V-shaped line through
    /// the middle of the domain, producing 120 degree mesh angles.
    VMesh { y_m: f64, x_m: f64 },
    /// Basic terrain-following coordinates over a `cos^2` mountain range.
    Btf { lid_height: f64, h0: f64, half_width: f64, wavelength: f64 },
    /// Periodic channel distortion for the deformational flow domain,
    /// centred on the origin.
    DeformChannel { lx: f64, ly: f64 },
}

impl MeshMapping {
    pub fn vmesh_default() -> Self {
        MeshMapping::VMesh { y_m: 5000.0, x_m: 5000.0 }
    }

    pub fn btf_default(h0: f64) -> Self {
        MeshMapping::Btf { lid_height: 25_000.0, h0, half_width: 25_000.0, wavelength: 8_000.0 }
    }

    pub fn deform_default() -> Self {
        MeshMapping::DeformChannel { lx: 2.0 * PI, ly: PI }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MeshMapping::Identity => "identity",
            MeshMapping::VMesh { .. } => "vmesh",
            MeshMapping::Btf { .. } => "btf",
            MeshMapping::DeformChannel { .. } => "deform_channel",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MeshMapping::Identity => Ok(()),
            MeshMapping::VMesh { y_m, x_m } => {
                if y_m > 0.0 && x_m > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config("vmesh requires y_m > 0 and x_m > 0".into()))
                }
            }
            MeshMapping::Btf { lid_height, h0, half_width, wavelength } => {
                if !(h0 >= 0.0 && h0 < lid_height) {
                    return Err(Error::Config(format!(
                        "btf terrain height h0={h0} must lie in [0, H={lid_height})"
                    )));
                }
                if half_width > 0.0 && wavelength > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config("btf requires a > 0 and lambda > 0".into()))
                }
            }
            MeshMapping::DeformChannel { lx, ly } => {
                if lx > 0.0 && ly > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config("deform_channel requires L_x, L_y > 0".into()))
                }
            }
        }
    }

    /// Height of uniform computational `Y = y_m` in the V-mesh.
    pub fn vmesh_kink(y_m: f64, x_m: f64, x: f64) -> f64 {
        let s3 = 3.0_f64.sqrt();
        if x <= x_m {
            y_m * (1.0 + 1.0 / (2.0 * s3)) - x / s3
        } else {
            y_m * (1.0 - 1.0 / (2.0 * s3)) + (x - x_m) / s3
        }
    }

    /// Physical `y` of the line `Y = 0` in the deformational channel.
    pub fn channel_kink(lx: f64, x: f64) -> f64 {
        let ax = x.abs();
        let s3 = 3.0_f64.sqrt();
        if ax <= lx / 4.0 {
            (lx / 8.0 - ax) / s3
        } else {
            (ax - 3.0 * lx / 8.0) / s3
        }
    }

    /// Terrain height of the BTF mountain range.
    pub fn terrain(h0: f64, half_width: f64, wavelength: f64, x: f64) -> f64 {
        if x.abs() > half_width {
            0.0
        } else {
            let a = (PI * x / wavelength).cos();
            let b = (PI * x / (2.0 * half_width)).cos();
            h0 * a * a * b * b
        }
    }

    /// Computational point to physical point.
    pub fn map_point(&self, p: Vec2) -> Vec2 {
        match *self {
            MeshMapping::Identity => p,
            MeshMapping::VMesh { y_m, x_m } => {
                let f = Self::vmesh_kink(y_m, x_m, p.x);
                let y = if p.y >= y_m {
                    f + (p.y - y_m) * (2.0 * y_m - f) / y_m
                } else {
                    f * p.y / y_m
                };
                Vec2::new(p.x, y)
            }
            MeshMapping::Btf { lid_height, h0, half_width, wavelength } => {
                let h = Self::terrain(h0, half_width, wavelength, p.x);
                Vec2::new(p.x, h + p.y * (lid_height - h) / lid_height)
            }
            MeshMapping::DeformChannel { lx, ly } => {
                let f = Self::channel_kink(lx, p.x);
                let y = if p.y >= 0.0 {
                    f + p.y * (ly - 2.0 * f) / ly
                } else {
                    f + p.y * (ly + 2.0 * f) / ly
                };
                Vec2::new(p.x, y)
            }
        }
    }

    /// Physical point to computational point (the transforms as usually
    /// written, `Y = Y(x, y)`).
    pub fn inverse_map_point(&self, q: Vec2) -> Vec2 {
        match *self {
            MeshMapping::Identity => q,
            MeshMapping::VMesh { y_m, x_m } => {
                let f = Self::vmesh_kink(y_m, x_m, q.x);
                let yc = if q.y >= f {
                    y_m * (1.0 + (q.y - f) / (2.0 * y_m - f))
                } else {
                    y_m * (1.0 + (q.y - f) / f)
                };
                Vec2::new(q.x, yc)
            }
            MeshMapping::Btf { lid_height, h0, half_width, wavelength } => {
                let h = Self::terrain(h0, half_width, wavelength, q.x);
                Vec2::new(q.x, lid_height * (q.y - h) / (lid_height - h))
            }
            MeshMapping::DeformChannel { lx, ly } => {
                let f = Self::channel_kink(lx, q.x);
                let yc = if q.y >= f {
                    ly * (q.y - f) / (ly - 2.0 * f)
                } else {
                    ly * (q.y - f) / (ly + 2.0 * f)
                };
                Vec2::new(q.x, yc)
            }
        }
    }
}

impl fmt::Display for MeshMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind())
    }
}

impl FromStr for MeshMapping {
    type Err = Error;

    /// Parses a mapping kind with its default parameters.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(MeshMapping::Identity),
            "vmesh" => Ok(MeshMapping::vmesh_default()),
            "btf" => Ok(MeshMapping::btf_default(3000.0)),
            "deform_channel" => Ok(MeshMapping::deform_default()),
            other => Err(Error::Config(format!("unknown mapping kind '{other}'"))),
        }
    }
}

/// Geometry of one face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceGeometry {
    pub centre: Vec2,
    /// Normal times length, pointing in the +x (x-faces) or +y (y-faces)
    /// computational direction.
    pub area_vector: Vec2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceDir {
    X,
    Y,
}

/// A unique face of the mesh with its adjacent cells.
///
/// Flux through the face is positive from `left` to `right` (+x or +y).
/// Boundary faces have exactly one side missing. On periodic directions the
/// duplicated last face is omitted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceInfo {
    pub dir: FaceDir,
    pub i: usize,
    pub j: usize,
    pub left: Option<usize>,
    pub right: Option<usize>,
}

/// Mapped mesh with discrete geometry.
#[derive(Clone, Debug)]
pub struct PhysicalMesh {
    grid: ComputationalGrid,
    mapping: MeshMapping,
    vertices: Vec<Vec2>,
    cell_volumes: Vec<f64>,
    cell_centres: Vec<Vec2>,
    faces_x: Vec<FaceGeometry>,
    faces_y: Vec<FaceGeometry>,
    jac_inv_cell: Vec<f64>,
    jac_inv_face_x: Vec<f64>,
    jac_inv_face_y: Vec<f64>,
    period: Vec2,
    faces: Vec<FaceInfo>,
}

fn polygon_area_centroid(p: &[Vec2; 4]) -> (f64, Vec2) {
    let mut a = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    // Shift to the first vertex to limit cancellation on large coordinates.
    let o = p[0];
    for k in 0..4 {
        let u = p[k] - o;
        let v = p[(k + 1) % 4] - o;
        let c = u.cross(v);
        a += c;
        cx += (u.x + v.x) * c;
        cy += (u.y + v.y) * c;
    }
    let area = 0.5 * a;
    let centroid = if area != 0.0 {
        Vec2::new(cx / (6.0 * area), cy / (6.0 * area)) + o
    } else {
        o
    };
    (area, centroid)
}

impl PhysicalMesh {
    pub fn build(grid: ComputationalGrid, mapping: MeshMapping) -> Result<Self> {
        mapping.validate()?;
        let (nx, ny) = (grid.nx, grid.ny);

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(mapping.map_point(grid.vertex_position(i, j)));
            }
        }
        let vtx = |i: usize, j: usize| vertices[grid.vertex(i, j)];

        let dxdy = grid.dx * grid.dy;
        let mut cell_volumes = Vec::with_capacity(nx * ny);
        let mut cell_centres = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let quad = [vtx(i, j), vtx(i + 1, j), vtx(i + 1, j + 1), vtx(i, j + 1)];
                let (area, centroid) = polygon_area_centroid(&quad);
                if !(area > 0.0) {
                    return Err(Error::InvertedCell { i, j, area });
                }
                cell_volumes.push(area);
                cell_centres.push(centroid);
            }
        }

        let mut faces_x = Vec::with_capacity((nx + 1) * ny);
        for j in 0..ny {
            for i in 0..=nx {
                let a = vtx(i, j);
                let b = vtx(i, j + 1);
                let e = b - a;
                faces_x.push(FaceGeometry { centre: (a + b) * 0.5, area_vector: Vec2::new(e.y, -e.x) });
            }
        }
        let mut faces_y = Vec::with_capacity(nx * (ny + 1));
        for j in 0..=ny {
            for i in 0..nx {
                let a = vtx(i, j);
                let b = vtx(i + 1, j);
                let e = b - a;
                faces_y.push(FaceGeometry { centre: (a + b) * 0.5, area_vector: Vec2::new(-e.y, e.x) });
            }
        }

        let jac_inv_cell: Vec<f64> = cell_volumes.iter().map(|v| v / dxdy).collect();
        let jc = |i: usize, j: usize| jac_inv_cell[grid.cell(i, j)];

        let mut jac_inv_face_x = Vec::with_capacity((nx + 1) * ny);
        for j in 0..ny {
            for i in 0..=nx {
                let value = if i == 0 || i == nx {
                    if grid.periodic_x {
                        0.5 * (jc(0, j) + jc(nx - 1, j))
                    } else if i == 0 {
                        jc(0, j)
                    } else {
                        jc(nx - 1, j)
                    }
                } else {
                    0.5 * (jc(i - 1, j) + jc(i, j))
                };
                jac_inv_face_x.push(value);
            }
        }
        let mut jac_inv_face_y = Vec::with_capacity(nx * (ny + 1));
        for j in 0..=ny {
            for i in 0..nx {
                let value = if j == 0 || j == ny {
                    if grid.periodic_y {
                        0.5 * (jc(i, 0) + jc(i, ny - 1))
                    } else if j == 0 {
                        jc(i, 0)
                    } else {
                        jc(i, ny - 1)
                    }
                } else {
                    0.5 * (jc(i, j - 1) + jc(i, j))
                };
                jac_inv_face_y.push(value);
            }
        }

        let period = Vec2::new(
            if grid.periodic_x { vtx(nx, 0).x - vtx(0, 0).x } else { 0.0 },
            if grid.periodic_y { vtx(0, ny).y - vtx(0, 0).y } else { 0.0 },
        );
        if grid.periodic_x {
            for j in 0..=ny {
                let d = vtx(nx, j) - vtx(0, j);
                if (d.x - period.x).abs() > 1e-9 * period.x.abs() || d.y.abs() > 1e-9 * period.x.abs() {
                    return Err(Error::Config(format!(
                        "mapping '{}' is not periodic in x at vertex row {j}",
                        mapping.kind()
                    )));
                }
            }
        }
        if grid.periodic_y {
            for i in 0..=nx {
                let d = vtx(i, ny) - vtx(i, 0);
                if (d.y - period.y).abs() > 1e-9 * period.y.abs() || d.x.abs() > 1e-9 * period.y.abs() {
                    return Err(Error::Config(format!(
                        "mapping '{}' is not periodic in y at vertex column {i}",
                        mapping.kind()
                    )));
                }
            }
        }

        let faces = Self::enumerate_faces(&grid);

        Ok(Self {
            grid,
            mapping,
            vertices,
            cell_volumes,
            cell_centres,
            faces_x,
            faces_y,
            jac_inv_cell,
            jac_inv_face_x,
            jac_inv_face_y,
            period,
            faces,
        })
    }

    fn enumerate_faces(grid: &ComputationalGrid) -> Vec<FaceInfo> {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut faces = Vec::with_capacity(2 * nx * ny + nx + ny);
        for j in 0..ny {
            let last = if grid.periodic_x { nx - 1 } else { nx };
            for i in 0..=last {
                let (left, right) = if i == 0 {
                    let left = grid.periodic_x.then(|| grid.cell(nx - 1, j));
                    (left, Some(grid.cell(0, j)))
                } else if i == nx {
                    (Some(grid.cell(nx - 1, j)), None)
                } else {
                    (Some(grid.cell(i - 1, j)), Some(grid.cell(i, j)))
                };
                faces.push(FaceInfo { dir: FaceDir::X, i, j, left, right });
            }
        }
        let last = if grid.periodic_y { ny - 1 } else { ny };
        for j in 0..=last {
            for i in 0..nx {
                let (left, right) = if j == 0 {
                    let left = grid.periodic_y.then(|| grid.cell(i, ny - 1));
                    (left, Some(grid.cell(i, 0)))
                } else if j == ny {
                    (Some(grid.cell(i, ny - 1)), None)
                } else {
                    (Some(grid.cell(i, j - 1)), Some(grid.cell(i, j)))
                };
                faces.push(FaceInfo { dir: FaceDir::Y, i, j, left, right });
            }
        }
        faces
    }

    pub fn grid(&self) -> &ComputationalGrid {
        &self.grid
    }

    pub fn mapping(&self) -> &MeshMapping {
        &self.mapping
    }

    pub fn vertex(&self, i: usize, j: usize) -> Vec2 {
        self.vertices[self.grid.vertex(i, j)]
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn cell_volumes(&self) -> &[f64] {
        &self.cell_volumes
    }

    pub fn cell_volume(&self, cell: usize) -> f64 {
        self.cell_volumes[cell]
    }

    pub fn cell_centres(&self) -> &[Vec2] {
        &self.cell_centres
    }

    pub fn cell_centre(&self, cell: usize) -> Vec2 {
        self.cell_centres[cell]
    }

    pub fn face_x(&self, i: usize, j: usize) -> &FaceGeometry {
        &self.faces_x[self.grid.face_x(i, j)]
    }

    pub fn face_y(&self, i: usize, j: usize) -> &FaceGeometry {
        &self.faces_y[self.grid.face_y(i, j)]
    }

    pub fn face_geometry(&self, face: &FaceInfo) -> &FaceGeometry {
        match face.dir {
            FaceDir::X => self.face_x(face.i, face.j),
            FaceDir::Y => self.face_y(face.i, face.j),
        }
    }

    /// |J|^-1 per cell: physical area over computational area.
    pub fn jac_inv_cell(&self) -> &[f64] {
        &self.jac_inv_cell
    }

    /// |J|^-1 at x-faces, the mean of the adjacent cell values.
    pub fn jac_inv_face_x(&self) -> &[f64] {
        &self.jac_inv_face_x
    }

    /// |J|^-1 at y-faces, the mean of the adjacent cell values.
    pub fn jac_inv_face_y(&self) -> &[f64] {
        &self.jac_inv_face_y
    }

    /// Physical translation between periodic images (zero on closed
    /// directions).
    pub fn period(&self) -> Vec2 {
        self.period
    }

    /// Unique faces with adjacency.
    pub fn faces(&self) -> &[FaceInfo] {
        &self.faces
    }

    pub fn total_volume(&self) -> f64 {
        // Pairwise-ish accumulation keeps the relative error near 1e-15.
        let mut sum = 0.0;
        let mut comp = 0.0;
        for v in &self.cell_volumes {
            let y = v - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    /// Sum of outward face area vectors of a cell.
    pub fn closure_defect(&self, i: usize, j: usize) -> Vec2 {
        self.face_x(i + 1, j).area_vector - self.face_x(i, j).area_vector
            + self.face_y(i, j + 1).area_vector
            - self.face_y(i, j).area_vector
    }

    /// Largest interior angle of any cell, in degrees.
    pub fn max_cell_angle_deg(&self) -> f64 {
        let mut max_angle = 0.0_f64;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let q = [self.vertex(i, j), self.vertex(i + 1, j), self.vertex(i + 1, j + 1), self.vertex(i, j + 1)];
                for k in 0..4 {
                    let prev = q[(k + 3) % 4] - q[k];
                    let next = q[(k + 1) % 4] - q[k];
                    let cos = prev.dot(next) / (prev.norm() * next.norm());
                    max_angle = max_angle.max(cos.clamp(-1.0, 1.0).acos().to_degrees());
                }
            }
        }
        max_angle
    }

    /// Writes `i,j,x_vertex,y_vertex`, one row per vertex with `j` outer.
    pub fn write_vertex_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,j,x_vertex,y_vertex")?;
        for j in 0..=self.grid.ny {
            for i in 0..=self.grid.nx {
                let v = self.vertex(i, j);
                writeln!(out, "{i},{j},{},{}", v.x, v.y)?;
            }
        }
        Ok(())
    }
}
