//! Upwind-biased stencils and their weighted least-squares interpolation
//! weights.

use log::debug;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::Vec2;
use crate::mesh::{FaceDir, FaceInfo, PhysicalMesh};

/// Weight given to the rows of the two cells sharing the face.
pub const ADJACENT_ROW_WEIGHT: f64 = 1000.0;

/// Relative singular value threshold below which a fit is rank deficient.
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Flux from the face's left cell to its right cell.
    Positive,
    Negative,
}

/// One cell of a stencil, with the translation that places it next to the
/// face across periodic seams.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilCell {
    pub cell: usize,
    pub shift: Vec2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub cells: Vec<StencilCell>,
    /// False when boundary truncation removed cells.
    pub complete: bool,
}

/// Polynomial bases tried in order until the fit has full rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Basis {
    Constant,
    Linear,
    Quadratic,
    Cubic,
}

impl Basis {
    pub fn n_terms(self) -> usize {
        match self {
            Basis::Constant => 1,
            Basis::Linear => 3,
            Basis::Quadratic => 6,
            Basis::Cubic => 9,
        }
    }

    /// `1, x, y, x^2, xy, y^2, x^3, x^2 y, x y^2` truncated to the basis.
    pub fn terms(self, x: f64, y: f64) -> [f64; 9] {
        [1.0, x, y, x * x, x * y, y * y, x * x * x, x * x * y, x * y * y]
    }

    fn lower(self) -> Option<Basis> {
        match self {
            Basis::Cubic => Some(Basis::Quadratic),
            Basis::Quadratic => Some(Basis::Linear),
            Basis::Linear => Some(Basis::Constant),
            Basis::Constant => None,
        }
    }
}

/// Interpolation of one face for one upwind direction.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilFit {
    pub cells: Vec<usize>,
    /// Corrected weights: the raw weight of the upwind cell is reduced by 1.
    pub weights: Vec<f64>,
    pub upwind: usize,
    pub basis: Basis,
}

impl StencilFit {
    pub fn raw_weight_sum(&self) -> f64 {
        self.weights.iter().sum::<f64>() + 1.0
    }
}

/// Cells of the upwind-biased stencil for an interior face.
///
/// The face upwind of `face` is found one cell further upstream; the two
/// cells either side of it plus their vertex neighbours form a 4 x 3 block
/// with the downwind cell in the last column.
pub fn build_stencil(mesh: &PhysicalMesh, face: &FaceInfo, orientation: Orientation) -> Stencil {
    let g = mesh.grid();
    let period = mesh.period();
    // Along-flow offsets relative to the face's right cell index.
    let along: [isize; 4] = match orientation {
        Orientation::Positive => [-3, -2, -1, 0],
        Orientation::Negative => [-1, 0, 1, 2],
    };
    let (base_a, base_c, n_a, n_c, periodic_a, periodic_c, shift_a, shift_c) = match face.dir {
        FaceDir::X => (
            face.i as isize,
            face.j as isize,
            g.nx as isize,
            g.ny as isize,
            g.periodic_x,
            g.periodic_y,
            Vec2::new(period.x, 0.0),
            Vec2::new(0.0, period.y),
        ),
        FaceDir::Y => (
            face.j as isize,
            face.i as isize,
            g.ny as isize,
            g.nx as isize,
            g.periodic_y,
            g.periodic_x,
            Vec2::new(0.0, period.y),
            Vec2::new(period.x, 0.0),
        ),
    };
    let wrap = |k: isize, n: isize, periodic: bool| -> Option<(usize, f64)> {
        if (0..n).contains(&k) {
            Some((k as usize, 0.0))
        } else if periodic {
            Some((k.rem_euclid(n) as usize, k.div_euclid(n) as f64))
        } else {
            None
        }
    };
    let mut cells = Vec::with_capacity(12);
    let mut complete = true;
    for da in along {
        for dc in -1..=1isize {
            let a = wrap(base_a + da, n_a, periodic_a);
            let c = wrap(base_c + dc, n_c, periodic_c);
            match (a, c) {
                (Some((ia, wa)), Some((ic, wc))) => {
                    let (i, j) = match face.dir {
                        FaceDir::X => (ia, ic),
                        FaceDir::Y => (ic, ia),
                    };
                    cells.push(StencilCell { cell: g.cell(i, j), shift: shift_a * wa + shift_c * wc });
                }
                _ => complete = false,
            }
        }
    }
    Stencil { cells, complete }
}

/// Face-local coordinates: `x` along the face normal, `y` along the face,
/// both scaled by `length`.
#[derive(Clone, Copy, Debug)]
pub struct FaceFrame {
    pub origin: Vec2,
    pub normal: Vec2,
    pub tangent: Vec2,
    pub length: f64,
}

impl FaceFrame {
    pub fn local(&self, p: Vec2) -> (f64, f64) {
        let d = p - self.origin;
        (d.dot(self.normal) / self.length, d.dot(self.tangent) / self.length)
    }
}

pub fn face_frame(mesh: &PhysicalMesh, face: &FaceInfo) -> FaceFrame {
    let geom = mesh.face_geometry(face);
    let normal = geom.area_vector * (1.0 / geom.area_vector.norm());
    let length = match (face.left, face.right) {
        (Some(l), Some(r)) => {
            let pl = mesh.cell_centre(l);
            let pr = mesh.cell_centre(r);
            // Across a seam the nearest image of the left cell is one period back.
            let near = |p: Vec2, q: Vec2| {
                let mut d = q - p;
                let per = mesh.period();
                if per.x > 0.0 {
                    d.x -= per.x * (d.x / per.x).round();
                }
                if per.y > 0.0 {
                    d.y -= per.y * (d.y / per.y).round();
                }
                d.norm()
            };
            near(pl, pr)
        }
        _ => geom.area_vector.norm(),
    };
    FaceFrame { origin: geom.centre, normal, tangent: normal.perp(), length }
}

/// Position of a stencil cell as seen from the face, undoing periodic
/// wraparound.
fn cell_position(mesh: &PhysicalMesh, sc: &StencilCell) -> Vec2 {
    mesh.cell_centre(sc.cell) + sc.shift
}

/// Row 0 of the pseudo-inverse of the weighted design matrix, times the
/// row weights; `None` if the basis is not resolved by the stencil.
fn solve_weights(points: &[(f64, f64)], row_weight: &[f64], basis: Basis) -> Option<Vec<f64>> {
    let p = basis.n_terms();
    let m = points.len();
    if m < p {
        return None;
    }
    let a = DMatrix::from_fn(m, p, |r, c| row_weight[r] * basis.terms(points[r].0, points[r].1)[c]);
    let svd = a.svd(true, true);
    let s_max = svd.singular_values.max();
    if !(s_max > 0.0) {
        return None;
    }
    let rank = svd.singular_values.iter().filter(|&&s| s > RANK_TOLERANCE * s_max).count();
    if rank < p {
        return None;
    }
    let pinv = svd.pseudo_inverse(RANK_TOLERANCE * s_max).ok()?;
    Some((0..m).map(|r| pinv[(0, r)] * row_weight[r]).collect())
}

/// Least-squares interpolation weights from stencil cells to the face centre.
///
/// Complete stencils start from the cubic basis; truncated stencils next to
/// closed boundaries start from the linear one. Either way the basis is
/// lowered until the weighted system has full rank.
pub fn fit_weights(
    mesh: &PhysicalMesh,
    face_index: usize,
    face: &FaceInfo,
    stencil: &Stencil,
    orientation: Orientation,
) -> Result<StencilFit> {
    let (Some(left), Some(right)) = (face.left, face.right) else {
        return Err(Error::DegenerateStencil { face: face_index, cells: stencil.cells.len() });
    };
    let (upwind, downwind) = match orientation {
        Orientation::Positive => (left, right),
        Orientation::Negative => (right, left),
    };
    let frame = face_frame(mesh, face);
    // Adjacent cells are those nearest the face among entries sharing their
    // index; periodic meshes narrower than the stencil can repeat cells.
    let points: Vec<(f64, f64)> = stencil.cells.iter().map(|sc| frame.local(cell_position(mesh, sc))).collect();
    let adjacent = |k: usize| {
        let c = stencil.cells[k].cell;
        (c == upwind || c == downwind) && points[k].0.abs() < 1.0
    };
    let row_weight: Vec<f64> = (0..points.len()).map(|k| if adjacent(k) { ADJACENT_ROW_WEIGHT } else { 1.0 }).collect();
    let up_slot = (0..points.len())
        .find(|&k| stencil.cells[k].cell == upwind && adjacent(k))
        .ok_or(Error::DegenerateStencil { face: face_index, cells: stencil.cells.len() })?;

    let mut basis = if stencil.complete { Basis::Cubic } else { Basis::Linear };
    loop {
        if let Some(raw) = solve_weights(&points, &row_weight, basis) {
            let mut weights = raw;
            weights[up_slot] -= 1.0;
            if basis != Basis::Cubic && stencil.complete {
                debug!("face {face_index}: least-squares fit reduced to {basis:?}");
            }
            return Ok(StencilFit {
                cells: stencil.cells.iter().map(|sc| sc.cell).collect(),
                weights,
                upwind,
                basis,
            });
        }
        match basis.lower() {
            Some(b) => basis = b,
            None => return Err(Error::DegenerateStencil { face: face_index, cells: stencil.cells.len() }),
        }
    }
}

/// Both orientations of every interior face; boundary faces have none.
#[derive(Clone, Debug)]
pub struct StencilSet {
    pub positive: Vec<Option<StencilFit>>,
    pub negative: Vec<Option<StencilFit>>,
}

impl StencilSet {
    pub fn build(mesh: &PhysicalMesh) -> Result<Self> {
        let faces = mesh.faces();
        let mut positive = Vec::with_capacity(faces.len());
        let mut negative = Vec::with_capacity(faces.len());
        for (k, face) in faces.iter().enumerate() {
            if face.left.is_some() && face.right.is_some() {
                for (orientation, out) in [(Orientation::Positive, &mut positive), (Orientation::Negative, &mut negative)] {
                    let st = build_stencil(mesh, face, orientation);
                    out.push(Some(fit_weights(mesh, k, face, &st, orientation)?));
                }
            } else {
                positive.push(None);
                negative.push(None);
            }
        }
        Ok(Self { positive, negative })
    }

    pub fn get(&self, face: usize, orientation: Orientation) -> Option<&StencilFit> {
        match orientation {
            Orientation::Positive => self.positive[face].as_ref(),
            Orientation::Negative => self.negative[face].as_ref(),
        }
    }

    pub fn count_by_basis(&self, basis: Basis) -> usize {
        self.positive.iter().chain(&self.negative).flatten().filter(|f| f.basis == basis).count()
    }
}
