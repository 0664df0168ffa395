//! Upwind-implicit advection matrix and DILU-preconditioned bi-conjugate
//! gradients, following the OpenFOAM formulation of both.

use log::debug;

use crate::error::{Error, Result};
use crate::mesh::PhysicalMesh;
use crate::velocity::FaceFluxField;

/// Row-compressed sparse matrix with sorted columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<usize>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates. Every
    /// row gets a diagonal entry, explicit zero if absent.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        // Bucket by row (with an explicit zero diagonal in every row), then
        // sort and merge each row in place.
        let mut start = vec![1usize; n + 1];
        start[n] = 0;
        for &(r, _, _) in triplets {
            start[r] += 1;
        }
        let mut acc = 0;
        for s in start.iter_mut() {
            let c = *s;
            *s = acc;
            acc += c;
        }
        let mut fill = start.clone();
        let mut entries = vec![(0usize, 0.0f64); acc];
        for (i, f) in fill.iter_mut().take(n).enumerate() {
            entries[*f] = (i, 0.0);
            *f += 1;
        }
        for &(r, c, v) in triplets {
            entries[fill[r]] = (c, v);
            fill[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(acc);
        let mut vals = Vec::with_capacity(acc);
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for r in 0..n {
            let row = &mut entries[start[r]..start[r + 1]];
            row.sort_unstable_by_key(|e| e.0);
            let first = cols.len();
            for &(c, v) in row.iter() {
                if cols.len() > first && cols[cols.len() - 1] == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    if c == r {
                        diag.push(cols.len());
                    }
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals, diag }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.vals[self.diag[i]]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                t.push((j, i, v));
            }
        }
        Self::from_triplets(self.n, &t)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    /// Checks `|a_ii| >= sum_{j != i} |a_ij|` up to round-off.
    pub fn check_diagonal_dominance(&self) -> Result<()> {
        for i in 0..self.n {
            let d = self.diagonal(i).abs();
            let off: f64 = self.row(i).filter(|e| e.0 != i).map(|e| e.1.abs()).sum();
            if d < off * (1.0 - 1e-10) || d == 0.0 {
                return Err(Error::NotDiagonallyDominant { row: i });
            }
        }
        Ok(())
    }
}

/// Fixed implicit matrix of one step and its transpose.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub transpose: CsrMatrix,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix) -> Self {
        let transpose = matrix.transpose();
        Self { matrix, transpose }
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }
}

/// Assembles `I + theta dt / V * (first-order upwind divergence)`.
///
/// Faces whose upwind cell lies outside the domain contribute nothing to the
/// matrix; their inflow enters through the right-hand side.
pub fn assemble(mesh: &PhysicalMesh, fluxes: &FaceFluxField, dt: f64, theta: f64) -> Result<SparseSystem> {
    let n = mesh.grid().n_cells();
    let vol = mesh.cell_volumes();
    let mut t: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
    let k = theta * dt;
    for face in mesh.faces() {
        let f = fluxes.face(face);
        if f == 0.0 {
            continue;
        }
        let (up, down) = if f > 0.0 { (face.left, face.right) } else { (face.right, face.left) };
        let a = f.abs() * k;
        if let Some(u) = up {
            t.push((u, u, a / vol[u]));
            if let Some(d) = down {
                t.push((d, u, -a / vol[d]));
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(n, &t);
    matrix.check_diagonal_dominance()?;
    Ok(SparseSystem::new(matrix))
}

#[derive(Clone, Debug)]
pub enum Preconditioner {
    Identity,
    /// Reciprocal of the DILU-modified diagonal.
    Dilu { r_diag: Vec<f64> },
}

impl Preconditioner {
    pub fn dilu(system: &SparseSystem) -> Result<Self> {
        let a = &system.matrix;
        let mut d: Vec<f64> = (0..a.n()).map(|i| a.diagonal(i)).collect();
        for i in 0..a.n() {
            if d[i] == 0.0 || !d[i].is_finite() {
                return Err(Error::SingularPreconditioner { row: i });
            }
            for (j, a_ij) in a.row(i) {
                if j > i {
                    let a_ji = a.get(j, i);
                    if a_ji != 0.0 {
                        d[j] -= a_ij * a_ji / d[i];
                    }
                }
            }
        }
        Ok(Preconditioner::Dilu { r_diag: d.into_iter().map(|x| 1.0 / x).collect() })
    }

    fn sweep(r_diag: &[f64], a: &CsrMatrix, r: &[f64], w: &mut [f64]) {
        for i in 0..a.n() {
            let mut acc = r[i];
            for (j, v) in a.row(i) {
                if j >= i {
                    break;
                }
                acc -= v * w[j];
            }
            w[i] = r_diag[i] * acc;
        }
        for i in (0..a.n()).rev() {
            let mut acc = 0.0;
            for (j, v) in a.row(i) {
                if j > i {
                    acc += v * w[j];
                }
            }
            w[i] -= r_diag[i] * acc;
        }
    }

    pub fn apply(&self, system: &SparseSystem, r: &[f64], w: &mut [f64]) {
        match self {
            Preconditioner::Identity => w.copy_from_slice(r),
            Preconditioner::Dilu { r_diag } => Self::sweep(r_diag, &system.matrix, r, w),
        }
    }

    pub fn apply_transpose(&self, system: &SparseSystem, r: &[f64], w: &mut [f64]) {
        match self {
            Preconditioner::Identity => w.copy_from_slice(r),
            Preconditioner::Dilu { r_diag } => Self::sweep(r_diag, &system.transpose, r, w),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Scaled l1 residual used for the convergence test.
    pub final_residual: f64,
    /// Unscaled l2 norm of `b - A x`.
    pub l2_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 1000 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sum_mag(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

/// Scale for the l1 residual:
/// `sum |A x - A xbar| + |b - A xbar| + 1e-20` where `xbar` is the uniform
/// field at the mean of `x`.
pub fn norm_factor(system: &SparseSystem, x: &[f64], b: &[f64], ax: &[f64]) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let xbar = vec![mean; n];
    let mut axbar = vec![0.0; n];
    system.matrix.mul_vec(&xbar, &mut axbar);
    let mut s = 0.0;
    for i in 0..n {
        s += (ax[i] - axbar[i]).abs() + (b[i] - axbar[i]).abs();
    }
    s + 1e-20
}

/// Bi-conjugate gradient solve of `A x = b`, starting from the contents of `x`.
pub fn bicg_solve(
    system: &SparseSystem,
    precond: &Preconditioner,
    b: &[f64],
    x: &mut [f64],
    settings: SolverSettings,
) -> Result<SolveReport> {
    let n = system.n();
    let a = &system.matrix;
    let mut w = vec![0.0; n];
    a.mul_vec(x, &mut w);
    let norm = norm_factor(system, x, b, &w);
    let mut r: Vec<f64> = b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect();
    let mut residual = sum_mag(&r) / norm;

    let mut iterations = 0;
    let mut restarted = false;
    let mut wt = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut pt = vec![0.0; n];

    'outer: while residual > settings.tolerance {
        let mut rt = r.clone();
        let mut rho_old = 1.0;
        let mut first = true;
        loop {
            if residual <= settings.tolerance {
                break 'outer;
            }
            if iterations >= settings.max_iterations {
                return Err(Error::SolverNotConverged { iterations, residual });
            }
            precond.apply(system, &r, &mut w);
            precond.apply_transpose(system, &rt, &mut wt);
            let rho = dot(&w, &rt);
            if first {
                p.copy_from_slice(&w);
                pt.copy_from_slice(&wt);
                first = false;
            } else {
                let beta = rho / rho_old;
                for i in 0..n {
                    p[i] = w[i] + beta * p[i];
                    pt[i] = wt[i] + beta * pt[i];
                }
            }
            a.mul_vec(&p, &mut w);
            system.transpose.mul_vec(&pt, &mut wt);
            let wp = dot(&w, &pt);
            if !(wp.abs() / norm > 1e-300) || rho == 0.0 || !rho.is_finite() {
                if restarted {
                    return Err(Error::SolverBreakdown { iterations, residual });
                }
                restarted = true;
                a.mul_vec(x, &mut w);
                for i in 0..n {
                    r[i] = b[i] - w[i];
                }
                residual = sum_mag(&r) / norm;
                continue 'outer;
            }
            let alpha = rho / wp;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * w[i];
                rt[i] -= alpha * wt[i];
            }
            rho_old = rho;
            iterations += 1;
            residual = sum_mag(&r) / norm;
        }
    }

    a.mul_vec(x, &mut w);
    let l2 = b.iter().zip(&w).map(|(bi, wi)| (bi - wi) * (bi - wi)).sum::<f64>().sqrt();
    let report = SolveReport { iterations, final_residual: residual, l2_residual: l2, converged: true };
    debug!("bicg iterations={iterations} residual={residual:e} l2={l2:e}");
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Vec2;
    use crate::mesh::{ComputationalGrid, MeshMapping};
    use crate::velocity::{face_fluxes, StreamfunctionSpec};
    use nalgebra::{DMatrix, DVector};

    fn periodic_1d_upwind(n: usize, c: f64) -> SparseSystem {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 1.0 + 0.5 * c));
            t.push((i, (i + n - 1) % n, -0.5 * c));
        }
        SparseSystem::new(CsrMatrix::from_triplets(n, &t))
    }

    fn solid_body_system(n: usize, dt: f64) -> (PhysicalMesh, SparseSystem) {
        let g = ComputationalGrid::covering(n, n, Vec2::ZERO, Vec2::new(1e4, 1e4), false, false).unwrap();
        let mesh = PhysicalMesh::build(g, MeshMapping::vmesh_default()).unwrap();
        let f = face_fluxes(&StreamfunctionSpec::solid_body_default(), &mesh, 0.0);
        let s = assemble(&mesh, &f, dt, 0.5).unwrap();
        (mesh, s)
    }

    #[test]
    fn zero_velocity_gives_identity() {
        let g = ComputationalGrid::covering(6, 6, Vec2::ZERO, Vec2::new(1.0, 1.0), true, true).unwrap();
        let mesh = PhysicalMesh::build(g, MeshMapping::Identity).unwrap();
        let s = assemble(&mesh, &FaceFluxField::zeros(6, 6), 1.0, 0.5).unwrap();
        assert_eq!(s.matrix, CsrMatrix::identity(36));
    }

    #[test]
    fn one_dimensional_periodic_coefficients() {
        let n = 8;
        let g = ComputationalGrid::covering(n, 4, Vec2::ZERO, Vec2::new(n as f64, 4.0), true, true).unwrap();
        let mesh = PhysicalMesh::build(g, MeshMapping::Identity).unwrap();
        let mut f = FaceFluxField::zeros(n, 4);
        for j in 0..4 {
            for i in 0..=n {
                f.set_fx(i, j, 1.0);
            }
        }
        let s = assemble(&mesh, &f, 1.0, 0.5).unwrap();
        for r in 0..s.n() {
            assert_eq!(s.matrix.diagonal(r), 1.5);
            assert_eq!(s.matrix.row_len(r), 2);
            let i = r % n;
            let west = r - i + (i + n - 1) % n;
            assert_eq!(s.matrix.get(r, west), -0.5);
        }
    }

    #[test]
    fn matches_dense_assembly() {
        let n = 8;
        let dt = 3.0;
        let (mesh, s) = solid_body_system(n, dt);
        let f = face_fluxes(&StreamfunctionSpec::solid_body_default(), &mesh, 0.0);
        let g = mesh.grid();
        let mut dense = vec![vec![0.0; n * n]; n * n];
        for (r, row) in dense.iter_mut().enumerate() {
            row[r] = 1.0;
        }
        for j in 0..n {
            for i in 0..n {
                let c = g.cell(i, j);
                let v = mesh.cell_volume(c);
                // (outward flux, neighbour cell)
                let faces = [
                    (f.fx(i + 1, j), (i + 1 < n).then(|| g.cell(i + 1, j))),
                    (-f.fx(i, j), (i > 0).then(|| g.cell(i - 1, j))),
                    (f.fy(i, j + 1), (j + 1 < n).then(|| g.cell(i, j + 1))),
                    (-f.fy(i, j), (j > 0).then(|| g.cell(i, j - 1))),
                ];
                for (out, nb) in faces {
                    if out > 0.0 {
                        dense[c][c] += 0.5 * dt * out / v;
                    } else if let Some(nb) = nb {
                        dense[c][nb] += 0.5 * dt * out / v;
                    }
                }
            }
        }
        let got = s.matrix.to_dense();
        for r in 0..n * n {
            for c in 0..n * n {
                assert!((got[r][c] - dense[r][c]).abs() <= 1e-14 * dense[r][r].abs(), "({r},{c})");
            }
        }
        assert!((0..s.n()).all(|r| s.matrix.row_len(r) <= 5));
    }

    #[test]
    fn dilu_of_diagonal_is_exact_inverse() {
        let t: Vec<_> = (0..5).map(|i| (i, i, 1.0 + i as f64)).collect();
        let s = SparseSystem::new(CsrMatrix::from_triplets(5, &t));
        let p = Preconditioner::dilu(&s).unwrap();
        let r = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut w = [0.0; 5];
        p.apply(&s, &r, &mut w);
        for i in 0..5 {
            assert!((w[i] - 1.0 * r[i] / (1.0 + i as f64)).abs() < 1e-15);
        }
        let id = SparseSystem::new(CsrMatrix::identity(4));
        let p = Preconditioner::dilu(&id).unwrap();
        let mut w = [0.0; 4];
        p.apply(&id, &r[..4], &mut w);
        assert_eq!(w, [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn zero_diagonal_is_rejected() {
        let s = SparseSystem::new(CsrMatrix::from_triplets(2, &[(0, 1, 1.0), (1, 1, 1.0)]));
        assert!(matches!(Preconditioner::dilu(&s), Err(Error::SingularPreconditioner { row: 0 })));
    }

    #[test]
    fn dilu_matches_explicit_factorisation() {
        // M = (D + L) D^-1 (D + U) with the DILU diagonal D.
        let (_, s) = solid_body_system(5, 40.0);
        let p = Preconditioner::dilu(&s).unwrap();
        let Preconditioner::Dilu { r_diag } = &p else { unreachable!() };
        let n = s.n();
        let a = DMatrix::from_fn(n, n, |i, j| s.matrix.get(i, j));
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / r_diag[i] } else { 0.0 });
        let l = DMatrix::from_fn(n, n, |i, j| if j < i { a[(i, j)] } else { 0.0 });
        let u = DMatrix::from_fn(n, n, |i, j| if j > i { a[(i, j)] } else { 0.0 });
        let m = (&d + &l) * d.clone().try_inverse().unwrap() * (&d + &u);
        // The modified diagonal makes diag(M) equal diag(A).
        for i in 0..n {
            assert!((m[(i, i)] - a[(i, i)]).abs() < 1e-12);
        }
        let r: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut w = vec![0.0; n];
        p.apply(&s, &r, &mut w);
        let back = &m * DVector::from_vec(w);
        for i in 0..n {
            assert!((back[i] - r[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn recovers_known_solution() {
        let (_, s) = solid_body_system(12, 20.0);
        let n = s.n();
        let known: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.1).cos()).collect();
        let mut b = vec![0.0; n];
        s.matrix.mul_vec(&known, &mut b);
        let p = Preconditioner::dilu(&s).unwrap();
        let mut x = vec![0.0; n];
        let rep = bicg_solve(&s, &p, &b, &mut x, SolverSettings::default()).unwrap();
        assert!(rep.converged && rep.final_residual <= 1e-8);
        for i in 0..n {
            assert!((x[i] - known[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn identity_needs_at_most_one_iteration() {
        let s = SparseSystem::new(CsrMatrix::identity(10));
        let b: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut x = vec![0.0; 10];
        let rep = bicg_solve(&s, &Preconditioner::dilu(&s).unwrap(), &b, &mut x, SolverSettings::default()).unwrap();
        assert!(rep.iterations <= 1);
        assert_eq!(x, b);
    }

    #[test]
    fn preconditioning_reduces_iterations() {
        let s = periodic_1d_upwind(64, 4.0);
        let b: Vec<f64> = (0..64).map(|i| (i as f64 / 10.0).sin() + 2.0).collect();
        let mut x1 = vec![0.0; 64];
        let mut x2 = vec![0.0; 64];
        let plain = bicg_solve(&s, &Preconditioner::Identity, &b, &mut x1, SolverSettings::default()).unwrap();
        let dilu = bicg_solve(&s, &Preconditioner::dilu(&s).unwrap(), &b, &mut x2, SolverSettings::default()).unwrap();
        assert!(dilu.iterations < plain.iterations, "{} vs {}", dilu.iterations, plain.iterations);
    }

    #[test]
    fn matches_dense_direct_solve() {
        let (_, s) = solid_body_system(30, 10.0);
        let n = s.n();
        let b: Vec<f64> = (0..n).map(|i| ((i % 30) as f64 / 7.0).sin() * ((i / 30) as f64 / 5.0).cos()).collect();
        let a = DMatrix::from_fn(n, n, |i, j| s.matrix.get(i, j));
        let exact = a.lu().solve(&DVector::from_vec(b.clone())).unwrap();
        let mut x = b.clone();
        bicg_solve(&s, &Preconditioner::dilu(&s).unwrap(), &b, &mut x, SolverSettings::default()).unwrap();
        let err = x.iter().zip(exact.iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn iteration_cap_is_reported() {
        let s = periodic_1d_upwind(64, 50.0);
        let b: Vec<f64> = (0..64).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; 64];
        let settings = SolverSettings { tolerance: 1e-14, max_iterations: 2 };
        let res = bicg_solve(&s, &Preconditioner::Identity, &b, &mut x, settings);
        assert!(matches!(res, Err(Error::SolverNotConverged { iterations: 2, .. })));
    }

    #[test]
    fn identical_rhs_give_identical_reports() {
        let (_, s) = solid_body_system(10, 15.0);
        let p = Preconditioner::dilu(&s).unwrap();
        let b: Vec<f64> = (0..s.n()).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut x1 = vec![0.0; s.n()];
        let mut x2 = vec![0.0; s.n()];
        let r1 = bicg_solve(&s, &p, &b, &mut x1, SolverSettings::default()).unwrap();
        let r2 = bicg_solve(&s, &p, &b, &mut x2, SolverSettings::default()).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(x1, x2);
    }
}
