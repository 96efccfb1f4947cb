//! Uniform-grid discrete calculus on the unit box `[0,1]^d`, `d in {2,3}`.
//!
//! Three layouts share one grid:
//! * maps `Z` are collocated at nodes (`(n+1)^d` points, identity on the
//!   boundary),
//! * scalars (pressure, multipliers) sit at cell centers,
//! * velocities are MAC-staggered: component `k` lives on faces normal to
//!   axis `k`, which makes the discrete divergence and gradient exact
//!   negative adjoints.

mod interp;
mod io;
mod norms;
mod ops;

pub use interp::{compose_map, compose_scalar, compose_velocity, invert_map};
pub use io::{dump_scalar, dump_map, dump_velocity, FieldHeader};
pub use norms::{norm_xa, LP_INF};
pub use ops::{
    adjoint_deformation_gradient, deformation_gradient, divergence, face_to_node_velocity,
    gradient, laplacian_map, laplacian_scalar_neumann, laplacian_velocity_noslip,
    node_to_face_velocity,
};

use crate::error::{Error, Result};

/// Uniform Cartesian grid on `[0,1]^d` with `n` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Grid> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dim must be 2 or 3, got {dim}")));
        }
        if n < 4 {
            return Err(Error::InvalidArgument(format!("n must be >= 4, got {n}")));
        }
        Ok(Grid { dim, n })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing, always derived as 1/n.
    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Cell volume `h^d`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Extents of the node lattice, padded with 1 for unused axes.
    #[inline]
    pub fn node_ext(&self) -> [usize; 3] {
        let m = self.n + 1;
        if self.dim == 2 { [m, m, 1] } else { [m, m, m] }
    }

    /// Extents of the cell lattice.
    #[inline]
    pub fn cell_ext(&self) -> [usize; 3] {
        if self.dim == 2 { [self.n, self.n, 1] } else { [self.n, self.n, self.n] }
    }

    /// Extents of the face lattice carrying velocity component `comp`.
    #[inline]
    pub fn face_ext(&self, comp: usize) -> [usize; 3] {
        let mut e = self.cell_ext();
        e[comp] = self.n + 1;
        e
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        let e = self.node_ext();
        e[0] * e[1] * e[2]
    }

    #[inline]
    pub fn num_cells(&self) -> usize {
        let e = self.cell_ext();
        e[0] * e[1] * e[2]
    }

    #[inline]
    pub fn num_faces(&self, comp: usize) -> usize {
        let e = self.face_ext(comp);
        e[0] * e[1] * e[2]
    }

    /// Physical position of a node.
    #[inline]
    pub fn node_pos(&self, idx: [usize; 3]) -> [f64; 3] {
        let h = self.h();
        [idx[0] as f64 * h, idx[1] as f64 * h, idx[2] as f64 * h]
    }

    /// Physical position of a cell center.
    #[inline]
    pub fn cell_pos(&self, idx: [usize; 3]) -> [f64; 3] {
        let h = self.h();
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = (idx[a] as f64 + 0.5) * h;
        }
        p
    }

    /// Physical position of the face sample `idx` of component `comp`.
    #[inline]
    pub fn face_pos(&self, comp: usize, idx: [usize; 3]) -> [f64; 3] {
        let h = self.h();
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = if a == comp {
                idx[a] as f64 * h
            } else {
                (idx[a] as f64 + 0.5) * h
            };
        }
        p
    }

    /// True if the node lies on the boundary of the box.
    #[inline]
    pub fn is_boundary_node(&self, idx: [usize; 3]) -> bool {
        (0..self.dim).any(|a| idx[a] == 0 || idx[a] == self.n)
    }

    /// True if the face sample is a boundary face of its component
    /// (normal-direction index at 0 or n).
    #[inline]
    pub fn is_boundary_face(&self, comp: usize, idx: [usize; 3]) -> bool {
        idx[comp] == 0 || idx[comp] == self.n
    }
}

#[inline]
pub fn flat(idx: [usize; 3], ext: [usize; 3]) -> usize {
    idx[0] + ext[0] * (idx[1] + ext[1] * idx[2])
}

/// Visit every lattice point of `ext` in a fixed row-major order.
#[inline]
pub fn for_each(ext: [usize; 3], mut f: impl FnMut([usize; 3], usize)) {
    let mut flat = 0usize;
    for k in 0..ext[2] {
        for j in 0..ext[1] {
            for i in 0..ext[0] {
                f([i, j, k], flat);
                flat += 1;
            }
        }
    }
}

/// Zero every component of a component-major node array at boundary nodes.
pub(crate) fn zero_boundary_nodes(grid: Grid, values: &mut [f64]) {
    let nn = grid.num_nodes();
    let ncomp = values.len() / nn;
    for_each(grid.node_ext(), |idx, f| {
        if grid.is_boundary_node(idx) {
            for c in 0..ncomp {
                values[c * nn + f] = 0.0;
            }
        }
    });
}

/// Discrete map `Z: nodes -> R^d`, identity on boundary nodes.
///
/// Storage is component-major: `values[c * num_nodes + node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl MapField {
    pub fn identity(grid: Grid) -> MapField {
        let nn = grid.num_nodes();
        let mut values = vec![0.0; grid.dim() * nn];
        for_each(grid.node_ext(), |idx, flat| {
            let p = grid.node_pos(idx);
            for c in 0..grid.dim() {
                values[c * nn + flat] = p[c];
            }
        });
        MapField { grid, values }
    }

    /// Build from a pointwise function of position; boundary nodes are
    /// forced to the identity.
    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> MapField {
        let nn = grid.num_nodes();
        let mut values = vec![0.0; grid.dim() * nn];
        for_each(grid.node_ext(), |idx, flat| {
            let p = grid.node_pos(idx);
            let v = if grid.is_boundary_node(idx) { p } else { f(p) };
            for c in 0..grid.dim() {
                values[c * nn + flat] = v[c];
            }
        });
        MapField { grid, values }
    }

    #[inline]
    pub fn get(&self, c: usize, node: usize) -> f64 {
        self.values[c * self.grid.num_nodes() + node]
    }

    #[inline]
    pub fn set(&mut self, c: usize, node: usize, v: f64) {
        let nn = self.grid.num_nodes();
        self.values[c * nn + node] = v;
    }

    /// Pointwise position of node `flat` under this map.
    #[inline]
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let nn = self.grid.num_nodes();
        let mut p = [0.0; 3];
        for c in 0..self.grid.dim() {
            p[c] = self.values[c * nn + flat];
        }
        p
    }

    /// Componentwise difference `self - other` as a displacement field
    /// (also node-collocated; borrows the MapField container).
    pub fn sub(&self, other: &MapField) -> Result<MapField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("map subtraction".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(MapField { grid: self.grid, values })
    }

    pub fn add_scaled(&self, other: &MapField, s: f64) -> MapField {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + s * b)
            .collect();
        MapField { grid: self.grid, values }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Max over boundary nodes of the distance to the identity.
    pub fn boundary_identity_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for_each(self.grid.node_ext(), |idx, flat| {
            if self.grid.is_boundary_node(idx) {
                let p = self.grid.node_pos(idx);
                let q = self.point(flat);
                for c in 0..self.grid.dim() {
                    worst = worst.max((p[c] - q[c]).abs());
                }
            }
        });
        worst
    }
}

/// Cell-centered scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> ScalarField {
        ScalarField { grid, values: vec![0.0; grid.num_cells()] }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 3]) -> f64) -> ScalarField {
        let mut s = Self::zeros(grid);
        for_each(grid.cell_ext(), |idx, flat| {
            s.values[flat] = f(grid.cell_pos(idx));
        });
        s
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn subtract_mean(&mut self) {
        let m = self.mean();
        for v in &mut self.values {
            *v -= m;
        }
    }
}

/// MAC-staggered velocity field; component `k` on faces normal to axis `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> VectorField {
        let comps = (0..grid.dim()).map(|c| vec![0.0; grid.num_faces(c)]).collect();
        VectorField { grid, comps }
    }

    /// Sample an analytic velocity at face centers.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, [f64; 3]) -> f64) -> VectorField {
        let mut v = Self::zeros(grid);
        for c in 0..grid.dim() {
            let ext = grid.face_ext(c);
            for_each(ext, |idx, flat| {
                v.comps[c][flat] = f(c, grid.face_pos(c, idx));
            });
        }
        v
    }

    /// Discrete curl of a node-sampled stream function (2D only): exactly
    /// divergence-free on the MAC grid, zero normal boundary faces when the
    /// stream function vanishes on the boundary.
    pub fn from_stream_function(grid: Grid, psi: impl Fn([f64; 3]) -> f64) -> VectorField {
        assert_eq!(grid.dim(), 2, "stream functions are two-dimensional");
        let h = grid.h();
        let mut v = Self::zeros(grid);
        // u = d(psi)/dy at x-faces, w = -d(psi)/dx at y-faces.
        let ext_u = grid.face_ext(0);
        for_each(ext_u, |idx, flat| {
            let a = psi(grid.node_pos([idx[0], idx[1] + 1, 0]));
            let b = psi(grid.node_pos([idx[0], idx[1], 0]));
            v.comps[0][flat] = (a - b) / h;
        });
        let ext_w = grid.face_ext(1);
        for_each(ext_w, |idx, flat| {
            let a = psi(grid.node_pos([idx[0] + 1, idx[1], 0]));
            let b = psi(grid.node_pos([idx[0], idx[1], 0]));
            v.comps[1][flat] = -(a - b) / h;
        });
        v
    }

    pub fn add_scaled(&self, other: &VectorField, s: f64) -> VectorField {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
            .collect();
        VectorField { grid: self.grid, comps }
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.comps {
            for v in c {
                *v *= s;
            }
        }
    }

    /// Force boundary-normal faces to zero.
    pub fn zero_boundary_faces(&mut self) {
        let grid = self.grid;
        for c in 0..grid.dim() {
            let ext = grid.face_ext(c);
            for_each(ext, |idx, flat| {
                if grid.is_boundary_face(c, idx) {
                    self.comps[c][flat] = 0.0;
                }
            });
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Discrete L2 inner product of two velocity fields (face sum, `h^d` weight).
pub fn dot_velocity(a: &VectorField, b: &VectorField) -> f64 {
    let mut s = 0.0;
    for (ca, cb) in a.comps.iter().zip(&b.comps) {
        let mut partial = 0.0;
        for (x, y) in ca.iter().zip(cb) {
            partial += x * y;
        }
        s += partial;
    }
    s * a.grid.cell_volume()
}

/// Discrete L2 inner product of two cell scalars.
pub fn dot_scalar(a: &ScalarField, b: &ScalarField) -> f64 {
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    s * a.grid.cell_volume()
}

/// Discrete L2 inner product of two node-collocated (map-like) fields.
pub fn dot_map(a: &MapField, b: &MapField) -> f64 {
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    s * a.grid.cell_volume()
}
