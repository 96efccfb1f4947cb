//! Multilinear interpolation, composition `f o z`, and Newton map inversion.
//!
//! All samplers clamp the local interpolation weight to `[0,1]`, so an
//! evaluated value is always a convex combination of stored samples; this
//! preserves max-norm bounds under composition.

use super::{deformation_gradient, flat, for_each, Grid, MapField, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::smallmat::{det, SmallMat};

/// Clamp tolerance for positions that transiently overshoot the box.
fn clamp_point(grid: Grid, p: [f64; 3]) -> Result<[f64; 3]> {
    let tol = 2.0 * grid.h();
    let mut q = p;
    for a in 0..grid.dim() {
        if p[a] < -tol || p[a] > 1.0 + tol {
            return Err(Error::OutOfDomain(p[..grid.dim()].to_vec()));
        }
        q[a] = p[a].clamp(0.0, 1.0);
    }
    Ok(q)
}

/// Base index and weight for a 1D lattice with `count` samples at
/// `origin + i * h`.
#[inline]
fn locate(x: f64, origin: f64, h: f64, count: usize) -> (usize, f64) {
    let s = (x - origin) / h;
    let max_base = count - 2;
    let i = (s.floor() as isize).clamp(0, max_base as isize) as usize;
    let t = (s - i as f64).clamp(0.0, 1.0);
    (i, t)
}

impl MapField {
    /// Multilinear evaluation at an arbitrary point of the box.
    pub fn eval(&self, p: [f64; 3]) -> [f64; 3] {
        let grid = self.grid;
        let d = grid.dim();
        let h = grid.h();
        let next = grid.node_ext();
        let nn = grid.num_nodes();
        let mut base = [0usize; 3];
        let mut t = [0.0f64; 3];
        for a in 0..d {
            let (i, w) = locate(p[a], 0.0, h, grid.n() + 1);
            base[a] = i;
            t[a] = w;
        }
        let corners = 1usize << d;
        let mut out = [0.0f64; 3];
        for mask in 0..corners {
            let mut idx = base;
            let mut w = 1.0;
            for a in 0..d {
                if (mask >> a) & 1 == 1 {
                    idx[a] += 1;
                    w *= t[a];
                } else {
                    w *= 1.0 - t[a];
                }
            }
            let f = flat(idx, next);
            for c in 0..d {
                out[c] += w * self.values[c * nn + f];
            }
        }
        out
    }

    /// Value and Jacobian of the multilinear interpolant.
    pub fn eval_with_jacobian(&self, p: [f64; 3]) -> ([f64; 3], SmallMat) {
        let grid = self.grid;
        let d = grid.dim();
        let h = grid.h();
        let next = grid.node_ext();
        let nn = grid.num_nodes();
        let mut base = [0usize; 3];
        let mut t = [0.0f64; 3];
        for a in 0..d {
            let (i, w) = locate(p[a], 0.0, h, grid.n() + 1);
            base[a] = i;
            t[a] = w;
        }
        let corners = 1usize << d;
        let mut out = [0.0f64; 3];
        let mut jac = SmallMat::zeros(d);
        for mask in 0..corners {
            let mut idx = base;
            for a in 0..d {
                if (mask >> a) & 1 == 1 {
                    idx[a] += 1;
                }
            }
            let f = flat(idx, next);
            let w: f64 = (0..d)
                .map(|a| if (mask >> a) & 1 == 1 { t[a] } else { 1.0 - t[a] })
                .product();
            for c in 0..d {
                out[c] += w * self.values[c * nn + f];
            }
            for b in 0..d {
                // derivative along axis b: replace weight factor by +-1/h
                let mut dw = 1.0 / h;
                for a in 0..d {
                    if a == b {
                        dw *= if (mask >> a) & 1 == 1 { 1.0 } else { -1.0 };
                    } else {
                        dw *= if (mask >> a) & 1 == 1 { t[a] } else { 1.0 - t[a] };
                    }
                }
                for c in 0..d {
                    jac.set(c, b, jac.get(c, b) + dw * self.values[c * nn + f]);
                }
            }
        }
        (out, jac)
    }
}

impl ScalarField {
    pub fn eval(&self, p: [f64; 3]) -> f64 {
        let grid = self.grid;
        let d = grid.dim();
        let h = grid.h();
        let cext = grid.cell_ext();
        let mut base = [0usize; 3];
        let mut t = [0.0f64; 3];
        for a in 0..d {
            let (i, w) = locate(p[a], 0.5 * h, h, grid.n());
            base[a] = i;
            t[a] = w;
        }
        let mut out = 0.0;
        for mask in 0..(1usize << d) {
            let mut idx = base;
            let mut w = 1.0;
            for a in 0..d {
                if (mask >> a) & 1 == 1 {
                    idx[a] += 1;
                    w *= t[a];
                } else {
                    w *= 1.0 - t[a];
                }
            }
            out += w * self.values[flat(idx, cext)];
        }
        out
    }
}

impl VectorField {
    /// Interpolate component `comp` at an arbitrary point.
    pub fn eval_comp(&self, comp: usize, p: [f64; 3]) -> f64 {
        let grid = self.grid;
        let d = grid.dim();
        let h = grid.h();
        let fext = grid.face_ext(comp);
        let mut base = [0usize; 3];
        let mut t = [0.0f64; 3];
        for a in 0..d {
            let (origin, count) = if a == comp {
                (0.0, grid.n() + 1)
            } else {
                (0.5 * h, grid.n())
            };
            let (i, w) = locate(p[a], origin, h, count);
            base[a] = i;
            t[a] = w;
        }
        let mut out = 0.0;
        for mask in 0..(1usize << d) {
            let mut idx = base;
            let mut w = 1.0;
            for a in 0..d {
                if (mask >> a) & 1 == 1 {
                    idx[a] += 1;
                    w *= t[a];
                } else {
                    w *= 1.0 - t[a];
                }
            }
            out += w * self.comps[comp][flat(idx, fext)];
        }
        out
    }
}

/// `f o z` for node-collocated fields: sample `f` at the positions `z` takes
/// each node to. Positions may exit the box by at most `2h` (clamped).
pub fn compose_map(f: &MapField, z: &MapField) -> Result<MapField> {
    if f.grid != z.grid {
        return Err(Error::GridMismatch("compose_map".into()));
    }
    let grid = f.grid;
    let nn = grid.num_nodes();
    let mut out = MapField { grid, values: vec![0.0; grid.dim() * nn] };
    let mut err = None;
    for_each(grid.node_ext(), |_, nflat| {
        if err.is_some() {
            return;
        }
        match clamp_point(grid, z.point(nflat)) {
            Ok(p) => {
                let v = f.eval(p);
                for c in 0..grid.dim() {
                    out.values[c * nn + nflat] = v[c];
                }
            }
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// `q o z` for a cell scalar: sample `q` at the image of each cell center.
pub fn compose_scalar(q: &ScalarField, z: &MapField) -> Result<ScalarField> {
    if q.grid != z.grid {
        return Err(Error::GridMismatch("compose_scalar".into()));
    }
    let grid = q.grid;
    let mut out = ScalarField::zeros(grid);
    let mut err = None;
    for_each(grid.cell_ext(), |idx, cflat| {
        if err.is_some() {
            return;
        }
        match clamp_point(grid, z.eval(grid.cell_pos(idx))) {
            Ok(p) => out.values[cflat] = q.eval(p),
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// `v o z` for a MAC velocity: each face sample of the result is `v`
/// interpolated at the image of that face center under `z`.
pub fn compose_velocity(v: &VectorField, z: &MapField) -> Result<VectorField> {
    if v.grid != z.grid {
        return Err(Error::GridMismatch("compose_velocity".into()));
    }
    let grid = v.grid;
    let mut out = VectorField::zeros(grid);
    let mut err = None;
    for c in 0..grid.dim() {
        let fext = grid.face_ext(c);
        for_each(fext, |idx, fflat| {
            if err.is_some() {
                return;
            }
            match clamp_point(grid, z.eval(grid.face_pos(c, idx))) {
                Ok(p) => out.comps[c][fflat] = v.eval_comp(c, p),
                Err(e) => err = Some(e),
            }
        });
    }
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Per-node Newton inversion of a near-identity diffeomorphism: solves
/// `z(y) = x` for every node position `x`.
pub fn invert_map(z: &MapField) -> Result<MapField> {
    let grid = z.grid;
    let d = grid.dim();
    // diffeomorphism guard
    for m in deformation_gradient(z) {
        let dz = det(&m);
        if dz < 0.5 {
            return Err(Error::MapDegenerate { det: dz, guard: 0.5 });
        }
    }
    let nn = grid.num_nodes();
    let mut out = MapField::identity(grid);
    let tol = 1e-10;
    let mut failure = None;
    for_each(grid.node_ext(), |idx, nflat| {
        if failure.is_some() || grid.is_boundary_node(idx) {
            return;
        }
        let x = grid.node_pos(idx);
        let mut y = x;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..50 {
            let (zy, jac) = z.eval_with_jacobian(y);
            let mut r = [0.0f64; 3];
            residual = 0.0;
            for c in 0..d {
                r[c] = zy[c] - x[c];
                residual = residual.max(r[c].abs());
            }
            if residual <= tol {
                converged = true;
                break;
            }
            // solve jac * dy = r
            let dy = solve_small(&jac, &r, d);
            for a in 0..d {
                y[a] = (y[a] - dy[a]).clamp(0.0, 1.0);
            }
        }
        if !converged {
            failure = Some(Error::InversionFailed {
                node: idx[..d].to_vec(),
                residual,
            });
            return;
        }
        for c in 0..d {
            out.values[c * nn + nflat] = y[c];
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Direct solve of a small linear system via the cofactor inverse.
fn solve_small(a: &SmallMat, b: &[f64; 3], d: usize) -> [f64; 3] {
    let da = det(a);
    // A^{-1} = cof(A)^T / det in the convention A cof(A)^T = det I
    let c = crate::smallmat::cof(a);
    let mut x = [0.0f64; 3];
    for i in 0..d {
        for j in 0..d {
            x[i] += c.get(j, i) / da * b[j];
        }
    }
    x
}
