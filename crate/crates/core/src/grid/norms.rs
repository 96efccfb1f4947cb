//! L^r norms by midpoint quadrature and the weighted second-order norm
//! `|f|_{X_a} = |f|_{L^r} + a |D^2 f|_{L^r}`.

use super::{flat, for_each, MapField, ScalarField, VectorField};
use crate::error::{Error, Result};

/// Sentinel exponent for the max norm.
pub const LP_INF: f64 = f64::INFINITY;

fn reduce(values: impl Iterator<Item = f64>, r: f64, vol: f64) -> f64 {
    if r.is_infinite() {
        values.fold(0.0_f64, |m, v| m.max(v.abs()))
    } else {
        let s: f64 = values.map(|v| v.abs().powf(r)).sum();
        (s * vol).powf(1.0 / r)
    }
}

fn check_r(r: f64) -> Result<()> {
    if r < 1.0 {
        return Err(Error::InvalidArgument(format!("L^r norm needs r >= 1, got {r}")));
    }
    Ok(())
}

impl ScalarField {
    /// Midpoint-rule `L^r` norm; `r = LP_INF` gives the max norm.
    pub fn norm_lr(&self, r: f64) -> Result<f64> {
        check_r(r)?;
        Ok(reduce(self.values.iter().copied(), r, self.grid.cell_volume()))
    }
}

impl MapField {
    /// Midpoint-rule `L^r` norm of the pointwise Euclidean magnitude,
    /// sampled at cell centers by averaging the corner nodes.
    pub fn norm_lr(&self, r: f64) -> Result<f64> {
        check_r(r)?;
        let grid = self.grid;
        let mags = cell_magnitudes(self);
        Ok(reduce(mags.into_iter(), r, grid.cell_volume()))
    }

    /// `|f|_{L^r} + a |D^2 f|_{L^r}` with the full second-difference Hessian
    /// stencil over interior nodes.
    pub fn norm_xa(&self, a: f64, r: f64) -> Result<f64> {
        norm_xa(self, a, r)
    }
}

fn cell_magnitudes(z: &MapField) -> Vec<f64> {
    let grid = z.grid;
    let d = grid.dim();
    let nn = grid.num_nodes();
    let next = grid.node_ext();
    let corners = 1usize << d;
    let mut out = Vec::with_capacity(grid.num_cells());
    for_each(grid.cell_ext(), |cell, _| {
        let mut avg = [0.0f64; 3];
        for mask in 0..corners {
            let mut idx = cell;
            for a in 0..d {
                if (mask >> a) & 1 == 1 {
                    idx[a] += 1;
                }
            }
            let f = flat(idx, next);
            for c in 0..d {
                avg[c] += z.values[c * nn + f];
            }
        }
        let mut m = 0.0;
        for c in 0..d {
            let v = avg[c] / corners as f64;
            m += v * v;
        }
        out.push(m.sqrt());
    });
    out
}

impl VectorField {
    /// Midpoint-rule `L^r` norm; components averaged to cell centers first.
    pub fn norm_lr(&self, r: f64) -> Result<f64> {
        check_r(r)?;
        let grid = self.grid;
        let d = grid.dim();
        let mut mags = Vec::with_capacity(grid.num_cells());
        for_each(grid.cell_ext(), |cell, _| {
            let mut m = 0.0;
            for c in 0..d {
                let fext = grid.face_ext(c);
                let mut hi = cell;
                hi[c] += 1;
                let v = 0.5 * (self.comps[c][flat(cell, fext)] + self.comps[c][flat(hi, fext)]);
                m += v * v;
            }
            mags.push(m.sqrt());
        });
        Ok(reduce(mags.into_iter(), r, grid.cell_volume()))
    }
}

/// `X_a` norm of a node-collocated displacement field.
pub fn norm_xa(z: &MapField, a: f64, r: f64) -> Result<f64> {
    check_r(r)?;
    if a <= 0.0 {
        return Err(Error::InvalidArgument(format!("X_a norm needs a > 0, got {a}")));
    }
    let lr = z.norm_lr(r)?;
    let grid = z.grid;
    let d = grid.dim();
    let h = grid.h();
    let nn = grid.num_nodes();
    let next = grid.node_ext();
    let n = grid.n();
    let mut hess_mags = Vec::with_capacity(nn);
    for_each(next, |idx, f| {
        // full Hessian stencil needs one interior ring
        if (0..d).any(|axis| idx[axis] == 0 || idx[axis] == n) {
            hess_mags.push(0.0);
            return;
        }
        let mut frob2 = 0.0;
        for c in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let val = if i == j {
                        let mut p = idx;
                        p[i] += 1;
                        let mut m = idx;
                        m[i] -= 1;
                        (z.values[c * nn + flat(p, next)] - 2.0 * z.values[c * nn + f]
                            + z.values[c * nn + flat(m, next)])
                            / (h * h)
                    } else {
                        let mut pp = idx;
                        pp[i] += 1;
                        pp[j] += 1;
                        let mut pm = idx;
                        pm[i] += 1;
                        pm[j] -= 1;
                        let mut mp = idx;
                        mp[i] -= 1;
                        mp[j] += 1;
                        let mut mm = idx;
                        mm[i] -= 1;
                        mm[j] -= 1;
                        (z.values[c * nn + flat(pp, next)] - z.values[c * nn + flat(pm, next)]
                            - z.values[c * nn + flat(mp, next)]
                            + z.values[c * nn + flat(mm, next)])
                            / (4.0 * h * h)
                    };
                    frob2 += val * val;
                }
            }
        }
        hess_mags.push(frob2.sqrt());
    });
    let d2 = reduce(hess_mags.into_iter(), r, grid.cell_volume());
    Ok(lr + a * d2)
}
