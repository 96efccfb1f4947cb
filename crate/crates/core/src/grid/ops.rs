//! Second-order difference stencils: deformation gradients (and their exact
//! adjoint), Laplacians for each layout, MAC divergence/gradient, and the
//! face/node transfer pair.

use super::{flat, for_each, Grid, MapField, ScalarField, VectorField};
use crate::smallmat::SmallMat;

/// Deformation gradient `DZ` at every cell center, by averaging the node
/// differences along each cell edge. Exact for affine maps.
pub fn deformation_gradient(z: &MapField) -> Vec<SmallMat> {
    let grid = z.grid;
    let d = grid.dim();
    let h = grid.h();
    let nn = grid.num_nodes();
    let next = grid.node_ext();
    let pairs = 1usize << (d - 1);
    let scale = 1.0 / (pairs as f64 * h);
    let mut out = Vec::with_capacity(grid.num_cells());
    for_each(grid.cell_ext(), |cell, _| {
        let mut m = SmallMat::zeros(d);
        for axis in 0..d {
            // Corners of the cell split into pairs differing only in `axis`.
            for mask in 0..pairs {
                let mut lo = cell;
                let mut bit = 0;
                for a in 0..d {
                    if a == axis {
                        continue;
                    }
                    if (mask >> bit) & 1 == 1 {
                        lo[a] += 1;
                    }
                    bit += 1;
                }
                let mut hi = lo;
                hi[axis] += 1;
                let flo = flat(lo, next);
                let fhi = flat(hi, next);
                for c in 0..d {
                    let diff = z.values[c * nn + fhi] - z.values[c * nn + flo];
                    m.set(c, axis, m.get(c, axis) + diff * scale);
                }
            }
        }
        out.push(m);
    });
    out
}

/// Exact adjoint of [`deformation_gradient`]: given one matrix per cell,
/// accumulates per-node vectors `G` with
/// `sum_cells M_c : D(phi)_c = sum_nodes G(node) . phi(node)`
/// for every nodal perturbation `phi` (no quadrature weight applied).
pub fn adjoint_deformation_gradient(grid: Grid, mats: &[SmallMat]) -> MapField {
    let d = grid.dim();
    let h = grid.h();
    let nn = grid.num_nodes();
    let next = grid.node_ext();
    let pairs = 1usize << (d - 1);
    let scale = 1.0 / (pairs as f64 * h);
    let mut out = MapField { grid, values: vec![0.0; d * nn] };
    for_each(grid.cell_ext(), |cell, cflat| {
        let m = &mats[cflat];
        for axis in 0..d {
            for mask in 0..pairs {
                let mut lo = cell;
                let mut bit = 0;
                for a in 0..d {
                    if a == axis {
                        continue;
                    }
                    if (mask >> bit) & 1 == 1 {
                        lo[a] += 1;
                    }
                    bit += 1;
                }
                let mut hi = lo;
                hi[axis] += 1;
                let flo = flat(lo, next);
                let fhi = flat(hi, next);
                for c in 0..d {
                    let g = m.get(c, axis) * scale;
                    out.values[c * nn + fhi] += g;
                    out.values[c * nn + flo] -= g;
                }
            }
        }
    });
    out
}

/// Seven/five-point Laplacian of a node field with Dirichlet semantics: the
/// output is zero on boundary nodes, interior nodes use whatever values the
/// field carries at the boundary.
pub fn laplacian_map(z: &MapField) -> MapField {
    let grid = z.grid;
    let d = grid.dim();
    let h2 = grid.h() * grid.h();
    let nn = grid.num_nodes();
    let next = grid.node_ext();
    let mut out = MapField { grid, values: vec![0.0; d * nn] };
    for_each(next, |idx, f| {
        if grid.is_boundary_node(idx) {
            return;
        }
        for c in 0..d {
            let center = z.values[c * nn + f];
            let mut acc = 0.0;
            for a in 0..d {
                let mut p = idx;
                p[a] += 1;
                let mut m = idx;
                m[a] -= 1;
                acc += z.values[c * nn + flat(p, next)] + z.values[c * nn + flat(m, next)]
                    - 2.0 * center;
            }
            out.values[c * nn + f] = acc / h2;
        }
    });
    out
}

/// MAC divergence: cell scalar from face fluxes.
pub fn divergence(v: &VectorField) -> ScalarField {
    let grid = v.grid;
    let h = grid.h();
    let mut out = ScalarField::zeros(grid);
    for_each(grid.cell_ext(), |cell, cflat| {
        let mut acc = 0.0;
        for c in 0..grid.dim() {
            let fext = grid.face_ext(c);
            let mut hi = cell;
            hi[c] += 1;
            acc += v.comps[c][flat(hi, fext)] - v.comps[c][flat(cell, fext)];
        }
        out.values[cflat] = acc / h;
    });
    out
}

/// MAC gradient: interior faces from cell differences; boundary-normal faces
/// are zero, which makes `divergence` and `gradient` exact negative adjoints
/// against velocities with vanishing normal trace.
pub fn gradient(p: &ScalarField) -> VectorField {
    let grid = p.grid;
    let h = grid.h();
    let cext = grid.cell_ext();
    let mut out = VectorField::zeros(grid);
    for c in 0..grid.dim() {
        let fext = grid.face_ext(c);
        for_each(fext, |idx, fflat| {
            if grid.is_boundary_face(c, idx) {
                return;
            }
            let mut lo = idx;
            lo[c] -= 1;
            out.comps[c][fflat] =
                (p.values[flat(idx, cext)] - p.values[flat(lo, cext)]) / h;
        });
    }
    out
}

/// Cell-centered Laplacian with homogeneous Neumann boundary (zero flux
/// through boundary faces); equals `divergence(gradient(p))`.
pub fn laplacian_scalar_neumann(p: &ScalarField) -> ScalarField {
    let grid = p.grid;
    let h2 = grid.h() * grid.h();
    let cext = grid.cell_ext();
    let n = grid.n();
    let mut out = ScalarField::zeros(grid);
    for_each(cext, |cell, cflat| {
        let center = p.values[cflat];
        let mut acc = 0.0;
        for a in 0..grid.dim() {
            if cell[a] + 1 < n {
                let mut q = cell;
                q[a] += 1;
                acc += p.values[flat(q, cext)] - center;
            }
            if cell[a] > 0 {
                let mut q = cell;
                q[a] -= 1;
                acc += p.values[flat(q, cext)] - center;
            }
        }
        out.values[cflat] = acc / h2;
    });
    out
}

/// Laplacian of a MAC velocity with no-slip walls: boundary-normal faces are
/// Dirichlet zero (output zero there); tangential neighbors beyond a wall use
/// the ghost reflection `u_ghost = -u`.
pub fn laplacian_velocity_noslip(v: &VectorField) -> VectorField {
    let grid = v.grid;
    let h2 = grid.h() * grid.h();
    let n = grid.n();
    let mut out = VectorField::zeros(grid);
    for c in 0..grid.dim() {
        let fext = grid.face_ext(c);
        for_each(fext, |idx, fflat| {
            if grid.is_boundary_face(c, idx) {
                return;
            }
            let center = v.comps[c][fflat];
            let mut acc = 0.0;
            for a in 0..grid.dim() {
                let last = fext[a] - 1;
                // plus neighbor
                if idx[a] < last {
                    let mut q = idx;
                    q[a] += 1;
                    acc += v.comps[c][flat(q, fext)] - center;
                } else {
                    debug_assert!(a != c);
                    acc += -center - center; // ghost reflection across the wall
                }
                // minus neighbor
                if idx[a] > 0 {
                    let mut q = idx;
                    q[a] -= 1;
                    acc += v.comps[c][flat(q, fext)] - center;
                } else {
                    acc += -center - center;
                }
            }
            let _ = n;
            out.comps[c][fflat] = acc / h2;
        });
    }
    out
}

/// Average face samples to nodes, producing a node-collocated vector field in
/// a `MapField` container. Boundary nodes are set to zero (no-slip trace).
pub fn face_to_node_velocity(v: &VectorField) -> MapField {
    let grid = v.grid;
    let d = grid.dim();
    let nn = grid.num_nodes();
    let next = grid.node_ext();
    let mut out = MapField { grid, values: vec![0.0; d * nn] };
    for_each(next, |idx, nflat| {
        if grid.is_boundary_node(idx) {
            return;
        }
        for c in 0..d {
            let fext = grid.face_ext(c);
            // Node (i1,..) sits between faces of component c whose transverse
            // indices straddle the node in every axis except c.
            let mut acc = 0.0;
            let others: Vec<usize> = (0..d).filter(|&a| a != c).collect();
            let combos = 1usize << others.len();
            for mask in 0..combos {
                let mut fidx = [0usize; 3];
                fidx[c] = idx[c];
                for (b, &a) in others.iter().enumerate() {
                    fidx[a] = idx[a] - 1 + ((mask >> b) & 1);
                }
                acc += v.comps[c][flat(fidx, fext)];
            }
            out.values[c * nn + nflat] = acc / combos as f64;
        }
    });
    out
}

/// Average nodal vector samples back to faces.
pub fn node_to_face_velocity(u: &MapField) -> VectorField {
    let grid = u.grid;
    let d = grid.dim();
    let nn = grid.num_nodes();
    let next = grid.node_ext();
    let mut out = VectorField::zeros(grid);
    for c in 0..d {
        let fext = grid.face_ext(c);
        let others: Vec<usize> = (0..d).filter(|&a| a != c).collect();
        let combos = 1usize << others.len();
        for_each(fext, |idx, fflat| {
            let mut acc = 0.0;
            for mask in 0..combos {
                let mut nidx = [0usize; 3];
                nidx[c] = idx[c];
                for (b, &a) in others.iter().enumerate() {
                    nidx[a] = idx[a] + ((mask >> b) & 1);
                }
                acc += u.values[c * nn + flat(nidx, next)];
            }
            out.comps[c][fflat] = acc / combos as f64;
        });
    }
    out
}
