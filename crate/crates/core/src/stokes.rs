//! The incompressible operator stack: Leray projection, Stokes resolvent by
//! Schur-complement (Uzawa) CG, the Stokes heat semigroup via implicit-Euler
//! substeps, and componentwise Helmholtz solves for node maps.
//!
//! Every system here is symmetric positive (semi)definite on the MAC layout,
//! so all solves are matrix-free conjugate gradients.

use crate::error::{Error, Result};
use crate::grid::{
    divergence, dot_velocity, gradient, laplacian_map, laplacian_velocity_noslip, Grid, MapField,
    ScalarField, VectorField,
};

/// Iteration record of a saddle-point (or plain CG) solve.
#[derive(Debug, Clone, Copy)]
pub struct SaddleSolveStats {
    pub iterations: usize,
    pub final_residual: f64,
    pub tolerance: f64,
}

/// Matrix-free CG over flat slices. `apply` must be SPD; `post` is applied to
/// the iterate and residual each step (used to pin null spaces).
fn cg(
    apply: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    solver: &'static str,
    post: Option<&dyn Fn(&mut [f64])>,
) -> Result<SaddleSolveStats> {
    let m = b.len();
    let mut r = vec![0.0; m];
    let mut ap = vec![0.0; m];
    apply(x, &mut ap);
    for i in 0..m {
        r[i] = b[i] - ap[i];
    }
    if let Some(p) = post {
        p(&mut r);
    }
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = tol * (1.0 + bnorm);
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let mut iterations = 0;
    while rr.sqrt() > target && iterations < max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if let Some(pp) = post {
            pp(x);
            pp(&mut r);
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..m {
            p[i] = r[i] + beta * p[i];
        }
        iterations += 1;
    }
    let final_residual = rr.sqrt();
    if final_residual > target {
        return Err(Error::SolverDiverged {
            solver,
            iters: iterations,
            tol: target,
            residual: final_residual,
        });
    }
    Ok(SaddleSolveStats {
        iterations,
        final_residual,
        tolerance: target,
    })
}

fn subtract_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v {
        *x -= m;
    }
}

/// Solve the cell-centered Neumann Poisson problem `lap(phi) = rhs` (rhs made
/// mean-free), returning the mean-free solution.
pub fn poisson_neumann(rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
    let grid = rhs.grid;
    let mut b = rhs.values.clone();
    subtract_mean(&mut b);
    // CG on -lap (SPD on mean-zero scalars)
    for v in &mut b {
        *v = -*v;
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        let f = ScalarField { grid, values: x.to_vec() };
        let lap = crate::grid::laplacian_scalar_neumann(&f);
        for (o, l) in out.iter_mut().zip(&lap.values) {
            *o = -l;
        }
    };
    let mut x = vec![0.0; b.len()];
    cg(
        &apply,
        &b,
        &mut x,
        tol,
        20 * grid.n() * grid.n(),
        "poisson-neumann",
        Some(&subtract_mean),
    )?;
    Ok(ScalarField { grid, values: x })
}

/// Leray projection: subtract the gradient part of `f`, leaving a discretely
/// divergence-free field with vanishing normal trace. Exact orthogonal
/// projection in the face inner product, idempotent to solver tolerance.
pub fn leray_project(f: &VectorField) -> Result<VectorField> {
    let mut g = f.clone();
    g.zero_boundary_faces();
    let div = divergence(&g);
    let phi = poisson_neumann(&div, 1e-13)?;
    let gp = gradient(&phi);
    Ok(g.add_scaled(&gp, -1.0))
}

fn helmholtz_apply_velocity(grid: Grid, a: f64, x: &[f64], out: &mut [f64]) {
    // unpack flat slice into a VectorField with zero boundary faces
    let mut v = VectorField::zeros(grid);
    let mut off = 0;
    for c in 0..grid.dim() {
        let len = v.comps[c].len();
        v.comps[c].copy_from_slice(&x[off..off + len]);
        off += len;
    }
    v.zero_boundary_faces();
    let lap = laplacian_velocity_noslip(&v);
    let mut o = 0;
    for c in 0..grid.dim() {
        for i in 0..v.comps[c].len() {
            out[o] = v.comps[c][i] - a * lap.comps[c][i];
            o += 1;
        }
    }
}

fn pack(v: &VectorField) -> Vec<f64> {
    let mut out = Vec::new();
    for c in &v.comps {
        out.extend_from_slice(c);
    }
    out
}

fn unpack(grid: Grid, x: &[f64]) -> VectorField {
    let mut v = VectorField::zeros(grid);
    let mut off = 0;
    for c in 0..grid.dim() {
        let len = v.comps[c].len();
        v.comps[c].copy_from_slice(&x[off..off + len]);
        off += len;
    }
    v.zero_boundary_faces();
    v
}

/// Solve `(I - a lap) u = rhs` for a no-slip MAC velocity.
pub(crate) fn helmholtz_velocity(rhs: &VectorField, a: f64, tol: f64) -> Result<VectorField> {
    let grid = rhs.grid;
    let mut b_field = rhs.clone();
    b_field.zero_boundary_faces();
    let b = pack(&b_field);
    let apply = |x: &[f64], out: &mut [f64]| helmholtz_apply_velocity(grid, a, x, out);
    let mut x = b.clone();
    cg(
        &apply,
        &b,
        &mut x,
        tol,
        40 * grid.n() * grid.n(),
        "helmholtz-velocity",
        None,
    )?;
    Ok(unpack(grid, &x))
}

/// Stokes resolvent: solve the saddle system
/// `(I - a lap) u + grad f = -w`, `div u = 0`, no-slip `u`,
/// by CG on the pressure Schur complement with inner Helmholtz solves.
pub fn stokes_resolvent(
    w: &VectorField,
    a: f64,
) -> Result<(VectorField, ScalarField, SaddleSolveStats)> {
    if a <= 0.0 {
        return Err(Error::InvalidArgument(format!("resolvent needs a > 0, got {a}")));
    }
    let grid = w.grid;
    let inner_tol = 1e-13;
    // rhs0 = H^{-1}(-w)
    let mut neg_w = w.clone();
    neg_w.scale(-1.0);
    let u0 = helmholtz_velocity(&neg_w, a, inner_tol)?;
    let b_schur = divergence(&u0);
    // want div u = 0 for u = u0 - H^{-1} grad f: (-div H^{-1} grad) f = -div u0
    let mut b: Vec<f64> = b_schur.values.iter().map(|v| -v).collect();
    subtract_mean(&mut b);

    // Schur operator: p -> -div H^{-1} grad p (SPD on mean-zero scalars)
    let apply = |x: &[f64], out: &mut [f64]| {
        let p = ScalarField { grid, values: x.to_vec() };
        let gp = gradient(&p);
        let y = helmholtz_velocity(&gp, a, inner_tol).expect("inner helmholtz");
        let d = divergence(&y);
        for (o, v) in out.iter_mut().zip(&d.values) {
            *o = -v;
        }
    };
    let mut fvals = vec![0.0; b.len()];
    let stats = cg(
        &apply,
        &b,
        &mut fvals,
        1e-12,
        8 * grid.n() * grid.n(),
        "stokes-schur",
        Some(&subtract_mean),
    )?;
    let f = ScalarField { grid, values: fvals };
    // u = H^{-1}(-w - grad f)
    let rhs = neg_w.add_scaled(&gradient(&f), -1.0);
    let u = helmholtz_velocity(&rhs, a, inner_tol)?;
    Ok((u, f, stats))
}

/// Approximate `e^{-mu tau A}` applied to `w`: project, then take `substeps`
/// implicit-Euler Stokes steps of size `mu tau / substeps`.
pub fn heat_semigroup(
    w: &VectorField,
    mu: f64,
    tau: f64,
    substeps: usize,
) -> Result<VectorField> {
    heat_semigroup_with_dissipation(w, mu, tau, substeps).map(|(v, _)| v)
}

/// Semigroup step that also accumulates the viscous dissipation
/// `mu (tau / m) sum_k |D v_k|^2` of its implicit-Euler substeps; each
/// substep satisfies `|v+|^2 + 2 b |D v+|^2 <= |v|^2` exactly, so the pair
/// `(output, dissipation)` obeys a discrete energy identity.
pub fn heat_semigroup_with_dissipation(
    w: &VectorField,
    mu: f64,
    tau: f64,
    substeps: usize,
) -> Result<(VectorField, f64)> {
    if mu <= 0.0 || tau <= 0.0 || substeps == 0 {
        return Err(Error::InvalidArgument(
            "heat_semigroup needs mu, tau > 0 and substeps >= 1".into(),
        ));
    }
    let b = mu * tau / substeps as f64;
    let mut v = leray_project(w)?;
    let mut dissipation = 0.0;
    for _ in 0..substeps {
        let mut neg_v = v.clone();
        neg_v.scale(-1.0);
        let (next, _, _) = stokes_resolvent(&neg_v, b)?;
        dissipation += b * velocity_dirichlet_energy(&next);
        v = next;
    }
    Ok((v, dissipation))
}

/// Componentwise solve of `(I - a lap) s = rhs` on nodes with Dirichlet data
/// `s = id` on boundary nodes (the identity is discretely harmonic, so the
/// substitution `s = id + e` reduces to a zero-boundary solve).
pub fn helmholtz_solve_map(rhs: &MapField, a: f64) -> Result<MapField> {
    if a <= 0.0 {
        return Err(Error::InvalidArgument(format!("helmholtz needs a > 0, got {a}")));
    }
    let grid = rhs.grid;
    let id = MapField::identity(grid);
    let b_field = rhs.sub(&id)?;
    // zero out boundary entries of the rhs (Dirichlet rows)
    let mut b = b_field.values.clone();
    let nn = grid.num_nodes();
    crate::grid::zero_boundary_nodes(grid, &mut b);
    let apply = |x: &[f64], out: &mut [f64]| {
        let mut e = MapField { grid, values: x.to_vec() };
        crate::grid::zero_boundary_nodes(grid, &mut e.values);
        let lap = laplacian_map(&e);
        for i in 0..out.len() {
            out[i] = e.values[i] - a * lap.values[i];
        }
        crate::grid::zero_boundary_nodes(grid, out);
    };
    let mut x = vec![0.0; b.len()];
    cg(
        &apply,
        &b,
        &mut x,
        1e-12,
        40 * grid.n() * grid.n(),
        "helmholtz-map",
        None,
    )?;
    let _ = nn;
    Ok(id.add_scaled(&MapField { grid, values: x }, 1.0))
}

/// Discrete Dirichlet energy `|Dv|^2 := -<lap v, v>` of a no-slip velocity;
/// the quantity the implicit Stokes steps dissipate exactly.
pub fn velocity_dirichlet_energy(v: &VectorField) -> f64 {
    let lap = laplacian_velocity_noslip(v);
    -dot_velocity(&lap, v)
}
