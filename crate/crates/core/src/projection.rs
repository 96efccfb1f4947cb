//! Projection of a node map `S` onto volume-preserving diffeomorphisms:
//! minimize `1/2 |Z - S|^2 + a/2 |DZ - DS|^2` subject to `det DZ = 1` in every
//! cell and `Z = id` on the boundary.
//!
//! The constraint is enforced by an augmented Lagrangian: an L-BFGS inner
//! solve of the penalized objective, then a first-order multiplier update
//! `q += rho (det DZ - 1)`, with penalty escalation when the constraint
//! violation stalls. The returned multiplier feeds the a posteriori
//! uniqueness certificate.

use crate::error::{Error, Result};
use crate::grid::{
    adjoint_deformation_gradient, compose_map, deformation_gradient, divergence, dot_map,
    invert_map, laplacian_map, laplacian_velocity_noslip, node_to_face_velocity, norm_xa,
    zero_boundary_nodes, Grid, MapField, ScalarField, VectorField,
};
use crate::lbfgs::{self, LbfgsOptions, LbfgsReport};
use crate::polyconvex::{uniqueness_certificate, CertificateReport};
use crate::smallmat::{cof, det, SmallMat};
use crate::stokes::{leray_project, stokes_resolvent};

/// How to start the inner minimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// flow of the reference velocity (the default: a near-feasible warm
    /// start whose residual is already higher order in the data)
    ReferencePoint,
    Identity,
    /// the data `S` itself when admissible, identity otherwise
    Data,
}

#[derive(Debug, Clone, Copy)]
pub struct ProjectionOptions {
    /// initial penalty weight as a multiple of `a`
    pub rho_factor: f64,
    pub max_outer: usize,
    /// target sup-norm of `det DZ - 1`
    pub tol_det: f64,
    /// target sup-norm of the (volume-normalized) inner gradient
    pub tol_opt: f64,
    /// reject maps with any cell determinant at or below this
    pub det_guard: f64,
    pub max_inner: usize,
    pub init: InitStrategy,
    /// RK4 steps of the reference-point flow
    pub flow_steps: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            rho_factor: 10.0,
            max_outer: 60,
            tol_det: 1e-6,
            tol_opt: 1e-8,
            det_guard: 0.1,
            max_inner: 4000,
            init: InitStrategy::ReferencePoint,
            flow_steps: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub z: MapField,
    /// converged augmented-Lagrangian multiplier of `det DZ = 1`
    pub q: ScalarField,
    pub a: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub det_err_max: f64,
    pub grad_norm: f64,
    pub objective: f64,
    pub certificate: CertificateReport,
}

/// Augmented Lagrangian value and Euclidean gradient in the node variables,
/// both scaled by `1 / h^d` so tolerances are mesh-independent. Returns
/// `+inf` (with untouched gradient) when some cell determinant violates the
/// guard.
pub fn objective_and_gradient(
    z: &MapField,
    s: &MapField,
    a: f64,
    q: &ScalarField,
    rho: f64,
    det_guard: f64,
    grad: &mut [f64],
) -> f64 {
    let grid = z.grid;
    let vol = grid.cell_volume();
    let dz = deformation_gradient(z);
    let ds = deformation_gradient(s);
    let mut value = 0.0;
    // cellwise matrices entering the adjoint: a (DZ - DS) + f'(det) cof(DZ)
    let mut duals: Vec<SmallMat> = Vec::with_capacity(dz.len());
    for cell in 0..dz.len() {
        let d = det(&dz[cell]);
        if d <= det_guard {
            return f64::INFINITY;
        }
        let g = d - 1.0;
        let qc = q.values[cell];
        value += qc * g + 0.5 * rho * g * g;
        let diff = dz[cell].sub(&ds[cell]);
        value += 0.5 * a * diff.dot(&diff);
        duals.push(diff.scale(a).add(&cof(&dz[cell]).scale(qc + rho * g)));
    }
    let e = z.sub(s).expect("grids match");
    value += 0.5 * dot_map(&e, &e) / vol;
    let dual_grad = adjoint_deformation_gradient(grid, &duals);
    let nn = grid.num_nodes();
    for c in 0..grid.dim() {
        for i in 0..nn {
            grad[c * nn + i] = e.values[c * nn + i] + dual_grad.values[c * nn + i];
        }
    }
    zero_boundary_nodes(grid, grad);
    value
}

/// Project `s` with gradient weight `a > 0`, choosing the initial map per
/// `opts.init`.
pub fn solve(s: &MapField, a: f64, opts: &ProjectionOptions) -> Result<ProjectionResult> {
    if a <= 0.0 {
        return Err(Error::InvalidArgument(format!("projection needs a > 0, got {a}")));
    }
    let grid = s.grid;
    let admissible = |m: &MapField| {
        deformation_gradient(m).iter().all(|c| det(c) > opts.det_guard)
    };
    let init = match opts.init {
        InitStrategy::Identity => MapField::identity(grid),
        InitStrategy::Data => {
            if admissible(s) { s.clone() } else { MapField::identity(grid) }
        }
        InitStrategy::ReferencePoint => match reference_point(s, a, opts.flow_steps) {
            Ok(z0) if admissible(&z0) => z0,
            _ => MapField::identity(grid),
        },
    };
    solve_from(s, a, opts, &init)
}

/// Project `s` starting the inner minimization from an explicit map (used by
/// the multi-start uniqueness checks).
pub fn solve_from(
    s: &MapField,
    a: f64,
    opts: &ProjectionOptions,
    init: &MapField,
) -> Result<ProjectionResult> {
    if a <= 0.0 {
        return Err(Error::InvalidArgument(format!("projection needs a > 0, got {a}")));
    }
    let grid = s.grid;
    let mut q = ScalarField::zeros(grid);
    let mut rho = opts.rho_factor * a;
    let mut x = init.values.clone();
    let mut prev_violation = f64::INFINITY;
    let mut inner_total = 0usize;
    let mut last_report: Option<LbfgsReport> = None;
    for outer in 0..opts.max_outer {
        let q_ref = &q;
        let mut obj = |vals: &[f64], grad: &mut [f64]| {
            let z = MapField { grid, values: vals.to_vec() };
            objective_and_gradient(&z, s, a, q_ref, rho, opts.det_guard, grad)
        };
        let inner_opts = LbfgsOptions {
            grad_tol: opts.tol_opt,
            max_iters: opts.max_inner,
            ..Default::default()
        };
        let report = lbfgs::minimize(&mut obj, &mut x, &inner_opts)?;
        inner_total += report.iterations;
        let z = MapField { grid, values: x.clone() };
        let dz = deformation_gradient(&z);
        let mut violation = 0.0f64;
        for m in &dz {
            violation = violation.max((det(m) - 1.0).abs());
        }
        // a stalled line search at large rho can report non-convergence with
        // the gradient a hair above tolerance; do not let that block the exit
        let optimal = report.converged || report.grad_norm_inf <= 10.0 * opts.tol_opt;
        if violation <= opts.tol_det && optimal {
            let certificate = uniqueness_certificate(&z, &q, a)?;
            let mut grad = vec![0.0; x.len()];
            let q0 = ScalarField::zeros(grid);
            let objective =
                objective_and_gradient(&z, s, a, &q0, 0.0, opts.det_guard, &mut grad);
            return Ok(ProjectionResult {
                det_err_max: violation,
                grad_norm: report.grad_norm_inf,
                objective,
                z,
                q,
                a,
                outer_iterations: outer + 1,
                inner_iterations: inner_total,
                certificate,
            });
        }
        for (cell, m) in dz.iter().enumerate() {
            q.values[cell] += rho * (det(m) - 1.0);
        }
        if violation > 0.5 * prev_violation {
            rho *= 2.0;
        }
        prev_violation = violation;
        last_report = Some(report);
    }
    let _ = last_report;
    Err(Error::MaxIterations(opts.max_outer))
}

/// Sup norm of `det DZ - 1` over cells.
pub fn det_error(z: &MapField) -> f64 {
    deformation_gradient(z)
        .iter()
        .fold(0.0f64, |acc, m| acc.max((det(m) - 1.0).abs()))
}

/// Optimality residual of a computed projection: with `g = (I - a lap)(Z - S)`
/// on nodes, the conjugated Leray projection `[P(g o Z^{-1})] o Z`, measured
/// in `L^r`. Vanishes (up to discretization transfer error) at a constrained
/// minimizer, because variations along divergence-free flows become exactly
/// the divergence-free test fields after the change of variables `y = Z(x)`.
pub fn residual_f(z: &MapField, s: &MapField, a: f64, r: f64) -> Result<f64> {
    let e = z.sub(s)?;
    let lap = laplacian_map(&e);
    let res = e.add_scaled(&lap, -a);
    let zinv = invert_map(z)?;
    let pulled = compose_map(&res, &zinv)?;
    let v = node_to_face_velocity(&pulled);
    let pv = leray_project(&v)?;
    let back = crate::grid::compose_velocity(&pv, z)?;
    back.norm_lr(r)
}

/// Sup norm over interior cells of `grad q - DZ^T (I - a lap)(Z - S)`: at a
/// converged pair the multiplier gradient is recovered from the critical
/// equation (with `det DZ = 1`, the cofactor transposes into `DZ^T`). The
/// multiplier sign follows this crate's Lagrangian, `+ integral q (det - 1)`.
pub fn pressure_recovery_residual(
    z: &MapField,
    s: &MapField,
    q: &ScalarField,
    a: f64,
) -> Result<f64> {
    let grid = z.grid;
    if s.grid != grid || q.grid != grid {
        return Err(Error::GridMismatch("pressure recovery fields".into()));
    }
    let h = grid.h();
    let dim = grid.dim();
    let e = z.sub(s)?;
    let lap = laplacian_map(&e);
    let g_nodes = e.add_scaled(&lap, -a);
    let dz = deformation_gradient(z);
    let cell_ext = grid.cell_ext();
    let node_ext = grid.node_ext();
    let nn = grid.num_nodes();
    let mut worst: f64 = 0.0;
    crate::grid::for_each(cell_ext, |idx, flat| {
        // skip cells touching the boundary: one-sided q differences there
        for axis in 0..dim {
            if idx[axis] == 0 || idx[axis] + 1 >= cell_ext[axis] {
                return;
            }
        }
        // cell average of the node field g
        let mut g = [0.0f64; 3];
        for corner in 0..(1usize << dim) {
            let mut nidx = idx;
            for axis in 0..dim {
                nidx[axis] += (corner >> axis) & 1;
            }
            let nf = crate::grid::flat(nidx, node_ext);
            for c in 0..dim {
                g[c] += g_nodes.values[c * nn + nf];
            }
        }
        for gc in g.iter_mut().take(dim) {
            *gc /= (1usize << dim) as f64;
        }
        for axis in 0..dim {
            let mut up = idx;
            up[axis] += 1;
            let mut dn = idx;
            dn[axis] -= 1;
            let dq = (q.values[crate::grid::flat(up, cell_ext)]
                - q.values[crate::grid::flat(dn, cell_ext)])
                / (2.0 * h);
            let mut dztg = 0.0;
            for c in 0..dim {
                dztg += dz[flat].get(c, axis) * g[c];
            }
            worst = worst.max((dq - dztg).abs());
        }
    });
    Ok(worst)
}

/// Divergence-free reference velocity of the projection problem:
/// `u` solving `(I - a lap) u + grad f = (I - a lap)(S - id)`, `div u = 0`.
pub fn reference_velocity(s: &MapField, a: f64) -> Result<VectorField> {
    let grid = s.grid;
    let e_nodes = s.sub(&MapField::identity(grid))?;
    let mut e = node_to_face_velocity(&e_nodes);
    e.zero_boundary_faces();
    let lap = laplacian_velocity_noslip(&e);
    // w = -(I - a lap)(S - id); the resolvent solves (I - a lap)u + grad f = -w
    let mut w = e.add_scaled(&lap, -a);
    w.scale(-1.0);
    let (u, _f, _stats) = stokes_resolvent(&w, a)?;
    Ok(u)
}

/// First-order reference point for the projection: the time-1 flow of the
/// reference velocity, integrated with RK4 from the identity. Exactly
/// volume-preserving in the continuum; discretely up to `O(h^2)` and the
/// integrator error.
pub fn reference_point(s: &MapField, a: f64, flow_steps: usize) -> Result<MapField> {
    if flow_steps == 0 {
        return Err(Error::InvalidArgument("flow needs at least one step".into()));
    }
    let grid = s.grid;
    let u = reference_velocity(s, a)?;
    let dim = grid.dim();
    let dt = 1.0 / flow_steps as f64;
    let eval = |p: [f64; 3]| -> [f64; 3] {
        let mut v = [0.0; 3];
        for c in 0..dim {
            v[c] = u.eval_comp(c, p);
        }
        v
    };
    let mut z = MapField::identity(grid);
    for _ in 0..flow_steps {
        let mut next = z.clone();
        let nn = grid.num_nodes();
        crate::grid::for_each(grid.node_ext(), |idx, node| {
            if grid.is_boundary_node(idx) {
                return;
            }
            let p = z.point(node);
            let k1 = eval(p);
            let k2 = eval(step(p, &k1, 0.5 * dt));
            let k3 = eval(step(p, &k2, 0.5 * dt));
            let k4 = eval(step(p, &k3, dt));
            for c in 0..dim {
                next.values[c * nn + node] =
                    p[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        });
        z = next;
    }
    Ok(z)
}

fn step(p: [f64; 3], k: &[f64; 3], dt: f64) -> [f64; 3] {
    [p[0] + dt * k[0], p[1] + dt * k[1], p[2] + dt * k[2]]
}

#[derive(Debug, Clone, Copy)]
pub struct SmallnessReport {
    /// `|(I - a lap)(S - id)|` in `L^r`
    pub delta: f64,
    /// `|(I - a lap)(S - id - u*)|` in `L^r`, with `u*` the reference velocity
    pub delta_prime: f64,
    /// probe estimate of the constant `K_a` bounding `|Df|_inf` by `|f|_{X_a}`
    pub k_a_estimate: f64,
}

/// Diagnostic smallness quantities for a proposed `S`. The constant `K_a` is
/// probed with compactly supported bumps across dyadic length scales; the
/// maximizing scale sits near `sqrt(a)`, so the probe needs `h` well below
/// that.
pub fn smallness_report(s: &MapField, a: f64, r: f64) -> Result<SmallnessReport> {
    let grid = s.grid;
    let e = s.sub(&MapField::identity(grid))?;
    let weighted = |f: &MapField| -> Result<f64> {
        let lap = laplacian_map(f);
        f.add_scaled(&lap, -a).norm_lr(r)
    };
    let delta = weighted(&e)?;
    let u = reference_velocity(s, a)?;
    let u_nodes = crate::grid::face_to_node_velocity(&u);
    let delta_prime = weighted(&e.sub(&u_nodes)?)?;
    let k_a_estimate = embedding_constant_probe(grid, a, r)?;
    Ok(SmallnessReport { delta, delta_prime, k_a_estimate })
}

/// Probe `sup_f |Df|_inf / |f|_{X_a}` over smooth bumps of varying width;
/// scales like `a^{-(d+r)/(2r)}` when the grid resolves the scale `sqrt(a)`.
pub fn embedding_constant_probe(grid: Grid, a: f64, r: f64) -> Result<f64> {
    let h = grid.h();
    let nn = grid.num_nodes();
    let mut best: f64 = 0.0;
    let mut ell = 4.0 * h;
    while ell <= 0.45 {
        // built directly: this is a displacement-type field, so the boundary
        // must hold zero, not the identity that `MapField::from_fn` pins
        let mut f = MapField { grid, values: vec![0.0; grid.dim() * nn] };
        let ext0 = grid.node_ext();
        crate::grid::for_each(ext0, |idx, flat| {
            let mut s2 = 0.0;
            for &i in idx.iter().take(grid.dim()) {
                let t = (i as f64 * h - 0.5) / ell;
                s2 += t * t;
            }
            if s2 < 1.0 {
                f.values[flat] = (1.0 - 1.0 / (1.0 - s2)).exp();
            }
        });
        // sup of the discrete gradient by one-sided differences on nodes
        let ext = grid.node_ext();
        let mut sup: f64 = 0.0;
        crate::grid::for_each(ext, |idx, flat| {
            for axis in 0..grid.dim() {
                if idx[axis] + 1 < ext[axis] {
                    let mut up = idx;
                    up[axis] += 1;
                    let g = (f.values[crate::grid::flat(up, ext)] - f.values[flat]) / h;
                    sup = sup.max(g.abs());
                }
            }
        });
        let _ = nn;
        let xa = norm_xa(&f, a, r)?;
        if xa > 0.0 {
            best = best.max(sup / xa);
        }
        ell *= 2.0f64.sqrt();
    }
    if best == 0.0 {
        return Err(Error::InvalidArgument(
            "grid too coarse for the embedding probe".into(),
        ));
    }
    Ok(best)
}

/// Shifted-multiplier Lagrangian used by the strong-convexity (envelope)
/// inequality: `1/2 |z - s|^2 + a/2 |Dz - Ds|^2 + sum q_bar (|det Dz| - 1)`
/// with `q_bar = q - min(q) >= 0`.
pub fn shifted_lagrangian(z: &MapField, s: &MapField, a: f64, q_bar: &ScalarField) -> Result<f64> {
    let grid = z.grid;
    let vol = grid.cell_volume();
    let dz = deformation_gradient(z);
    let ds = deformation_gradient(s);
    let mut value = 0.0;
    for cell in 0..dz.len() {
        let diff = dz[cell].sub(&ds[cell]);
        value += vol * 0.5 * a * diff.dot(&diff);
        value += vol * q_bar.values[cell] * (det(&dz[cell]).abs() - 1.0);
    }
    let e = z.sub(s)?;
    value += 0.5 * dot_map(&e, &e);
    Ok(value)
}

/// Envelope gap `L(z, q_bar) - L(z*, q_bar) - 1/2 |z - z*|^2` for a trial map
/// `z`; nonnegative (up to discretization tolerance) when the certificate of
/// `result` passes.
pub fn envelope_gap(trial: &MapField, result: &ProjectionResult, s: &MapField) -> Result<f64> {
    let qmin = result
        .q
        .values
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(*v));
    let mut q_bar = result.q.clone();
    for v in &mut q_bar.values {
        *v -= qmin;
    }
    let l_trial = shifted_lagrangian(trial, s, result.a, &q_bar)?;
    let l_star = shifted_lagrangian(&result.z, s, result.a, &q_bar)?;
    let d = trial.sub(&result.z)?;
    Ok(l_trial - l_star - 0.5 * dot_map(&d, &d))
}

/// Divergence sup-norm of the velocity whose flow generated a map; used as a
/// sanity diagnostic in examples.
pub fn divergence_of(v: &VectorField) -> f64 {
    divergence(v)
        .values
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Hessian-free check helper: central finite-difference directional
/// derivative of the augmented objective, exposed for tests.
#[cfg(test)]
fn fd_directional(
    z: &MapField,
    s: &MapField,
    a: f64,
    q: &ScalarField,
    rho: f64,
    dir: &[f64],
    step: f64,
) -> f64 {
    let grid = z.grid;
    let mut grad = vec![0.0; z.values.len()];
    let mut plus = z.values.clone();
    let mut minus = z.values.clone();
    for i in 0..plus.len() {
        plus[i] += step * dir[i];
        minus[i] -= step * dir[i];
    }
    let vp = objective_and_gradient(
        &MapField { grid, values: plus }, s, a, q, rho, 0.0, &mut grad);
    let vm = objective_and_gradient(
        &MapField { grid, values: minus }, s, a, q, rho, 0.0, &mut grad);
    (vp - vm) / (2.0 * step)
}

#[cfg(test)]
fn bump_map(grid: Grid, amp: f64) -> MapField {
    let pi = std::f64::consts::PI;
    MapField::from_fn(grid, |p| {
        let sx = (pi * p[0]).sin();
        let sy = (pi * p[1]).sin();
        [
            p[0] + amp * sx * sx * sy * sy,
            p[1] - amp * sx * sy * (2.0 * pi * p[0]).cos(),
            p[2],
        ]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LP_INF;
    use crate::rng::Stream;

    #[test]
    fn gradient_matches_finite_differences() {
        let grid = Grid::new(2, 6).unwrap();
        let s = bump_map(grid, 0.03);
        let z = bump_map(grid, 0.05);
        let q = ScalarField::from_fn(grid, |p| 0.3 * (7.0 * p[0] + 3.0 * p[1]).sin());
        let (a, rho) = (0.07, 0.4);
        let mut grad = vec![0.0; z.values.len()];
        let v = objective_and_gradient(&z, &s, a, &q, rho, 0.0, &mut grad);
        assert!(v.is_finite());
        let mut stream = Stream::new(11);
        let nn = grid.num_nodes();
        let mut dir = vec![0.0; z.values.len()];
        for c in 0..2 {
            crate::grid::for_each(grid.node_ext(), |idx, f| {
                if !grid.is_boundary_node(idx) {
                    dir[c * nn + f] = stream.symmetric(1.0);
                }
            });
        }
        let fd = fd_directional(&z, &s, a, &q, rho, &dir, 1e-6);
        let an: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        assert!(
            (fd - an).abs() < 1e-6 * (1.0 + an.abs()),
            "fd {fd} analytic {an}"
        );
    }

    #[test]
    fn guard_returns_infinity() {
        let grid = Grid::new(2, 4).unwrap();
        // fold the map so a cell determinant collapses
        let z = MapField::from_fn(grid, |p| {
            let c = (2.0 * p[0] - 1.0).abs(); // non-injective tent profile
            [0.5 * c + 0.25 * p[0], p[1], 0.0]
        });
        let s = MapField::identity(grid);
        let q = ScalarField::zeros(grid);
        let mut grad = vec![0.0; z.values.len()];
        let v = objective_and_gradient(&z, &s, 0.1, &q, 1.0, 0.1, &mut grad);
        assert!(v.is_infinite());
    }

    #[test]
    fn identity_is_a_fixed_point() {
        let grid = Grid::new(2, 8).unwrap();
        let s = MapField::identity(grid);
        let r = solve(&s, 0.05, &ProjectionOptions::default()).unwrap();
        let diff = r.z.sub(&s).unwrap();
        assert!(diff.norm_lr(LP_INF).unwrap() < 1e-8, "{}", diff.norm_lr(LP_INF).unwrap());
        assert!(r.det_err_max < 1e-6);
        assert!(r.certificate.passes);
    }

    #[test]
    fn projection_of_compressible_bump_satisfies_constraint() {
        let grid = Grid::new(2, 12).unwrap();
        // pure dilation-type displacement: far from volume preserving
        let pi = std::f64::consts::PI;
        let s = MapField::from_fn(grid, |p| {
            let b = 0.04 * (pi * p[0]).sin() * (pi * p[1]).sin();
            [p[0] + b, p[1] + b, 0.0]
        });
        let a = 0.05;
        let r = solve(&s, a, &ProjectionOptions::default()).unwrap();
        assert!(r.det_err_max <= 1e-6, "det err {}", r.det_err_max);
        assert!(r.z.boundary_identity_error() < 1e-14);
        // the projection must beat other admissible candidates
        let id = MapField::identity(grid);
        let mut grad = vec![0.0; id.values.len()];
        let q0 = ScalarField::zeros(grid);
        let j_id = objective_and_gradient(&id, &s, a, &q0, 0.0, 0.0, &mut grad);
        assert!(r.objective <= j_id + 1e-10, "{} vs {}", r.objective, j_id);
    }

    #[test]
    fn certificate_passes_for_small_data() {
        let grid = Grid::new(2, 12).unwrap();
        let s = bump_map(grid, 0.005);
        let r = solve(&s, 0.05, &ProjectionOptions::default()).unwrap();
        assert!(r.certificate.passes, "{:?}", r.certificate);
        assert!(r.certificate.sigma_lower > 0.8);
    }

    #[test]
    fn envelope_inequality_on_random_trials() {
        let grid = Grid::new(2, 8).unwrap();
        let s = bump_map(grid, 0.005);
        let res = solve(&s, 0.05, &ProjectionOptions::default()).unwrap();
        assert!(res.certificate.passes);
        let mut stream = Stream::new(4);
        let nn = grid.num_nodes();
        for _ in 0..5 {
            let mut trial = res.z.clone();
            crate::grid::for_each(grid.node_ext(), |idx, f| {
                if !grid.is_boundary_node(idx) {
                    for c in 0..2 {
                        trial.values[c * nn + f] += 0.02 * stream.symmetric(1.0);
                    }
                }
            });
            let gap = envelope_gap(&trial, &res, &s).unwrap();
            assert!(gap >= -1e-8, "gap {gap}");
        }
    }

    #[test]
    fn residual_small_at_minimizer() {
        let grid = Grid::new(2, 16).unwrap();
        let s = bump_map(grid, 0.02);
        let a = 0.05;
        let res = solve(&s, a, &ProjectionOptions::default()).unwrap();
        let r_min = residual_f(&res.z, &s, a, 4.0).unwrap();
        let r_id = residual_f(&MapField::identity(grid), &s, a, 4.0).unwrap();
        // the floor on r_min is the transfer error between the cellwise
        // optimality system and the face-based projection, so only a clear
        // drop relative to the identity candidate is expected
        assert!(r_min < 0.3 * r_id, "residual {r_min} vs identity {r_id}");
    }

    #[test]
    fn reference_point_near_projection_for_small_data() {
        let grid = Grid::new(2, 16).unwrap();
        let amp = 0.01;
        let s = bump_map(grid, amp);
        let a = 0.05;
        let z0 = reference_point(&s, a, 16).unwrap();
        assert!(det_error(&z0) < 0.05, "det err {}", det_error(&z0));
        let res = solve(&s, a, &ProjectionOptions::default()).unwrap();
        let dist = z0.sub(&res.z).unwrap().norm_lr(2.0).unwrap();
        let scale = s.sub(&MapField::identity(grid)).unwrap().norm_lr(2.0).unwrap();
        // first-order reference point: distance is higher order in the data
        assert!(dist < 0.5 * scale, "dist {dist} scale {scale}");
    }

    #[test]
    fn smallness_report_scales() {
        let grid = Grid::new(2, 16).unwrap();
        let s1 = bump_map(grid, 0.01);
        let s2 = bump_map(grid, 0.02);
        let a = 0.05;
        let r1 = smallness_report(&s1, a, 4.0).unwrap();
        let r2 = smallness_report(&s2, a, 4.0).unwrap();
        assert!(r1.delta > 0.0 && r1.k_a_estimate > 0.0);
        let ratio = r2.delta / r1.delta;
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
        assert!((r2.k_a_estimate - r1.k_a_estimate).abs() < 1e-12);
        // delta' is controlled by delta (here the data has a large gradient
        // part, so the reference velocity removes a chunk of it)
        assert!(r1.delta_prime <= 5.0 * r1.delta, "{r1:?}");
    }

    #[test]
    fn pressure_recovery_at_convergence() {
        let grid = Grid::new(2, 12).unwrap();
        let s = bump_map(grid, 0.02);
        let a = 0.05;
        let res = solve(&s, a, &ProjectionOptions::default()).unwrap();
        let rec = pressure_recovery_residual(&res.z, &s, &res.q, a).unwrap();
        // residual is bounded by optimizer tolerance plus O(h^2) consistency
        let h = 1.0 / 12.0;
        assert!(rec < h * h, "recovery residual {rec}");
    }

    #[test]
    fn multi_start_agreement() {
        let grid = Grid::new(2, 8).unwrap();
        let s = bump_map(grid, 0.006);
        let a = 0.05;
        let base = solve(&s, a, &ProjectionOptions::default()).unwrap();
        assert!(base.certificate.passes);
        let id_start = solve_from(&s, a, &ProjectionOptions::default(), &MapField::identity(grid))
            .unwrap();
        let d = base.z.sub(&id_start.z).unwrap().norm_lr(2.0).unwrap();
        assert!(d < 1e-6, "solutions differ by {d}");
    }

    #[test]
    fn rejects_nonpositive_a() {
        let grid = Grid::new(2, 4).unwrap();
        let s = MapField::identity(grid);
        assert!(solve(&s, 0.0, &ProjectionOptions::default()).is_err());
        assert!(solve(&s, -1.0, &ProjectionOptions::default()).is_err());
    }
}
