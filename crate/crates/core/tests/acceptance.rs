//! End-to-end acceptance suite: one test per criterion, each printing a
//! single pass line. The heavyweight tau sweep on the default 64 grid is
//! computed once and shared between the criteria that consume it.

use std::sync::OnceLock;
use std::time::Instant;

use polyproj::grid::{for_each, Grid, MapField, ScalarField, VectorField, LP_INF};
use polyproj::nse::{self, NseConfig};
use polyproj::polyconvex::{
    bregman_lower_bound, d4_counterexample, verify_matrix_inequality,
};
use polyproj::projection::{self, InitStrategy, ProjectionOptions};
use polyproj::rng::Stream;

const PI: f64 = std::f64::consts::PI;

fn bump_map(grid: Grid, amp: f64) -> MapField {
    MapField::from_fn(grid, |p| {
        let b = amp * (PI * p[0]).sin().powi(2) * (PI * p[1]).sin().powi(2);
        [
            p[0] + b * (2.0 * PI * p[0]).cos(),
            p[1] - b * (2.0 * PI * p[0]).sin(),
            0.0,
        ]
    })
}

/// Exactly measure-preserving analytic swirl: the time-one flow of the
/// Hamiltonian field of `eps sin^2(pi x) sin^2(pi y)`, integrated by RK4
/// with enough substeps that the integration error is far below the mesh
/// tolerances in play.
fn flow_swirl(grid: Grid, eps: f64, steps: usize) -> MapField {
    let u = |p: [f64; 3]| -> [f64; 2] {
        let sx = (PI * p[0]).sin();
        let sy = (PI * p[1]).sin();
        [
            eps * 2.0 * PI * sx * sx * sy * (PI * p[1]).cos(),
            -eps * 2.0 * PI * sx * (PI * p[0]).cos() * sy * sy,
        ]
    };
    MapField::from_fn(grid, |p| {
        let mut x = [p[0], p[1], 0.0];
        let dt = 1.0 / steps as f64;
        for _ in 0..steps {
            let k1 = u(x);
            let k2 = u([x[0] + 0.5 * dt * k1[0], x[1] + 0.5 * dt * k1[1], 0.0]);
            let k3 = u([x[0] + 0.5 * dt * k2[0], x[1] + 0.5 * dt * k2[1], 0.0]);
            let k4 = u([x[0] + dt * k3[0], x[1] + dt * k3[1], 0.0]);
            x[0] += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            x[1] += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        }
        x
    })
}

fn asym_field(grid: Grid, k: usize) -> VectorField {
    VectorField::from_stream_function(grid, |p| {
        let base = (PI * p[0]).sin().powi(2) * (PI * p[1]).sin().powi(2);
        match k {
            0 => base * (PI * (p[0] + p[1])).cos(),
            1 => base * (2.0 * PI * p[0]).cos(),
            _ => base * (PI * (2.0 * p[0] - p[1])).sin(),
        }
    })
}

fn perturb_interior(map: &mut MapField, amp: f64, stream: &mut Stream) {
    let grid = map.grid;
    let nn = grid.num_nodes();
    for c in 0..grid.dim() {
        for_each(grid.node_ext(), |idx, f| {
            if !grid.is_boundary_node(idx) {
                map.values[c * nn + f] += amp * stream.symmetric(1.0);
            }
        });
    }
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

/// Default-grid runs at tau = 1/32, 1/64, 1/128, shared across criteria.
fn tau_runs() -> &'static [nse::RunResult; 3] {
    static RUNS: OnceLock<[nse::RunResult; 3]> = OnceLock::new();
    RUNS.get_or_init(|| {
        let mk = |k: usize| {
            let cfg = NseConfig { tau: 1.0 / (32 << k) as f64, ..NseConfig::default() };
            nse::run(&cfg, None).expect("default-grid run")
        };
        [mk(0), mk(1), mk(2)]
    })
}

#[test]
fn criterion_01_matrix_inequality_d2() {
    let t0 = Instant::now();
    let report = verify_matrix_inequality(2, 1_000_000, 101).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(report.all_pass, "worst margin {}", report.worst_margin);
    assert!((report.constant - 1.0).abs() < 1e-15);
    assert!(elapsed <= 60.0, "took {elapsed:.1} s");
    println!("criterion 01 (matrix inequality, d = 2, c = 1): pass ({elapsed:.1} s)");
}

#[test]
fn criterion_02_matrix_inequality_d3() {
    let t0 = Instant::now();
    let report = verify_matrix_inequality(3, 1_000_000, 102).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(report.all_pass, "worst margin {}", report.worst_margin);
    assert!((report.constant - (1.0 + 1.5 * (1.0 + 3.0f64.sqrt()))).abs() < 1e-12);
    assert!(elapsed <= 60.0, "took {elapsed:.1} s");
    println!("criterion 02 (matrix inequality, d = 3, c = 5.098...): pass ({elapsed:.1} s)");
}

#[test]
fn criterion_03_d4_counterexample() {
    // frozen closed form at alpha = 2: A = diag(2, 2, 2, 1/8) against I
    let p2 = d4_counterexample(2.0).unwrap();
    assert!((p2.lhs - (-1.5 - 49.0 / 8.0)).abs() < 1e-12, "lhs {}", p2.lhs);
    assert!((p2.quad - (3.0 + (7.0 / 8.0) * (7.0 / 8.0))).abs() < 1e-12);
    let ratios: Vec<f64> = [2.0, 4.0, 8.0, 16.0, 32.0]
        .iter()
        .map(|&alpha| d4_counterexample(alpha).unwrap().ratio)
        .collect();
    for w in ratios.windows(2) {
        assert!(w[1] < w[0], "ratios not strictly decreasing: {ratios:?}");
    }
    assert!(ratios[4] < -10.0, "ratio at alpha = 32 is {}", ratios[4]);
    println!("criterion 03 (d = 4 counterexample diverges): pass");
}

#[test]
fn criterion_04_bregman_bound() {
    for dim in [2usize, 3] {
        let grid = Grid::new(dim, 16).unwrap();
        let mut stream = Stream::new(400 + dim as u64);
        let q = ScalarField::from_fn(grid, |p| {
            0.5 + 0.4 * (3.0 * p[0] + 2.0 * p[1] + p[2]).sin().abs()
        });
        let z0 = MapField::identity(grid);
        for trial in 0..1000 {
            let mut z = z0.clone();
            perturb_interior(&mut z, 0.2 * stream.unit(), &mut stream);
            let report = bregman_lower_bound(&z, &z0, &q).unwrap();
            assert!(report.holds, "dim {dim} trial {trial}: {report:?}");
        }
    }
    println!("criterion 04 (Bregman lower bound, 10^3 trials on 16^2 and 16^3): pass");
}

#[test]
fn criterion_05_gradient_vs_finite_differences() {
    let grid = Grid::new(2, 16).unwrap();
    let nn = grid.num_nodes();
    for instance in 0..20u64 {
        let mut stream = Stream::new(500 + instance);
        let mut s = bump_map(grid, 0.02 * stream.unit());
        perturb_interior(&mut s, 0.02, &mut stream);
        let mut z = MapField::identity(grid);
        perturb_interior(&mut z, 0.03, &mut stream);
        let q = ScalarField::from_fn(grid, |p| 0.3 * (7.0 * p[0] + 3.0 * p[1]).sin());
        let (a, rho) = (0.05 + 0.1 * stream.unit(), 0.8);
        let mut grad = vec![0.0; z.values.len()];
        let v = projection::objective_and_gradient(&z, &s, a, &q, rho, 0.0, &mut grad);
        assert!(v.is_finite());
        let mut dir = vec![0.0; z.values.len()];
        for c in 0..2 {
            for_each(grid.node_ext(), |idx, f| {
                if !grid.is_boundary_node(idx) {
                    dir[c * nn + f] = stream.symmetric(1.0);
                }
            });
        }
        let eps = 1e-6;
        let eval = |t: f64| {
            let mut moved = z.clone();
            for (x, d) in moved.values.iter_mut().zip(&dir) {
                *x += t * d;
            }
            let mut scratch = vec![0.0; moved.values.len()];
            projection::objective_and_gradient(&moved, &s, a, &q, rho, 0.0, &mut scratch)
        };
        let fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
        let an: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let rel = (fd - an).abs() / (1.0 + an.abs());
        assert!(rel <= 1e-6, "instance {instance}: fd {fd} analytic {an} rel {rel}");
    }
    println!("criterion 05 (gradient matches finite differences, 20 instances): pass");
}

#[test]
fn criterion_06_projection_fixed_point() {
    let t0 = Instant::now();
    let grid = Grid::new(2, 32).unwrap();
    let s = flow_swirl(grid, 0.015, 64);
    let res = projection::solve(&s, 0.1, &ProjectionOptions::default()).unwrap();
    let dist = res.z.sub(&s).unwrap().norm_lr(LP_INF).unwrap();
    let h = grid.h();
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(dist <= 1e-4 + h * h, "|Z* - S|_inf = {dist:.3e}");
    assert!(
        res.certificate.q_oscillation <= 1e-4,
        "q oscillation {:.3e}",
        res.certificate.q_oscillation
    );
    assert!(elapsed <= 120.0, "took {elapsed:.1} s");
    println!(
        "criterion 06 (measure-preserving swirl is a fixed point): pass \
         (dist {dist:.2e}, osc {:.2e})",
        res.certificate.q_oscillation
    );
}

#[test]
fn criterion_07_uniqueness_support() {
    let grid = Grid::new(2, 16).unwrap();
    let a = 0.05;
    let s = bump_map(grid, 0.005);
    let base = projection::solve(&s, a, &ProjectionOptions::default()).unwrap();
    assert!(base.certificate.passes, "{:?}", base.certificate);

    let mut sols = vec![base.z.clone()];
    for init in [InitStrategy::Identity, InitStrategy::Data] {
        let opts = ProjectionOptions { init, ..ProjectionOptions::default() };
        sols.push(projection::solve(&s, a, &opts).unwrap().z);
    }
    for seed in [11u64, 12] {
        let mut stream = Stream::new(seed);
        let mut init = MapField::identity(grid);
        perturb_interior(&mut init, 0.002, &mut stream);
        sols.push(
            projection::solve_from(&s, a, &ProjectionOptions::default(), &init)
                .unwrap()
                .z,
        );
    }
    let mut worst: f64 = 0.0;
    for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            worst = worst.max(sols[i].sub(&sols[j]).unwrap().norm_lr(2.0).unwrap());
        }
    }
    assert!(worst <= 1e-6, "multi-start disagreement {worst:.3e}");

    // random feasible competitors: projections of independently perturbed data
    let h = grid.h();
    let mut worst_gap = f64::INFINITY;
    for k in 0..20u64 {
        let mut stream = Stream::new(100 + k);
        let mut sk = bump_map(grid, 0.004 + 0.004 * stream.unit());
        perturb_interior(&mut sk, 0.003, &mut stream);
        let zk = projection::solve(&sk, a, &ProjectionOptions::default()).unwrap().z;
        let gap = projection::envelope_gap(&zk, &base, &s).unwrap();
        worst_gap = worst_gap.min(gap);
    }
    assert!(
        worst_gap >= -1e-2 * h * h,
        "envelope gap {worst_gap:.3e} below the discretization slack"
    );
    println!(
        "criterion 07 (multi-start {worst:.1e}, envelope gap >= {worst_gap:.1e}): pass"
    );
}

#[test]
fn criterion_08_reference_point() {
    let a = 0.05;
    let mut pts = vec![];
    let mut errs = vec![];
    for n in [16usize, 32, 64] {
        let grid = Grid::new(2, n).unwrap();
        // cross-modulated swirl: clean second-order decay already at n = 16,
        // unlike bump_map whose first refinement interval is preasymptotic
        let s = MapField::from_fn(grid, |p| {
            let b = 0.01 * (PI * p[0]).sin().powi(2) * (PI * p[1]).sin().powi(2);
            [
                p[0] + b * (2.0 * PI * p[1]).cos(),
                p[1] - b * (2.0 * PI * p[0]).sin(),
                0.0,
            ]
        });
        let z0 = projection::reference_point(&s, a, 32).unwrap();
        let err = projection::det_error(&z0);
        pts.push(((grid.h()).ln(), err.ln()));
        errs.push(err);
    }
    assert!(errs[2] <= 1e-3, "det error on 64^2 is {:.3e}", errs[2]);
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "not decreasing: {errs:?}");
    let slope = ls_slope(&pts);
    assert!(slope >= 1.7, "refinement order {slope:.2}");
    println!(
        "criterion 08 (reference point det error {:.2e}, order {slope:.2}): pass",
        errs[2]
    );
}

#[test]
fn criterion_09_embedding_constant_scaling() {
    let grid = Grid::new(2, 256).unwrap();
    let mut pts = vec![];
    for a in [1e-3, 1e-2, 1e-1] {
        let k = projection::embedding_constant_probe(grid, a, 4.0).unwrap();
        pts.push((a.ln(), k.ln()));
    }
    let slope = ls_slope(&pts);
    assert!((slope + 0.75).abs() <= 0.15, "K_a slope {slope:.3}");
    println!("criterion 09 (K_a slope {slope:.3} vs -0.75): pass");
}

#[test]
fn criterion_10_energy_dissipation() {
    let run = &tau_runs()[1];
    let mut dissipation_total = 0.0;
    for row in &run.rows {
        assert!(
            row.dissipation_lhs <= row.dissipation_rhs + 1e-6,
            "step {}: {} vs {}",
            row.step,
            row.dissipation_lhs,
            row.dissipation_rhs
        );
        dissipation_total += row.dissipation_lhs - row.l2_energy;
    }
    let final_energy = run.rows.last().unwrap().l2_energy;
    let telescoped = final_energy + dissipation_total;
    assert!(
        telescoped <= 0.5 * run.initial_l2 + 1e-6,
        "telescoped {telescoped} vs {}",
        0.5 * run.initial_l2
    );
    println!("criterion 10 (energy dissipation inequality per step and telescoped): pass");
}

#[test]
fn criterion_11_duhamel_residual() {
    // default run, three test fields
    let cfg = NseConfig::default();
    let mut state = nse::initial_state(&cfg).unwrap();
    let mut vs = vec![state.v.clone()];
    let mut zs = vec![];
    let n_steps = (cfg.t_final / cfg.tau).round() as usize;
    for _ in 0..n_steps {
        let (next, proj, _) = nse::nse_step(&state, &cfg).unwrap();
        vs.push(next.v.clone());
        zs.push(proj.z);
        state = next;
    }
    let grid = Grid::new(2, cfg.n).unwrap();
    for k in 0..3 {
        let f = asym_field(grid, k);
        let gap = nse::duhamel_gap(&vs, &zs, &f, cfg.mu, cfg.tau, cfg.semigroup_substeps)
            .unwrap();
        assert!(gap <= 1e-5, "field {k}: gap {gap:.3e}");
    }

    // refinement: same number of steps on 32, 64, 128
    let mut pts = vec![];
    let mut gaps = vec![];
    for n in [32usize, 64, 128] {
        let cfg = NseConfig { n, tau: 1.0 / 64.0, t_final: 4.0 / 64.0, ..NseConfig::default() };
        let mut state = nse::initial_state(&cfg).unwrap();
        let mut vs = vec![state.v.clone()];
        let mut zs = vec![];
        for _ in 0..4 {
            let (next, proj, _) = nse::nse_step(&state, &cfg).unwrap();
            vs.push(next.v.clone());
            zs.push(proj.z);
            state = next;
        }
        let f = asym_field(Grid::new(2, n).unwrap(), 0);
        let gap = nse::duhamel_gap(&vs, &zs, &f, cfg.mu, cfg.tau, cfg.semigroup_substeps)
            .unwrap();
        pts.push(((1.0 / n as f64).ln(), gap.ln()));
        gaps.push(gap);
    }
    let slope = ls_slope(&pts);
    assert!(slope >= 1.5, "refinement order {slope:.2} (gaps {gaps:?})");
    println!("criterion 11 (Duhamel gap small, refinement order {slope:.2}): pass");
}

#[test]
fn criterion_12_tau_convergence_and_chorin() {
    let t0 = Instant::now();
    let runs = tau_runs();
    let d1 = runs[0]
        .state
        .v
        .add_scaled(&runs[1].state.v, -1.0)
        .norm_lr(2.0)
        .unwrap();
    let d2 = runs[1]
        .state
        .v
        .add_scaled(&runs[2].state.v, -1.0)
        .norm_lr(2.0)
        .unwrap();
    let p = (d1 / d2).log2();
    assert!((0.7..=1.3).contains(&p), "observed order {p:.3}");

    let grid = Grid::new(2, 64).unwrap();
    let h = grid.h();
    let mut cs = vec![];
    for (k, run) in runs.iter().enumerate() {
        let tau = 1.0 / (32 << k) as f64;
        let mut vc = nse::initial_velocity(grid, nse::InitialCondition::VortexPair, 0.01)
            .unwrap();
        for _ in 0..run.rows.len() {
            vc = nse::chorin_reference_step(&vc, 0.05, tau).unwrap();
        }
        let diff = run.state.v.add_scaled(&vc, -1.0).norm_lr(LP_INF).unwrap();
        cs.push(diff / (tau + h * h));
    }
    let cmax = cs.iter().fold(0.0f64, |m, c| m.max(*c));
    let cmin = cs.iter().fold(f64::INFINITY, |m, c| m.min(*c));
    assert!(cmax <= 0.2, "Chorin discrepancy constant {cmax:.3}");
    assert!(cmax / cmin <= 3.0, "constant unstable: {cs:?}");
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed <= 1200.0, "took {elapsed:.0} s");
    println!(
        "criterion 12 (tau order {p:.3}, Chorin constant {cmin:.3}..{cmax:.3}): pass"
    );
}

#[test]
fn criterion_13_lagrangian_flow() {
    let runs = tau_runs();
    let worst = runs[1]
        .rows
        .iter()
        .fold(0.0f64, |m, row| m.max(row.det_err_x_max));
    assert!(worst <= 5e-3, "max |det DX - 1| = {worst:.3e}");
    let d1 = runs[0].state.x.sub(&runs[1].state.x).unwrap().norm_lr(1.0).unwrap();
    let d2 = runs[1].state.x.sub(&runs[2].state.x).unwrap().norm_lr(1.0).unwrap();
    assert!(d2 <= 0.65 * d1, "flow distances do not halve: {d1:.3e} vs {d2:.3e}");
    println!(
        "criterion 13 (flow det error {worst:.2e}, L1 contraction {:.2}): pass",
        d1 / d2
    );
}

#[test]
fn criterion_14_determinism() {
    let dir = std::env::temp_dir().join("polyproj-acceptance-determinism");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = NseConfig {
        n: 32,
        tau: 1.0 / 32.0,
        t_final: 4.0 / 32.0,
        duhamel_every: 2,
        ..NseConfig::default()
    };
    let strip = |path: &std::path::Path| -> String {
        // drop the wallclock column (the one timing artifact in the schema)
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    nse::run(&cfg, Some(&a)).unwrap();
    nse::run(&cfg, Some(&b)).unwrap();
    let sa = strip(&a);
    assert_eq!(sa, strip(&b), "repeated runs disagree");
    assert!(sa.lines().count() == 5, "expected header plus four rows");
    println!("criterion 14 (identical config gives identical CSV): pass");
}
