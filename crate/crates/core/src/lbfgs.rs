//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The objective is allowed to return `+inf` (the projection solver uses this
//! to reject maps whose Jacobian determinant leaves the admissible range);
//! the line search treats such points as failed sufficient-decrease trials
//! and backtracks.

use crate::error::{Error, Result};

/// Objective callback: fills `grad` and returns the value at `x`.
pub trait Objective {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Objective for F {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self(x, grad)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// stop when the gradient sup-norm drops below this
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iters: 500,
            grad_tol: 1e-9,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LbfgsReport {
    pub iterations: usize,
    pub value: f64,
    pub grad_norm_inf: f64,
    pub converged: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: returns the quasi-Newton direction -H g.
fn direction(pairs: &[Pair], g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; pairs.len()];
    for (i, p) in pairs.iter().enumerate().rev() {
        alpha[i] = p.rho * dot(&p.s, &q);
        for (qv, yv) in q.iter_mut().zip(&p.y) {
            *qv -= alpha[i] * yv;
        }
    }
    if let Some(last) = pairs.last() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        for qv in &mut q {
            *qv *= gamma;
        }
    }
    for (i, p) in pairs.iter().enumerate() {
        let beta = p.rho * dot(&p.y, &q);
        for (qv, sv) in q.iter_mut().zip(&p.s) {
            *qv += (alpha[i] - beta) * sv;
        }
    }
    for qv in &mut q {
        *qv = -*qv;
    }
    q
}

struct LineSearchResult {
    step: f64,
    value: f64,
    grad: Vec<f64>,
}

/// Strong-Wolfe line search (bracket + zoom). `phi0`, `dphi0` are the value
/// and directional derivative at step 0; `dphi0` must be negative.
fn strong_wolfe(
    obj: &mut dyn Objective,
    x: &[f64],
    d: &[f64],
    phi0: f64,
    dphi0: f64,
    c1: f64,
    c2: f64,
) -> Option<LineSearchResult> {
    let n = x.len();
    let mut xt = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut eval = |t: f64, grad: &mut Vec<f64>| -> (f64, f64) {
        for i in 0..n {
            xt[i] = x[i] + t * d[i];
        }
        let v = obj.eval(&xt, grad);
        let dv = if v.is_finite() { dot(grad, d) } else { f64::INFINITY };
        (v, dv)
    };

    let mut t_prev = 0.0;
    let mut phi_prev = phi0;
    let mut t = 1.0;
    let mut lo_hi: Option<(f64, f64, f64, f64)> = None; // (t_lo, phi_lo, t_hi, phi_hi)
    for _ in 0..30 {
        let (phi, dphi) = eval(t, &mut grad);
        if !phi.is_finite() || phi > phi0 + c1 * t * dphi0 || (t_prev > 0.0 && phi >= phi_prev) {
            lo_hi = Some((t_prev, phi_prev, t, phi));
            break;
        }
        if dphi.abs() <= -c2 * dphi0 {
            return Some(LineSearchResult { step: t, value: phi, grad });
        }
        if dphi >= 0.0 {
            lo_hi = Some((t, phi, t_prev, phi_prev));
            break;
        }
        t_prev = t;
        phi_prev = phi;
        t *= 2.0;
    }
    let (mut t_lo, mut phi_lo, mut t_hi, mut phi_hi) = lo_hi?;
    for _ in 0..50 {
        let t_mid = 0.5 * (t_lo + t_hi);
        let (phi, dphi) = eval(t_mid, &mut grad);
        if !phi.is_finite() || phi > phi0 + c1 * t_mid * dphi0 || phi >= phi_lo {
            t_hi = t_mid;
            phi_hi = phi;
        } else {
            if dphi.abs() <= -c2 * dphi0 {
                return Some(LineSearchResult { step: t_mid, value: phi, grad });
            }
            if dphi * (t_hi - t_lo) >= 0.0 {
                t_hi = t_lo;
                phi_hi = phi_lo;
            }
            t_lo = t_mid;
            phi_lo = phi;
        }
        if (t_hi - t_lo).abs() < 1e-14 * (1.0 + t_lo.abs()) {
            break;
        }
    }
    let _ = phi_hi;
    // accept the best sufficient-decrease point even without curvature
    if phi_lo < phi0 && t_lo > 0.0 {
        let (phi, _) = eval(t_lo, &mut grad);
        if phi.is_finite() {
            return Some(LineSearchResult { step: t_lo, value: phi, grad });
        }
    }
    None
}

/// Minimize `obj` starting from `x` (updated in place).
pub fn minimize(
    obj: &mut dyn Objective,
    x: &mut [f64],
    opts: &LbfgsOptions,
) -> Result<LbfgsReport> {
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut value = obj.eval(x, &mut grad);
    if !value.is_finite() {
        return Err(Error::InvalidArgument(
            "lbfgs started at a point with non-finite objective".into(),
        ));
    }
    let mut pairs: Vec<Pair> = Vec::new();
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let gnorm = inf_norm(&grad);
        if gnorm <= opts.grad_tol {
            return Ok(LbfgsReport {
                iterations,
                value,
                grad_norm_inf: gnorm,
                converged: true,
            });
        }
        let mut d = direction(&pairs, &grad);
        let mut dphi0 = dot(&d, &grad);
        if dphi0 >= 0.0 {
            // stale curvature pairs; restart with steepest descent
            pairs.clear();
            d = grad.iter().map(|g| -g).collect();
            dphi0 = dot(&d, &grad);
        }
        let ls = match strong_wolfe(obj, x, &d, value, dphi0, opts.c1, opts.c2) {
            Some(r) => r,
            None => {
                if pairs.is_empty() {
                    return Ok(LbfgsReport {
                        iterations,
                        value,
                        grad_norm_inf: gnorm,
                        converged: false,
                    });
                }
                pairs.clear();
                continue;
            }
        };
        let mut s = vec![0.0; n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            s[i] = ls.step * d[i];
            x[i] += s[i];
            y[i] = ls.grad[i] - grad[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&y, &y).max(1e-300) {
            if pairs.len() == opts.memory {
                pairs.remove(0);
            }
            pairs.push(Pair { s, y, rho: 1.0 / sy });
        }
        grad = ls.grad;
        value = ls.value;
        iterations += 1;
    }
    Ok(LbfgsReport {
        iterations,
        value,
        grad_norm_inf: inf_norm(&grad),
        converged: inf_norm(&grad) <= opts.grad_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_exact() {
        let mut obj = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..x.len() {
                let w = (i + 1) as f64;
                v += 0.5 * w * x[i] * x[i];
                g[i] = w * x[i];
            }
            v
        };
        let mut x = vec![1.0, -2.0, 3.0, 0.5];
        let r = minimize(&mut obj, &mut x, &LbfgsOptions::default()).unwrap();
        assert!(r.converged);
        assert!(x.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn rosenbrock() {
        let mut obj = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let mut x = vec![-1.2, 1.0];
        let opts = LbfgsOptions { max_iters: 2000, grad_tol: 1e-8, ..Default::default() };
        let r = minimize(&mut obj, &mut x, &opts).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn barrier_objective_with_infinite_wall() {
        // f(x) = -log(1-x^2) + (x-0.9)^2 on (-1,1); +inf outside
        let mut obj = |x: &[f64], g: &mut [f64]| {
            let t = x[0];
            if t.abs() >= 1.0 {
                g[0] = 0.0;
                return f64::INFINITY;
            }
            g[0] = 2.0 * t / (1.0 - t * t) + 2.0 * (t - 0.9);
            -(1.0 - t * t).ln() + (t - 0.9).powi(2)
        };
        let mut x = vec![0.0];
        let r = minimize(&mut obj, &mut x, &LbfgsOptions::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert!(x[0] > 0.0 && x[0] < 1.0);
        // stationarity: 2t/(1-t^2) + 2(t-0.9) = 0
        let t = x[0];
        assert!((2.0 * t / (1.0 - t * t) + 2.0 * (t - 0.9)).abs() < 1e-7);
    }

    #[test]
    fn nonfinite_start_rejected() {
        let mut obj = |_x: &[f64], g: &mut [f64]| {
            g[0] = 0.0;
            f64::INFINITY
        };
        let mut x = vec![0.0];
        assert!(minimize(&mut obj, &mut x, &LbfgsOptions::default()).is_err());
    }
}
