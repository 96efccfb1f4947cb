//! The polyconvexity toolbox behind the projection: randomized verification of
//! the cofactor monotonicity inequality in d = 2, 3, the explicit family
//! showing it fails in d = 4, the discrete Bregman divergence of the volume
//! functional, and the uniqueness certificate for computed projections.

use crate::error::{Error, Result};
use crate::grid::{deformation_gradient, MapField, ScalarField};
use crate::rng::Stream;
use crate::smallmat::{cof, det, gap_constant, cofactor_gap_sides, sigma_min, SmallMat};

/// Denominator of the certificate threshold: `2 + 3 (1 + sqrt(3))`.
pub fn certificate_denominator() -> f64 {
    2.0 + 3.0 * (1.0 + 3.0f64.sqrt())
}

#[derive(Debug, Clone)]
pub struct MatrixIneqReport {
    pub dim: usize,
    pub constant: f64,
    pub samples_tested: usize,
    pub samples_discarded: usize,
    /// most negative value of `lhs - rhs` over all tested pairs
    pub worst_margin: f64,
    pub all_pass: bool,
}

fn random_matrix(dim: usize, stream: &mut Stream, scale: f64) -> SmallMat {
    SmallMat::from_fn(dim, |_, _| stream.symmetric(scale))
}

/// Randomized check of
/// `(sgn det A cof A - sgn det M cof M) : (A - M) >= -c |det M| / sigma(M)^2 |A - M|^2`
/// over `samples` pairs. Pairs with `sigma(M) < 1e-3` are discarded (the bound
/// degenerates as M approaches the singular set). A sample fails when the
/// margin drops below `-1e-9 (1 + |lhs| + |rhs|)`.
pub fn verify_matrix_inequality(dim: usize, samples: usize, seed: u64) -> Result<MatrixIneqReport> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidArgument(format!(
            "inequality holds for dim 2 and 3 only, got {dim}"
        )));
    }
    let c = gap_constant(dim);
    let mut stream = Stream::new(seed);
    let mut tested = 0usize;
    let mut discarded = 0usize;
    let mut worst = f64::INFINITY;
    while tested < samples {
        // alternate broad random pairs with near-identity perturbations,
        // where the inequality is tightest relative to scale
        let (m, a) = if tested % 3 == 2 {
            let eye = SmallMat::identity(dim);
            let m = eye.add(&random_matrix(dim, &mut stream, 0.05));
            let a = m.add(&random_matrix(dim, &mut stream, 0.05));
            (m, a)
        } else {
            (
                random_matrix(dim, &mut stream, 2.0),
                random_matrix(dim, &mut stream, 2.0),
            )
        };
        let sigma = sigma_min(&m);
        if sigma < 1e-3 {
            discarded += 1;
            continue;
        }
        let (lhs, rhs) = cofactor_gap_sides(&m, &a, c)?;
        let margin = lhs - rhs;
        let tol = 1e-9 * (1.0 + lhs.abs() + rhs.abs());
        worst = worst.min(margin / (1.0 + lhs.abs() + rhs.abs()));
        if margin < -tol {
            return Ok(MatrixIneqReport {
                dim,
                constant: c,
                samples_tested: tested + 1,
                samples_discarded: discarded,
                worst_margin: worst,
                all_pass: false,
            });
        }
        tested += 1;
    }
    Ok(MatrixIneqReport {
        dim,
        constant: c,
        samples_tested: tested,
        samples_discarded: discarded,
        worst_margin: worst,
        all_pass: true,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct CounterexamplePoint {
    pub alpha: f64,
    /// `(cof A - cof M) : (A - M)` at `M = I`, `A = diag(alpha, alpha, alpha, alpha^{-3})`
    pub lhs: f64,
    /// `|A - M|^2`
    pub quad: f64,
    /// `lhs / quad`; unbounded below as alpha grows, so no constant `c` works
    pub ratio: f64,
}

/// Evaluate the d = 4 counterexample family at parameter `alpha > 1`:
/// volume-preserving diagonal stretches with `sigma(M) = 1`, `det M = 1`,
/// whose inequality ratio diverges to negative infinity.
pub fn d4_counterexample(alpha: f64) -> Result<CounterexamplePoint> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "counterexample family needs alpha > 1, got {alpha}"
        )));
    }
    let dim = 4;
    let beta = alpha.powi(-3);
    let m = SmallMat::identity(dim);
    let a = SmallMat::diagonal(dim, &[alpha, alpha, alpha, beta]);
    let diff = a.sub(&m);
    let quad = diff.dot(&diff);
    let cof_a = cof(&a);
    let cof_m = cof(&m);
    // det A = alpha^3 beta = 1 > 0, det M = 1 > 0: both signs are +1
    let lhs = cof_a.sub(&cof_m).dot(&diff);
    Ok(CounterexamplePoint { alpha, lhs, quad, ratio: lhs / quad })
}

/// Discrete Bregman divergence of the volume functional
/// `Z -> integral of q |det DZ|` linearized at `Z0`:
/// sum over cells of `h^d q (|det DZ| - |det DZ0| - sgn(det DZ0) cof(DZ0) : (DZ - DZ0))`.
pub fn bregman_divergence(z: &MapField, z0: &MapField, q: &ScalarField) -> Result<f64> {
    let grid = z.grid;
    if z0.grid != grid || q.grid != grid {
        return Err(Error::GridMismatch("bregman fields on different grids".into()));
    }
    let dz = deformation_gradient(z);
    let dz0 = deformation_gradient(z0);
    let vol = grid.cell_volume();
    let mut total = 0.0;
    for (cell, qc) in q.values.iter().enumerate() {
        let a = &dz[cell];
        let m = &dz0[cell];
        let det_a = det(a);
        let det_m = det(m);
        let diff = a.sub(m);
        let lin = det_m.signum() * cof(m).dot(&diff);
        total += vol * qc * (det_a.abs() - det_m.abs() - lin);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy)]
pub struct BregmanBoundReport {
    pub divergence: f64,
    /// `(c / 2 sigma^2) max_cells |q det DZ0|  *  |DZ - DZ0|_{L^2}^2`
    pub lower_bound: f64,
    pub sigma_lower: f64,
    pub holds: bool,
}

/// Check the Bregman lower bound `-B <= (c / 2 sigma^2) |q det DZ0|_inf |DZ - DZ0|_{L^2}^2`
/// for cellwise nonnegative `q`. Errors if some cell of `DZ0` is singular.
pub fn bregman_lower_bound(
    z: &MapField,
    z0: &MapField,
    q: &ScalarField,
) -> Result<BregmanBoundReport> {
    let grid = z.grid;
    if q.values.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidArgument("bregman bound needs q >= 0".into()));
    }
    let c = gap_constant(grid.dim());
    let dz = deformation_gradient(z);
    let dz0 = deformation_gradient(z0);
    let vol = grid.cell_volume();
    let mut sigma = f64::INFINITY;
    let mut coeff = 0.0f64;
    let mut dist2 = 0.0;
    for (cell, qc) in q.values.iter().enumerate() {
        let m = &dz0[cell];
        sigma = sigma.min(sigma_min(m));
        coeff = coeff.max((qc * det(m)).abs());
        let diff = dz[cell].sub(m);
        dist2 += vol * diff.dot(&diff);
    }
    if sigma <= 0.0 {
        return Err(Error::SingularMatrix);
    }
    let divergence = bregman_divergence(z, z0, q)?;
    let lower_bound = c / (2.0 * sigma * sigma) * coeff * dist2;
    let holds = -divergence <= lower_bound + 1e-12 * (1.0 + lower_bound);
    Ok(BregmanBoundReport { divergence, lower_bound, sigma_lower: sigma, holds })
}

#[derive(Debug, Clone, Copy)]
pub struct CertificateReport {
    /// smallest singular value of `DZ` over all cells
    pub sigma_lower: f64,
    /// sup-norm oscillation of the multiplier around its mean
    pub q_oscillation: f64,
    /// `a sigma^2 / (2 + 3 (1 + sqrt(3)))`
    pub threshold: f64,
    pub passes: bool,
}

/// A posteriori uniqueness certificate for a computed projection with
/// multiplier `q` at gradient weight `a`: the projection is the unique
/// minimizer whenever the multiplier oscillation stays below
/// `a sigma^2 / (2 + 3 (1 + sqrt(3)))`.
pub fn uniqueness_certificate(z: &MapField, q: &ScalarField, a: f64) -> Result<CertificateReport> {
    if a <= 0.0 {
        return Err(Error::InvalidArgument(format!("certificate needs a > 0, got {a}")));
    }
    let dz = deformation_gradient(z);
    let mut sigma = f64::INFINITY;
    for m in &dz {
        sigma = sigma.min(sigma_min(m));
    }
    let mean = q.mean();
    let q_oscillation = q
        .values
        .iter()
        .fold(0.0f64, |acc, v| acc.max((v - mean).abs()));
    let threshold = a * sigma * sigma / certificate_denominator();
    Ok(CertificateReport {
        sigma_lower: sigma,
        q_oscillation,
        threshold,
        passes: q_oscillation <= threshold,
    })
}
