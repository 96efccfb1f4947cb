//! Dense d x d matrix kernels for d in {2, 3, 4}: exact determinants and
//! cofactors by minor expansion, smallest singular values by a Jacobi
//! eigensolve of M^T M, and the two sides of the cofactor gap inequality.

use crate::error::{Error, Result};

/// Small dense square matrix, dimension fixed at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallMat {
    dim: usize,
    // Row-major, only the leading dim x dim block is meaningful.
    e: [[f64; 4]; 4],
}

impl SmallMat {
    pub fn zeros(dim: usize) -> Self {
        assert!((2..=4).contains(&dim), "dim must be 2, 3 or 4");
        SmallMat {
            dim,
            e: [[0.0; 4]; 4],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.e[i][i] = 1.0;
        }
        m
    }

    pub fn from_rows(dim: usize, rows: &[&[f64]]) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.e[i][j] = rows[i][j];
            }
        }
        debug_assert!(m.is_finite());
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.e[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn diagonal(dim: usize, d: &[f64]) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.e[i][i] = d[i];
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.e[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.e[i][j] = v;
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.e[i][j].is_finite()))
    }

    pub fn transpose(&self) -> SmallMat {
        SmallMat::from_fn(self.dim, |i, j| self.e[j][i])
    }

    pub fn sub(&self, other: &SmallMat) -> SmallMat {
        assert_eq!(self.dim, other.dim);
        SmallMat::from_fn(self.dim, |i, j| self.e[i][j] - other.e[i][j])
    }

    pub fn add(&self, other: &SmallMat) -> SmallMat {
        assert_eq!(self.dim, other.dim);
        SmallMat::from_fn(self.dim, |i, j| self.e[i][j] + other.e[i][j])
    }

    pub fn scale(&self, s: f64) -> SmallMat {
        SmallMat::from_fn(self.dim, |i, j| s * self.e[i][j])
    }

    pub fn matmul(&self, other: &SmallMat) -> SmallMat {
        assert_eq!(self.dim, other.dim);
        SmallMat::from_fn(self.dim, |i, j| {
            (0..self.dim).map(|k| self.e[i][k] * other.e[k][j]).sum()
        })
    }

    /// Frobenius inner product A : B.
    pub fn dot(&self, other: &SmallMat) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.e[i][j] * other.e[i][j];
            }
        }
        s
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Determinant by cofactor expansion.
pub fn det(m: &SmallMat) -> f64 {
    let e = &m.e;
    match m.dim {
        2 => e[0][0] * e[1][1] - e[0][1] * e[1][0],
        3 => {
            e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
                - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
                + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0])
        }
        4 => {
            let mut s = 0.0;
            for j in 0..4 {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                s += sign * e[0][j] * det(&minor(m, 0, j));
            }
            s
        }
        _ => unreachable!(),
    }
}

fn minor(m: &SmallMat, row: usize, col: usize) -> SmallMat {
    let d = m.dim - 1;
    let mut out = SmallMat::zeros(d.max(2));
    out.dim = d;
    let mut r = 0;
    for i in 0..m.dim {
        if i == row {
            continue;
        }
        let mut c = 0;
        for j in 0..m.dim {
            if j == col {
                continue;
            }
            out.e[r][c] = m.e[i][j];
            c += 1;
        }
        r += 1;
    }
    out
}

/// Cofactor matrix: `cof(m)[i][j]` is the signed (i, j) minor, so that
/// `m * cof(m)^T = det(m) * I`.
pub fn cof(m: &SmallMat) -> SmallMat {
    match m.dim {
        2 => {
            let e = &m.e;
            SmallMat::from_rows(2, &[&[e[1][1], -e[1][0]], &[-e[0][1], e[0][0]]])
        }
        3 | 4 => SmallMat::from_fn(m.dim, |i, j| {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let sub = minor(m, i, j);
            sign * if sub.dim == 2 {
                sub.e[0][0] * sub.e[1][1] - sub.e[0][1] * sub.e[1][0]
            } else {
                det(&sub)
            }
        }),
        _ => unreachable!(),
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(m: &SmallMat) -> Vec<f64> {
    let d = m.dim;
    let mut a = m.e;
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..d).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Smallest singular value, from the symmetric eigensolve of M^T M.
pub fn sigma_min(m: &SmallMat) -> f64 {
    let mtm = m.transpose().matmul(m);
    let ev = symmetric_eigenvalues(&mtm);
    ev[0].max(0.0).sqrt()
}

/// Both sides of the cofactor gap inequality at a base point `m`:
///
/// lhs = (sgn(det A) cof(A) - sgn(det M) cof(M)) : (A - M),
/// rhs = -c |det M| / sigma(M)^2 * |A - M|^2  (Frobenius norms).
///
/// Errors when `sigma_min(m) = 0`, where the right side is undefined.
pub fn cofactor_gap_sides(m: &SmallMat, a: &SmallMat, c: f64) -> Result<(f64, f64)> {
    assert_eq!(m.dim, a.dim);
    let sigma = sigma_min(m);
    if sigma == 0.0 {
        return Err(Error::SingularMatrix);
    }
    let det_m = det(m);
    let det_a = det(a);
    let diff = a.sub(m);
    let ca = cof(a).scale(sgn(det_a));
    let cm = cof(m).scale(sgn(det_m));
    let lhs = ca.sub(&cm).dot(&diff);
    let rhs = -c * det_m.abs() / (sigma * sigma) * diff.dot(&diff);
    Ok((lhs, rhs))
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The dimension-dependent constant of the gap inequality: 1 in 2D,
/// 1 + (3/2)(1 + sqrt(3)) in 3D.
pub fn gap_constant(dim: usize) -> f64 {
    match dim {
        2 => 1.0,
        3 => 1.0 + 1.5 * (1.0 + 3.0_f64.sqrt()),
        _ => panic!("gap constant defined only for dim 2 and 3"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn random_mat(dim: usize, stream: &mut Stream, range: f64) -> SmallMat {
        SmallMat::from_fn(dim, |_, _| stream.symmetric(range))
    }

    /// Test-only oracle: eigenvalues of a symmetric matrix by bisection on
    /// the characteristic polynomial, independent of the Jacobi path.
    fn charpoly_eigen_min(m: &SmallMat) -> f64 {
        let p = |lam: f64| {
            let shifted = SmallMat::from_fn(m.dim(), |i, j| {
                m.get(i, j) - if i == j { lam } else { 0.0 }
            });
            det(&shifted)
        };
        // Gershgorin bound.
        let mut bound = 0.0_f64;
        for i in 0..m.dim() {
            let mut row = 0.0;
            for j in 0..m.dim() {
                row += m.get(i, j).abs();
            }
            bound = bound.max(row);
        }
        // The smallest eigenvalue is the leftmost sign change of the
        // characteristic polynomial; scan then bisect.
        let steps = 20000;
        let lo = -bound - 1.0;
        let hi = bound + 1.0;
        let mut prev = p(lo);
        let mut found = None;
        for k in 1..=steps {
            let x = lo + (hi - lo) * k as f64 / steps as f64;
            let v = p(x);
            if prev == 0.0 || prev.signum() != v.signum() {
                found = Some((x - (hi - lo) / steps as f64, x));
                break;
            }
            prev = v;
        }
        let (mut a, mut b) = found.expect("sign change");
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if p(a).signum() == p(mid).signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn det_identity_and_diagonal() {
        assert_eq!(det(&SmallMat::identity(2)), 1.0);
        assert_eq!(det(&SmallMat::diagonal(2, &[2.0, 3.0])), 6.0);
        assert_eq!(det(&SmallMat::identity(4)), 1.0);
    }

    #[test]
    fn det_matches_singular_value_product() {
        let mut stream = Stream::new(11);
        for _ in 0..50 {
            let m = random_mat(3, &mut stream, 2.0);
            let mtm = m.transpose().matmul(&m);
            let ev = symmetric_eigenvalues(&mtm);
            let prod: f64 = ev.iter().map(|l| l.max(0.0).sqrt()).product();
            let d = det(&m).abs();
            assert!(
                (d - prod).abs() <= 1e-10 * (1.0 + d),
                "det {d} vs sv product {prod}"
            );
        }
    }

    #[test]
    fn cof_identity_and_closed_form_2d() {
        let c = cof(&SmallMat::identity(3));
        assert!(c.sub(&SmallMat::identity(3)).norm() < 1e-15);
        let m = SmallMat::from_rows(2, &[&[1.0, 2.0], &[3.0, 4.0]]);
        let c = cof(&m);
        assert_eq!(c.get(0, 0), 4.0);
        assert_eq!(c.get(0, 1), -3.0);
        assert_eq!(c.get(1, 0), -2.0);
        assert_eq!(c.get(1, 1), 1.0);
    }

    #[test]
    fn cofactor_identity_holds() {
        let mut stream = Stream::new(5);
        for dim in [2usize, 3, 4] {
            for _ in 0..30 {
                let m = random_mat(dim, &mut stream, 3.0);
                let prod = m.matmul(&cof(&m).transpose());
                let expect = SmallMat::identity(dim).scale(det(&m));
                let scale = 1.0 + det(&m).abs();
                assert!(prod.sub(&expect).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn sigma_min_basic() {
        assert!((sigma_min(&SmallMat::identity(3)) - 1.0).abs() < 1e-14);
        let m = SmallMat::diagonal(2, &[3.0, 0.5]);
        assert!((sigma_min(&m) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn sigma_min_matches_charpoly_oracle() {
        let mut stream = Stream::new(23);
        for _ in 0..30 {
            let m = random_mat(3, &mut stream, 2.0);
            let mtm = m.transpose().matmul(&m);
            let oracle = charpoly_eigen_min(&mtm).max(0.0).sqrt();
            let got = sigma_min(&m);
            assert!(
                (got - oracle).abs() <= 1e-10 * (1.0 + oracle),
                "sigma {got} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn gap_sides_at_equal_matrices() {
        let m = SmallMat::diagonal(3, &[1.0, 2.0, 0.5]);
        let (lhs, rhs) = cofactor_gap_sides(&m, &m, 1.0).unwrap();
        assert_eq!(lhs, 0.0);
        assert_eq!(rhs, 0.0);
    }

    #[test]
    fn gap_sides_direct_evaluation_2d() {
        // M = I, A = 2I, c = 1: cofactors are I and 2I, diff is I,
        // lhs = (2I - I):(I) = 2, rhs = -1 * 1 / 1 * |I|^2 = -2.
        let m = SmallMat::identity(2);
        let a = SmallMat::identity(2).scale(2.0);
        let (lhs, rhs) = cofactor_gap_sides(&m, &a, 1.0).unwrap();
        assert!((lhs - 2.0).abs() < 1e-14);
        assert!((rhs + 2.0).abs() < 1e-14);
    }

    #[test]
    fn gap_sides_rejects_singular_base() {
        let m = SmallMat::diagonal(2, &[1.0, 0.0]);
        let a = SmallMat::identity(2);
        assert!(matches!(
            cofactor_gap_sides(&m, &a, 1.0),
            Err(Error::SingularMatrix)
        ));
    }

    #[test]
    fn gap_holds_near_identity_3d() {
        let c = gap_constant(3);
        let mut stream = Stream::new(77);
        for _ in 0..2000 {
            let m = SmallMat::identity(3);
            let a = SmallMat::from_fn(3, |i, j| {
                (if i == j { 1.0 } else { 0.0 }) + stream.symmetric(0.3)
            });
            let (lhs, rhs) = cofactor_gap_sides(&m, &a, c).unwrap();
            assert!(lhs >= rhs - 1e-9 * (1.0 + lhs.abs() + rhs.abs()));
        }
    }

    #[test]
    fn lambda_convexity_2d() {
        // (cof(A) - cof(M)):(A - M) >= -|A - M|^2 for all 2x2 pairs.
        let mut stream = Stream::new(301);
        for _ in 0..5000 {
            let m = random_mat(2, &mut stream, 3.0);
            let a = random_mat(2, &mut stream, 3.0);
            let diff = a.sub(&m);
            let lhs = cof(&a).sub(&cof(&m)).dot(&diff);
            let quad = diff.dot(&diff);
            assert!(lhs >= -quad - 1e-9 * (1.0 + lhs.abs() + quad));
        }
    }
}
