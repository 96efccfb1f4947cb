//! In dimension four the cofactor inequality fails: along the
//! volume-preserving stretches A = diag(alpha, alpha, alpha, alpha^-3)
//! against M = I the ratio lhs / |A - M|^2 is unbounded below, so no
//! constant c can work.

use polyproj::polyconvex::d4_counterexample;

fn main() -> polyproj::Result<()> {
    println!("{:>8} {:>14} {:>14} {:>12}", "alpha", "lhs", "|A-M|^2", "ratio");
    for alpha in [2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
        let p = d4_counterexample(alpha)?;
        println!("{:8.1} {:14.4e} {:14.4e} {:12.4}", p.alpha, p.lhs, p.quad, p.ratio);
    }
    Ok(())
}
