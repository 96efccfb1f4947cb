//! Randomized verification of the cofactor monotonicity inequality
//!
//!   (sgn det A cof A - sgn det M cof M) : (A - M)
//!       >= -c |det M| / sigma(M)^2 |A - M|^2
//!
//! with c = 1 in dimension two and c = 1 + (3/2)(1 + sqrt(3)) in dimension
//! three. Run with more samples for a stronger check:
//!
//!   cargo run --release --example matrix_inequality -- 1000000

use polyproj::polyconvex::verify_matrix_inequality;

fn main() -> polyproj::Result<()> {
    let samples: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("sample count"))
        .unwrap_or(100_000);
    for dim in [2, 3] {
        let report = verify_matrix_inequality(dim, samples, 2024)?;
        println!(
            "d = {}: c = {:.10}, {} pairs ({} discarded near the singular set)",
            report.dim, report.constant, report.samples_tested, report.samples_discarded
        );
        println!(
            "  worst normalized margin {:.3e} -> {}",
            report.worst_margin,
            if report.all_pass { "no violations" } else { "VIOLATED" }
        );
    }
    Ok(())
}
