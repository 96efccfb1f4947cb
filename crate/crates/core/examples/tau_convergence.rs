//! Richardson estimate of the time-step order: run the scheme at tau, tau/2,
//! tau/4 on the same grid and report p = log2(|v_tau - v_{tau/2}| /
//! |v_{tau/2} - v_{tau/4}|). The splitting is first order, so p should land
//! near one. Also compares the final field against a classical Chorin
//! splitting advanced with the same data.

use polyproj::grid::LP_INF;
use polyproj::nse::{self, NseConfig};

fn main() -> polyproj::Result<()> {
    let base = NseConfig { n: 32, t_final: 0.125, ..NseConfig::default() };
    let mut finals = vec![];
    for k in 0..3 {
        let cfg = NseConfig { tau: 1.0 / (16 << k) as f64, ..base.clone() };
        let result = nse::run(&cfg, None)?;
        finals.push(result.state.v);
    }
    let d1 = finals[0].add_scaled(&finals[1], -1.0).norm_lr(2.0)?;
    let d2 = finals[1].add_scaled(&finals[2], -1.0).norm_lr(2.0)?;
    println!("|v_tau - v_tau/2| = {d1:.4e}, |v_tau/2 - v_tau/4| = {d2:.4e}");
    println!("observed order p = {:.3}", (d1 / d2).log2());

    let cfg = NseConfig { tau: 1.0 / 16.0, ..base };
    let steps = (cfg.t_final / cfg.tau).round() as usize;
    let mut chorin = nse::initial_velocity(
        polyproj::grid::Grid::new(cfg.dim, cfg.n)?,
        cfg.initial,
        cfg.amplitude,
    )?;
    for _ in 0..steps {
        chorin = nse::chorin_reference_step(&chorin, cfg.mu, cfg.tau)?;
    }
    let gap = finals[0].add_scaled(&chorin, -1.0).norm_lr(LP_INF)?;
    println!("sup distance to Chorin reference {gap:.4e}");
    Ok(())
}
