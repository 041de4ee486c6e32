//! Test accuracy as the two-qubit depolarizing strength grows, with
//! `p1 = p2/10`, on the exact density-matrix channel by default
//! (`DTCQRC_BACKEND=traj` switches to trajectories).
//!
//! Usage: noise_sweep [n] [train] [test] [p2,p2,...]

use dtc_qrc::config::Config;
use dtc_qrc::experiments::cmd_noise_sweep;

fn main() -> dtc_qrc::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = Config::default();
    cfg.apply_env(|k| std::env::var(k).ok())?;
    cfg.run.cache = false;
    if let Some(v) = args.get(1).and_then(|s| s.parse().ok()) {
        cfg.noise_sweep.n = v;
    }
    if let Some(v) = args.get(2).and_then(|s| s.parse().ok()) {
        cfg.noise_sweep.train = v;
    }
    if let Some(v) = args.get(3).and_then(|s| s.parse().ok()) {
        cfg.noise_sweep.test = v;
    }
    if let Some(grid) = args.get(4) {
        cfg.noise_sweep.p2_grid = grid.split(',').filter_map(|s| s.parse().ok()).collect();
    }
    let report = cmd_noise_sweep(&cfg)?;
    print!("{}", report.summary);
    Ok(())
}
