//! Ten-class MNIST through the reservoir with a softmax readout, across the
//! flip strength. Needs the MNIST IDX files in `data/mnist` (or the
//! directory named by `DTCQRC_MNIST_DIR`).
//!
//! Usage: mnist_classify [n] [train] [test] [g,g,...] [p2] [seeds]
//!
//! A nonzero `p2` adds depolarizing noise with `p1 = p2/10`, simulated with
//! trajectories unless `DTCQRC_BACKEND=channel`.

use dtc_qrc::config::{Backend, Config};
use dtc_qrc::experiments::cmd_classify;
use dtc_qrc::noise::NoiseSpec;

fn main() -> dtc_qrc::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = Config::default();
    cfg.apply_env(|k| std::env::var(k).ok())?;
    cfg.run.cache = false;
    if let Some(n) = args.get(1).and_then(|s| s.parse().ok()) {
        cfg.classify.sizes = vec![n];
    }
    if let Some(v) = args.get(2).and_then(|s| s.parse().ok()) {
        cfg.classify.train = v;
    }
    if let Some(v) = args.get(3).and_then(|s| s.parse().ok()) {
        cfg.classify.test = v;
    }
    if let Some(grid) = args.get(4) {
        cfg.classify.g_grid = grid.split(',').filter_map(|s| s.parse().ok()).collect();
    }
    if let Some(p2) = args.get(5).and_then(|s| s.parse::<f64>().ok()).filter(|&p| p > 0.0) {
        cfg.noise = NoiseSpec::depolarizing(p2 / 10.0, p2);
        if !cfg.run.backend.is_noisy() {
            cfg.run.backend = Backend::Traj;
        }
    }
    if let Some(v) = args.get(6).and_then(|s| s.parse().ok()) {
        cfg.classify.seeds = v;
    }
    let report = cmd_classify(&cfg)?;
    print!("{}", report.summary);
    Ok(())
}
