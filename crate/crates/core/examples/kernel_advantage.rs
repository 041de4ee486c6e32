//! Quantum vs classical kernel accuracy on the 3/8 MNIST subset before and
//! after adversarial relabeling. Needs the MNIST IDX files (see
//! `mnist_classify`).
//!
//! Usage: kernel_advantage [n] [train] [test] [g,g,...] [seeds] [rule] [gamma]
//!
//! `rule` is `quantum_favoring` (default), `cross_eigenvector` or
//! `scalar_norm`. A positive `gamma` switches the quantum kernel from cosine
//! similarity to an RBF kernel on feature rows.

use dtc_qrc::config::Config;
use dtc_qrc::experiments::cmd_kernel_adv;
use dtc_qrc::kernel::QuantumKernelMode;

fn main() -> dtc_qrc::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = Config::default();
    cfg.apply_env(|k| std::env::var(k).ok())?;
    cfg.run.cache = false;
    if let Some(v) = args.get(1).and_then(|s| s.parse().ok()) {
        cfg.kernel.n = v;
    }
    if let Some(v) = args.get(2).and_then(|s| s.parse().ok()) {
        cfg.kernel.train = v;
    }
    if let Some(v) = args.get(3).and_then(|s| s.parse().ok()) {
        cfg.kernel.test = v;
    }
    if let Some(grid) = args.get(4) {
        cfg.kernel.g_grid = grid.split(',').filter_map(|s| s.parse().ok()).collect();
    }
    if let Some(v) = args.get(5).and_then(|s| s.parse().ok()) {
        cfg.kernel.seeds = v;
    }
    if let Some(rule) = args.get(6) {
        let text = format!("[kernel]\nrule = {rule:?}\n");
        cfg.kernel.rule = Config::from_toml(&text)?.kernel.rule;
    }
    if let Some(gamma) = args.get(7).and_then(|s| s.parse().ok()).filter(|&g: &f64| g > 0.0) {
        cfg.kernel.mode = QuantumKernelMode::Rbf { gamma };
    }
    let report = cmd_kernel_adv(&cfg)?;
    print!("{}", report.summary);
    Ok(())
}
