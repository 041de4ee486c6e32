//! Short-term memory, parity and NARMA10 capacities plus the OTOC plateau
//! across the flip strength, averaged over disorder seeds.

use dtc_qrc::capacity::{otoc_plateau, random_basis_probes, run_capacity_tasks, CapacitySettings, CapacityTask};
use dtc_qrc::floquet::{sample_params, StepOrder};
use dtc_qrc::rng::derive_seed;
use rayon::prelude::*;

fn main() -> dtc_qrc::Result<()> {
    let n = 6;
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let grid = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];
    let tasks = [CapacityTask::Stm(1), CapacityTask::Parity(1), CapacityTask::Narma10];
    let order = match std::env::args().nth(2).as_deref() {
        Some("evolve-first") => StepOrder::EvolveInjectRecord,
        _ => StepOrder::InjectEvolveRecord,
    };
    let settings = CapacitySettings { order, ..Default::default() };
    println!("g      stm_d1   parity_d1 narma10  otoc");
    for g in grid {
        let per_seed = (0..seeds)
            .into_par_iter()
            .map(|s| {
                let params = sample_params(n, g, derive_seed(7, &[s]))?;
                let mut caps = run_capacity_tasks(&tasks, &params, &settings, derive_seed(8, &[s]))?;
                let probes = random_basis_probes(n, 1, s)?;
                caps.push(otoc_plateau(&params, 20, 30, &probes)?);
                Ok(caps)
            })
            .collect::<dtc_qrc::Result<Vec<_>>>()?;
        let mean = |i: usize| per_seed.iter().map(|c| c[i]).sum::<f64>() / seeds as f64;
        println!("{g:.2}   {:.4}   {:.4}    {:.4}   {:.4}", mean(0), mean(1), mean(2), mean(3));
    }
    Ok(())
}
