//! One reservoir input under depolarizing and T1/T2 noise: exact channel
//! expectations next to trajectory estimates with their standard errors.

use dtc_qrc::floquet::{sample_params, EncodingScheme, MeasurementMode, ReservoirConfig};
use dtc_qrc::noise::{noisy_execute, reservoir_program, DeviceProfile, NoiseBackend, NoiseSpec};

fn main() -> dtc_qrc::Result<()> {
    let trajectories: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    let n = 4;
    let params = sample_params(n, 0.84, 1)?;
    let cfg = ReservoirConfig::new(8, 2);
    let spec = NoiseSpec { relaxation: true, ..NoiseSpec::depolarizing(0.002, 0.02) };
    let device = DeviceProfile::sample(n, &spec)?;
    let x: Vec<f64> = (0..3 * n).map(|i| 0.25 * i as f64).collect();
    let ops = reservoir_program(&x, &EncodingScheme::dense_angle(), &params, &cfg, &spec)?;
    let exact = noisy_execute(&ops, n, 0, &spec, &device, NoiseBackend::Channel, MeasurementMode::Exact, seed)?;
    let sampled = noisy_execute(
        &ops,
        n,
        0,
        &spec,
        &device,
        NoiseBackend::Trajectories(trajectories),
        MeasurementMode::Exact,
        seed,
    )?;
    let stderr = sampled.stderr.unwrap_or_default();
    println!("feature  channel   traj      stderr   z-score");
    for (i, (c, t)) in exact.features.iter().zip(&sampled.features).enumerate() {
        let z = if stderr[i] > 0.0 { (t - c) / stderr[i] } else { 0.0 };
        println!("{i:<8} {c:<9.4} {t:<9.4} {:<8.4} {z:+.2}", stderr[i]);
    }
    Ok(())
}
