//! Disorder-averaged ⟨Z_0(t)⟩ from |0…0⟩ for a few flip strengths: the time
//! crystal keeps flipping at twice the drive period, the thermal chain does not.

use dtc_qrc::floquet::{sample_params, CompiledCycle};
use dtc_qrc::qstate::StateVector;

fn main() -> dtc_qrc::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let periods = 30;
    let draws = 20;
    let gs = [1.0, 0.95, 0.84, 0.5, 0.1];
    let mut table = vec![vec![0.0; gs.len()]; periods + 1];
    for (gi, &g) in gs.iter().enumerate() {
        for d in 0..draws {
            let cycle = CompiledCycle::new(&sample_params(n, g, d)?);
            let mut psi = StateVector::zero(n)?;
            for row in table.iter_mut() {
                row[gi] += psi.expect_z(0)? / draws as f64;
                cycle.apply(&mut psi);
            }
        }
    }
    println!("t    {}", gs.iter().map(|g| format!("g={g:<7}")).collect::<String>());
    for (t, row) in table.iter().enumerate() {
        println!("{t:<4} {}", row.iter().map(|v| format!("{v:<9.4}")).collect::<String>());
    }
    Ok(())
}
