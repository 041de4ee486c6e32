//! Spin-glass order parameter across the flip strength for several chain
//! lengths, with the size crossings that bracket the phases.

use dtc_qrc::capacity::{phase_scan, PhaseScanSettings};

fn main() -> dtc_qrc::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let settings = PhaseScanSettings { samples, ..Default::default() };
    let table = phase_scan(&settings)?;
    println!("g      {}", settings.sizes.iter().map(|l| format!("L={l:<8}")).collect::<String>());
    for (gi, g) in settings.g_grid.iter().enumerate() {
        let cells: String = settings
            .sizes
            .iter()
            .map(|&l| {
                let row = table.rows.iter().filter(|r| r.l == l).nth(gi).expect("row per size");
                format!("{:<10.4}", row.mean_chi)
            })
            .collect();
        println!("{g:.2}   {cells}");
    }
    for c in &table.crossings {
        println!("crossing L={}/{} at g={:.3}", c.l_small, c.l_large, c.g);
    }
    Ok(())
}
