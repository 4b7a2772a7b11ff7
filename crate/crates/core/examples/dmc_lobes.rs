//! DMC of the two-lobe Langmuir wave packet at ω = 1/2. The defaults
//! finish in a few minutes on one core; pass a walker count to change the size.
//!
//! cargo run --release --example dmc_lobes [walkers]

use std::fs::File;
use std::io::BufWriter;

use langmuir::dmc::{self, DmcConfig, ElectronSelection, Plane};
use langmuir::{Branch, FieldParams};

fn main() -> langmuir::Result<()> {
    let walkers = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let params = FieldParams::helium(0.5, 0.1235 / 0.0370f64.powf(4.0 / 3.0), Branch::Minus);
    let cfg = DmcConfig {
        walker_target: walkers,
        time_step: 0.5,
        equilibration_steps: 10_000,
        accumulation_steps: 20_000,
        ..DmcConfig::default()
    };
    let result = dmc::run_dmc(&params, &cfg)?;
    println!(
        "E = {} (classical minimum {:.6})",
        result.energy, result.seed_potentials[1]
    );
    for c in &result.lobe_centers {
        println!(
            "electron {} {} lobe at ({:.3}, {:.3}, {:.3})",
            c.electron,
            if c.upper { "upper" } else { "lower" },
            c.position[0],
            c.position[1],
            c.position[2]
        );
    }
    if let Some(m) = result.matched_root() {
        println!(
            "closest Langmuir root #{} a = {:.4}, offset {:.2}% of a",
            m.root_index,
            m.side_length,
            100.0 * m.relative_error
        );
    }
    let h = dmc::density_histogram(&result.density, Plane::Xz, 60, ElectronSelection::Both)?;
    h.write_csv(BufWriter::new(File::create("dmc_lobes_xz.csv")?))?;
    println!("xz density written to dmc_lobes_xz.csv");
    Ok(())
}
