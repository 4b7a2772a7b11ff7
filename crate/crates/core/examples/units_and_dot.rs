//! Scaled units for the reference field (Ω = 0.0185, 𝓔 = 0.1235,
//! Ω_c = 0.037 a.u.) and the quantum-dot mapping.
//!
//! cargo run --example units_and_dot [effective_mass dielectric_constant]

use langmuir::equilibria::{self, CollinearVariant};
use langmuir::units::{self, DotParams, LabParams};

fn main() -> langmuir::Result<()> {
    let lab = LabParams {
        cp_frequency: 0.0185,
        cp_strength: 0.1235,
        cyclotron_frequency: 0.0370,
    };
    let scaled = units::to_scaled(&lab)?;
    println!(
        "lab (Ω, 𝓔, Ω_c) = ({}, {}, {}) a.u.",
        lab.cp_frequency, lab.cp_strength, lab.cyclotron_frequency
    );
    println!(
        "scaled: omega = {:.6}, epsilon = {:.6}, branch {}",
        scaled.params.omega, scaled.params.epsilon, scaled.params.branch
    );
    println!(
        "length unit {:.4} bohr, time unit {:.4} a.u.",
        scaled.units.length, scaled.units.time
    );

    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (mass, kappa) = match args[..] {
        [m, k] => (m, k),
        _ => (0.067, 12.9),
    };
    let dot = DotParams::example(mass, kappa);
    let (params, report) = units::dot_effective_units(&dot)?;
    println!("\nquantum dot, m* = {mass}, κ = {kappa}");
    println!("{report}");
    println!(
        "mapped: omega = {:.6}, epsilon = {:.6e}, Z = {}, branch {}",
        params.omega, params.epsilon, params.charge, params.branch
    );
    for eq in equilibria::type3_all(&params, CollinearVariant::A)? {
        let [a, b] = eq.config.positions;
        println!(
            "IIIa electrons at x = {:.3} nm and {:.3} nm from the impurity",
            a[0] * report.scaled_length_nm,
            b[0] * report.scaled_length_nm
        );
    }
    Ok(())
}
