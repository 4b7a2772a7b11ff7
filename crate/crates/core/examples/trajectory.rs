//! Perturbed Langmuir configurations: the stable outer root at the reference
//! field stays put, the inner root runs away.

use langmuir::dynamics::{self, IntegrationControl};
use langmuir::equilibria;
use langmuir::stability;
use langmuir::{Branch, FieldParams};

fn main() -> langmuir::Result<()> {
    let params = FieldParams::helium(0.5, 0.1235 / 0.0370f64.powf(4.0 / 3.0), Branch::Minus);
    let period = dynamics::rotation_period(params.omega);
    let control = IntegrationControl::default();
    for eq in equilibria::langmuir_equilibria(&params)? {
        let report = stability::analyze(&eq, &params)?;
        let probe = dynamics::probe_perturbation(&eq, &params, &[1.0; 6], 1e-4, 100.0 * period, &control)?;
        println!(
            "a = {:9.5}: {:8} max|Re λ| = {:.3e}, max deviation {:.3e}, escape at {}",
            eq.side_length.unwrap_or(f64::NAN),
            if report.stable { "stable" } else { "unstable" },
            report.max_real_part,
            probe.max_deviation,
            probe.escape_time.map_or("never".to_string(), |t| format!("t = {t:.2}")),
        );
    }

    // one rotation of the outer pair in the lab frame
    let outer = equilibria::langmuir_equilibria(&params)?[1];
    let traj = dynamics::integrate(&outer.state(), &params, period, &control)?;
    let lab = dynamics::to_lab_frame(&traj, params.omega);
    let quarter = &lab.samples[lab.samples.len() / 4];
    println!(
        "lab frame after a quarter period: electron 1 at ({:.4}, {:.4}, {:.4}), energy drift {:.1e}",
        quarter.state.config.positions[0][0],
        quarter.state.config.positions[0][1],
        quarter.state.config.positions[0][2],
        traj.energy_drift
    );
    Ok(())
}
