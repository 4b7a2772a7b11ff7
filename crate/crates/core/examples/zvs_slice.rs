//! Zero-velocity surface seen by one electron with the other held at its
//! Langmuir position, printed as a coarse contour-free table.

use langmuir::equilibria;
use langmuir::model::{self, Configuration};
use langmuir::{Branch, Dims, FieldParams};

fn main() -> langmuir::Result<()> {
    let params = FieldParams::helium(0.5, 0.1235 / 0.0370f64.powf(4.0 / 3.0), Branch::Minus);
    let outer = equilibria::langmuir_equilibria(&params)?[1];
    let [q1, q2] = outer.config.positions;
    let v0 = model::zvs(&outer.config, &params)?;
    println!("ZVS at the outer root: {v0:.6}; electron 1 swept in the xz plane, electron 2 fixed");
    for dz in [-8.0, -4.0, 0.0, 4.0, 8.0] {
        let row: Vec<String> = [-8.0, -4.0, 0.0, 4.0, 8.0]
            .iter()
            .map(|dx| {
                let c = Configuration::new(Dims::Three, [[q1[0] + dx, q1[1], q1[2] + dz], q2]);
                format!("{:9.4}", model::zvs(&c, &params).map_or(f64::NAN, |v| v - v0))
            })
            .collect();
        println!("dz = {dz:+4}: {}", row.join(" "));
    }
    Ok(())
}
