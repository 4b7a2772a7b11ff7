//! Coarse stability map of the Langmuir family, written as CSV.
//!
//! cargo run --release --example stability_scan [branch] [out.csv]

use std::fs::File;
use std::io::BufWriter;

use langmuir::stability::{self, Grid, ScanSpec};
use langmuir::Branch;

fn main() -> langmuir::Result<()> {
    let mut args = std::env::args().skip(1);
    let branch: Branch = args.next().as_deref().unwrap_or("-1").parse()?;
    let out = args.next().unwrap_or_else(|| "scan.csv".into());

    let spec = ScanSpec::langmuir(Grid::new(0.1, 3.0, 30)?, Grid::new(0.0, 2.0, 30)?, branch);
    let map = stability::scan(&spec)?;
    map.write_csv(BufWriter::new(File::create(&out)?))?;

    // one character per cell: '#' stable root, '.' unstable roots, ' ' none
    println!(
        "branch {branch}; rows omega (top = {}), columns epsilon",
        map.omega_axis[0]
    );
    for i in 0..map.omega_axis.len() {
        let row: String = (0..map.epsilon_axis.len())
            .map(|j| {
                let c = map.cell(i, j);
                if c.any_stable() {
                    '#'
                } else if c.roots.is_empty() {
                    ' '
                } else {
                    '.'
                }
            })
            .collect();
        println!("{:5.2} |{row}|", map.omega_axis[i]);
    }
    let s = map.summary();
    println!(
        "{} stable cells, omega range {:?}; CSV in {out}",
        s.stable_cells, s.stable_omega_range
    );
    Ok(())
}
