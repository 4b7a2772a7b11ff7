//! Langmuir roots across the bistable window and the collinear families.

use langmuir::equilibria::{self, CollinearVariant};
use langmuir::stability;
use langmuir::{Branch, Dims, FieldParams};

fn main() -> langmuir::Result<()> {
    println!("branch -1, omega = 0.5: Langmuir side lengths");
    for eps in [0.2, 0.6, 0.8, 0.82, 1.0, 2.0, 10.0] {
        let params = FieldParams::helium(0.5, eps, Branch::Minus);
        let roots = equilibria::langmuir_cubic(&params)?;
        let verdicts: Vec<String> = equilibria::langmuir_equilibria(&params)?
            .iter()
            .map(|eq| {
                let report = stability::analyze(eq, &params).expect("linearization");
                format!(
                    "{:.5} ({})",
                    eq.side_length.unwrap_or(f64::NAN),
                    if report.stable { "stable" } else { "unstable" }
                )
            })
            .collect();
        println!("  eps = {eps:<5} {} root(s): {}", roots.len(), verdicts.join(", "));
    }

    let params = FieldParams::helium(0.5, 3.0, Branch::Minus).with_dims(Dims::Two);
    println!("\ncollinear pairs at omega = 0.5, eps = 3 (2D)");
    for variant in [CollinearVariant::A, CollinearVariant::B] {
        for eq in equilibria::type3_all(&params, variant)? {
            let [a, b] = eq.config.positions;
            let report = stability::analyze(&eq, &params)?;
            println!(
                "  {:<5} x = ({:.6}, {:.6})  residual {:.1e}  max|Re λ| {:.2e}",
                eq.class.to_string(),
                a[0],
                b[0],
                eq.residual,
                report.max_real_part
            );
        }
    }
    Ok(())
}
