//! Runs the analytical benchmarks at two resolutions and prints the error
//! norms and observed order, the same report the `validate` command writes.
//!
//! Usage: `cargo run --release --example validate_cases [n]`

use overland::solver::SolverOptions;
use overland::validation::validation_report;

fn main() -> overland::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(200, |s| s.parse().expect("n must be an integer"));
    for case in ["lake-at-rest", "lake-emerged", "ritter", "stoker"] {
        let (rows, csv) = validation_report(case, n, SolverOptions::default())?;
        print!("{csv}");
        if case == "ritter" {
            let fine = &rows[1];
            if let Some(x) = fine.front_position(0.01) {
                println!("# wet front at x = {x:.3} m, t = {:.3} s", fine.t_final);
            }
        }
    }
    Ok(())
}
