//! Still water over a bump whose crest pokes out of the surface. A
//! well-balanced scheme keeps the lake exactly still and the island dry.
//!
//! Usage: `cargo run --release --example lake_at_rest [steps]`

use overland::boundary::BoundarySpec;
use overland::validation::Bump;
use overland::{PhysicalParams, Solver, SolverOptions, State};

fn main() -> overland::Result<()> {
    let steps: usize = std::env::args().nth(1).map_or(500, |s| s.parse().expect("steps must be an integer"));
    let (n, level) = (80, 1.0);
    let bump = Bump {
        center: 40.0,
        half_width: 25.0,
        height: 1.3,
    };
    let mut s = State::new(n, n, 1.0);
    for j in 0..n as isize {
        for i in 0..n as isize {
            let z = bump.z_radial(i as f64 + 0.5, j as f64 + 0.5);
            s.z.set(i, j, z);
            s.h.set(i, j, (level - z).max(0.0));
        }
    }
    let dry = s.h.interior().iter().filter(|&&h| h == 0.0).count();
    let mut solver = Solver::new(s, BoundarySpec::default(), PhysicalParams::default(), SolverOptions::default())?;
    for _ in 0..steps {
        solver.step(f64::INFINITY)?;
    }
    let s = solver.state();
    let (mut eta, mut q, mut wetted) = (0.0f64, 0.0f64, 0);
    for j in 0..n as isize {
        for i in 0..n as isize {
            let h = s.h.get(i, j);
            if h > 0.0 {
                eta = eta.max((h + s.z.get(i, j) - level).abs());
            } else if s.hu.get(i, j) != 0.0 {
                wetted += 1;
            }
            q = q.max(s.hu.get(i, j).abs()).max(s.hv.get(i, j).abs());
        }
    }
    println!("{steps} steps to t = {:.2} s, {dry} island cells", solver.time());
    println!("max surface error {eta:.2e} m, max discharge {q:.2e} m2/s, island cells with momentum {wetted}");
    Ok(())
}
