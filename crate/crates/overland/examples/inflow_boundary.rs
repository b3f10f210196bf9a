//! Discharge inflow through part of the west edge of a sloping channel. The
//! ghost states come from the Riemann invariant of the outgoing wave.
//!
//! Usage: `cargo run --release --example inflow_boundary`

use std::sync::Arc;

use overland::boundary::{riemann_inflow, BoundarySpec, DischargeInflow, Edge, EdgeCondition};
use overland::simulation::{Forcing, Hydrograph};
use overland::{PhysicalParams, Solver, SolverOptions, State};

fn main() -> overland::Result<()> {
    let g = 9.81;
    println!("ghost states for h_i = 0.5 m, u_i = 0.2 m/s:");
    for q in [0.0, 0.2, 0.5, 1.0, 3.0] {
        let s = riemann_inflow(0.5, 0.2, q, g);
        println!("  q = {q:>4} m2/s -> h = {:.4} m, u = {:.4} m/s, critical = {}", s.h, s.u, s.critical);
    }

    let (nx, ny, dx) = (60, 20, 1.0);
    let mut s = State::new(nx, ny, dx);
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            s.z.set(i, j, 0.001 * (nx as isize - i) as f64);
            s.h.set(i, j, 0.4);
        }
    }
    let hydrograph = Hydrograph::new(vec![(0.0, 0.5), (60.0, 2.0), (120.0, 2.0)])?;
    let forcing = Arc::new(Forcing::new(None, hydrograph));
    // rows are counted from the north edge of the raster
    let mask: Vec<(usize, usize)> = (5..15).map(|r| (r, 0)).collect();
    let spec = BoundarySpec {
        west: EdgeCondition::Discharge(DischargeInflow::new(Edge::West, forcing, &mask, ny, nx)?),
        east: EdgeCondition::FreeOutflow,
        ..BoundarySpec::default()
    };
    let params = PhysicalParams {
        manning_n: 0.05,
        ..PhysicalParams::default()
    };
    let v0 = s.volume();
    let mut solver = Solver::new(s, spec, params, SolverOptions::default())?;
    let (mut inflow, mut outflow, mut critical) = (0.0, 0.0, 0);
    while solver.time() < 120.0 {
        let d = solver.step(120.0 - solver.time())?;
        inflow += d.inflow_volume;
        outflow += d.outflow_volume;
        critical += d.critical_fallbacks;
    }
    let stored = solver.volume() - v0;
    println!("after {:.0} s: in {inflow:.3} m3, out {outflow:.3} m3, stored {stored:.3} m3", solver.time());
    println!(
        "balance error {:.2e} m3, critical fallbacks {critical}",
        inflow - outflow - stored
    );
    Ok(())
}
