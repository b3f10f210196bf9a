//! Splits a grid into blocks, shows the layout, and checks that a run on
//! several blocks reproduces the single-block fields bit for bit.
//!
//! Usage: `cargo run --release --example partition_blocks [blocks]`

use overland::boundary::BoundarySpec;
use overland::partition::partition;
use overland::{PhysicalParams, Solver, SolverOptions, State};

fn main() -> overland::Result<()> {
    let blocks: usize = std::env::args().nth(1).map_or(6, |s| s.parse().expect("blocks must be an integer"));
    let (nrows, ncols) = (90, 140);
    let part = partition(nrows, ncols, blocks)?;
    for (k, b) in part.blocks.iter().enumerate() {
        println!("block {k}: rows {:?}, cols {:?}, {} cells", b.raster_rows(nrows), b.cols(), b.cells());
    }

    let mut s = State::new(ncols, nrows, 1.0);
    for j in 0..nrows as isize {
        for i in 0..ncols as isize {
            s.h.set(i, j, if i < 50 { 1.0 } else { 0.1 });
            s.z.set(i, j, 0.05 * ((i as f64) * 0.1).sin());
        }
    }
    let run = |blocks: usize| -> overland::Result<State> {
        let opts = SolverOptions {
            blocks,
            ..SolverOptions::default()
        };
        let mut solver = Solver::new(s.clone(), BoundarySpec::default(), PhysicalParams::default(), opts)?;
        for _ in 0..50 {
            solver.step(f64::INFINITY)?;
        }
        Ok(solver.state())
    };
    let one = run(1)?;
    let many = run(blocks)?;
    let same = one.h == many.h && one.hu == many.hu && one.hv == many.hv;
    println!("50 steps on 1 and {blocks} blocks identical: {same}");
    Ok(())
}
