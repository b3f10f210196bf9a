//! Miniature flood on a synthetic valley: spin-up at a constant discharge,
//! then a triangular hydrograph entering through the channel on the west
//! edge and leaving freely through the east edge.
//!
//! Usage: `cargo run --release --example mini_flood [peak_m3s] [out_dir]`

use overland::boundary::Edge;
use overland::simulation::synthetic::Valley;
use overland::simulation::{run, EdgeKind, Hydrograph, Scenario, SpinUp, Terrain};
use overland::solver::SolverOptions;

fn main() -> overland::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let peak: f64 = args.next().map_or(20.0, |s| s.parse().expect("peak must be a number"));
    let out = args.next().unwrap_or_else(|| "mini_flood_out".into());

    let valley = Valley::default();
    let (spin, rise, fall) = (3600.0, 1800.0, 1800.0);
    let mut scn = Scenario::new(Terrain::Grid(valley.dsm()), spin + rise + fall, &out);
    scn.set_edge(Edge::West, EdgeKind::Discharge);
    scn.set_edge(Edge::East, EdgeKind::FreeOutflow);
    scn.riverbed_mask = Some(valley.inflow_mask());
    scn.params.manning_n = 0.03;
    scn.spin_up = SpinUp { q: 5.0, duration: spin };
    // synthetic triangular event, times relative to the end of the spin-up
    scn.hydrograph = Hydrograph::new(vec![(0.0, 5.0), (rise, peak), (rise + fall, 5.0)])?;
    scn.snapshot_interval = 900.0;
    scn.options = SolverOptions { blocks: 4, ..SolverOptions::default() };

    let started = std::time::Instant::now();
    let outcome = run(scn)?;
    let mb = &outcome.mass_balance;
    println!("steps            {}", outcome.steps);
    println!("wall time        {:.1} s", started.elapsed().as_secs_f64());
    println!("inflow volume    {:.3} m3", mb.inflow_volume);
    println!("outflow volume   {:.3} m3", mb.outflow_volume);
    println!("storage change   {:.3} m3", mb.delta_storage);
    println!("closure          {:.3e}", mb.closure);
    let wet = outcome.maxima.max_h.values.iter().filter(|&&h| h > 0.01).count();
    println!("cells ever wet   {wet}");
    let deepest = outcome.maxima.max_h.values.iter().fold(0.0f64, |m, &h| m.max(h));
    println!("deepest water    {deepest:.3} m");
    Ok(())
}
