//! Reads an ESRI ASCII grid, reports its extent and elevation range, and
//! writes it back with a fixed number of decimals.
//!
//! Usage: `cargo run --example raster_io -- <in.asc> [out.asc]`

use overland::RasterGrid;

fn main() -> overland::Result<()> {
    let mut args = std::env::args().skip(1);
    let input = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/tiny/dsm.asc").into());
    let grid = RasterGrid::read(&input)?;
    let valid: Vec<f64> = (0..grid.len()).filter(|&k| !grid.is_nodata(k)).map(|k| grid.values[k]).collect();
    let (lo, hi) = valid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    println!("{input}: {} cols x {} rows, cell {} m", grid.ncols, grid.nrows, grid.cellsize);
    println!(
        "lower-left corner ({}, {}), {} nodata cells",
        grid.xll,
        grid.yll,
        grid.len() - valid.len()
    );
    println!("elevation {lo:.3} .. {hi:.3}");
    if let Some(out) = args.next() {
        grid.write(&out, Some(3))?;
        let back = RasterGrid::read(&out)?;
        let worst = back.values.iter().zip(&grid.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        println!("wrote {out}, largest rounding change {worst:.1e}");
    }
    Ok(())
}
