//! Builds a hydraulic surface model: a flat terrain raster plus a wall and a
//! building taken from a classified feature file, then prints it as a map.
//!
//! Usage: `cargo run --example build_dsm`

use overland::dsm::{build_dsm, parse_features, ClassSelection};
use overland::RasterGrid;

const FEATURES: &str = "\
# class;KIND;x y z,...
3;LINE;1.5 3.5 2,8.5 3.5 2,12.5 7.5 2
1;POLYGON;4 10 5,10 10 5,4 16 5,4 10 5
# an almost closed outline, closed within the tolerance
1;LINE;14 12 3,18 12 3,18 17 3,14 17 3,14.05 12.05 3
# vegetation is not part of the hydraulic surface
7;POINT;15.5 5.5 9
";

fn main() -> overland::Result<()> {
    let dtm = RasterGrid::new(20, 20, 0.0, 0.0, 1.0, 0.0);
    let features = parse_features(FEATURES)?;
    let keep = ClassSelection::new([1, 3]);
    let dsm = build_dsm(&dtm, &features, &keep, 0.1)?;

    for row in 0..dsm.nrows {
        let line: String = (0..dsm.ncols)
            .map(|col| match dsm.get(row, col) {
                z if z >= 5.0 => '#',
                z if z >= 3.0 => '+',
                z if z >= 2.0 => '=',
                _ => '.',
            })
            .collect();
        println!("{line}");
    }
    let raised = dsm.values.iter().filter(|&&z| z > 0.0).count();
    println!("{raised} of {} cells raised", dsm.len());
    Ok(())
}
