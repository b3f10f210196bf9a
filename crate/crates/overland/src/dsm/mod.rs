//! Hydraulic DSM construction from a DTM and classified vector features.
//!
//! The pipeline is: parse features, keep the selected classes, close
//! near-closed lines into polygons, rasterize every feature on the DTM grid
//! and stamp the resulting elevations with max semantics.

mod features;
mod rasterize;

use rayon::prelude::*;

pub use features::{
    close_lines, parse_features, read_features, select_classes, ClassSelection, ClassifiedFeature, FeatureKind,
    Vertex,
};
pub use rasterize::rasterize_feature;

use crate::error::{Error, Result};
use crate::raster::RasterGrid;

/// Stamps feature cells onto the DTM: each touched cell becomes
/// `max(dtm, feature z)`, so features only ever raise the surface.
/// Cells on nodata DTM cells are skipped with a warning.
pub fn extrude(dtm: &RasterGrid, cells: &[(usize, f64)]) -> RasterGrid {
    let mut dsm = dtm.clone();
    let mut skipped = 0usize;
    for &(idx, z) in cells {
        if dsm.is_nodata(idx) {
            skipped += 1;
            continue;
        }
        if z > dsm.values[idx] {
            dsm.values[idx] = z;
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} feature cell(s) fall on nodata DTM cells and were skipped");
    }
    dsm
}

/// Runs the full build. Features are rasterized in parallel; the per-cell
/// max makes the result independent of feature order.
pub fn build_dsm(
    dtm: &RasterGrid,
    features: &[ClassifiedFeature],
    selection: &ClassSelection,
    close_tolerance: f64,
) -> Result<RasterGrid> {
    dtm.validate()?;
    if selection.is_empty() {
        return Err(Error::Config("class selection is empty".into()));
    }
    if close_tolerance.is_nan() || close_tolerance < 0.0 {
        return Err(Error::Config(format!("close tolerance must be >= 0, got {close_tolerance}")));
    }
    let kept = close_lines(select_classes(features, selection), close_tolerance);
    log::info!("{} of {} features selected", kept.len(), features.len());
    let cells: Vec<(usize, f64)> = kept
        .par_iter()
        .flat_map_iter(|f| rasterize_feature(f, dtm))
        .collect();
    Ok(extrude(dtm, &cells))
}
