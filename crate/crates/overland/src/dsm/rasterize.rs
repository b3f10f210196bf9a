//! Feature rasterization onto a template grid.
//!
//! Lines use a supercover traversal: every cell whose interior the segment
//! crosses is hit, and when the segment passes exactly through a grid vertex
//! both side cells are added so the chain stays 4-connected. A segment lying
//! exactly on a grid line touches no cell interior; lines then take the cell
//! on the upper/right side, polygon edges take the side inside the polygon.

use std::collections::BTreeMap;

use super::features::{ClassifiedFeature, FeatureKind, Vertex};
use crate::raster::RasterGrid;

/// A grid cell with `iy` counted from the south edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct GridCell {
    pub ix: i64,
    pub iy: i64,
}

/// One piece of a segment traversal, with its parameter interval on the segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Visit {
    Cell { cell: GridCell, t0: f64, t1: f64 },
    /// Zero-length touch at a grid vertex crossing.
    Corner { cell: GridCell, t: f64 },
    /// The piece runs along a grid line between `below` (left/south) and `above`.
    OnLine {
        below: GridCell,
        above: GridCell,
        t0: f64,
        t1: f64,
    },
}

fn start_index(p: f64, d: f64) -> i64 {
    if d < 0.0 && p.fract() == 0.0 {
        p as i64 - 1
    } else {
        p.floor() as i64
    }
}

/// Walks the segment `a`→`b` (grid units, y up) through the unit grid.
pub(crate) fn traverse(a: (f64, f64), b: (f64, f64)) -> Vec<Visit> {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let mut out = Vec::new();

    if dx == 0.0 && dy == 0.0 {
        let cell = GridCell {
            ix: a.0.floor() as i64,
            iy: a.1.floor() as i64,
        };
        out.push(Visit::Corner { cell, t: 0.0 });
        return out;
    }

    // Axis-aligned segment on a grid line.
    if dx == 0.0 && a.0.fract() == 0.0 {
        let x = a.0 as i64;
        for (iy, t0, t1) in axis_pieces(a.1, dy) {
            out.push(Visit::OnLine {
                below: GridCell { ix: x - 1, iy },
                above: GridCell { ix: x, iy },
                t0,
                t1,
            });
        }
        return out;
    }
    if dy == 0.0 && a.1.fract() == 0.0 {
        let y = a.1 as i64;
        for (ix, t0, t1) in axis_pieces(a.0, dx) {
            out.push(Visit::OnLine {
                below: GridCell { ix, iy: y - 1 },
                above: GridCell { ix, iy: y },
                t0,
                t1,
            });
        }
        return out;
    }

    let sx: i64 = if dx > 0.0 { 1 } else { -1 };
    let sy: i64 = if dy > 0.0 { 1 } else { -1 };
    let mut ix = start_index(a.0, dx);
    let mut iy = start_index(a.1, dy);
    // Parameter at which the line reaches the next boundary, computed fresh
    // from the boundary coordinate so that vertex crossings tie exactly.
    let next_t = |i: i64, s: i64, p: f64, d: f64| -> f64 {
        if d == 0.0 {
            f64::INFINITY
        } else {
            let boundary = if s > 0 { i + 1 } else { i } as f64;
            (boundary - p) / d
        }
    };
    let mut t_enter = 0.0;
    let max_iter = ((dx.abs() + dy.abs()) as usize) + 4;
    for _ in 0..max_iter {
        let tx = next_t(ix, sx, a.0, dx);
        let ty = next_t(iy, sy, a.1, dy);
        let t_exit = tx.min(ty).min(1.0);
        if t_exit > t_enter {
            out.push(Visit::Cell {
                cell: GridCell { ix, iy },
                t0: t_enter,
                t1: t_exit,
            });
        }
        if t_exit >= 1.0 {
            break;
        }
        if tx == ty {
            out.push(Visit::Corner {
                cell: GridCell { ix: ix + sx, iy },
                t: tx,
            });
            out.push(Visit::Corner {
                cell: GridCell { ix, iy: iy + sy },
                t: tx,
            });
            ix += sx;
            iy += sy;
        } else if tx < ty {
            ix += sx;
        } else {
            iy += sy;
        }
        t_enter = t_exit;
    }
    out
}

/// Cells along one axis for a segment from `p` with extent `d` (d != 0).
fn axis_pieces(p: f64, d: f64) -> Vec<(i64, f64, f64)> {
    let s: i64 = if d > 0.0 { 1 } else { -1 };
    let mut i = start_index(p, d);
    let mut out = Vec::new();
    let mut t_enter = 0.0;
    loop {
        let boundary = if s > 0 { i + 1 } else { i } as f64;
        let t_exit = ((boundary - p) / d).min(1.0);
        if t_exit > t_enter {
            out.push((i, t_enter, t_exit));
        }
        if t_exit >= 1.0 {
            break;
        }
        i += s;
        t_enter = t_exit;
    }
    out
}

/// Even-odd point-in-polygon test; `ring` is closed (first == last).
pub(crate) fn point_in_ring(ring: &[(f64, f64)], p: (f64, f64)) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x {
                inside = !inside;
            }
        }
    }
    inside
}

struct Template {
    ncols: i64,
    nrows: i64,
    xll: f64,
    yll: f64,
    cellsize: f64,
}

impl Template {
    fn of(grid: &RasterGrid) -> Self {
        Template {
            ncols: grid.ncols as i64,
            nrows: grid.nrows as i64,
            xll: grid.xll,
            yll: grid.yll,
            cellsize: grid.cellsize,
        }
    }

    fn to_grid(&self, v: &Vertex) -> (f64, f64) {
        ((v.x - self.xll) / self.cellsize, (v.y - self.yll) / self.cellsize)
    }

    fn raster_index(&self, c: GridCell) -> Option<usize> {
        if c.ix < 0 || c.iy < 0 || c.ix >= self.ncols || c.iy >= self.nrows {
            return None;
        }
        let row = self.nrows - 1 - c.iy;
        Some((row * self.ncols + c.ix) as usize)
    }
}

#[derive(Default)]
struct Stamps(BTreeMap<usize, f64>);

impl Stamps {
    fn put(&mut self, t: &Template, c: GridCell, z: f64) {
        if let Some(i) = t.raster_index(c) {
            self.0
                .entry(i)
                .and_modify(|old| *old = old.max(z))
                .or_insert(z);
        }
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Rasterizes one feature; returns `(raster index, z)` pairs sorted by index,
/// one per touched cell (highest z wins within the feature). Cells outside
/// the template are dropped.
pub fn rasterize_feature(f: &ClassifiedFeature, template: &RasterGrid) -> Vec<(usize, f64)> {
    let tpl = Template::of(template);
    let mut stamps = Stamps::default();
    let pts: Vec<(f64, f64)> = f.vertices.iter().map(|v| tpl.to_grid(v)).collect();

    match f.kind {
        FeatureKind::Point => {
            let (gx, gy) = pts[0];
            let cell = GridCell {
                ix: gx.floor() as i64,
                iy: gy.floor() as i64,
            };
            stamps.put(&tpl, cell, f.vertices[0].z);
        }
        FeatureKind::Line | FeatureKind::Polygon => {
            let polygon = f.kind == FeatureKind::Polygon;
            for k in 0..pts.len() - 1 {
                let (za, zb) = (f.vertices[k].z, f.vertices[k + 1].z);
                let (a, b) = (pts[k], pts[k + 1]);
                for visit in traverse(a, b) {
                    match visit {
                        Visit::Cell { cell, t0, t1 } => stamps.put(&tpl, cell, lerp(za, zb, 0.5 * (t0 + t1))),
                        Visit::Corner { cell, t } => stamps.put(&tpl, cell, lerp(za, zb, t)),
                        Visit::OnLine { below, above, t0, t1 } => {
                            let z = lerp(za, zb, 0.5 * (t0 + t1));
                            let side = if polygon {
                                let tm = 0.5 * (t0 + t1);
                                let mid = (lerp(a.0, b.0, tm), lerp(a.1, b.1, tm));
                                // offset across the grid line towards `below`
                                let probe = if a.0 == b.0 {
                                    (mid.0 - 1e-7, mid.1)
                                } else {
                                    (mid.0, mid.1 - 1e-7)
                                };
                                if point_in_ring(&pts, probe) {
                                    below
                                } else {
                                    above
                                }
                            } else {
                                above
                            };
                            stamps.put(&tpl, side, z);
                        }
                    }
                }
            }
            if polygon {
                fill_interior(&pts, &tpl, f.vertices.iter().map(|v| v.z).fold(f64::MIN, f64::max), &mut stamps);
            }
        }
    }
    stamps.0.into_iter().collect()
}

/// Even-odd scanline fill sampled at cell centers.
fn fill_interior(ring: &[(f64, f64)], tpl: &Template, z: f64, stamps: &mut Stamps) {
    let (ymin, ymax) = ring
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    let iy_lo = ((ymin - 0.5).ceil() as i64).max(0);
    let iy_hi = ((ymax - 0.5).floor() as i64).min(tpl.nrows - 1);
    let mut xs = Vec::new();
    for iy in iy_lo..=iy_hi {
        let yc = iy as f64 + 0.5;
        xs.clear();
        for w in ring.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a.1 <= yc && yc < b.1) || (b.1 <= yc && yc < a.1) {
                xs.push(a.0 + (yc - a.1) * (b.0 - a.0) / (b.1 - a.1));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            // centers cx = ix + 0.5 with pair[0] <= cx < pair[1]
            let first = ((pair[0] - 0.5).ceil() as i64).max(0);
            let last = ((pair[1] - 0.5).ceil() as i64 - 1).min(tpl.ncols - 1);
            for ix in first..=last {
                stamps.put(tpl, GridCell { ix, iy }, z);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> RasterGrid {
        RasterGrid::new(n, n, 0.0, 0.0, 1.0, 0.0)
    }

    fn feature(kind: FeatureKind, pts: &[(f64, f64, f64)]) -> ClassifiedFeature {
        ClassifiedFeature::new(1, kind, pts.iter().map(|&(x, y, z)| Vertex::new(x, y, z)).collect()).unwrap()
    }

    fn cells(out: &[(usize, f64)], g: &RasterGrid) -> Vec<(usize, usize)> {
        // (col, iy) for readability
        out.iter().map(|&(i, _)| (i % g.ncols, g.nrows - 1 - i / g.ncols)).collect()
    }

    #[test]
    fn horizontal_line_through_centers() {
        let g = grid(6);
        let f = feature(FeatureKind::Line, &[(0.5, 0.5, 2.0), (3.5, 0.5, 2.0)]);
        let out = rasterize_feature(&f, &g);
        let mut c = cells(&out, &g);
        c.sort();
        assert_eq!(c, vec![(0, 0), (1, 0), (2, 0), (3, 0)]);
        assert!(out.iter().all(|&(_, z)| z == 2.0));
    }

    #[test]
    fn point_at_center() {
        let g = grid(4);
        let f = feature(FeatureKind::Point, &[(2.5, 1.5, 7.0)]);
        assert_eq!(rasterize_feature(&f, &g), vec![(g.index(2, 2), 7.0)]);
    }

    #[test]
    fn unit_square_polygon_covers_one_cell() {
        let g = grid(4);
        let f = feature(
            FeatureKind::Polygon,
            &[(1.0, 1.0, 5.0), (2.0, 1.0, 5.0), (2.0, 2.0, 5.0), (1.0, 2.0, 5.0), (1.0, 1.0, 5.0)],
        );
        assert_eq!(rasterize_feature(&f, &g), vec![(g.index(2, 1), 5.0)]);
    }

    #[test]
    fn diagonal_through_vertices_adds_side_cells() {
        let v = traverse((0.5, 0.5), (2.5, 2.5));
        let got: Vec<GridCell> = v
            .iter()
            .map(|v| match *v {
                Visit::Cell { cell, .. } | Visit::Corner { cell, .. } => cell,
                Visit::OnLine { .. } => unreachable!(),
            })
            .collect();
        let want = [(0, 0), (1, 0), (0, 1), (1, 1), (2, 1), (1, 2), (2, 2)];
        assert_eq!(got, want.iter().map(|&(ix, iy)| GridCell { ix, iy }).collect::<Vec<_>>());
    }

    #[test]
    fn z_interpolated_at_piece_midpoints() {
        let g = grid(4);
        let f = feature(FeatureKind::Line, &[(0.0, 0.5, 0.0), (4.0, 0.5, 4.0)]);
        let out = rasterize_feature(&f, &g);
        let z: Vec<f64> = out.iter().map(|&(_, z)| z).collect();
        assert_eq!(z, vec![0.5, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn clipped_to_template() {
        let g = grid(3);
        let f = feature(FeatureKind::Line, &[(-5.5, 1.5, 1.0), (10.5, 1.5, 1.0)]);
        assert_eq!(rasterize_feature(&f, &g).len(), 3);
    }

    #[test]
    fn line_on_grid_line_takes_upper_side() {
        let g = grid(4);
        let f = feature(FeatureKind::Line, &[(0.5, 2.0, 1.0), (2.5, 2.0, 1.0)]);
        let mut c = cells(&rasterize_feature(&f, &g), &g);
        c.sort();
        assert_eq!(c, vec![(0, 2), (1, 2), (2, 2)]);
    }

    #[test]
    fn polygon_interior_gets_vertex_max() {
        let g = grid(8);
        let f = feature(
            FeatureKind::Polygon,
            &[(1.2, 1.2, 3.0), (6.8, 1.2, 3.0), (6.8, 6.8, 4.0), (1.2, 6.8, 4.0), (1.2, 1.2, 3.0)],
        );
        let out = rasterize_feature(&f, &g);
        assert_eq!(out.len(), 36);
        let center = out.iter().find(|&&(i, _)| i == g.index(4, 3)).unwrap();
        assert_eq!(center.1, 4.0);
    }

    fn four_connected(a: GridCell, b: GridCell) -> bool {
        (a.ix - b.ix).abs() + (a.iy - b.iy).abs() == 1
    }

    proptest! {
        #[test]
        fn segment_chain_is_four_connected(
            x0 in -3.0f64..13.0, y0 in -3.0f64..13.0, x1 in -3.0f64..13.0, y1 in -3.0f64..13.0,
            snap in proptest::bool::ANY,
        ) {
            // snapping to half-cells produces exact vertex crossings
            let q = |v: f64| if snap { (v * 2.0).round() / 2.0 } else { v };
            let (a, b) = ((q(x0), q(y0)), (q(x1), q(y1)));
            let visits = traverse(a, b);
            let corners: Vec<GridCell> = visits.iter().filter_map(|v| match *v {
                Visit::Corner { cell, .. } => Some(cell),
                _ => None,
            }).collect();
            let main: Vec<GridCell> = visits.iter().filter_map(|v| match *v {
                Visit::Cell { cell, .. } => Some(cell),
                Visit::OnLine { above, .. } => Some(above),
                Visit::Corner { .. } => None,
            }).collect();
            // consecutive cells either share an edge or are bridged by a side cell
            for w in main.windows(2) {
                let linked = four_connected(w[0], w[1])
                    || corners.iter().any(|&s| four_connected(w[0], s) && four_connected(s, w[1]));
                prop_assert!(linked, "diagonal-only step {:?} -> {:?}", w[0], w[1]);
            }
            // the parameter intervals of interior pieces tile [0, 1]
            let mut t = 0.0;
            for v in traverse(a, b) {
                match v {
                    Visit::Cell { t0, t1, .. } | Visit::OnLine { t0, t1, .. } => {
                        prop_assert_eq!(t0, t);
                        t = t1;
                    }
                    Visit::Corner { .. } => {}
                }
            }
            if a != b { prop_assert_eq!(t, 1.0); }
        }
    }
}
