//! Synthetic valley terrain for demonstrations and end-to-end tests.
//!
//! The valley drains west to east. A rectangular channel runs along its
//! axis, the floodplain rises parabolically towards the valley sides and
//! two raised benches sit on the floodplain, each shielded from the channel
//! by a tall wall of single-cell thickness.

use crate::raster::RasterGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Valley {
    pub ncols: usize,
    pub nrows: usize,
    pub cellsize: f64,
    /// Down-valley bed slope.
    pub slope: f64,
    /// Channel width in cells.
    pub channel_cells: usize,
    /// Floodplain height above the channel bed at the bank.
    pub bank_height: f64,
    /// Rise of the floodplain from the bank to the valley side.
    pub side_rise: f64,
    pub bench_height: f64,
    pub wall_height: f64,
}

impl Default for Valley {
    fn default() -> Self {
        Valley {
            ncols: 200,
            nrows: 150,
            cellsize: 5.0,
            slope: 1e-3,
            channel_cells: 6,
            bank_height: 0.3,
            side_rise: 4.0,
            bench_height: 0.3,
            wall_height: 4.0,
        }
    }
}

/// Rectangle of raster cells, half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub rows: (usize, usize),
    pub cols: (usize, usize),
}

impl CellRect {
    fn contains(&self, row: usize, col: usize) -> bool {
        (self.rows.0..self.rows.1).contains(&row) && (self.cols.0..self.cols.1).contains(&col)
    }
}

impl Valley {
    /// Raster rows occupied by the channel.
    pub fn channel_rows(&self) -> (usize, usize) {
        let start = (self.nrows - self.channel_cells) / 2;
        (start, start + self.channel_cells)
    }

    /// Bench footprints: one north and one south of the channel.
    pub fn benches(&self) -> [CellRect; 2] {
        let (c0, c1) = self.channel_rows();
        let gap = (self.nrows / 30).max(2);
        let depth = (self.nrows / 8).max(3);
        let w = self.ncols / 4;
        [
            CellRect {
                rows: (c0.saturating_sub(gap + depth), c0 - gap),
                cols: (self.ncols / 4, self.ncols / 4 + w),
            },
            CellRect {
                rows: (c1 + gap, (c1 + gap + depth).min(self.nrows)),
                cols: (self.ncols / 2, self.ncols / 2 + w),
            },
        ]
    }

    fn bed(&self, col: usize) -> f64 {
        self.slope * (self.ncols - 1 - col) as f64 * self.cellsize
    }

    /// Wall cells: the bench edge facing the channel plus both bench ends.
    fn is_wall(&self, row: usize, col: usize) -> bool {
        let (c0, _) = self.channel_rows();
        self.benches().iter().any(|b| {
            let facing = if b.rows.1 <= c0 { b.rows.1 - 1 } else { b.rows.0 };
            b.contains(row, col) && (row == facing || col == b.cols.0 || col == b.cols.1 - 1)
        })
    }

    pub fn dsm(&self) -> RasterGrid {
        let mut g = RasterGrid::new(self.ncols, self.nrows, 0.0, 0.0, self.cellsize, 0.0);
        let (c0, c1) = self.channel_rows();
        let half = (self.nrows as f64 - self.channel_cells as f64) / 2.0;
        let benches = self.benches();
        for row in 0..self.nrows {
            for col in 0..self.ncols {
                let bed = self.bed(col);
                let z = if (c0..c1).contains(&row) {
                    bed
                } else {
                    let d = if row < c0 { c0 - row } else { row + 1 - c1 } as f64;
                    let mut z = bed + self.bank_height + self.side_rise * (d / half).powi(2);
                    if benches.iter().any(|b| b.contains(row, col)) {
                        z += self.bench_height;
                    }
                    if self.is_wall(row, col) {
                        z = bed + self.wall_height;
                    }
                    z
                };
                g.set(row, col, z);
            }
        }
        g
    }

    /// Channel cells on the west edge, as raster `(row, col)`.
    pub fn inflow_mask(&self) -> Vec<(usize, usize)> {
        let (c0, c1) = self.channel_rows();
        (c0..c1).map(|r| (r, 0)).collect()
    }
}
