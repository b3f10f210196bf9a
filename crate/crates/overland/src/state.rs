//! Simulation state on a ghost-padded structured grid.
//!
//! Internally columns run west to east (`i`) and rows run south to north
//! (`j`), so `j = nrows - 1 - raster_row`. Every field carries [`GHOST`]
//! layers of ghost cells on each side.

use crate::error::{Error, Result};
use crate::raster::RasterGrid;

/// Ghost layers per side; the MUSCL stencil of a ghost cell next to the
/// boundary interface reaches one cell further out.
pub const GHOST: usize = 2;
const G: isize = GHOST as isize;

/// A padded 2D array indexed by signed interior coordinates, so that
/// `(-2..nx+2, -2..ny+2)` is the addressable range.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    nx: usize,
    ny: usize,
    data: Vec<T>,
}

pub type Field = Grid<f64>;

impl<T: Copy> Grid<T> {
    pub fn new(nx: usize, ny: usize, fill: T) -> Self {
        Grid {
            nx,
            ny,
            data: vec![fill; (nx + 2 * GHOST) * (ny + 2 * GHOST)],
        }
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn stride(&self) -> usize {
        self.nx + 2 * GHOST
    }

    #[inline]
    pub fn idx(&self, i: isize, j: isize) -> usize {
        debug_assert!(i >= -G && i < self.nx as isize + G && j >= -G && j < self.ny as isize + G);
        ((j + G) as usize) * self.stride() + (i + G) as usize
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize) -> T {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, v: T) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Interior values in internal order (j-major, south first).
    pub fn interior(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny as isize {
            let a = self.idx(0, j);
            out.extend_from_slice(&self.data[a..a + self.nx]);
        }
        out
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }
}

/// Physical and numerical constants of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Gravity, m/s².
    pub g: f64,
    /// Uniform Manning coefficient, s·m^(-1/3).
    pub manning_n: f64,
    /// Depth below which a cell is treated as dry, m.
    pub h_dry: f64,
    pub cfl: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            g: 9.81,
            manning_n: 0.0,
            h_dry: 1e-10,
            cfl: 0.5,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0 && self.g.is_finite()) {
            return Err(Error::Config(format!("g must be positive, got {}", self.g)));
        }
        if !(self.manning_n >= 0.0 && self.manning_n.is_finite()) {
            return Err(Error::Config(format!("manning_n must be >= 0, got {}", self.manning_n)));
        }
        if !(self.h_dry > 0.0 && self.h_dry.is_finite()) {
            return Err(Error::Config(format!("h_dry must be positive, got {}", self.h_dry)));
        }
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return Err(Error::Config(format!("cfl must be positive, got {}", self.cfl)));
        }
        if self.cfl > 1.0 {
            log::warn!("cfl = {} exceeds 1; the scheme is not expected to be stable", self.cfl);
        }
        Ok(())
    }
}

/// Velocity from depth and discharge, zero on dry cells.
#[inline]
pub fn velocity(h: f64, hu: f64, h_dry: f64) -> f64 {
    if h > h_dry {
        hu / h
    } else {
        0.0
    }
}

#[inline]
pub fn to_primitive(h: f64, hu: f64, hv: f64, h_dry: f64) -> (f64, f64, f64) {
    (h, velocity(h, hu, h_dry), velocity(h, hv, h_dry))
}

#[inline]
pub fn to_conserved(h: f64, u: f64, v: f64) -> (f64, f64, f64) {
    (h, h * u, h * v)
}

/// How initial water depth is specified.
#[derive(Debug, Clone)]
pub enum InitialDepth {
    Uniform(f64),
    /// Per-cell depths on the DSM grid; nodata means dry.
    PerCell(RasterGrid),
    /// Still water surface elevation: `h = max(level - z, 0)`.
    SurfaceLevel(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub xll: f64,
    pub yll: f64,
    pub h: Field,
    pub hu: Field,
    pub hv: Field,
    pub z: Field,
    /// Internal wall cells (masked nodata), never wet.
    pub wall: Grid<bool>,
}

impl State {
    pub fn new(nx: usize, ny: usize, cellsize: f64) -> Self {
        State {
            nx,
            ny,
            dx: cellsize,
            dy: cellsize,
            xll: 0.0,
            yll: 0.0,
            h: Field::new(nx, ny, 0.0),
            hu: Field::new(nx, ny, 0.0),
            hv: Field::new(nx, ny, 0.0),
            z: Field::new(nx, ny, 0.0),
            wall: Grid::new(nx, ny, false),
        }
    }

    /// Builds a state from a DSM. Nodata cells become internal walls when
    /// `mask_nodata` is set and are a configuration error otherwise.
    pub fn from_dsm(dsm: &RasterGrid, initial: &InitialDepth, mask_nodata: bool) -> Result<Self> {
        dsm.validate()?;
        let (nx, ny) = (dsm.ncols, dsm.nrows);
        let mut s = State::new(nx, ny, dsm.cellsize);
        s.xll = dsm.xll;
        s.yll = dsm.yll;
        if let InitialDepth::PerCell(g) = initial {
            if (g.ncols, g.nrows) != (nx, ny) {
                return Err(Error::DimensionMismatch(format!(
                    "initial depth grid is {}x{}, DSM is {}x{}",
                    g.nrows, g.ncols, ny, nx
                )));
            }
        }
        for row in 0..ny {
            let j = (ny - 1 - row) as isize;
            for col in 0..nx {
                let i = col as isize;
                let k = dsm.index(row, col);
                if dsm.is_nodata(k) {
                    if !mask_nodata {
                        return Err(Error::Config(format!(
                            "DSM has nodata at row {row}, col {col}; enable wall masking to treat it as a wall"
                        )));
                    }
                    s.wall.set(i, j, true);
                    continue;
                }
                let z = dsm.values[k];
                let h = match initial {
                    InitialDepth::Uniform(h) => *h,
                    InitialDepth::PerCell(g) if g.is_nodata(k) => 0.0,
                    InitialDepth::PerCell(g) => g.values[k],
                    InitialDepth::SurfaceLevel(level) => (level - z).max(0.0),
                };
                if !(h >= 0.0 && h.is_finite()) {
                    return Err(Error::Config(format!("initial depth {h} at row {row}, col {col} is invalid")));
                }
                s.z.set(i, j, z);
                s.h.set(i, j, h);
            }
        }
        Ok(s)
    }

    #[inline]
    pub fn raster_row(&self, j: usize) -> usize {
        self.ny - 1 - j
    }

    /// Total water volume Σ h·dx·dy over interior cells, in a fixed order.
    pub fn volume(&self) -> f64 {
        let mut sum = 0.0;
        for j in 0..self.ny as isize {
            for i in 0..self.nx as isize {
                sum += self.h.get(i, j);
            }
        }
        sum * self.dx * self.dy
    }

    pub fn min_depth(&self) -> f64 {
        let mut m = f64::INFINITY;
        for j in 0..self.ny as isize {
            for i in 0..self.nx as isize {
                m = m.min(self.h.get(i, j));
            }
        }
        m
    }

    /// Copies an interior field into a raster with this state's georeferencing.
    pub fn field_to_raster(&self, f: &Field) -> RasterGrid {
        let mut r = RasterGrid::new(self.nx, self.ny, self.xll, self.yll, self.dx, 0.0);
        for j in 0..self.ny {
            let row = self.raster_row(j);
            for i in 0..self.nx {
                r.set(row, i, f.get(i as isize, j as isize));
            }
        }
        r
    }

    /// Derived velocity rasters `(u, v)`.
    pub fn velocity_rasters(&self, h_dry: f64) -> (RasterGrid, RasterGrid) {
        let mut u = self.field_to_raster(&self.h);
        let mut v = u.clone();
        for j in 0..self.ny {
            let row = self.raster_row(j);
            for i in 0..self.nx {
                let (ii, jj) = (i as isize, j as isize);
                let h = self.h.get(ii, jj);
                u.set(row, i, velocity(h, self.hu.get(ii, jj), h_dry));
                v.set(row, i, velocity(h, self.hv.get(ii, jj), h_dry));
            }
        }
        (u, v)
    }

    pub fn dem_raster(&self) -> RasterGrid {
        let mut r = self.field_to_raster(&self.z);
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.wall.get(i as isize, j as isize) {
                    let row = self.raster_row(j);
                    r.set(row, i, r.nodata);
                }
            }
        }
        r
    }
}
