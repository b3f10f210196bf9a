//! Block decomposition of the grid with two-deep halos.
//!
//! Blocks own disjoint interior ranges; halos are written only by
//! [`exchange_halos`], which gathers every incoming strip before writing
//! any of them, so the result does not depend on scheduling.

use rayon::prelude::*;

use crate::boundary::Edge;
use crate::error::{Error, Result};
use crate::state::{Grid, GHOST};

/// One block, in internal coordinates (`i` west to east, `j` south to north).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub i0: usize,
    pub j0: usize,
    pub nx: usize,
    pub ny: usize,
    /// Neighbouring block per edge, indexed by [`Edge::index`].
    pub neighbors: [Option<usize>; 4],
}

impl Block {
    pub fn neighbor(&self, e: Edge) -> Option<usize> {
        self.neighbors[e.index()]
    }

    /// Raster rows (0 = north) covered by this block in a grid of `nrows`.
    pub fn raster_rows(&self, nrows: usize) -> std::ops::Range<usize> {
        nrows - self.j0 - self.ny..nrows - self.j0
    }

    pub fn cols(&self) -> std::ops::Range<usize> {
        self.i0..self.i0 + self.nx
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub nrows: usize,
    pub ncols: usize,
    /// Block rows and block columns of the tiling.
    pub block_rows: usize,
    pub block_cols: usize,
    /// Row-major from the south-west block.
    pub blocks: Vec<Block>,
}

pub const HALO: usize = GHOST;

/// Splits `n` into `parts` contiguous ranges whose sizes differ by at most 1,
/// larger ones first.
fn split(n: usize, parts: usize) -> Vec<(usize, usize)> {
    let (base, extra) = (n / parts, n % parts);
    let mut start = 0;
    (0..parts)
        .map(|p| {
            let len = base + usize::from(p < extra);
            let r = (start, len);
            start += len;
            r
        })
        .collect()
}

/// Tiles an `nrows × ncols` grid with `nblocks` blocks arranged as the
/// factorization `block_rows × block_cols` with the smallest block
/// half-perimeter. Multi-block tilings need every block to be at least two
/// cells wide in both directions so that a halo never spans two blocks.
pub fn partition(nrows: usize, ncols: usize, nblocks: usize) -> Result<Partition> {
    if nblocks == 0 {
        return Err(Error::Partition("number of blocks must be at least 1".into()));
    }
    if nrows == 0 || ncols == 0 {
        return Err(Error::Partition("grid is empty".into()));
    }
    if nblocks > nrows * ncols {
        return Err(Error::Partition(format!(
            "{nblocks} blocks requested for only {} cells",
            nrows * ncols
        )));
    }
    let min = if nblocks == 1 { 1 } else { HALO };
    let best = (1..=nblocks)
        .filter(|pr| nblocks.is_multiple_of(*pr))
        .map(|pr| (pr, nblocks / pr))
        .filter(|&(pr, pc)| nrows / pr >= min && ncols / pc >= min)
        .min_by(|a, b| {
            let cost = |&(pr, pc): &(usize, usize)| nrows as f64 / pr as f64 + ncols as f64 / pc as f64;
            cost(a).total_cmp(&cost(b))
        })
        .ok_or_else(|| {
            Error::Partition(format!(
                "no tiling of {nrows}x{ncols} into {nblocks} blocks keeps every block at least {HALO} cells wide"
            ))
        })?;
    let (pr, pc) = best;
    let rows = split(nrows, pr);
    let cols = split(ncols, pc);
    let mut blocks = Vec::with_capacity(nblocks);
    for (br, &(j0, ny)) in rows.iter().enumerate() {
        for (bc, &(i0, nx)) in cols.iter().enumerate() {
            let id = |r: usize, c: usize| r * pc + c;
            let mut neighbors = [None; 4];
            neighbors[Edge::South.index()] = (br > 0).then(|| id(br - 1, bc));
            neighbors[Edge::North.index()] = (br + 1 < pr).then(|| id(br + 1, bc));
            neighbors[Edge::West.index()] = (bc > 0).then(|| id(br, bc - 1));
            neighbors[Edge::East.index()] = (bc + 1 < pc).then(|| id(br, bc + 1));
            blocks.push(Block { i0, j0, nx, ny, neighbors });
        }
    }
    Ok(Partition {
        nrows,
        ncols,
        block_rows: pr,
        block_cols: pc,
        blocks,
    })
}

impl Partition {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block owning internal cell `(i, j)`.
    pub fn owner(&self, i: usize, j: usize) -> usize {
        self.blocks
            .iter()
            .position(|b| (b.i0..b.i0 + b.nx).contains(&i) && (b.j0..b.j0 + b.ny).contains(&j))
            .expect("cell outside the partitioned grid")
    }

    /// Copies the global interior into per-block grids (halos left untouched).
    pub fn scatter<T: Copy + Send + Sync>(&self, global: &Grid<T>, fill: T) -> Vec<Grid<T>> {
        self.blocks
            .par_iter()
            .map(|b| {
                let mut g = Grid::new(b.nx, b.ny, fill);
                for j in 0..b.ny {
                    for i in 0..b.nx {
                        g.set(i as isize, j as isize, global.get((b.i0 + i) as isize, (b.j0 + j) as isize));
                    }
                }
                g
            })
            .collect()
    }

    /// Writes block interiors back into `global`.
    pub fn gather<T: Copy>(&self, parts: &[&Grid<T>], global: &mut Grid<T>) {
        for (b, g) in self.blocks.iter().zip(parts) {
            for j in 0..b.ny {
                for i in 0..b.nx {
                    global.set((b.i0 + i) as isize, (b.j0 + j) as isize, g.get(i as isize, j as isize));
                }
            }
        }
    }
}

/// Strip of halo values destined for one edge of one block.
struct Strip<T> {
    edge: Edge,
    values: Vec<T>,
}

/// Reads the two cell layers of `src` that face `toward` its neighbour,
/// in the layout of the receiving halo. `with_corners` extends strips along
/// the edge into the halo, which is how the second phase carries corners.
fn read_strip<T: Copy>(src: &Grid<T>, toward: Edge, with_corners: bool) -> Vec<T> {
    let (nx, ny) = (src.nx() as isize, src.ny() as isize);
    let g = HALO as isize;
    let ext = if with_corners { g } else { 0 };
    let mut out = Vec::new();
    match toward {
        Edge::East | Edge::West => {
            let cols = if toward == Edge::East { nx - g..nx } else { 0..g };
            for j in -ext..ny + ext {
                for i in cols.clone() {
                    out.push(src.get(i, j));
                }
            }
        }
        Edge::North | Edge::South => {
            let rows = if toward == Edge::North { ny - g..ny } else { 0..g };
            for j in rows {
                for i in -ext..nx + ext {
                    out.push(src.get(i, j));
                }
            }
        }
    }
    out
}

/// Writes a strip received from the neighbour across `edge`.
fn write_strip<T: Copy>(dst: &mut Grid<T>, edge: Edge, with_corners: bool, values: &[T]) {
    let (nx, ny) = (dst.nx() as isize, dst.ny() as isize);
    let g = HALO as isize;
    let ext = if with_corners { g } else { 0 };
    let mut it = values.iter();
    match edge {
        Edge::East | Edge::West => {
            let cols = if edge == Edge::East { nx..nx + g } else { -g..0 };
            for j in -ext..ny + ext {
                for i in cols.clone() {
                    dst.set(i, j, *it.next().expect("halo strip too short"));
                }
            }
        }
        Edge::North | Edge::South => {
            let rows = if edge == Edge::North { ny..ny + g } else { -g..0 };
            for j in rows {
                for i in -ext..nx + ext {
                    dst.set(i, j, *it.next().expect("halo strip too short"));
                }
            }
        }
    }
    assert!(it.next().is_none(), "halo strip too long");
}

fn opposite(e: Edge) -> Edge {
    match e {
        Edge::North => Edge::South,
        Edge::South => Edge::North,
        Edge::East => Edge::West,
        Edge::West => Edge::East,
    }
}

fn exchange_phase<T: Copy + Send + Sync>(fields: &mut [&mut Grid<T>], part: &Partition, edges: [Edge; 2], corners: bool) {
    let incoming: Vec<Vec<Strip<T>>> = {
        let views: Vec<&Grid<T>> = fields.iter().map(|f| &**f).collect();
        part.blocks
            .par_iter()
            .map(|b| {
                edges
                    .iter()
                    .filter_map(|&e| {
                        b.neighbor(e).map(|n| Strip {
                            edge: e,
                            values: read_strip(views[n], opposite(e), corners),
                        })
                    })
                    .collect()
            })
            .collect()
    };
    fields.par_iter_mut().zip(incoming).for_each(|(f, strips)| {
        for s in strips {
            write_strip(f, s.edge, corners, &s.values);
        }
    });
}

/// Fills every block halo that faces another block with that block's
/// interior, west/east first and then south/north including corners.
/// Halos on the domain boundary are left for the boundary conditions.
pub fn exchange_halos<T: Copy + Send + Sync>(fields: &mut [&mut Grid<T>], part: &Partition) {
    assert_eq!(fields.len(), part.blocks.len(), "one field per block expected");
    for (f, b) in fields.iter().zip(&part.blocks) {
        assert_eq!((f.nx(), f.ny()), (b.nx, b.ny), "field does not match its block");
    }
    if part.blocks.len() == 1 {
        return;
    }
    exchange_phase(fields, part, [Edge::West, Edge::East], false);
    exchange_phase(fields, part, [Edge::South, Edge::North], true);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Min,
    Max,
    Sum,
}

/// Combines per-block partials over a fixed binary tree: the split points
/// depend only on the number of partials.
pub fn global_reduce(partials: &[f64], op: ReduceOp) -> f64 {
    fn tree(x: &[f64], op: ReduceOp) -> f64 {
        match x.len() {
            1 => x[0],
            n => {
                let (a, b) = x.split_at(n / 2);
                let (l, r) = (tree(a, op), tree(b, op));
                match op {
                    ReduceOp::Min => l.min(r),
                    ReduceOp::Max => l.max(r),
                    ReduceOp::Sum => l + r,
                }
            }
        }
    }
    if partials.is_empty() {
        return match op {
            ReduceOp::Min => f64::INFINITY,
            ReduceOp::Max => f64::NEG_INFINITY,
            ReduceOp::Sum => 0.0,
        };
    }
    tree(partials, op)
}
