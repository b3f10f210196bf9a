//! Ghost-cell filling for the domain edges.
//!
//! Each edge carries one condition. An imposed-discharge edge only lets water
//! in through its riverbed mask; the rest of the edge is a wall. On masked
//! cells the ghost state is closed with the discharge and the Riemann
//! invariant carried out of the domain by the outgoing characteristic.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::simulation::Forcing;
use crate::state::{Field, PhysicalParams, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    North,
    South,
    East,
    West,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::North, Edge::South, Edge::East, Edge::West];

    pub fn index(self) -> usize {
        match self {
            Edge::North => 0,
            Edge::South => 1,
            Edge::East => 2,
            Edge::West => 3,
        }
    }

    /// Number of cells along the edge.
    pub fn len(self, nx: usize, ny: usize) -> usize {
        match self {
            Edge::North | Edge::South => nx,
            Edge::East | Edge::West => ny,
        }
    }

    /// +1 when the inward normal points along +x/+y.
    pub fn inward_sign(self) -> f64 {
        match self {
            Edge::West | Edge::South => 1.0,
            Edge::East | Edge::North => -1.0,
        }
    }

    /// Internal `(i, j)` of the cell at position `k` along the edge and
    /// `layer` cells inwards (`layer < 0` addresses ghost layers).
    #[inline]
    pub fn cell(self, nx: usize, ny: usize, k: isize, layer: isize) -> (isize, isize) {
        match self {
            Edge::West => (layer, k),
            Edge::East => (nx as isize - 1 - layer, k),
            Edge::South => (k, layer),
            Edge::North => (k, ny as isize - 1 - layer),
        }
    }

    fn is_x_normal(self) -> bool {
        matches!(self, Edge::East | Edge::West)
    }

    pub fn parse(s: &str) -> Option<Edge> {
        match s.to_ascii_lowercase().as_str() {
            "north" | "n" => Some(Edge::North),
            "south" | "s" => Some(Edge::South),
            "east" | "e" => Some(Edge::East),
            "west" | "w" => Some(Edge::West),
            _ => None,
        }
    }
}

/// Imposed discharge through part of an edge.
#[derive(Debug, Clone)]
pub struct DischargeInflow {
    pub forcing: Arc<Forcing>,
    /// Per-position flag along the edge (internal ordering).
    mask: Vec<bool>,
    count: usize,
}

impl DischargeInflow {
    /// `cells` are raster `(row, col)` pairs that must lie on `edge`.
    pub fn new(edge: Edge, forcing: Arc<Forcing>, cells: &[(usize, usize)], nrows: usize, ncols: usize) -> Result<Self> {
        let len = edge.len(ncols, nrows);
        let mut mask = vec![false; len];
        for &(row, col) in cells {
            let on_edge = row < nrows
                && col < ncols
                && match edge {
                    Edge::North => row == 0,
                    Edge::South => row == nrows - 1,
                    Edge::West => col == 0,
                    Edge::East => col == ncols - 1,
                };
            if !on_edge {
                return Err(Error::Config(format!(
                    "riverbed mask cell (row {row}, col {col}) is not on the {edge:?} edge"
                )));
            }
            let k = match edge {
                Edge::North | Edge::South => col,
                Edge::East | Edge::West => nrows - 1 - row,
            };
            mask[k] = true;
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(Error::Config(format!("riverbed mask on the {edge:?} edge is empty")));
        }
        Ok(DischargeInflow { forcing, mask, count })
    }

    /// Whole edge open.
    pub fn full_edge(edge: Edge, forcing: Arc<Forcing>, nrows: usize, ncols: usize) -> Self {
        let len = edge.len(ncols, nrows);
        DischargeInflow {
            forcing,
            mask: vec![true; len],
            count: len,
        }
    }

    pub fn masked_cells(&self) -> usize {
        self.count
    }

    pub fn is_masked(&self, k: usize) -> bool {
        self.mask[k]
    }

    pub fn edge_len(&self) -> usize {
        self.mask.len()
    }

    /// Unit discharge of every masked cell, `Q(t) / (n_mask · Δ)`.
    pub fn unit_discharge(&self, t: f64, spacing: f64) -> f64 {
        self.forcing.q_at(t) / (self.count as f64 * spacing)
    }
}

/// Reads a riverbed mask file: one `row col` pair per line, `#` comments.
pub fn parse_mask(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<&str> = line.split_whitespace().collect();
        let parsed = match nums.as_slice() {
            [r, c] => r.parse::<usize>().ok().zip(c.parse::<usize>().ok()),
            _ => None,
        };
        out.push(parsed.ok_or_else(|| Error::parse(i + 1, format!("expected `row col`, found `{line}`")))?);
    }
    Ok(out)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
    parse_mask(&text)
}

#[derive(Debug, Clone)]
pub enum EdgeCondition {
    Wall,
    FreeOutflow,
    Discharge(DischargeInflow),
}

#[derive(Debug, Clone)]
pub struct BoundarySpec {
    pub north: EdgeCondition,
    pub south: EdgeCondition,
    pub east: EdgeCondition,
    pub west: EdgeCondition,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec::uniform(EdgeCondition::Wall)
    }
}

impl BoundarySpec {
    pub fn uniform(c: EdgeCondition) -> Self {
        BoundarySpec {
            north: c.clone(),
            south: c.clone(),
            east: c.clone(),
            west: c,
        }
    }

    pub fn get(&self, e: Edge) -> &EdgeCondition {
        match e {
            Edge::North => &self.north,
            Edge::South => &self.south,
            Edge::East => &self.east,
            Edge::West => &self.west,
        }
    }

    pub fn set(&mut self, e: Edge, c: EdgeCondition) {
        match e {
            Edge::North => self.north = c,
            Edge::South => self.south = c,
            Edge::East => self.east = c,
            Edge::West => self.west = c,
        }
    }

    pub fn validate(&self, nx: usize, ny: usize) -> Result<()> {
        for e in Edge::ALL {
            if let EdgeCondition::Discharge(d) = self.get(e) {
                if d.edge_len() != e.len(nx, ny) {
                    return Err(Error::Config(format!(
                        "{e:?} discharge mask has length {}, edge has {} cells",
                        d.edge_len(),
                        e.len(nx, ny)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Ghost state of an inflow cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflowState {
    pub h: f64,
    /// Inward normal velocity.
    pub u: f64,
    /// True when no subcritical state exists and the critical state was used.
    pub critical: bool,
}

/// Solves `u_b h_b = q_b` together with `u_b - 2√(g h_b) = u_i - 2√(g h_i)`
/// for the subcritical ghost state. `u_i` is the interior velocity along the
/// inward normal. Falls back to the critical state for `q_b` when the demand
/// cannot be met subcritically.
pub fn riemann_inflow(h_i: f64, u_i: f64, q_b: f64, g: f64) -> InflowState {
    let invariant = u_i - 2.0 * (g * h_i.max(0.0)).sqrt();
    if q_b <= 0.0 {
        if u_i == 0.0 {
            return InflowState {
                h: h_i,
                u: 0.0,
                critical: false,
            };
        }
        // -2√(g h) = R; no admissible state when the interior leaves supercritically
        return if invariant < 0.0 {
            InflowState {
                h: 0.25 * invariant * invariant / g,
                u: 0.0,
                critical: false,
            }
        } else {
            InflowState {
                h: 0.0,
                u: 0.0,
                critical: true,
            }
        };
    }

    let f = |h: f64| q_b / h - 2.0 * (g * h).sqrt() - invariant;
    let df = |h: f64| -q_b / (h * h) - (g / h).sqrt();
    let h_crit = (q_b * q_b / g).cbrt();
    let critical = InflowState {
        h: h_crit,
        u: q_b / h_crit,
        critical: true,
    };
    if f(h_crit).is_nan() || f(h_crit) <= 0.0 {
        return critical;
    }

    let mut lo = h_crit;
    let mut hi = h_crit.max(h_i).max(f64::MIN_POSITIVE) * 2.0;
    let mut guard = 0;
    while f(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return critical;
        }
    }
    let mut x = if h_i > lo && h_i < hi { h_i } else { 0.5 * (lo + hi) };
    for _ in 0..100 {
        let fx = f(x);
        if fx.abs() <= 1e-12 {
            break;
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / df(x);
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    InflowState {
        h: x,
        u: q_b / x,
        critical: false,
    }
}

/// Counters raised while filling ghosts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BoundaryCounters {
    pub critical_fallbacks: u64,
}

fn normal_field(s: &mut State, e: Edge) -> (&mut Field, &mut Field) {
    if e.is_x_normal() {
        (&mut s.hu, &mut s.hv)
    } else {
        (&mut s.hv, &mut s.hu)
    }
}

/// Fills the ghost layers of one edge of `state`.
///
/// `state` may be a sub-block of the domain: `offset` is the position of
/// its first cell along the edge in global edge coordinates, which is how
/// the riverbed mask is addressed.
pub fn fill_edge(
    state: &mut State,
    edge: Edge,
    cond: &EdgeCondition,
    t: f64,
    params: &PhysicalParams,
    offset: usize,
    counters: &mut BoundaryCounters,
) {
    let (nx, ny) = (state.nx, state.ny);
    let len = edge.len(nx, ny) as isize;
    let sign = edge.inward_sign();
    let spacing = if edge.is_x_normal() { state.dy } else { state.dx };
    let q_unit = match cond {
        EdgeCondition::Discharge(d) => d.unit_discharge(t, spacing),
        _ => 0.0,
    };

    for k in 0..len {
        let inflow = match cond {
            EdgeCondition::Discharge(d) if d.is_masked(offset + k as usize) => {
                let (i0, j0) = edge.cell(nx, ny, k, 0);
                let h_i = state.h.get(i0, j0);
                let q_n = if edge.is_x_normal() { state.hu.get(i0, j0) } else { state.hv.get(i0, j0) };
                let w_i = sign * crate::state::velocity(h_i, q_n, params.h_dry);
                let b = riemann_inflow(h_i, w_i, q_unit, params.g);
                if b.critical {
                    counters.critical_fallbacks += 1;
                }
                Some((b, state.z.get(i0, j0)))
            }
            _ => None,
        };
        for layer in 1..=2isize {
            let (gi, gj) = edge.cell(nx, ny, k, -layer);
            match (cond, inflow) {
                (_, Some((b, z0))) => {
                    state.h.set(gi, gj, b.h);
                    state.z.set(gi, gj, z0);
                    state.wall.set(gi, gj, false);
                    let (qn, qt) = normal_field(state, edge);
                    qn.set(gi, gj, sign * b.h * b.u);
                    qt.set(gi, gj, 0.0);
                }
                (EdgeCondition::FreeOutflow, None) => {
                    let src = edge.cell(nx, ny, k, 0);
                    copy_cell(state, src, (gi, gj));
                }
                _ => {
                    // wall: mirror about the edge, reversing the normal discharge
                    let src = edge.cell(nx, ny, k, layer - 1);
                    copy_cell(state, src, (gi, gj));
                    let (qn, _) = normal_field(state, edge);
                    qn.set(gi, gj, -qn.get(gi, gj));
                }
            }
        }
    }
}

fn copy_cell(state: &mut State, src: (isize, isize), dst: (isize, isize)) {
    state.h.set(dst.0, dst.1, state.h.get(src.0, src.1));
    state.z.set(dst.0, dst.1, state.z.get(src.0, src.1));
    state.wall.set(dst.0, dst.1, state.wall.get(src.0, src.1));
    state.hu.set(dst.0, dst.1, state.hu.get(src.0, src.1));
    state.hv.set(dst.0, dst.1, state.hv.get(src.0, src.1));
}

/// Fills the ghost layers of all four edges of a whole-domain state.
pub fn apply_boundaries(state: &mut State, spec: &BoundarySpec, t: f64, params: &PhysicalParams) -> BoundaryCounters {
    let mut counters = BoundaryCounters::default();
    for e in Edge::ALL {
        fill_edge(state, e, spec.get(e), t, params, 0, &mut counters);
    }
    counters
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{Forcing, Hydrograph};

    const G: f64 = 9.81;

    fn state3() -> State {
        let mut s = State::new(3, 3, 1.0);
        for j in 0..3 {
            for i in 0..3 {
                s.h.set(i, j, 1.0 + 0.1 * i as f64);
                s.hu.set(i, j, 2.0 * s.h.get(i, j));
                s.hv.set(i, j, 3.0 * s.h.get(i, j));
                s.z.set(i, j, 0.5 * j as f64);
            }
        }
        s
    }

    #[test]
    fn wall_mirrors() {
        let mut s = State::new(2, 1, 1.0);
        s.h.set(0, 0, 1.0);
        s.hu.set(0, 0, 2.0);
        s.hv.set(0, 0, 3.0);
        s.h.set(1, 0, 0.5);
        apply_boundaries(&mut s, &BoundarySpec::default(), 0.0, &PhysicalParams::default());
        assert_eq!((s.h.get(-1, 0), s.hu.get(-1, 0), s.hv.get(-1, 0)), (1.0, -2.0, 3.0));
        // second layer mirrors the second interior cell
        assert_eq!(s.h.get(-2, 0), 0.5);
        // north wall reverses hv
        assert_eq!((s.h.get(0, 1), s.hu.get(0, 1), s.hv.get(0, 1)), (1.0, 2.0, -3.0));
    }

    #[test]
    fn free_outflow_copies() {
        let mut s = state3();
        apply_boundaries(
            &mut s,
            &BoundarySpec::uniform(EdgeCondition::FreeOutflow),
            0.0,
            &PhysicalParams::default(),
        );
        for layer in 1..=2 {
            assert_eq!(s.h.get(2 + layer, 1), s.h.get(2, 1));
            assert_eq!(s.hu.get(2 + layer, 1), s.hu.get(2, 1));
            assert_eq!(s.z.get(1, -layer), s.z.get(1, 0));
        }
    }

    fn forcing(q: f64) -> Arc<Forcing> {
        Arc::new(Forcing::new(None, Hydrograph::constant(q)))
    }

    #[test]
    fn zero_discharge_keeps_lake() {
        let mut s = State::new(4, 4, 1.0);
        s.h.fill(0.8);
        let spec = BoundarySpec {
            west: EdgeCondition::Discharge(DischargeInflow::full_edge(Edge::West, forcing(0.0), 4, 4)),
            ..BoundarySpec::default()
        };
        apply_boundaries(&mut s, &spec, 0.0, &PhysicalParams::default());
        for j in 0..4 {
            assert_eq!((s.h.get(-1, j), s.hu.get(-1, j)), (0.8, 0.0));
        }
    }

    #[test]
    fn mask_positions_and_off_mask_wall() {
        let mut s = state3();
        let mut spec = BoundarySpec::default();
        // raster row 0 is the north row, internal j = 2
        let d = DischargeInflow::new(Edge::West, forcing(1.0), &[(0, 0)], 3, 3).unwrap();
        assert!(d.is_masked(2) && !d.is_masked(0));
        spec.west = EdgeCondition::Discharge(d);
        apply_boundaries(&mut s, &spec, 0.0, &PhysicalParams::default());
        assert!(s.hu.get(-1, 2) > 0.0);
        assert_eq!(s.hu.get(-1, 0), -s.hu.get(0, 0));
        assert!(DischargeInflow::new(Edge::West, forcing(1.0), &[(0, 1)], 3, 3).is_err());
        assert!(DischargeInflow::new(Edge::West, forcing(1.0), &[], 3, 3).is_err());
    }

    #[test]
    fn inflow_on_east_edge_points_west() {
        let mut s = state3();
        let spec = BoundarySpec {
            east: EdgeCondition::Discharge(DischargeInflow::full_edge(Edge::East, forcing(3.0), 3, 3)),
            ..BoundarySpec::default()
        };
        apply_boundaries(&mut s, &spec, 0.0, &PhysicalParams::default());
        assert!(s.hu.get(3, 1) < 0.0);
        // total imposed discharge
        let q: f64 = (0..3).map(|j| -s.hu.get(3, j) * s.dy).sum();
        assert!((q - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mask_file() {
        assert_eq!(parse_mask("# mask\n0 0\n 5 0 # x\n").unwrap(), vec![(0, 0), (5, 0)]);
        assert!(matches!(parse_mask("0 0\n1\n"), Err(Error::Parse { line: 2, .. })));
    }

    /// Independent bisection root of q/h - 2√(gh) - R on the subcritical branch.
    fn bisection_oracle(h_i: f64, u_i: f64, q: f64) -> f64 {
        let r = u_i - 2.0 * (G * h_i).sqrt();
        let f = |h: f64| q / h - 2.0 * (G * h).sqrt() - r;
        let (mut lo, mut hi) = ((q * q / G).cbrt(), 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn riemann_inflow_matches_bisection() {
        let b = riemann_inflow(1.0, 0.0, 0.5, G);
        let h = bisection_oracle(1.0, 0.0, 0.5);
        assert!(!b.critical);
        assert!((b.h - h).abs() < 1e-12, "{} vs {}", b.h, h);
        assert_eq!(b.u, 0.5 / b.h);
    }

    #[test]
    fn riemann_inflow_zero_discharge() {
        assert_eq!(riemann_inflow(1.3, 0.0, 0.0, G), InflowState { h: 1.3, u: 0.0, critical: false });
    }

    #[test]
    fn riemann_inflow_supercritical_demand_falls_back() {
        let b = riemann_inflow(0.01, 0.0, 5.0, G);
        assert!(b.critical);
        assert!((b.u / (G * b.h).sqrt() - 1.0).abs() < 1e-12);
        assert!((b.u * b.h - 5.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_distribution_sums_to_q() {
        let d = DischargeInflow::new(Edge::South, forcing(7.3), &[(4, 1), (4, 2), (4, 3)], 5, 6).unwrap();
        let q = d.unit_discharge(0.0, 0.7);
        let total: f64 = (0..d.masked_cells()).map(|_| q * 0.7).sum();
        assert!((total - 7.3).abs() <= 1e-12 * 7.3);
    }

    use proptest::prelude::*;
    proptest! {
        #[test]
        fn inflow_satisfies_both_equations(h_i in 0.05f64..10.0, u_i in -2.0f64..2.0, q in 0.0f64..5.0) {
            let b = riemann_inflow(h_i, u_i, q, G);
            if !b.critical {
                let r_i = u_i - 2.0 * (G * h_i).sqrt();
                let r_b = b.u - 2.0 * (G * b.h).sqrt();
                let mass = if q > 0.0 { b.u * b.h - q } else { 0.0 };
                prop_assert!((r_b - r_i).abs() + mass.abs() <= 1e-10, "{} {}", r_b - r_i, mass);
                prop_assert!(b.u <= (G * b.h).sqrt() + 1e-12);
            }
        }
    }
}
