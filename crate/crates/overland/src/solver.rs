//! Two-dimensional update: line-by-line residual, CFL time step,
//! semi-implicit Manning friction and TVD-RK2 (Heun) stepping.
//!
//! The grid is split into blocks (see [`crate::partition`]); each block owns
//! a padded copy of its part of the state and blocks are advanced in
//! parallel. Every per-cell quantity depends only on the stencil, the global
//! time step is an exact minimum, so the fields do not depend on the number
//! of blocks.

use rayon::prelude::*;

use crate::boundary::{fill_edge, BoundaryCounters, BoundarySpec, Edge};
use crate::error::{Error, NumericalError, NumericalErrorKind, Result};
use crate::kernels::{
    centered_source, hllc_flux, hydrostatic_reconstruct, interface_sources, muscl_reconstruct, muscl_slope,
    velocity_reconstruct,
};
use crate::partition::{exchange_halos, global_reduce, partition, Block, Partition, ReduceOp};
use crate::state::{Field, PhysicalParams, State, GHOST};

/// Stage depths in `[-NEGATIVE_DEPTH_TOLERANCE, 0)` are round-off and are
/// set to zero; anything more negative rejects the step.
pub const NEGATIVE_DEPTH_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    Rk2,
    /// Single forward-Euler stage.
    Euler,
}

/// Which discharge magnitude enters the friction denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrictionCoupling {
    /// `|q|` of the component being updated.
    PerComponent,
    /// `√(hu² + hv²)` for both components.
    Magnitude,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Zero all reconstruction slopes.
    pub first_order: bool,
    pub time_scheme: TimeScheme,
    pub friction: FrictionCoupling,
    pub dt_min: f64,
    pub dt_max: f64,
    pub blocks: usize,
    /// Times a step is retried with half the time step after a stage
    /// produced a negative depth or a non-finite value.
    pub max_retries: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            first_order: false,
            time_scheme: TimeScheme::Rk2,
            friction: FrictionCoupling::PerComponent,
            dt_min: 1e-8,
            dt_max: 10.0,
            blocks: 1,
            max_retries: 2,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_max >= self.dt_min && self.dt_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < dt_min <= dt_max, got dt_min = {}, dt_max = {}",
                self.dt_min, self.dt_max
            )));
        }
        if self.blocks == 0 {
            return Err(Error::Config("blocks must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    pub dt_used: f64,
    pub max_wave_speed: f64,
    /// Smallest depth after the step.
    pub min_h: f64,
    /// Smallest depth produced by any stage before round-off clamping.
    pub min_stage_h: f64,
    pub inflow_volume: f64,
    pub outflow_volume: f64,
    /// Net volume entering through each edge, indexed by [`Edge::index`].
    pub edge_volume: [f64; 4],
    pub critical_fallbacks: u64,
    pub retries: u32,
}

/// Rate of change of the conserved variables on interior cells, row-major
/// from the south-west cell, plus the volume rate entering through each
/// edge of the grid (m³/s, indexed by [`Edge::index`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub nx: usize,
    pub ny: usize,
    pub h: Vec<f64>,
    pub hu: Vec<f64>,
    pub hv: Vec<f64>,
    pub edge_rate: [f64; 4],
}

impl Residual {
    fn zeros(nx: usize, ny: usize) -> Self {
        Residual {
            nx,
            ny,
            h: vec![0.0; nx * ny],
            hu: vec![0.0; nx * ny],
            hv: vec![0.0; nx * ny],
            edge_rate: [0.0; 4],
        }
    }

    fn clear(&mut self) {
        for v in [&mut self.h, &mut self.hu, &mut self.hv] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
        self.edge_rate = [0.0; 4];
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.h
            .iter()
            .chain(&self.hu)
            .chain(&self.hv)
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[derive(Clone, Copy, Default)]
struct Trace {
    hm: f64,
    hp: f64,
    zm: f64,
    zp: f64,
    um: f64,
    up: f64,
    vm: f64,
    vp: f64,
}

/// Flux through one interface, with the normal momentum flux as seen from
/// the left and from the right cell.
#[derive(Clone, Copy, Default)]
struct Face {
    f_h: f64,
    mom_left: f64,
    mom_right: f64,
    f_t: f64,
}

/// One grid line with two ghost cells at each end. `qn` is the discharge
/// normal to the interfaces, `qt` the transverse one.
struct Line<'a> {
    h: &'a [f64],
    qn: &'a [f64],
    qt: &'a [f64],
    z: &'a [f64],
    wall: &'a [bool],
}

#[derive(Default)]
struct LineScratch {
    h: Vec<f64>,
    qn: Vec<f64>,
    qt: Vec<f64>,
    z: Vec<f64>,
    wall: Vec<bool>,
    traces: Vec<Trace>,
    faces: Vec<Face>,
}

#[inline]
fn vel(q: f64, h: f64, h_dry: f64) -> f64 {
    if h > h_dry {
        q / h
    } else {
        0.0
    }
}

fn traces(line: &Line, k: usize, h_dry: f64, first_order: bool) -> Trace {
    let h = line.h[k];
    let z = line.z[k];
    let u = vel(line.qn[k], h, h_dry);
    let v = vel(line.qt[k], h, h_dry);
    if first_order || line.wall[k - 1] || line.wall[k + 1] {
        return Trace {
            hm: h,
            hp: h,
            zm: z,
            zp: z,
            um: u,
            up: u,
            vm: v,
            vp: v,
        };
    }
    let (hm, hp) = muscl_reconstruct(line.h[k - 1], h, line.h[k + 1], 1.0);
    let eta = |m: usize| line.h[m] + line.z[m];
    let (em, ep) = muscl_reconstruct(eta(k - 1), eta(k), eta(k + 1), 1.0);
    let (mut um, mut up, mut vm, mut vp) = (0.0, 0.0, 0.0, 0.0);
    if h > h_dry {
        let un = |m: usize| vel(line.qn[m], line.h[m], h_dry);
        let ut = |m: usize| vel(line.qt[m], line.h[m], h_dry);
        let du = muscl_slope(un(k - 1), u, un(k + 1), 1.0);
        (um, up) = velocity_reconstruct(u, h, hm, hp, du, 1.0);
        let dv = muscl_slope(ut(k - 1), v, ut(k + 1), 1.0);
        (vm, vp) = velocity_reconstruct(v, h, hm, hp, dv, 1.0);
    }
    Trace {
        hm,
        hp,
        zm: em - hm,
        zp: ep - hp,
        um,
        up,
        vm,
        vp,
    }
}

/// Adds the contribution of one line to `out(cell) += (dh, dqn, dqt)` for
/// its `n` interior cells and returns the mass flux through the first and
/// last interface of the line.
fn sweep_line(
    line: &Line,
    scratch_t: &mut Vec<Trace>,
    scratch_f: &mut Vec<Face>,
    params: &PhysicalParams,
    first_order: bool,
    inv_d: f64,
    mut out: impl FnMut(usize, f64, f64, f64),
) -> (f64, f64) {
    let n = line.h.len() - 2 * GHOST;
    let g = params.g;
    scratch_t.clear();
    scratch_t.resize(n + 4, Trace::default());
    scratch_f.clear();
    scratch_f.resize(n + 4, Face::default());
    for k in 1..=n + 2 {
        if !line.wall[k] {
            scratch_t[k] = traces(line, k, params.h_dry, first_order);
        }
    }
    // face k sits between cells k and k + 1
    for k in 1..=n + 1 {
        let (wl, wr) = (line.wall[k], line.wall[k + 1]);
        if wl && wr {
            continue;
        }
        let (a, b) = (scratch_t[k], scratch_t[k + 1]);
        let (mut hm, mut zm, mut um, mut vm) = (a.hp, a.zp, a.up, a.vp);
        let (mut hp, mut zp, mut up, mut vp) = (b.hm, b.zm, b.um, b.vm);
        if wr {
            (hp, zp, up, vp) = (hm, zm, -um, vm);
        } else if wl {
            (hm, zm, um, vm) = (hp, zp, -up, vp);
        }
        let s = hydrostatic_reconstruct(hm, zm, hp, zp, um, up);
        let f = hllc_flux(s.h_l, um, vm, s.h_r, up, vp, g);
        let (sl, sr) = interface_sources(hm, hp, s.h_l, s.h_r, g);
        scratch_f[k] = Face {
            f_h: f.f_h,
            mom_left: f.f_hu + sl,
            mom_right: f.f_hu + sr,
            f_t: f.f_hv,
        };
    }
    for c in 0..n {
        let k = c + GHOST;
        if line.wall[k] {
            continue;
        }
        let (fl, fr, t) = (scratch_f[k - 1], scratch_f[k], scratch_t[k]);
        let fc = centered_source(t.hm, t.hp, t.zm, t.zp, g);
        out(
            c,
            (fl.f_h - fr.f_h) * inv_d,
            (fl.mom_right - fr.mom_left + fc) * inv_d,
            (fl.f_t - fr.f_t) * inv_d,
        );
    }
    (scratch_f[1].f_h, scratch_f[n + 1].f_h)
}

fn residual_into(state: &State, params: &PhysicalParams, first_order: bool, r: &mut Residual, scratch: &mut LineScratch) {
    let (nx, ny) = (state.nx, state.ny);
    r.clear();
    let w = nx + 2 * GHOST;
    let g = GHOST as isize;
    let LineScratch {
        h,
        qn,
        qt,
        z,
        wall,
        traces: st,
        faces: sf,
    } = scratch;

    // x direction: rows are contiguous
    for j in 0..ny {
        let a = state.h.idx(-g, j as isize);
        let line = Line {
            h: &state.h.as_slice()[a..a + w],
            qn: &state.hu.as_slice()[a..a + w],
            qt: &state.hv.as_slice()[a..a + w],
            z: &state.z.as_slice()[a..a + w],
            wall: &state.wall.as_slice()[a..a + w],
        };
        let base = j * nx;
        let (rh, rhu, rhv) = (&mut r.h, &mut r.hu, &mut r.hv);
        let (west, east) = sweep_line(&line, st, sf, params, first_order, 1.0 / state.dx, |c, dh, dq, dt| {
            rh[base + c] += dh;
            rhu[base + c] += dq;
            rhv[base + c] += dt;
        });
        r.edge_rate[Edge::West.index()] += west * state.dy;
        r.edge_rate[Edge::East.index()] -= east * state.dy;
    }

    // y direction: gather columns
    let hgt = ny + 2 * GHOST;
    for i in 0..nx {
        for buf in [&mut *h, &mut *qn, &mut *qt, &mut *z] {
            buf.clear();
        }
        wall.clear();
        for j in -g..ny as isize + g {
            let k = state.h.idx(i as isize, j);
            h.push(state.h.as_slice()[k]);
            qn.push(state.hv.as_slice()[k]);
            qt.push(state.hu.as_slice()[k]);
            z.push(state.z.as_slice()[k]);
            wall.push(state.wall.as_slice()[k]);
        }
        debug_assert_eq!(h.len(), hgt);
        let line = Line {
            h,
            qn,
            qt,
            z,
            wall,
        };
        let (rh, rhu, rhv) = (&mut r.h, &mut r.hu, &mut r.hv);
        let (south, north) = sweep_line(&line, st, sf, params, first_order, 1.0 / state.dy, |c, dh, dq, dt| {
            let m = c * nx + i;
            rh[m] += dh;
            rhv[m] += dq;
            rhu[m] += dt;
        });
        r.edge_rate[Edge::South.index()] += south * state.dx;
        r.edge_rate[Edge::North.index()] -= north * state.dx;
    }
}

/// Residual `L(U)` of the well-balanced scheme; ghost cells must already
/// hold boundary values.
pub fn spatial_residual(state: &State, params: &PhysicalParams, first_order: bool) -> Residual {
    let mut r = Residual::zeros(state.nx, state.ny);
    residual_into(state, params, first_order, &mut r, &mut LineScratch::default());
    for (k, v) in r.h.iter().chain(&r.hu).chain(&r.hv).enumerate() {
        let c = k % (state.nx * state.ny);
        assert!(
            v.is_finite(),
            "non-finite residual at row {}, col {}",
            state.raster_row(c / state.nx),
            c % state.nx
        );
    }
    r
}

/// Largest `max(|u| + c, |v| + c)` over wet, non-wall interior cells and
/// the internal `(i, j)` where it occurs.
pub fn max_wave_speed(state: &State, params: &PhysicalParams) -> (f64, Option<(usize, usize)>) {
    let mut best = (0.0, None);
    for j in 0..state.ny {
        for i in 0..state.nx {
            let (ii, jj) = (i as isize, j as isize);
            let h = state.h.get(ii, jj);
            if h <= params.h_dry || state.wall.get(ii, jj) {
                continue;
            }
            let c = (params.g * h).sqrt();
            let a = (state.hu.get(ii, jj) / h).abs().max((state.hv.get(ii, jj) / h).abs()) + c;
            // NaN wins so that blow-ups surface here
            if a > best.0 || a.is_nan() {
                best = (a, Some((i, j)));
                if a.is_nan() {
                    return best;
                }
            }
        }
    }
    best
}

/// CFL time step, capped at `dt_max`; `dt_max` when the grid is dry.
/// The `dt_min` guard is applied by the stepping code.
pub fn compute_dt(state: &State, params: &PhysicalParams, dt_max: f64) -> f64 {
    dt_from_speed(max_wave_speed(state, params).0, state.dx.min(state.dy), params.cfl, dt_max)
}

fn dt_from_speed(a: f64, spacing: f64, cfl: f64, dt_max: f64) -> f64 {
    if a > 0.0 {
        (cfl * spacing / a).min(dt_max)
    } else if a.is_nan() {
        f64::NAN
    } else {
        dt_max
    }
}

/// Semi-implicit Manning update of one discharge component:
/// `q = q* / (1 + dt n² |q_n| / (h_n h*^{4/3}))`. `q_n` is the discharge
/// (or magnitude) of the previous stage.
#[inline]
pub fn friction_step(h_star: f64, q_star: f64, h_n: f64, q_n: f64, dt: f64, params: &PhysicalParams) -> f64 {
    let n = params.manning_n;
    if n == 0.0 {
        return q_star;
    }
    if h_star <= params.h_dry {
        return 0.0;
    }
    if h_n <= params.h_dry {
        return q_star;
    }
    q_star / (1.0 + dt * n * n * q_n.abs() / (h_n * h_star.powf(4.0 / 3.0)))
}

struct Patch {
    block: Block,
    state: State,
    residual: Residual,
    scratch: LineScratch,
    /// Interior copy of the state at the start of the step.
    h0: Vec<f64>,
    hu0: Vec<f64>,
    hv0: Vec<f64>,
}

struct StageOutcome {
    edge_rate: [f64; 4],
    min_raw: f64,
    failure: Option<(NumericalErrorKind, usize, usize, f64)>,
}

impl Patch {
    fn save(&mut self) {
        let s = &self.state;
        self.h0 = s.h.interior();
        self.hu0 = s.hu.interior();
        self.hv0 = s.hv.interior();
    }

    fn restore(&mut self) {
        let nx = self.block.nx;
        for j in 0..self.block.ny {
            for i in 0..nx {
                let (ii, jj, m) = (i as isize, j as isize, j * nx + i);
                self.state.h.set(ii, jj, self.h0[m]);
                self.state.hu.set(ii, jj, self.hu0[m]);
                self.state.hv.set(ii, jj, self.hv0[m]);
            }
        }
    }

    /// One forward-Euler stage with friction. With `average`, the result
    /// is averaged with the saved start-of-step state (second Heun stage).
    fn stage(&mut self, dt: f64, params: &PhysicalParams, opts: &SolverOptions, average: bool) -> StageOutcome {
        residual_into(&self.state, params, opts.first_order, &mut self.residual, &mut self.scratch);
        let nx = self.block.nx;
        let mut out = StageOutcome {
            edge_rate: self.residual.edge_rate,
            min_raw: f64::INFINITY,
            failure: None,
        };
        let s = &mut self.state;
        let r = &self.residual;
        for j in 0..self.block.ny {
            for i in 0..nx {
                let (ii, jj, m) = (i as isize, j as isize, j * nx + i);
                if s.wall.get(ii, jj) {
                    continue;
                }
                let (h, hu, hv) = (s.h.get(ii, jj), s.hu.get(ii, jj), s.hv.get(ii, jj));
                let hs = h + dt * r.h[m];
                let (mut qu, mut qv) = (hu + dt * r.hu[m], hv + dt * r.hv[m]);
                let (au, av) = match opts.friction {
                    FrictionCoupling::PerComponent => (hu.abs(), hv.abs()),
                    FrictionCoupling::Magnitude => {
                        let q = hu.hypot(hv);
                        (q, q)
                    }
                };
                qu = friction_step(hs, qu, h, au, dt, params);
                qv = friction_step(hs, qv, h, av, dt, params);
                let (mut hn, mut qun, mut qvn) = (hs, qu, qv);
                out.min_raw = out.min_raw.min(hs);
                if average {
                    hn = 0.5 * (self.h0[m] + hs);
                    qun = 0.5 * (self.hu0[m] + qu);
                    qvn = 0.5 * (self.hv0[m] + qv);
                    out.min_raw = out.min_raw.min(hn);
                }
                if !(hn.is_finite() && qun.is_finite() && qvn.is_finite()) {
                    let bad = if hn.is_finite() { if qun.is_finite() { qvn } else { qun } } else { hn };
                    out.failure.get_or_insert((NumericalErrorKind::NotFinite, i, j, bad));
                    continue;
                }
                if hn < 0.0 {
                    if hn < -NEGATIVE_DEPTH_TOLERANCE {
                        out.failure.get_or_insert((NumericalErrorKind::NegativeDepth, i, j, hn));
                        continue;
                    }
                    hn = 0.0;
                }
                if hn <= params.h_dry {
                    qun = 0.0;
                    qvn = 0.0;
                }
                s.h.set(ii, jj, hn);
                s.hu.set(ii, jj, qun);
                s.hv.set(ii, jj, qvn);
            }
        }
        out
    }

    fn volume(&self) -> f64 {
        let mut sum = 0.0;
        for j in 0..self.block.ny {
            for i in 0..self.block.nx {
                sum += self.state.h.get(i as isize, j as isize);
            }
        }
        sum
    }
}

/// Block-parallel time stepper owning the simulation state.
pub struct Solver {
    partition: Partition,
    patches: Vec<Patch>,
    /// Topography, walls and georeferencing of the whole grid.
    template: State,
    spec: BoundarySpec,
    params: PhysicalParams,
    options: SolverOptions,
    t: f64,
    step: u64,
}

impl Solver {
    pub fn new(state: State, spec: BoundarySpec, params: PhysicalParams, options: SolverOptions) -> Result<Self> {
        params.validate()?;
        options.validate()?;
        spec.validate(state.nx, state.ny)?;
        if state.dx != state.dy {
            return Err(Error::Config("cells must be square".into()));
        }
        let part = partition(state.ny, state.nx, options.blocks)?;
        let mut hs = part.scatter(&state.h, 0.0);
        let mut hus = part.scatter(&state.hu, 0.0);
        let mut hvs = part.scatter(&state.hv, 0.0);
        let mut zs = part.scatter(&state.z, 0.0);
        let mut walls = part.scatter(&state.wall, false);
        exchange_halos(&mut zs.iter_mut().collect::<Vec<_>>(), &part);
        exchange_halos(&mut walls.iter_mut().collect::<Vec<_>>(), &part);
        let mut patches = Vec::with_capacity(part.len());
        for (k, b) in part.blocks.iter().enumerate() {
            let mut s = State::new(b.nx, b.ny, state.dx);
            s.h = std::mem::replace(&mut hs[k], Field::new(0, 0, 0.0));
            s.hu = std::mem::replace(&mut hus[k], Field::new(0, 0, 0.0));
            s.hv = std::mem::replace(&mut hvs[k], Field::new(0, 0, 0.0));
            s.z = std::mem::replace(&mut zs[k], Field::new(0, 0, 0.0));
            s.wall = std::mem::replace(&mut walls[k], crate::state::Grid::new(0, 0, false));
            patches.push(Patch {
                block: b.clone(),
                residual: Residual::zeros(b.nx, b.ny),
                scratch: LineScratch::default(),
                state: s,
                h0: Vec::new(),
                hu0: Vec::new(),
                hv0: Vec::new(),
            });
        }
        Ok(Solver {
            partition: part,
            patches,
            template: state,
            spec,
            params,
            options,
            t: 0.0,
            step: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Sets the clock, e.g. when resuming from a checkpoint.
    pub fn set_clock(&mut self, t: f64, step: u64) {
        self.t = t;
        self.step = step;
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.spec
    }

    /// Assembles the whole-grid state.
    pub fn state(&self) -> State {
        let mut s = self.template.clone();
        let hs: Vec<&Field> = self.patches.iter().map(|p| &p.state.h).collect();
        self.partition.gather(&hs, &mut s.h);
        let hus: Vec<&Field> = self.patches.iter().map(|p| &p.state.hu).collect();
        self.partition.gather(&hus, &mut s.hu);
        let hvs: Vec<&Field> = self.patches.iter().map(|p| &p.state.hv).collect();
        self.partition.gather(&hvs, &mut s.hv);
        s
    }

    /// Visits every interior cell as `(raster row, col, h, hu, hv)`.
    pub fn for_each_cell(&self, mut f: impl FnMut(usize, usize, f64, f64, f64)) {
        let ny = self.template.ny;
        for p in &self.patches {
            let b = &p.block;
            for j in 0..b.ny {
                for i in 0..b.nx {
                    let (ii, jj) = (i as isize, j as isize);
                    f(
                        ny - 1 - (b.j0 + j),
                        b.i0 + i,
                        p.state.h.get(ii, jj),
                        p.state.hu.get(ii, jj),
                        p.state.hv.get(ii, jj),
                    );
                }
            }
        }
    }

    /// Water volume, summed per block and combined over a fixed tree.
    pub fn volume(&self) -> f64 {
        let partial: Vec<f64> = self.patches.iter().map(Patch::volume).collect();
        global_reduce(&partial, ReduceOp::Sum) * self.template.dx * self.template.dy
    }

    fn fill_ghosts(&mut self, t: f64) -> u64 {
        let part = &self.partition;
        exchange_halos(&mut self.patches.iter_mut().map(|p| &mut p.state.h).collect::<Vec<_>>(), part);
        exchange_halos(&mut self.patches.iter_mut().map(|p| &mut p.state.hu).collect::<Vec<_>>(), part);
        exchange_halos(&mut self.patches.iter_mut().map(|p| &mut p.state.hv).collect::<Vec<_>>(), part);
        let (spec, params) = (&self.spec, &self.params);
        self.patches
            .par_iter_mut()
            .map(|p| {
                let mut c = BoundaryCounters::default();
                for e in Edge::ALL {
                    if p.block.neighbor(e).is_none() {
                        let offset = match e {
                            Edge::West | Edge::East => p.block.j0,
                            Edge::North | Edge::South => p.block.i0,
                        };
                        fill_edge(&mut p.state, e, spec.get(e), t, params, offset, &mut c);
                    }
                }
                c.critical_fallbacks
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }

    fn error(&self, kind: NumericalErrorKind, block: usize, i: usize, j: usize, value: f64) -> Error {
        let b = &self.partition.blocks[block];
        NumericalError {
            kind,
            step: self.step + 1,
            time: self.t,
            row: self.template.ny - 1 - (b.j0 + j),
            col: b.i0 + i,
            value,
        }
        .into()
    }

    fn run_stage(&mut self, dt: f64, average: bool) -> std::result::Result<([f64; 4], f64), Error> {
        let (params, opts) = (&self.params, &self.options);
        let outcomes: Vec<StageOutcome> = self
            .patches
            .par_iter_mut()
            .map(|p| p.stage(dt, params, opts, average))
            .collect();
        if let Some((k, (kind, i, j, v))) = outcomes.iter().enumerate().find_map(|(k, o)| o.failure.map(|f| (k, f))) {
            return Err(self.error(kind, k, i, j, v));
        }
        let mut rates = [0.0; 4];
        for e in Edge::ALL {
            // only domain edges carry boundary flux
            let partial: Vec<f64> = outcomes
                .iter()
                .zip(&self.partition.blocks)
                .map(|(o, b)| if b.neighbor(e).is_none() { o.edge_rate[e.index()] } else { 0.0 })
                .collect();
            rates[e.index()] = global_reduce(&partial, ReduceOp::Sum);
        }
        let mins: Vec<f64> = outcomes.iter().map(|o| o.min_raw).collect();
        Ok((rates, global_reduce(&mins, ReduceOp::Min)))
    }

    /// Advances one time step of at most `dt_cap` seconds.
    pub fn step(&mut self, dt_cap: f64) -> Result<StepDiagnostics> {
        let mut fallbacks = self.fill_ghosts(self.t);
        let params = self.params;
        let speeds: Vec<(f64, Option<(usize, usize)>)> =
            self.patches.par_iter().map(|p| max_wave_speed(&p.state, &params)).collect();
        let (mut a, mut at) = (0.0, None);
        for (k, &(s, loc)) in speeds.iter().enumerate() {
            if s > a || s.is_nan() {
                (a, at) = (s, loc.map(|l| (k, l)));
                if s.is_nan() {
                    break;
                }
            }
        }
        let cfl_dt = dt_from_speed(a, self.template.dx, params.cfl, self.options.dt_max);
        if cfl_dt.is_nan() || cfl_dt < self.options.dt_min {
            let (k, (i, j)) = at.unwrap_or((0, (0, 0)));
            let kind = if cfl_dt.is_nan() {
                NumericalErrorKind::NotFinite
            } else {
                NumericalErrorKind::TimeStepTooSmall
            };
            return Err(self.error(kind, k, i, j, cfl_dt));
        }
        let mut dt = cfl_dt.min(dt_cap);
        self.patches.par_iter_mut().for_each(Patch::save);

        let mut retries = 0;
        loop {
            if retries > 0 {
                self.patches.par_iter_mut().for_each(Patch::restore);
                fallbacks += self.fill_ghosts(self.t);
            }
            let attempt = match self.options.time_scheme {
                TimeScheme::Euler => self.run_stage(dt, false).map(|(r, m)| (r.map(|x| x * dt), m)),
                TimeScheme::Rk2 => self.run_stage(dt, false).and_then(|(r0, m0)| {
                    fallbacks += self.fill_ghosts(self.t + dt);
                    let (r1, m1) = self.run_stage(dt, true)?;
                    let mut v = [0.0; 4];
                    for k in 0..4 {
                        v[k] = 0.5 * dt * (r0[k] + r1[k]);
                    }
                    Ok((v, m0.min(m1)))
                }),
            };
            match attempt {
                Ok((edge_volume, min_stage_h)) => {
                    self.t += dt;
                    self.step += 1;
                    let mins: Vec<f64> = self.patches.iter().map(|p| p.state.min_depth()).collect();
                    let inflow = edge_volume.iter().map(|v| v.max(0.0)).sum();
                    let outflow = edge_volume.iter().map(|v| (-v).max(0.0)).sum();
                    return Ok(StepDiagnostics {
                        dt_used: dt,
                        max_wave_speed: a,
                        min_h: global_reduce(&mins, ReduceOp::Min),
                        min_stage_h,
                        inflow_volume: inflow,
                        outflow_volume: outflow,
                        edge_volume,
                        critical_fallbacks: fallbacks,
                        retries,
                    });
                }
                Err(e) if retries < self.options.max_retries => {
                    log::debug!("retrying step {} with dt = {}: {e}", self.step + 1, 0.5 * dt);
                    retries += 1;
                    dt *= 0.5;
                }
                Err(e) => {
                    self.patches.par_iter_mut().for_each(Patch::restore);
                    return Err(e);
                }
            }
        }
    }
}

/// Advances `state` by one step starting at time `t` on a single block.
pub fn rk2_step(
    state: &State,
    spec: &BoundarySpec,
    params: &PhysicalParams,
    options: &SolverOptions,
    t: f64,
) -> Result<(State, StepDiagnostics)> {
    let mut s = Solver::new(state.clone(), spec.clone(), *params, SolverOptions { blocks: 1, ..*options })?;
    s.set_clock(t, 0);
    let d = s.step(f64::INFINITY)?;
    Ok((s.state(), d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::apply_boundaries;
    use crate::kernels::hll_flux;
    use proptest::prelude::*;

    const G: f64 = 9.81;

    fn params() -> PhysicalParams {
        PhysicalParams::default()
    }

    fn bump_lake(nx: usize, ny: usize) -> State {
        let mut s = State::new(nx, ny, 1.0);
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let (x, y) = (i as f64 + 0.5 - nx as f64 / 2.0, j as f64 + 0.5 - ny as f64 / 2.0);
                let z = 0.5 * (-(x * x + y * y) / 8.0).exp();
                s.z.set(i, j, z);
                s.h.set(i, j, 1.0 - z);
            }
        }
        s
    }

    #[test]
    fn lake_at_rest_residual_vanishes() {
        let mut s = bump_lake(12, 9);
        apply_boundaries(&mut s, &BoundarySpec::default(), 0.0, &params());
        let r = spatial_residual(&s, &params(), false);
        assert!(r.max_abs() < 1e-13, "{}", r.max_abs());
    }

    #[test]
    fn dry_residual_is_zero() {
        let mut s = State::new(5, 4, 1.0);
        apply_boundaries(&mut s, &BoundarySpec::default(), 0.0, &params());
        assert_eq!(spatial_residual(&s, &params(), false).max_abs(), 0.0);
    }

    /// Independent 1D first-order reference on a flat bottom: plain HLL
    /// differences with mirrored wall states.
    fn reference_1d(h: &[f64], q: &[f64]) -> Vec<(f64, f64)> {
        let n = h.len();
        let u = |k: usize| q[k] / h[k];
        let flux = |k: isize| -> (f64, f64) {
            let (hl, ul, hr, ur) = if k < 0 {
                (h[0], -u(0), h[0], u(0))
            } else if k as usize == n - 1 {
                (h[n - 1], u(n - 1), h[n - 1], -u(n - 1))
            } else {
                let k = k as usize;
                (h[k], u(k), h[k + 1], u(k + 1))
            };
            let f = hll_flux(hl, ul, hr, ur, G);
            (f.f_h, f.f_hu)
        };
        (0..n)
            .map(|c| {
                let (a, b) = (flux(c as isize - 1), flux(c as isize));
                (a.0 - b.0, a.1 - b.1)
            })
            .collect()
    }

    #[test]
    fn y_invariant_dam_break_matches_1d() {
        let (nx, ny) = (10, 4);
        let mut s = State::new(nx, ny, 1.0);
        let h: Vec<f64> = (0..nx).map(|i| if i < 5 { 2.0 } else { 0.5 }).collect();
        let q: Vec<f64> = (0..nx).map(|i| 0.1 * i as f64).collect();
        for j in 0..ny as isize {
            for i in 0..nx {
                s.h.set(i as isize, j, h[i]);
                s.hu.set(i as isize, j, q[i]);
            }
        }
        apply_boundaries(&mut s, &BoundarySpec::default(), 0.0, &params());
        let r = spatial_residual(&s, &params(), true);
        let reference = reference_1d(&h, &q);
        for j in 0..ny {
            for i in 0..nx {
                let m = j * nx + i;
                assert_eq!(r.hv[m], 0.0);
                assert!((r.h[m] - reference[i].0).abs() < 1e-13);
                assert!((r.hu[m] - reference[i].1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_wet_cell_dt() {
        let mut s = State::new(3, 3, 1.0);
        s.h.set(1, 1, 1.0);
        let dt = compute_dt(&s, &params(), 10.0);
        assert!((dt - 0.5 / G.sqrt()).abs() < 1e-15);
        assert!((dt - 0.15964).abs() < 1e-5);
        assert_eq!(compute_dt(&State::new(3, 3, 1.0), &params(), 10.0), 10.0);
        let p2 = PhysicalParams { cfl: 1.0, ..params() };
        assert_eq!(compute_dt(&s, &p2, 10.0), 2.0 * dt);
    }

    #[test]
    fn friction_examples() {
        let p = |n| PhysicalParams { manning_n: n, ..params() };
        assert_eq!(friction_step(1.0, 0.7, 1.0, 0.7, 1.0, &p(0.0)), 0.7);
        assert_eq!(friction_step(1.0, 0.7, 1.0, 0.0, 1.0, &p(0.1)), 0.7);
        let q = friction_step(1.0, 1.0, 1.0, 1.0, 1.0, &p(0.1));
        assert!((q - 1.0 / 1.01).abs() < 1e-15);
        assert_eq!(friction_step(0.0, 1.0, 1.0, 1.0, 1.0, &p(0.1)), 0.0);
    }

    #[test]
    fn flat_lake_is_a_bitwise_fixed_point() {
        let mut s = State::new(8, 6, 1.0);
        s.h.fill(1.0);
        let opts = SolverOptions::default();
        let (out, d) = rk2_step(&s, &BoundarySpec::default(), &params(), &opts, 0.0).unwrap();
        assert_eq!(out.h.interior(), s.h.interior());
        assert!(out.hu.interior().iter().chain(&out.hv.interior()).all(|&q| q == 0.0));
        assert!(d.dt_used > 0.0);
    }

    #[test]
    fn dry_state_unchanged() {
        let s = State::new(6, 6, 1.0);
        let (out, d) = rk2_step(&s, &BoundarySpec::default(), &params(), &SolverOptions::default(), 0.0).unwrap();
        assert_eq!(out.z.interior(), s.z.interior());
        for f in [&out.h, &out.hu, &out.hv] {
            assert!(f.interior().iter().all(|&v| v == 0.0));
        }
        assert_eq!(d.dt_used, 10.0);
    }

    #[test]
    fn euler_first_order_matches_manual_update() {
        let (nx, ny) = (9, 5);
        let mut s = State::new(nx, ny, 1.0);
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                s.h.set(i, j, if i < 4 { 1.5 } else { 0.3 });
                s.z.set(i, j, 0.05 * i as f64);
            }
        }
        let opts = SolverOptions {
            first_order: true,
            time_scheme: TimeScheme::Euler,
            ..SolverOptions::default()
        };
        let (out, d) = rk2_step(&s, &BoundarySpec::default(), &params(), &opts, 0.0).unwrap();
        let mut g = s.clone();
        apply_boundaries(&mut g, &BoundarySpec::default(), 0.0, &params());
        let r = spatial_residual(&g, &params(), true);
        for j in 0..ny {
            for i in 0..nx {
                let m = j * nx + i;
                let expect = g.h.get(i as isize, j as isize) + d.dt_used * r.h[m];
                assert_eq!(out.h.get(i as isize, j as isize), expect);
            }
        }
        // first order: cell traces equal cell values, so the centered source vanishes
        let t = traces(
            &Line {
                h: &[1.0, 2.0, 3.0],
                qn: &[0.0; 3],
                qt: &[0.0; 3],
                z: &[0.0, 0.5, 1.0],
                wall: &[false; 3],
            },
            1,
            1e-10,
            true,
        );
        assert_eq!((t.zm, t.zp, t.hm, t.hp), (0.5, 0.5, 2.0, 2.0));
    }

    #[test]
    fn internal_wall_blocks_flow() {
        let (nx, ny) = (7, 3);
        let mut s = State::new(nx, ny, 1.0);
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                s.h.set(i, j, if i < 3 { 2.0 } else { 0.5 });
            }
            s.wall.set(3, j, true);
            s.h.set(3, j, 0.0);
        }
        let mut solver = Solver::new(s, BoundarySpec::default(), params(), SolverOptions::default()).unwrap();
        let v0 = solver.volume();
        for _ in 0..50 {
            solver.step(f64::INFINITY).unwrap();
        }
        let out = solver.state();
        for j in 0..ny as isize {
            assert_eq!(out.h.get(3, j), 0.0);
            for i in 0..3 {
                assert!((out.h.get(i, j) - 2.0).abs() < 1e-12);
            }
        }
        assert!((solver.volume() - v0).abs() < 1e-12 * v0);
    }

    #[test]
    fn blow_up_is_reported() {
        let mut s = State::new(20, 3, 1.0);
        for j in 0..3 {
            for i in 0..10 {
                s.h.set(i, j, 1.0);
            }
        }
        let p = PhysicalParams { cfl: 50.0, ..params() };
        let mut solver = Solver::new(s, BoundarySpec::default(), p, SolverOptions::default()).unwrap();
        let err = (0..100).find_map(|_| solver.step(f64::INFINITY).err()).expect("cfl 50 must fail");
        assert!(err.is_numerical(), "{err}");
    }

    fn dam_break(nx: usize, ny: usize) -> State {
        let mut s = State::new(nx, ny, 1.0);
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let r = ((i as f64 - 0.4 * nx as f64).powi(2) + (j as f64 - 0.55 * ny as f64).powi(2)).sqrt();
                s.z.set(i, j, 0.01 * i as f64);
                s.h.set(i, j, if r < nx as f64 / 5.0 { 2.0 } else if i > nx as isize / 2 { 0.0 } else { 0.3 });
            }
        }
        s
    }

    #[test]
    fn blocks_give_identical_fields() {
        let run = |blocks| {
            let opts = SolverOptions { blocks, ..SolverOptions::default() };
            let mut s = Solver::new(dam_break(24, 18), BoundarySpec::default(), params(), opts).unwrap();
            for _ in 0..6 {
                s.step(f64::INFINITY).unwrap();
            }
            s.state()
        };
        let one = run(1);
        for b in [2, 3, 4, 6] {
            let other = run(b);
            assert_eq!(other.h, one.h, "blocks = {b}");
            assert_eq!(other.hu, one.hu);
            assert_eq!(other.hv, one.hv);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn closed_basin_conserves_mass(seed in 0u64..10_000) {
            let (nx, ny) = (10, 8);
            let mut s = State::new(nx, ny, 1.0);
            let mut x = seed.wrapping_add(0x9E3779B97F4A7C15);
            let mut next = || { x ^= x << 13; x ^= x >> 7; x ^= x << 17; (x >> 11) as f64 / (1u64 << 53) as f64 };
            for j in 0..ny as isize {
                for i in 0..nx as isize {
                    s.h.set(i, j, 2.0 * next());
                    s.z.set(i, j, 0.5 * next());
                }
            }
            let mut solver = Solver::new(s, BoundarySpec::default(), params(), SolverOptions::default()).unwrap();
            let v0 = solver.volume();
            for _ in 0..40 {
                let d = solver.step(f64::INFINITY).unwrap();
                prop_assert!(d.min_h >= 0.0);
                prop_assert_eq!(d.edge_volume, [0.0; 4]);
            }
            prop_assert!((solver.volume() - v0).abs() <= 1e-12 * v0);
        }

        #[test]
        fn friction_never_amplifies(q_star in -10.0f64..10.0, q_n in -10.0f64..10.0, h_n in 1e-6f64..5.0,
                                    h_s in 1e-6f64..5.0, dt in 0.0f64..10.0, n in 0.0f64..0.2) {
            let p = PhysicalParams { manning_n: n, ..PhysicalParams::default() };
            let q = friction_step(h_s, q_star, h_n, q_n, dt, &p);
            prop_assert!(q.abs() <= q_star.abs());
            prop_assert_eq!(friction_step(h_s, 0.0, h_n, q_n, dt, &p), 0.0);
        }

        #[test]
        fn y_invariance_is_preserved(seed in 0u64..1000) {
            let (nx, ny) = (16, 5);
            let mut s = State::new(nx, ny, 1.0);
            for i in 0..nx as isize {
                let h = 0.2 + ((seed as f64 + i as f64) * 0.7).sin().abs();
                let q = 0.3 * ((seed as f64 * 0.3 + i as f64) * 1.3).cos();
                for j in 0..ny as isize {
                    s.h.set(i, j, h);
                    s.hu.set(i, j, q);
                    s.z.set(i, j, 0.02 * i as f64);
                }
            }
            let mut solver = Solver::new(s, BoundarySpec::default(), params(), SolverOptions::default()).unwrap();
            for _ in 0..10 {
                solver.step(f64::INFINITY).unwrap();
            }
            let out = solver.state();
            for i in 0..nx as isize {
                for j in 1..ny as isize {
                    prop_assert_eq!(out.h.get(i, j), out.h.get(i, 0));
                    prop_assert_eq!(out.hu.get(i, j), out.hu.get(i, 0));
                    prop_assert_eq!(out.hv.get(i, j), 0.0);
                }
            }
        }
    }
}
