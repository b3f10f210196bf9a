use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::RasterGrid;
use crate::solver::Solver;
use crate::state::{velocity, State};

use super::checkpoint::{params_hash, Checkpoint};
use super::monitor::SteadyStateMonitor;
use super::scenario::Scenario;

/// Per-cell maxima over the run. Wall cells hold nodata.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximaMaps {
    pub max_h: RasterGrid,
    pub max_speed: RasterGrid,
    pub time_of_max_h: RasterGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassBalance {
    pub initial_volume: f64,
    pub final_volume: f64,
    pub inflow_volume: f64,
    pub outflow_volume: f64,
    pub delta_storage: f64,
    /// `|inflow - outflow - Δstorage|` relative to the inflow, or to the
    /// initial volume when nothing flowed in.
    pub closure: f64,
}

impl MassBalance {
    fn new(initial: f64, fin: f64, inflow: f64, outflow: f64) -> Self {
        let delta = fin - initial;
        let err = (inflow - outflow - delta).abs();
        let scale = if inflow > 0.0 { inflow } else { initial };
        MassBalance {
            initial_volume: initial,
            final_volume: fin,
            inflow_volume: inflow,
            outflow_volume: outflow,
            delta_storage: delta,
            closure: if err == 0.0 { 0.0 } else if scale > 0.0 { err / scale } else { err },
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub maxima: MaximaMaps,
    pub mass_balance: MassBalance,
    pub snapshots: Vec<PathBuf>,
    pub final_state: State,
    pub steps: u64,
    /// Relative change of `h` over the last monitored spin-up interval.
    pub spinup_change: Option<f64>,
    pub critical_fallbacks: u64,
    pub retries: u64,
}

#[derive(Serialize)]
struct Summary<'a> {
    status: &'a str,
    error: Option<String>,
    steps: u64,
    final_time: f64,
    wall_clock_seconds: f64,
    blocks: usize,
    nrows: usize,
    ncols: usize,
    mass_balance: MassBalance,
    critical_fallbacks: u64,
    step_retries: u64,
    spinup_relative_change: Option<f64>,
    spinup_converged: Option<bool>,
    snapshots: Vec<String>,
}

/// Snapshot file name, e.g. `h_000300.asc`; fractional times keep their
/// decimals (`h_000012.5.asc`).
pub fn snapshot_name(field: &str, t: f64) -> String {
    let whole = t.trunc();
    if t == whole {
        format!("{field}_{:06}.asc", whole as u64)
    } else {
        let frac = format!("{:.6}", t - whole);
        format!("{field}_{:06}.{}.asc", whole as u64, frac[2..].trim_end_matches('0'))
    }
}

/// A scenario in progress.
pub struct Simulation {
    scenario: Scenario,
    solver: Solver,
    nrows: usize,
    ncols: usize,
    wall: Vec<bool>,
    max_h: Vec<f64>,
    max_speed: Vec<f64>,
    time_of_max_h: Vec<f64>,
    initial_volume: f64,
    inflow: f64,
    outflow: f64,
    snapshots: Vec<PathBuf>,
    next_snapshot: u64,
    monitor: SteadyStateMonitor,
    critical_fallbacks: u64,
    retries: u64,
    started: Instant,
    template: RasterGrid,
}

impl Simulation {
    /// Loads the terrain, sets up the solver and writes the `t = 0` snapshot.
    pub fn new(scenario: Scenario) -> Result<Self> {
        let mut sim = Simulation::build(scenario)?;
        sim.update_maxima();
        sim.write_snapshot()?;
        sim.next_snapshot = 1;
        sim.sample_monitor();
        Ok(sim)
    }

    /// Continues a run from a checkpoint written by [`Simulation::checkpoint`].
    pub fn resume(scenario: Scenario, ckpt: &Checkpoint) -> Result<Self> {
        let mut sim = Simulation::build(scenario)?;
        let p = sim.solver.params();
        let expect = params_hash(p, sim.nrows, sim.ncols, sim.template.cellsize);
        if (ckpt.nrows, ckpt.ncols) != (sim.nrows, sim.ncols) || ckpt.params_hash != expect {
            return Err(Error::Config("checkpoint does not match the scenario grid or parameters".into()));
        }
        let mut state = sim.solver.state();
        let [h, hu, hv, mh, ms, mt] = &ckpt.fields;
        for row in 0..sim.nrows {
            let j = (sim.nrows - 1 - row) as isize;
            for col in 0..sim.ncols {
                let k = row * sim.ncols + col;
                state.h.set(col as isize, j, h[k]);
                state.hu.set(col as isize, j, hu[k]);
                state.hv.set(col as isize, j, hv[k]);
            }
        }
        let scenario = sim.scenario.clone();
        let spec = scenario.boundary_spec(sim.nrows, sim.ncols)?;
        sim.solver = Solver::new(state, spec, scenario.params, scenario.options)?;
        sim.solver.set_clock(ckpt.time, ckpt.step);
        sim.max_h.clone_from(mh);
        sim.max_speed.clone_from(ms);
        sim.time_of_max_h.clone_from(mt);
        sim.initial_volume = ckpt.initial_volume;
        sim.inflow = ckpt.inflow_volume;
        sim.outflow = ckpt.outflow_volume;
        let k = ckpt.time / scenario.snapshot_interval;
        sim.next_snapshot = (k + 1e-9).floor() as u64 + 1;
        Ok(sim)
    }

    fn build(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let dsm = scenario.dsm.load()?;
        let state = State::from_dsm(&dsm, &scenario.initial, scenario.mask_nodata)?;
        let spec = scenario.boundary_spec(dsm.nrows, dsm.ncols)?;
        let (nrows, ncols) = (dsm.nrows, dsm.ncols);
        let n = nrows * ncols;
        let wall: Vec<bool> = (0..n).map(|k| dsm.is_nodata(k)).collect();
        let solver = Solver::new(state, spec, scenario.params, scenario.options)?;
        std::fs::create_dir_all(&scenario.output_dir).map_err(|e| Error::io(scenario.output_dir.display(), e))?;
        let initial_volume = solver.volume();
        Ok(Simulation {
            solver,
            nrows,
            ncols,
            wall,
            max_h: vec![0.0; n],
            max_speed: vec![0.0; n],
            time_of_max_h: vec![0.0; n],
            initial_volume,
            inflow: 0.0,
            outflow: 0.0,
            snapshots: Vec::new(),
            next_snapshot: 0,
            monitor: SteadyStateMonitor::default(),
            critical_fallbacks: 0,
            retries: 0,
            started: Instant::now(),
            template: dsm.like(0.0),
            scenario,
        })
    }

    pub fn time(&self) -> f64 {
        self.solver.time()
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    fn snapshot_time(&self, k: u64) -> f64 {
        k as f64 * self.scenario.snapshot_interval
    }

    /// Steps until `t_end`, writing snapshots on the way. On a solver
    /// abort the state stays at the last completed step.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        let spin_end = self.scenario.spin_up.duration;
        while self.time() < t_end {
            let t = self.time();
            let mut target = t_end.min(self.snapshot_time(self.next_snapshot));
            if t < spin_end {
                target = target.min(spin_end);
            }
            let cap = target - t;
            let d = self.solver.step(cap)?;
            if d.dt_used == cap {
                let steps = self.solver.steps();
                self.solver.set_clock(target, steps);
            }
            self.inflow += d.inflow_volume;
            self.outflow += d.outflow_volume;
            self.critical_fallbacks += d.critical_fallbacks;
            self.retries += d.retries as u64;
            self.update_maxima();
            let now = self.time();
            let mut sampled = false;
            if now >= self.snapshot_time(self.next_snapshot) {
                self.write_snapshot()?;
                self.next_snapshot += 1;
                if now <= spin_end {
                    self.sample_monitor();
                    sampled = true;
                }
                log::info!(
                    "t = {now:.1} s, step {}, volume {:.6e} m3, inflow {:.6e} m3",
                    self.solver.steps(),
                    self.solver.volume(),
                    self.inflow
                );
            }
            if now == spin_end && !sampled && spin_end > 0.0 {
                self.sample_monitor();
            }
        }
        Ok(())
    }

    fn sample_monitor(&mut self) {
        let t = self.time();
        if t > self.scenario.spin_up.duration || self.scenario.spin_up.duration == 0.0 {
            return;
        }
        let mut h = vec![0.0; self.nrows * self.ncols];
        let ncols = self.ncols;
        self.solver.for_each_cell(|row, col, d, _, _| h[row * ncols + col] = d);
        if let Some(c) = self.monitor.sample(t, h) {
            log::debug!("spin-up relative change at t = {t}: {c:e}");
        }
    }

    fn update_maxima(&mut self) {
        let (t, ncols, h_dry) = (self.time(), self.ncols, self.solver.params().h_dry);
        let (mh, ms, mt) = (&mut self.max_h, &mut self.max_speed, &mut self.time_of_max_h);
        self.solver.for_each_cell(|row, col, h, hu, hv| {
            let k = row * ncols + col;
            if h > mh[k] {
                mh[k] = h;
                mt[k] = t;
            }
            let s = velocity(h, hu, h_dry).hypot(velocity(h, hv, h_dry));
            if s > ms[k] {
                ms[k] = s;
            }
        });
    }

    fn raster(&self, values: &[f64]) -> RasterGrid {
        let mut r = self.template.clone();
        for (k, v) in values.iter().enumerate() {
            r.values[k] = if self.wall[k] { r.nodata } else { *v };
        }
        r
    }

    fn write(&self, name: &str, values: &[f64]) -> Result<PathBuf> {
        let path = self.scenario.output_dir.join(name);
        self.raster(values).write(&path, None)?;
        Ok(path)
    }

    fn fields(&self) -> [Vec<f64>; 3] {
        let n = self.nrows * self.ncols;
        let (mut h, mut hu, mut hv) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let ncols = self.ncols;
        self.solver.for_each_cell(|row, col, a, b, c| {
            let k = row * ncols + col;
            (h[k], hu[k], hv[k]) = (a, b, c);
        });
        [h, hu, hv]
    }

    fn write_fields(&mut self, tag: impl Fn(&str) -> String) -> Result<()> {
        let [h, hu, hv] = self.fields();
        let h_dry = self.solver.params().h_dry;
        let u: Vec<f64> = h.iter().zip(&hu).map(|(&a, &q)| velocity(a, q, h_dry)).collect();
        let v: Vec<f64> = h.iter().zip(&hv).map(|(&a, &q)| velocity(a, q, h_dry)).collect();
        for (name, vals) in [("h", &h), ("u", &u), ("v", &v)] {
            let p = self.write(&tag(name), vals)?;
            self.snapshots.push(p);
        }
        Ok(())
    }

    fn write_snapshot(&mut self) -> Result<()> {
        let t = self.time();
        self.write_fields(|f| snapshot_name(f, t))
    }

    pub fn maxima(&self) -> MaximaMaps {
        MaximaMaps {
            max_h: self.raster(&self.max_h),
            max_speed: self.raster(&self.max_speed),
            time_of_max_h: self.raster(&self.time_of_max_h),
        }
    }

    pub fn mass_balance(&self) -> MassBalance {
        MassBalance::new(self.initial_volume, self.solver.volume(), self.inflow, self.outflow)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let [h, hu, hv] = self.fields();
        let p = self.solver.params();
        Checkpoint {
            nrows: self.nrows,
            ncols: self.ncols,
            time: self.time(),
            step: self.solver.steps(),
            params_hash: params_hash(p, self.nrows, self.ncols, self.template.cellsize),
            initial_volume: self.initial_volume,
            inflow_volume: self.inflow,
            outflow_volume: self.outflow,
            fields: [
                h,
                hu,
                hv,
                self.max_h.clone(),
                self.max_speed.clone(),
                self.time_of_max_h.clone(),
            ],
        }
    }

    fn write_summary(&self, error: Option<&Error>) -> Result<()> {
        let spin = self.monitor.last();
        let summary = Summary {
            status: if error.is_some() { "aborted" } else { "completed" },
            error: error.map(|e| e.to_string()),
            steps: self.solver.steps(),
            final_time: self.time(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            blocks: self.solver.partition().len(),
            nrows: self.nrows,
            ncols: self.ncols,
            mass_balance: self.mass_balance(),
            critical_fallbacks: self.critical_fallbacks,
            step_retries: self.retries,
            spinup_relative_change: spin,
            spinup_converged: spin.map(|c| c <= self.scenario.steady_threshold),
            snapshots: self
                .snapshots
                .iter()
                .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
                .collect(),
        };
        let path = self.scenario.output_dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(path.display(), e))
    }

    fn write_maxima(&self) -> Result<()> {
        let m = self.maxima();
        let dir = &self.scenario.output_dir;
        m.max_h.write(dir.join("max_h.asc"), None)?;
        m.max_speed.write(dir.join("max_speed.asc"), None)?;
        m.time_of_max_h.write(dir.join("time_of_max_h.asc"), None)
    }

    /// Writes maxima maps and the run summary.
    pub fn finish(self) -> Result<RunOutcome> {
        self.write_maxima()?;
        self.write_summary(None)?;
        if let Some(c) = self.monitor.last() {
            if c > self.scenario.steady_threshold {
                log::warn!(
                    "spin-up did not settle: relative change {c:e} > {:e}",
                    self.scenario.steady_threshold
                );
            }
        }
        let mb = self.mass_balance();
        log::info!(
            "done: {} steps, mass-balance closure {:e}",
            self.solver.steps(),
            mb.closure
        );
        Ok(RunOutcome {
            maxima: self.maxima(),
            mass_balance: mb,
            snapshots: self.snapshots.clone(),
            final_state: self.solver.state(),
            steps: self.solver.steps(),
            spinup_change: self.monitor.last(),
            critical_fallbacks: self.critical_fallbacks,
            retries: self.retries,
        })
    }

    /// Records an abort: last good fields, maxima and an `aborted` summary.
    pub fn write_abort(&mut self, error: &Error) -> Result<()> {
        log::error!("{error}");
        self.write_fields(|f| format!("{f}_last_good.asc"))?;
        self.write_maxima()?;
        self.write_summary(Some(error))
    }

    pub fn output_dir(&self) -> &Path {
        &self.scenario.output_dir
    }
}

/// Runs a scenario to `total_duration`.
pub fn run(scenario: Scenario) -> Result<RunOutcome> {
    let mut sim = Simulation::new(scenario)?;
    let total = sim.scenario.total_duration;
    match sim.advance_to(total) {
        Ok(()) => sim.finish(),
        Err(e) => {
            sim.write_abort(&e)?;
            Err(e)
        }
    }
}
