use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::boundary::{read_mask, BoundarySpec, DischargeInflow, Edge, EdgeCondition};
use crate::error::{Error, Result};
use crate::raster::RasterGrid;
use crate::solver::{FrictionCoupling, SolverOptions};
use crate::state::{InitialDepth, PhysicalParams};

use super::hydrograph::{Forcing, Hydrograph, SpinUp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Wall,
    FreeOutflow,
    Discharge,
}

impl EdgeKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wall" => Ok(EdgeKind::Wall),
            "free_outflow" | "outflow" | "free" => Ok(EdgeKind::FreeOutflow),
            "discharge" | "inflow" => Ok(EdgeKind::Discharge),
            other => Err(Error::Config(format!("unknown boundary kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Terrain {
    Path(PathBuf),
    Grid(RasterGrid),
}

impl Terrain {
    pub fn load(&self) -> Result<RasterGrid> {
        match self {
            Terrain::Path(p) => RasterGrid::read(p),
            Terrain::Grid(g) => Ok(g.clone()),
        }
    }
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub dsm: Terrain,
    /// Condition per edge, indexed by [`Edge::index`].
    pub edges: [EdgeKind; 4],
    /// Raster `(row, col)` cells of the riverbed; the whole edge when `None`.
    pub riverbed_mask: Option<Vec<(usize, usize)>>,
    pub params: PhysicalParams,
    pub spin_up: SpinUp,
    pub hydrograph: Hydrograph,
    /// Includes the spin-up.
    pub total_duration: f64,
    pub snapshot_interval: f64,
    pub output_dir: PathBuf,
    pub initial: InitialDepth,
    pub mask_nodata: bool,
    pub options: SolverOptions,
    /// Spin-up convergence threshold on the relative change of `h` between
    /// snapshot samples.
    pub steady_threshold: f64,
}

impl Scenario {
    /// A scenario with wall edges, no forcing and default parameters.
    pub fn new(dsm: Terrain, total_duration: f64, output_dir: impl Into<PathBuf>) -> Self {
        Scenario {
            dsm,
            edges: [EdgeKind::Wall; 4],
            riverbed_mask: None,
            params: PhysicalParams::default(),
            spin_up: SpinUp { q: 0.0, duration: 0.0 },
            hydrograph: Hydrograph::constant(0.0),
            total_duration,
            snapshot_interval: total_duration.max(f64::MIN_POSITIVE),
            output_dir: output_dir.into(),
            initial: InitialDepth::Uniform(0.0),
            mask_nodata: true,
            options: SolverOptions::default(),
            steady_threshold: 1e-6,
        }
    }

    pub fn edge(&self, e: Edge) -> EdgeKind {
        self.edges[e.index()]
    }

    pub fn set_edge(&mut self, e: Edge, k: EdgeKind) {
        self.edges[e.index()] = k;
    }

    pub fn forcing(&self) -> Forcing {
        let spin = (self.spin_up.duration > 0.0).then_some(self.spin_up);
        Forcing::new(spin, self.hydrograph.clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.options.validate()?;
        if !(self.spin_up.duration >= 0.0 && self.spin_up.q >= 0.0) {
            return Err(Error::Config("spin-up discharge and duration must be >= 0".into()));
        }
        if !(self.total_duration >= self.spin_up.duration && self.total_duration.is_finite()) {
            return Err(Error::Config(format!(
                "total_duration {} is shorter than the spin-up {}",
                self.total_duration, self.spin_up.duration
            )));
        }
        if self.snapshot_interval.is_nan() || self.snapshot_interval <= 0.0 {
            return Err(Error::Config("snapshot_interval must be > 0".into()));
        }
        if self.steady_threshold.is_nan() || self.steady_threshold <= 0.0 {
            return Err(Error::Config("steady_threshold must be > 0".into()));
        }
        let n = self.edges.iter().filter(|&&k| k == EdgeKind::Discharge).count();
        if n > 1 {
            return Err(Error::Config("at most one edge may impose a discharge".into()));
        }
        if n == 0 && self.riverbed_mask.is_some() {
            return Err(Error::Config("riverbed_mask given but no edge imposes a discharge".into()));
        }
        Ok(())
    }

    /// Builds the boundary conditions for a grid of `nrows × ncols`.
    pub fn boundary_spec(&self, nrows: usize, ncols: usize) -> Result<BoundarySpec> {
        let forcing = Arc::new(self.forcing());
        let mut spec = BoundarySpec::default();
        for e in Edge::ALL {
            let c = match self.edge(e) {
                EdgeKind::Wall => EdgeCondition::Wall,
                EdgeKind::FreeOutflow => EdgeCondition::FreeOutflow,
                EdgeKind::Discharge => EdgeCondition::Discharge(match &self.riverbed_mask {
                    Some(cells) => DischargeInflow::new(e, forcing.clone(), cells, nrows, ncols)?,
                    None => DischargeInflow::full_edge(e, forcing.clone(), nrows, ncols),
                }),
            };
            spec.set(e, c);
        }
        Ok(spec)
    }

    /// Parses a `key = value` configuration; relative paths are resolved
    /// against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected `key = value`, found `{line}`")))?;
            let key = k.trim().to_ascii_lowercase();
            if kv.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(Error::parse(i + 1, format!("duplicate key `{key}`")));
            }
        }
        let mut cfg = Config { kv };
        let path = |cfg: &mut Config, k: &str| cfg.take(k).map(|(_, v)| base.join(v));

        let dsm = path(&mut cfg, "dsm").ok_or_else(|| Error::Config("missing key `dsm`".into()))?;
        let total = cfg.number("total_duration")?.ok_or_else(|| Error::Config("missing key `total_duration`".into()))?;
        let out = path(&mut cfg, "output_dir").unwrap_or_else(|| base.join("output"));
        let mut scn = Scenario::new(Terrain::Path(dsm), total, out);

        for e in Edge::ALL {
            let key = format!("boundary.{}", format!("{e:?}").to_ascii_lowercase());
            if let Some((_, v)) = cfg.take(&key) {
                scn.set_edge(e, EdgeKind::parse(&v)?);
            }
        }
        if let Some(p) = path(&mut cfg, "riverbed_mask") {
            scn.riverbed_mask = Some(read_mask(p)?);
        }
        let p = &mut scn.params;
        p.g = cfg.number("g")?.unwrap_or(p.g);
        p.manning_n = cfg.number("manning_n")?.unwrap_or(p.manning_n);
        p.cfl = cfg.number("cfl")?.unwrap_or(p.cfl);
        p.h_dry = cfg.number("h_dry")?.unwrap_or(p.h_dry);
        scn.spin_up.q = cfg.number("spinup_q")?.unwrap_or(0.0);
        scn.spin_up.duration = cfg.number("spinup_duration")?.unwrap_or(0.0);
        scn.hydrograph = match path(&mut cfg, "hydrograph") {
            Some(p) => Hydrograph::read(p)?,
            None => Hydrograph::constant(scn.spin_up.q),
        };
        if let Some(s) = cfg.number("snapshot_interval")? {
            scn.snapshot_interval = s;
        }
        match (cfg.take("initial_h"), cfg.number("initial_level")?) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either `initial_h` or `initial_level`, not both".into()));
            }
            (Some((_, v)), None) => {
                scn.initial = match v.parse::<f64>() {
                    Ok(h) => InitialDepth::Uniform(h),
                    Err(_) => InitialDepth::PerCell(RasterGrid::read(base.join(v))?),
                }
            }
            (None, Some(level)) => scn.initial = InitialDepth::SurfaceLevel(level),
            (None, None) => {}
        }
        let o = &mut scn.options;
        o.dt_min = cfg.number("dt_min")?.unwrap_or(o.dt_min);
        o.dt_max = cfg.number("dt_max")?.unwrap_or(o.dt_max);
        if let Some(b) = cfg.number("blocks")? {
            o.blocks = as_count(b, "blocks")?;
        }
        if let Some((_, v)) = cfg.take("friction_coupling") {
            o.friction = match v.as_str() {
                "component" | "per_component" => FrictionCoupling::PerComponent,
                "magnitude" => FrictionCoupling::Magnitude,
                other => return Err(Error::Config(format!("unknown friction_coupling `{other}`"))),
            };
        }
        if let Some((_, v)) = cfg.take("mask_nodata") {
            scn.mask_nodata = parse_bool(&v)?;
        }
        scn.steady_threshold = cfg.number("steady_threshold")?.unwrap_or(scn.steady_threshold);

        if let Some((k, (line, _))) = cfg.kv.into_iter().next() {
            return Err(Error::parse(line, format!("unknown key `{k}`")));
        }
        scn.validate()?;
        Ok(scn)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
        Scenario::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn initial_depth(&self) -> &InitialDepth {
        &self.initial
    }
}

struct Config {
    kv: BTreeMap<String, (usize, String)>,
}

impl Config {
    fn take(&mut self, k: &str) -> Option<(usize, String)> {
        self.kv.remove(k)
    }

    fn number(&mut self, k: &str) -> Result<Option<f64>> {
        match self.take(k) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::parse(line, format!("`{k}` must be a number, found `{v}`"))),
        }
    }
}

fn as_count(x: f64, what: &str) -> Result<usize> {
    if x >= 1.0 && x.fract() == 0.0 && x < 1e9 {
        Ok(x as usize)
    } else {
        Err(Error::Config(format!("{what} must be a positive integer, got {x}")))
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("expected a boolean, found `{v}`"))),
    }
}
