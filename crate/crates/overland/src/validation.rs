//! Analytical solutions and error norms for checking the solver.
//!
//! One-dimensional cases run on the 2D solver as strips three cells high
//! with wall edges, so they exercise the production code path.

use std::fmt::Write as _;
use std::path::Path;

use crate::boundary::BoundarySpec;
use crate::error::{Error, Result};
use crate::kernels::NumericalFlux;
use crate::solver::{Solver, SolverOptions};
use crate::state::{velocity, PhysicalParams, State};

/// Parabolic bump `z = height · max(0, 1 - ((x - center)/half_width)²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
    pub height: f64,
}

impl Bump {
    pub fn z(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.half_width;
        self.height * (1.0 - s * s).max(0.0)
    }

    /// Radially symmetric version around `(center, center)`.
    pub fn z_radial(&self, x: f64, y: f64) -> f64 {
        let r = ((x - self.center).powi(2) + (y - self.center).powi(2)).sqrt();
        self.z(self.center + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseKind {
    LakeAtRest { bump: Bump, level: f64 },
    Ritter { x0: f64, h_l: f64 },
    Stoker { x0: f64, h_l: f64, h_r: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticalCase {
    pub name: String,
    pub length: f64,
    pub horizon: f64,
    pub g: f64,
    pub kind: CaseKind,
}

impl AnalyticalCase {
    pub fn topography(&self, x: f64) -> f64 {
        match self.kind {
            CaseKind::LakeAtRest { bump, .. } => bump.z(x),
            _ => 0.0,
        }
    }

    pub fn initial(&self, x: f64) -> (f64, f64) {
        match self.kind {
            CaseKind::LakeAtRest { level, .. } => ((level - self.topography(x)).max(0.0), 0.0),
            CaseKind::Ritter { x0, h_l } => (if x <= x0 { h_l } else { 0.0 }, 0.0),
            CaseKind::Stoker { x0, h_l, h_r } => (if x <= x0 { h_l } else { h_r }, 0.0),
        }
    }

    pub fn exact(&self, x: f64, t: f64) -> (f64, f64) {
        match self.kind {
            CaseKind::LakeAtRest { .. } => self.initial(x),
            CaseKind::Ritter { x0, h_l } => ritter_solution(x, t, x0, h_l, self.g),
            CaseKind::Stoker { x0, h_l, h_r } => stoker_solution(x, t, x0, h_l, h_r, self.g),
        }
    }
}

/// Lake at rest over a submerged bump.
pub fn lake_at_rest_case(length: f64, bump: Bump, level: f64) -> Result<AnalyticalCase> {
    if bump.height >= level {
        return Err(Error::Config(format!(
            "bump top {} reaches the surface {level}; use the emerged variant",
            bump.height
        )));
    }
    Ok(AnalyticalCase {
        name: "lake-at-rest".into(),
        length,
        horizon: 10.0,
        g: 9.81,
        kind: CaseKind::LakeAtRest { bump, level },
    })
}

/// Lake at rest whose bump crest stands above the surface (dry island).
pub fn lake_emerged_case(length: f64, bump: Bump, level: f64) -> Result<AnalyticalCase> {
    if bump.height <= level {
        return Err(Error::Config(format!("bump top {} is below the surface {level}", bump.height)));
    }
    Ok(AnalyticalCase {
        name: "lake-emerged".into(),
        length,
        horizon: 10.0,
        g: 9.81,
        kind: CaseKind::LakeAtRest { bump, level },
    })
}

/// Dry-bed dam break on `[0, 10]` with the dam at 5 m, run until the front
/// reaches three quarters of the domain.
pub fn ritter_case() -> AnalyticalCase {
    let (length, x0, h_l, g): (f64, f64, f64, f64) = (10.0, 5.0, 1.0, 9.81);
    let c = (g * h_l).sqrt();
    AnalyticalCase {
        name: "ritter".into(),
        length,
        horizon: (0.75 * length - x0) / (2.0 * c),
        g,
        kind: CaseKind::Ritter { x0, h_l },
    }
}

/// Wet dam break `h_l = 1`, `h_r = 0.1` on `[0, 10]`, run until the shock
/// reaches three quarters of the domain.
pub fn stoker_case() -> AnalyticalCase {
    let (length, x0, h_l, h_r, g) = (10.0, 5.0, 1.0, 0.1, 9.81);
    let (h_m, u_m) = stoker_middle_state(h_l, h_r, g);
    let s = h_m * u_m / (h_m - h_r);
    AnalyticalCase {
        name: "stoker".into(),
        length,
        horizon: (0.75 * length - x0) / s,
        g,
        kind: CaseKind::Stoker { x0, h_l, h_r },
    }
}

pub fn case_by_name(name: &str) -> Result<AnalyticalCase> {
    let bump = Bump {
        center: 5.0,
        half_width: 2.0,
        height: 0.5,
    };
    match name {
        "lake-at-rest" => lake_at_rest_case(10.0, bump, 1.0),
        "lake-emerged" => lake_emerged_case(10.0, Bump { height: 1.2, ..bump }, 1.0),
        "ritter" => Ok(ritter_case()),
        "stoker" => Ok(stoker_case()),
        other => Err(Error::Config(format!(
            "unknown case `{other}` (expected lake-at-rest, lake-emerged, ritter or stoker)"
        ))),
    }
}

/// Dam break onto a dry bed.
pub fn ritter_solution(x: f64, t: f64, x0: f64, h_l: f64, g: f64) -> (f64, f64) {
    let c = (g * h_l).sqrt();
    if x <= x0 - c * t {
        (h_l, 0.0)
    } else if x < x0 + 2.0 * c * t {
        let xi = (x - x0) / t;
        ((2.0 * c - xi).powi(2) / (9.0 * g), 2.0 / 3.0 * (xi + c))
    } else {
        (0.0, 0.0)
    }
}

/// Middle state `(h_m, u_m)` of the wet dam break, bracketed in
/// `(h_r, h_l)` and found by bisection.
pub fn stoker_middle_state(h_l: f64, h_r: f64, g: f64) -> (f64, f64) {
    let c_l = (g * h_l).sqrt();
    // rarefaction from the left minus shock into the still right state
    let f = |h: f64| 2.0 * (c_l - (g * h).sqrt()) - (h - h_r) * (0.5 * g * (h + h_r) / (h * h_r)).sqrt();
    let (mut lo, mut hi) = (h_r, h_l);
    assert!(f(lo) >= 0.0 && f(hi) <= 0.0, "Stoker bracket failed");
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h_m = 0.5 * (lo + hi);
    (h_m, 2.0 * (c_l - (g * h_m).sqrt()))
}

/// Dam break with water on both sides.
pub fn stoker_solution(x: f64, t: f64, x0: f64, h_l: f64, h_r: f64, g: f64) -> (f64, f64) {
    if h_l == h_r {
        return (h_l, 0.0);
    }
    let c_l = (g * h_l).sqrt();
    let (h_m, u_m) = stoker_middle_state(h_l, h_r, g);
    let c_m = (g * h_m).sqrt();
    let s = h_m * u_m / (h_m - h_r);
    let xi = (x - x0) / t;
    if xi <= -c_l {
        (h_l, 0.0)
    } else if xi <= u_m - c_m {
        ((2.0 * c_l - xi).powi(2) / (9.0 * g), 2.0 / 3.0 * (xi + c_l))
    } else if xi < s {
        (h_m, u_m)
    } else {
        (h_r, 0.0)
    }
}

fn f_side(h: f64, h_k: f64, g: f64) -> f64 {
    if h <= h_k {
        2.0 * ((g * h).sqrt() - (g * h_k).sqrt())
    } else {
        (h - h_k) * (0.5 * g * (h + h_k) / (h * h_k)).sqrt()
    }
}

/// Exact solution of the 1D Riemann problem sampled at `xi = x/t`,
/// including dry states on either side and a dry middle.
pub fn exact_riemann(h_l: f64, u_l: f64, h_r: f64, u_r: f64, g: f64, xi: f64) -> (f64, f64) {
    let (c_l, c_r) = ((g * h_l).sqrt(), (g * h_r).sqrt());
    let left_fan = |xi: f64| {
        let c = (u_l + 2.0 * c_l - xi) / 3.0;
        (c * c / g, (u_l + 2.0 * c_l + 2.0 * xi) / 3.0)
    };
    let right_fan = |xi: f64| {
        let c = (-u_r + 2.0 * c_r + xi) / 3.0;
        (c * c / g, (u_r - 2.0 * c_r + 2.0 * xi) / 3.0)
    };
    if h_l <= 0.0 && h_r <= 0.0 {
        return (0.0, 0.0);
    }
    if h_r <= 0.0 {
        return if xi <= u_l - c_l {
            (h_l, u_l)
        } else if xi < u_l + 2.0 * c_l {
            left_fan(xi)
        } else {
            (0.0, 0.0)
        };
    }
    if h_l <= 0.0 {
        return if xi >= u_r + c_r {
            (h_r, u_r)
        } else if xi > u_r - 2.0 * c_r {
            right_fan(xi)
        } else {
            (0.0, 0.0)
        };
    }
    if 2.0 * (c_l + c_r) <= u_r - u_l {
        return if xi <= u_l - c_l {
            (h_l, u_l)
        } else if xi < u_l + 2.0 * c_l {
            left_fan(xi)
        } else if xi <= u_r - 2.0 * c_r {
            (0.0, 0.0)
        } else if xi < u_r + c_r {
            right_fan(xi)
        } else {
            (h_r, u_r)
        };
    }

    // wet star region: f increases with h
    let f = |h: f64| f_side(h, h_l, g) + f_side(h, h_r, g) + u_r - u_l;
    let (mut lo, mut hi) = (0.0, h_l.max(h_r));
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let h_s = 0.5 * (lo + hi);
    let u_s = 0.5 * (u_l + u_r) + 0.5 * (f_side(h_s, h_r, g) - f_side(h_s, h_l, g));
    let c_s = (g * h_s).sqrt();

    if xi <= u_s {
        if h_s > h_l {
            let s = u_l - c_l * ((h_s + h_l) * h_s / (2.0 * h_l * h_l)).sqrt();
            if xi <= s {
                (h_l, u_l)
            } else {
                (h_s, u_s)
            }
        } else if xi <= u_l - c_l {
            (h_l, u_l)
        } else if xi >= u_s - c_s {
            (h_s, u_s)
        } else {
            left_fan(xi)
        }
    } else if h_s > h_r {
        let s = u_r + c_r * ((h_s + h_r) * h_s / (2.0 * h_r * h_r)).sqrt();
        if xi >= s {
            (h_r, u_r)
        } else {
            (h_s, u_s)
        }
    } else if xi >= u_r + c_r {
        (h_r, u_r)
    } else if xi <= u_s + c_s {
        (h_s, u_s)
    } else {
        right_fan(xi)
    }
}

/// Physical flux of the exact Riemann solution at the interface.
pub fn exact_riemann_flux(h_l: f64, u_l: f64, h_r: f64, u_r: f64, g: f64) -> NumericalFlux {
    let (h, u) = exact_riemann(h_l, u_l, h_r, u_r, g, 0.0);
    NumericalFlux {
        f_h: h * u,
        f_hu: h * u * u + 0.5 * g * h * h,
        f_hv: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// `L1 = Σ|e| dx`, `L2 = √(Σ e² dx)`, `Linf = max |e|`.
pub fn error_norms(numeric: &[f64], exact: &[f64], dx: f64) -> ErrorNorms {
    assert_eq!(numeric.len(), exact.len(), "fields must share the grid");
    let (mut s1, mut s2, mut m) = (0.0, 0.0, 0.0f64);
    for (a, b) in numeric.iter().zip(exact) {
        let e = (a - b).abs();
        s1 += e;
        s2 += e * e;
        m = m.max(e);
    }
    ErrorNorms {
        l1: s1 * dx,
        l2: (s2 * dx).sqrt(),
        linf: m,
    }
}

/// `log2(e_coarse / e_fine)` for a refinement by two.
pub fn observed_order(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}

/// Outcome of running a case on `n` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: String,
    pub n: usize,
    pub dx: f64,
    pub t_final: f64,
    pub steps: u64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub h: Vec<f64>,
    pub u: Vec<f64>,
    pub h_exact: Vec<f64>,
    pub u_exact: Vec<f64>,
    pub norms_h: ErrorNorms,
    pub norms_u: ErrorNorms,
    /// Smallest depth seen at any stage of any step.
    pub min_stage_h: f64,
    /// Largest `|v|` anywhere in the strip (should stay zero).
    pub max_abs_v: f64,
    /// True when every row of the strip ended bitwise equal.
    pub rows_identical: bool,
}

impl CaseResult {
    /// Position of the last crossing of `level` when scanning from the right.
    pub fn front_position(&self, level: f64) -> Option<f64> {
        let k = (1..self.n).rev().find(|&k| self.h[k - 1] > level && self.h[k] <= level)?;
        let (a, b) = (self.h[k - 1], self.h[k]);
        Some(self.x[k - 1] + (a - level) / (a - b) * self.dx)
    }
}

/// Builds the strip for `case` with `n` cells along x.
pub fn strip_state(case: &AnalyticalCase, n: usize) -> State {
    let dx = case.length / n as f64;
    let mut s = State::new(n, 3, dx);
    for i in 0..n {
        let x = (i as f64 + 0.5) * dx;
        let (h, u) = case.initial(x);
        for j in 0..3 {
            s.z.set(i as isize, j, case.topography(x));
            s.h.set(i as isize, j, h);
            s.hu.set(i as isize, j, h * u);
        }
    }
    s
}

/// Runs `case` on `n` cells up to its horizon.
pub fn run_case(case: &AnalyticalCase, n: usize, options: SolverOptions) -> Result<CaseResult> {
    if n < 10 {
        return Err(Error::Config(format!("need at least 10 cells, got {n}")));
    }
    let params = PhysicalParams {
        g: case.g,
        ..PhysicalParams::default()
    };
    let dx = case.length / n as f64;
    let mut solver = Solver::new(strip_state(case, n), BoundarySpec::default(), params, options)?;
    let mut min_stage_h = f64::INFINITY;
    while solver.time() < case.horizon {
        let cap = case.horizon - solver.time();
        let d = solver.step(cap)?;
        if d.dt_used == cap {
            let k = solver.steps();
            solver.set_clock(case.horizon, k);
        }
        min_stage_h = min_stage_h.min(d.min_stage_h);
    }
    let s = solver.state();
    let t = solver.time();
    let mut out = CaseResult {
        name: case.name.clone(),
        n,
        dx,
        t_final: t,
        steps: solver.steps(),
        x: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        h_exact: Vec::with_capacity(n),
        u_exact: Vec::with_capacity(n),
        norms_h: ErrorNorms::default(),
        norms_u: ErrorNorms::default(),
        min_stage_h,
        max_abs_v: 0.0,
        rows_identical: true,
    };
    for i in 0..n as isize {
        let x = (i as f64 + 0.5) * dx;
        let h = s.h.get(i, 1);
        let (he, ue) = case.exact(x, t);
        out.x.push(x);
        out.z.push(s.z.get(i, 1));
        out.h.push(h);
        out.u.push(velocity(h, s.hu.get(i, 1), params.h_dry));
        out.h_exact.push(he);
        out.u_exact.push(ue);
        for j in 0..3 {
            out.max_abs_v = out.max_abs_v.max(velocity(s.h.get(i, j), s.hv.get(i, j), params.h_dry).abs());
            if s.h.get(i, j) != h || s.hu.get(i, j) != s.hu.get(i, 1) {
                out.rows_identical = false;
            }
        }
    }
    out.norms_h = error_norms(&out.h, &out.h_exact, dx);
    out.norms_u = error_norms(&out.u, &out.u_exact, dx);
    Ok(out)
}

/// Runs a named case at `n / 2` and `n` cells and renders a CSV report with
/// the observed L1 order of `h` on the finer row.
pub fn validation_report(name: &str, n: usize, options: SolverOptions) -> Result<(Vec<CaseResult>, String)> {
    let case = case_by_name(name)?;
    if n < 10 {
        return Err(Error::Config(format!("need at least 10 cells, got {n}")));
    }
    let coarse = run_case(&case, (n / 2).max(10), options)?;
    let fine = run_case(&case, n, options)?;
    let mut csv = String::from("case,n,dx,t_final,steps,l1_h,l2_h,linf_h,l1_u,l2_u,linf_u,order_l1_h,min_stage_h\n");
    // errors at round-off level carry no convergence information
    let order = (coarse.norms_h.l1 > 1e-12).then(|| observed_order(coarse.norms_h.l1, fine.norms_h.l1));
    for (r, order) in [(&coarse, None), (&fine, order)] {
        let order = order.filter(|o| o.is_finite()).map(|o| o.to_string()).unwrap_or_default();
        writeln!(
            csv,
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
            r.name,
            r.n,
            r.dx,
            r.t_final,
            r.steps,
            r.norms_h.l1,
            r.norms_h.l2,
            r.norms_h.linf,
            r.norms_u.l1,
            r.norms_u.l2,
            r.norms_u.linf,
            order,
            r.min_stage_h
        )
        .expect("writing to a String");
    }
    Ok((vec![coarse, fine], csv))
}

pub fn write_report(path: impl AsRef<Path>, csv: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, csv).map_err(|e| Error::io(path.display(), e))
}
