use std::path::Path;

use crate::error::{Error, Result};

/// Piecewise-linear discharge series `Q(t)`, clamped outside its knots.
#[derive(Debug, Clone, PartialEq)]
pub struct Hydrograph {
    knots: Vec<(f64, f64)>,
}

impl Hydrograph {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Config("hydrograph needs at least one knot".into()));
        }
        for (k, &(t, q)) in knots.iter().enumerate() {
            if !t.is_finite() || !(q >= 0.0 && q.is_finite()) {
                return Err(Error::Config(format!("hydrograph knot {k} ({t}, {q}) is invalid")));
            }
            if k > 0 && t <= knots[k - 1].0 {
                return Err(Error::Config(format!("hydrograph times must increase strictly (knot {k})")));
            }
        }
        Ok(Hydrograph { knots })
    }

    pub fn constant(q: f64) -> Self {
        Hydrograph { knots: vec![(0.0, q)] }
    }

    /// Rises linearly from `base` to `peak` over `rise` seconds and falls back
    /// over `fall` seconds.
    pub fn triangular(base: f64, peak: f64, rise: f64, fall: f64) -> Result<Self> {
        Hydrograph::new(vec![(0.0, base), (rise, peak), (rise + fall, base)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn peak(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(0.0, f64::max)
    }

    pub fn interpolate(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        let last = k[k.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        // first knot strictly after t
        let hi = k.partition_point(|&(tk, _)| tk <= t);
        let (t0, q0) = k[hi - 1];
        let (t1, q1) = k[hi];
        if t == t0 {
            return q0;
        }
        q0 + (q1 - q0) * (t - t0) / (t1 - t0)
    }

    /// Two-column `t Q` text, `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut knots = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(i + 1, format!("non-numeric hydrograph line `{line}`")))?;
            match nums.as_slice() {
                [t, q] => knots.push((*t, *q)),
                _ => return Err(Error::parse(i + 1, "expected two columns `t Q`")),
            }
        }
        Hydrograph::new(knots)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
        Hydrograph::parse(&text)
    }
}

pub fn interpolate_q(hg: &Hydrograph, t: f64) -> f64 {
    hg.interpolate(t)
}

/// Constant discharge held for a spin-up period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinUp {
    pub q: f64,
    pub duration: f64,
}

/// Inflow schedule: optional spin-up followed by a hydrograph whose time
/// origin is the end of the spin-up.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub spin_up: Option<SpinUp>,
    pub hydrograph: Hydrograph,
}

impl Forcing {
    pub fn new(spin_up: Option<SpinUp>, hydrograph: Hydrograph) -> Self {
        Forcing { spin_up, hydrograph }
    }

    pub fn spin_up_duration(&self) -> f64 {
        self.spin_up.map_or(0.0, |s| s.duration)
    }

    pub fn q_at(&self, t: f64) -> f64 {
        match self.spin_up {
            Some(s) if t < s.duration => s.q,
            _ => self.hydrograph.interpolate(t - self.spin_up_duration()),
        }
    }
}
