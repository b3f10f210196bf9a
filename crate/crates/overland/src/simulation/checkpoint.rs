//! Binary restart files: a fixed header followed by raw little-endian
//! double-precision fields in raster order (row 0 = north).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::state::PhysicalParams;

const MAGIC: &[u8; 8] = b"OVLCKPT1";

/// FNV-1a hash of everything a checkpoint must agree on to be resumable.
pub fn params_hash(params: &PhysicalParams, nrows: usize, ncols: usize, cellsize: f64) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for x in [params.g, params.manning_n, params.h_dry, params.cfl, cellsize] {
        eat(&x.to_le_bytes());
    }
    eat(&(nrows as u64).to_le_bytes());
    eat(&(ncols as u64).to_le_bytes());
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub nrows: usize,
    pub ncols: usize,
    pub time: f64,
    pub step: u64,
    pub params_hash: u64,
    pub initial_volume: f64,
    pub inflow_volume: f64,
    pub outflow_volume: f64,
    /// `h, hu, hv, max_h, max_speed, time_of_max_h`, each `nrows × ncols`.
    pub fields: [Vec<f64>; 6],
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        for v in [self.nrows as u64, self.ncols as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.time.to_le_bytes())?;
        w.write_all(&self.step.to_le_bytes())?;
        w.write_all(&self.params_hash.to_le_bytes())?;
        for v in [self.initial_volume, self.inflow_volume, self.outflow_volume] {
            w.write_all(&v.to_le_bytes())?;
        }
        for f in &self.fields {
            assert_eq!(f.len(), self.nrows * self.ncols);
            let mut buf = Vec::with_capacity(8 * f.len());
            for v in f {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let bad = |m: &str| Error::Config(format!("invalid checkpoint: {m}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("wrong magic"));
        }
        let mut word = || -> Result<[u8; 8]> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
            Ok(b)
        };
        let nrows = u64::from_le_bytes(word()?) as usize;
        let ncols = u64::from_le_bytes(word()?) as usize;
        let time = f64::from_le_bytes(word()?);
        let step = u64::from_le_bytes(word()?);
        let params_hash = u64::from_le_bytes(word()?);
        let initial_volume = f64::from_le_bytes(word()?);
        let inflow_volume = f64::from_le_bytes(word()?);
        let outflow_volume = f64::from_le_bytes(word()?);
        let n = nrows.checked_mul(ncols).ok_or_else(|| bad("grid size overflows"))?;
        let mut fields: [Vec<f64>; 6] = Default::default();
        for f in &mut fields {
            let mut buf = vec![0u8; 8 * n];
            r.read_exact(&mut buf).map_err(|_| bad("truncated field data"))?;
            *f = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
        }
        Ok(Checkpoint {
            nrows,
            ncols,
            time,
            step,
            params_hash,
            initial_volume,
            inflow_volume,
            outflow_volume,
            fields,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path.display(), e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path.display(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display(), e))?;
        Checkpoint::read_from(&mut std::io::BufReader::new(file))
    }
}
