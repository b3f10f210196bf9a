//! Plain-text georeferenced grids (the ESRI ASCII grid layout).
//!
//! A grid file is six header lines followed by `nrows` lines of `ncols`
//! whitespace-separated values. Row 0 is the northernmost row.
//!
//! ```text
//! ncols        4
//! nrows        3
//! xllcorner    0.0
//! yllcorner    0.0
//! cellsize     1.0
//! NODATA_value -9999
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_NODATA: f64 = -9999.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub ncols: usize,
    pub nrows: usize,
    /// Lower-left corner of the grid, meters.
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
    /// Row-major, row 0 = north.
    pub values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(ncols: usize, nrows: usize, xll: f64, yll: f64, cellsize: f64, fill: f64) -> Self {
        RasterGrid {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata: DEFAULT_NODATA,
            values: vec![fill; ncols * nrows],
        }
    }

    /// A grid with the same georeferencing as `self`, filled with `fill`.
    pub fn like(&self, fill: f64) -> Self {
        RasterGrid {
            values: vec![fill; self.values.len()],
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.ncols + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.index(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let i = self.index(row, col);
        self.values[i] = v;
    }

    #[inline]
    pub fn is_nodata(&self, idx: usize) -> bool {
        self.values[idx] == self.nodata
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.ncols == 0 || self.nrows == 0 {
            return Err(Error::DimensionMismatch(format!(
                "grid must have at least one row and column, got {}x{}",
                self.nrows, self.ncols
            )));
        }
        if !(self.cellsize > 0.0 && self.cellsize.is_finite()) {
            return Err(Error::Config(format!("cellsize must be positive, got {}", self.cellsize)));
        }
        if self.values.len() != self.ncols * self.nrows {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values ({} x {}), found {}",
                self.ncols * self.nrows,
                self.nrows,
                self.ncols,
                self.values.len()
            )));
        }
        if let Some(i) = self
            .values
            .iter()
            .position(|&v| !v.is_finite() && v != self.nodata)
        {
            return Err(Error::Config(format!(
                "value at row {}, col {} is not finite",
                i / self.ncols,
                i % self.ncols
            )));
        }
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
        read_ascii_grid(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>, precision: Option<usize>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, write_ascii_grid(self, precision)).map_err(|e| Error::io(path.display(), e))
    }
}

const HEADER_KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];

fn parse_number(tok: &str) -> Option<f64> {
    // `f64::from_str` is locale-independent and accepts exponents. It also
    // accepts "inf"/"nan", which are caught by validate().
    tok.parse::<f64>().ok()
}

pub fn read_ascii_grid(text: &str) -> Result<RasterGrid> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let mut header = [0.0f64; 6];
    let mut x_center = false;
    let mut y_center = false;
    for (k, expected) in HEADER_KEYS.iter().enumerate() {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| Error::parse(k + 1, format!("missing header line `{expected}`")))?;
        let mut toks = line.split_whitespace();
        let key = toks
            .next()
            .ok_or_else(|| Error::parse(lineno, format!("expected header `{expected}`, found empty line")))?
            .to_ascii_lowercase();
        let accepted = match k {
            2 if key == "xllcenter" => {
                x_center = true;
                true
            }
            3 if key == "yllcenter" => {
                y_center = true;
                true
            }
            _ => key == *expected,
        };
        if !accepted {
            return Err(Error::parse(lineno, format!("expected header `{expected}`, found `{key}`")));
        }
        let value = toks
            .next()
            .and_then(parse_number)
            .ok_or_else(|| Error::parse(lineno, format!("header `{key}` has no numeric value")))?;
        if toks.next().is_some() {
            return Err(Error::parse(lineno, format!("trailing tokens after header `{key}`")));
        }
        header[k] = value;
    }

    let as_count = |v: f64, name: &str, line: usize| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(Error::parse(line, format!("`{name}` must be a positive integer, got {v}")))
        }
    };
    let ncols = as_count(header[0], "ncols", 1)?;
    let nrows = as_count(header[1], "nrows", 2)?;
    let cellsize = header[4];
    if !(cellsize > 0.0 && cellsize.is_finite()) {
        return Err(Error::parse(5, format!("cellsize must be positive, got {cellsize}")));
    }
    let xll = if x_center { header[2] - 0.5 * cellsize } else { header[2] };
    let yll = if y_center { header[3] - 0.5 * cellsize } else { header[3] };
    let nodata = header[5];

    let mut values = Vec::with_capacity(ncols * nrows);
    let mut row = 0usize;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if row >= nrows {
            return Err(Error::DimensionMismatch(format!(
                "more than {nrows} data rows (extra data at line {lineno})"
            )));
        }
        let before = values.len();
        for (col, tok) in line.split_whitespace().enumerate() {
            let v = parse_number(tok).ok_or_else(|| {
                Error::parse(lineno, format!("non-numeric token `{tok}` at row {row}, column {col}"))
            })?;
            if !v.is_finite() && v != nodata {
                return Err(Error::parse(lineno, format!("non-finite value at row {row}, column {col}")));
            }
            values.push(v);
        }
        let count = values.len() - before;
        if count != ncols {
            return Err(Error::DimensionMismatch(format!(
                "row {row} (line {lineno}) has {count} values, expected {ncols}"
            )));
        }
        row += 1;
    }
    if row != nrows {
        return Err(Error::DimensionMismatch(format!("expected {nrows} data rows, found {row}")));
    }

    Ok(RasterGrid {
        ncols,
        nrows,
        xll,
        yll,
        cellsize,
        nodata,
        values,
    })
}

fn format_value(out: &mut String, v: f64, precision: Option<usize>) {
    match precision {
        // Shortest representation that parses back to the same double.
        None => {
            let _ = write!(out, "{v}");
        }
        Some(p) => {
            let start = out.len();
            let _ = write!(out, "{v:.p$}");
            if out[start..].contains('.') {
                let trimmed = out[start..].trim_end_matches('0').trim_end_matches('.').len();
                out.truncate(start + trimmed);
            }
            if &out[start..] == "-0" {
                out.truncate(start);
                out.push('0');
            }
        }
    }
}

/// Serializes a grid. `precision` is the number of decimal places; `None`
/// writes every value exactly (shortest round-trip form). The nodata
/// sentinel is always written verbatim.
pub fn write_ascii_grid(grid: &RasterGrid, precision: Option<usize>) -> String {
    let mut out = String::with_capacity(grid.values.len() * 8 + 128);
    let _ = writeln!(out, "ncols {}", grid.ncols);
    let _ = writeln!(out, "nrows {}", grid.nrows);
    let _ = writeln!(out, "xllcorner {}", grid.xll);
    let _ = writeln!(out, "yllcorner {}", grid.yll);
    let _ = writeln!(out, "cellsize {}", grid.cellsize);
    let _ = writeln!(out, "NODATA_value {}", grid.nodata);
    for row in grid.values.chunks(grid.ncols) {
        for (c, &v) in row.iter().enumerate() {
            if c > 0 {
                out.push(' ');
            }
            if v == grid.nodata {
                let _ = write!(out, "{}", grid.nodata);
            } else {
                format_value(&mut out, v, precision);
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ONE: &str = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n5.0\n";

    #[test]
    fn minimal_grid() {
        let g = read_ascii_grid(ONE).unwrap();
        assert_eq!((g.ncols, g.nrows), (1, 1));
        assert_eq!(g.values, vec![5.0]);
        assert_eq!(g.cellsize, 1.0);
    }

    #[test]
    fn nodata_cell_is_flagged() {
        let t = "NCOLS 2\nNROWS 2\nXLLCORNER 10\nYLLCORNER 20\nCELLSIZE 0.5\nnodata_value -9999\n1 2\n-9999 4\r\n";
        let g = read_ascii_grid(t).unwrap();
        assert!(g.is_nodata(2));
        assert!(!g.is_nodata(0));
        assert_eq!(g.xll, 10.0);
        assert_eq!(g.get(1, 1), 4.0);
    }

    #[test]
    fn center_registration_is_shifted() {
        let t = "ncols 1\nnrows 1\nxllcenter 0.5\nyllcenter 1.5\ncellsize 1\nNODATA_value -9999\n3\n";
        let g = read_ascii_grid(t).unwrap();
        assert_eq!((g.xll, g.yll), (0.0, 1.0));
    }

    #[test]
    fn scientific_notation() {
        let t = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1e0\nNODATA_value -9999\n1.5e2 -2E-3\n";
        assert_eq!(read_ascii_grid(t).unwrap().values, vec![150.0, -0.002]);
    }

    #[test]
    fn header_errors_name_the_line() {
        let t = "ncols 1\nnrows 1\ncellsize 1\nyllcorner 0\nxllcorner 0\nNODATA_value -9999\n5\n";
        match read_ascii_grid(t) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let t = "ncols x\nnrows 1\n";
        assert!(matches!(read_ascii_grid(t), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn wrong_value_count() {
        let t = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3\n";
        assert!(matches!(read_ascii_grid(t), Err(Error::DimensionMismatch(_))));
        let t = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n";
        assert!(matches!(read_ascii_grid(t), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn bad_token_reports_position() {
        let t = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3 abc\n";
        match read_ascii_grid(t) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 8);
                assert!(message.contains("row 1, column 1"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn writes_header_and_trimmed_values() {
        let g = read_ascii_grid(ONE).unwrap();
        let text = write_ascii_grid(&g, Some(6));
        assert!(text.contains("ncols 1\n"));
        assert_eq!(text.lines().last(), Some("5"));
    }

    #[test]
    fn nodata_written_verbatim() {
        let mut g = RasterGrid::new(2, 1, 0.0, 0.0, 1.0, 1.25);
        g.values[1] = g.nodata;
        let text = write_ascii_grid(&g, Some(3));
        assert_eq!(text.lines().last(), Some("1.25 -9999"));
    }

    fn arb_grid() -> impl Strategy<Value = RasterGrid> {
        (1usize..12, 1usize..12, -1e5f64..1e5, -1e5f64..1e5, 0.01f64..100.0).prop_flat_map(
            |(nc, nr, xll, yll, cs)| {
                proptest::collection::vec(
                    prop_oneof![9 => -1e4f64..1e4, 1 => Just(DEFAULT_NODATA)],
                    nc * nr,
                )
                .prop_map(move |values| RasterGrid {
                    ncols: nc,
                    nrows: nr,
                    xll,
                    yll,
                    cellsize: cs,
                    nodata: DEFAULT_NODATA,
                    values,
                })
            },
        )
    }

    proptest! {
        #[test]
        fn exact_round_trip(g in arb_grid()) {
            let back = read_ascii_grid(&write_ascii_grid(&g, None)).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn fixed_precision_round_trip(g in arb_grid()) {
            let back = read_ascii_grid(&write_ascii_grid(&g, Some(6))).unwrap();
            prop_assert_eq!((back.ncols, back.nrows), (g.ncols, g.nrows));
            for (a, b) in back.values.iter().zip(&g.values) {
                prop_assert!((a - b).abs() <= 0.5e-6 * (1.0 + 1e-9 * b.abs()) + 1e-12, "{} vs {}", a, b);
            }
        }
    }
}
