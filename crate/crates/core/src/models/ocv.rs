//! Piecewise-linear open-circuit-voltage lookup.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_TABLE_CSV: &str = include_str!("../../data/ocv_inr21700_v1.csv");

/// Version tag of the bundled default table.
pub const DEFAULT_TABLE_VERSION: &str = "inr21700-v1";

/// Monotone `(soc, ocv)` knots covering `soc` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct OcvTable {
    soc: Vec<f64>,
    ocv: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct Row {
    soc: f64,
    ocv_v: f64,
}

impl OcvTable {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let (soc, ocv): (Vec<f64>, Vec<f64>) = knots.into_iter().unzip();
        let table = Self { soc, ocv };
        table.validate()?;
        Ok(table)
    }

    /// The bundled 21-knot table for the modelled 21700 cell.
    pub fn default_cell() -> Self {
        Self::from_csv_str(DEFAULT_TABLE_CSV).expect("bundled OCV table is valid")
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let knots = reader
            .deserialize::<Row>()
            .map(|r| r.map(|r| (r.soc, r.ocv_v)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(knots)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid("ocv_table", reason));
        if self.soc.len() < 2 {
            return bad("needs at least two knots");
        }
        if self.soc.iter().chain(&self.ocv).any(|v| !v.is_finite()) {
            return bad("knots must be finite");
        }
        if self.soc.windows(2).any(|w| w[1] <= w[0]) || self.ocv.windows(2).any(|w| w[1] <= w[0]) {
            return bad("soc and ocv must both be strictly increasing");
        }
        if self.soc[0] != 0.0 || *self.soc.last().unwrap() != 1.0 {
            return bad("soc knots must span exactly [0, 1]");
        }
        Ok(())
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.soc.iter().copied().zip(self.ocv.iter().copied())
    }

    pub fn min_ocv(&self) -> f64 {
        self.ocv[0]
    }

    pub fn max_ocv(&self) -> f64 {
        *self.ocv.last().unwrap()
    }

    /// OCV at `soc`, clamped to the table ends.
    pub fn ocv_of(&self, soc: f64) -> f64 {
        interpolate(&self.soc, &self.ocv, soc)
    }

    /// Inverse lookup: SoC at which the table reaches `ocv`.
    pub fn soc_of(&self, ocv: f64) -> f64 {
        interpolate(&self.ocv, &self.soc, ocv)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    // first knot strictly greater than x; 1 <= hi <= last
    let hi = xs.partition_point(|&k| k <= x);
    let lo = hi - 1;
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + t * (ys[hi] - ys[lo])
}

impl TryFrom<Vec<[f64; 2]>> for OcvTable {
    type Error = Error;
    fn try_from(knots: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(knots.into_iter().map(|[s, v]| (s, v)).collect())
    }
}

impl From<OcvTable> for Vec<[f64; 2]> {
    fn from(table: OcvTable) -> Self {
        table.knots().map(|(s, v)| [s, v]).collect()
    }
}
