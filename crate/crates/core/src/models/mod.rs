//! Battery models, from the lossless energy bucket up to a series-parallel
//! pack of equivalent-circuit cells.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub mod clc;
pub mod ecm;
pub mod ocv;
pub mod pack;
pub mod simple;

pub use clc::{ClcBattery, ClcParams};
pub use ecm::{CellParams, EcmBattery, EcmParams, EcmState};
pub use ocv::OcvTable;
pub use pack::{Heterogeneity, PackBattery, PackParams, PackTopology, Parallelism};
pub use simple::{SimpleBattery, SimpleParams};

/// Nominal capacity of the modelled 21700 cell; 1C = 5 A.
pub const CELL_CAPACITY_AH: f64 = 5.0;
/// Nominal cell voltage used for C-rate to power conversions.
pub const CELL_NOMINAL_V: f64 = 3.63;
/// Energy of one cell from a full 0.2C discharge, used by the simple model.
pub const CELL_ENERGY_WH: f64 = 18.87;

/// Constant power in W that corresponds to `c_rate` for `num_cells` cells.
pub fn c_rate_power_w(c_rate: f64, num_cells: usize) -> f64 {
    c_rate * CELL_CAPACITY_AH * CELL_NOMINAL_V * num_cells as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Simple,
    Clc,
    Ecm,
    Pack,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Simple,
        ModelKind::Clc,
        ModelKind::Ecm,
        ModelKind::Pack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Simple => "simple",
            ModelKind::Clc => "clc",
            ModelKind::Ecm => "ecm",
            ModelKind::Pack => "pack",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(ModelKind::Simple),
            "clc" => Ok(ModelKind::Clc),
            "ecm" => Ok(ModelKind::Ecm),
            "pack" => Ok(ModelKind::Pack),
            other => Err(Error::InvalidConfig(format!(
                "unknown model `{other}` (expected simple, clc, ecm or pack)"
            ))),
        }
    }
}

/// Splits `num_cells` into an `(ns, np)` pair as close to square as possible,
/// with `ns <= np`.
pub fn near_square_topology(num_cells: usize) -> (usize, usize) {
    let num_cells = num_cells.max(1);
    let mut ns = (num_cells as f64).sqrt() as usize;
    while ns > 1 && num_cells % ns != 0 {
        ns -= 1;
    }
    let ns = ns.max(1);
    (ns, num_cells / ns)
}
