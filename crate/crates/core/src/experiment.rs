//! Constant-power charge and discharge experiments.
//!
//! A storage is driven at a fixed C-rate power from full to empty (or empty
//! to full) until the SoC stops moving or reaches its boundary.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::StorageConfig;
use crate::error::{Error, Result};
use crate::models::{c_rate_power_w, ModelKind};
use crate::storage::Storage;
use crate::units::{DurationS, PowerW, Soc};

/// The run ends once one step moves the SoC by less than this.
pub const MIN_SOC_CHANGE: f64 = 1e-5;
const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Charge,
    Discharge,
}

impl Direction {
    pub fn start_soc(self) -> Soc {
        match self {
            Direction::Charge => Soc::EMPTY,
            Direction::Discharge => Soc::FULL,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Direction::Charge => 1.0,
            Direction::Discharge => -1.0,
        }
    }

    fn at_boundary(self, soc: Soc) -> bool {
        match self {
            Direction::Charge => soc >= Soc::FULL,
            Direction::Discharge => soc <= Soc::EMPTY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub time_s: f64,
    pub soc: f64,
    pub applied_power_w: f64,
    /// Cumulative energy moved since the start (signed).
    pub energy_wh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub model: ModelKind,
    pub direction: Direction,
    pub c_rate: f64,
    pub requested_power_w: f64,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentResult {
    /// Total energy moved, as a positive number.
    pub fn energy_wh(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.energy_wh.abs())
    }

    pub fn duration_s(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.time_s)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(Error::Write)?;
        Ok(())
    }
}

/// Drives `storage` at `power` until the SoC change per step drops below
/// [`MIN_SOC_CHANGE`] or the boundary in `direction` is reached. The first
/// row is the initial state.
pub fn run_constant_power(
    storage: &mut dyn Storage,
    power: PowerW,
    step: DurationS,
    direction: Direction,
) -> Result<Vec<ExperimentRow>> {
    let mut rows = vec![ExperimentRow {
        time_s: 0.0,
        soc: storage.soc().value(),
        applied_power_w: 0.0,
        energy_wh: 0.0,
    }];
    let mut energy = 0.0;
    for k in 1..=MAX_STEPS {
        let before = storage.soc();
        let response = storage.update(power, step)?;
        energy += response.energy_moved.value();
        rows.push(ExperimentRow {
            time_s: k as f64 * step.seconds(),
            soc: response.soc.value(),
            applied_power_w: response.applied_power.value(),
            energy_wh: energy,
        });
        let moved = (response.soc.value() - before.value()).abs();
        if moved < MIN_SOC_CHANGE || direction.at_boundary(response.soc) {
            break;
        }
    }
    Ok(rows)
}

/// Full charge or discharge of a default-parameter `model` with
/// `num_cells` cells at `c_rate` (1C = 5 A at 3.63 V per cell).
pub fn constant_power_experiment(
    model: ModelKind,
    direction: Direction,
    c_rate: f64,
    num_cells: usize,
    step: DurationS,
) -> Result<ExperimentResult> {
    if !(c_rate > 0.0 && c_rate.is_finite()) {
        return Err(Error::invalid("c_rate", "must be > 0"));
    }
    if num_cells == 0 {
        return Err(Error::invalid("num_cells", "must be >= 1"));
    }
    let config = StorageConfig::for_model(model, num_cells, direction.start_soc());
    let mut storage = config.build(std::path::Path::new("."))?;
    let power = PowerW::new(direction.sign() * c_rate_power_w(c_rate, num_cells))?;
    let rows = run_constant_power(storage.as_mut(), power, step, direction)?;
    Ok(ExperimentResult {
        model,
        direction,
        c_rate,
        requested_power_w: power.value(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minute() -> DurationS {
        DurationS::new(60.0).unwrap()
    }

    #[test]
    fn simple_discharge_is_linear() {
        let r = constant_power_experiment(ModelKind::Simple, Direction::Discharge, 1.0, 1, minute()).unwrap();
        let slope = r.rows[1].soc - r.rows[0].soc;
        for w in r.rows.windows(2).take(r.rows.len() - 2) {
            assert!(((w[1].soc - w[0].soc) - slope).abs() < 1e-12);
        }
        assert_eq!(r.rows.last().unwrap().soc, 0.0);
        assert!((r.energy_wh() - 18.87).abs() < 1e-9);
    }

    #[test]
    fn charge_ends_full() {
        for model in ModelKind::ALL {
            let r = constant_power_experiment(model, Direction::Charge, 0.5, 1, minute()).unwrap();
            let last = r.rows.last().unwrap();
            assert!(last.soc > 0.9, "{model}: {}", last.soc);
            assert!(r.rows.windows(2).all(|w| w[1].soc >= w[0].soc), "{model}");
        }
    }

    #[test]
    fn clc_caps_discharge_power() {
        let fast = constant_power_experiment(ModelKind::Clc, Direction::Discharge, 2.0, 1, minute()).unwrap();
        let capped = constant_power_experiment(ModelKind::Clc, Direction::Discharge, 1.5, 1, minute()).unwrap();
        assert_eq!(fast.rows, capped.rows);
    }

    #[test]
    fn rejects_bad_rate() {
        assert!(constant_power_experiment(ModelKind::Ecm, Direction::Charge, 0.0, 1, minute()).is_err());
        assert!(constant_power_experiment(ModelKind::Ecm, Direction::Charge, -1.0, 1, minute()).is_err());
    }

    #[test]
    fn csv_columns() {
        let r = constant_power_experiment(ModelKind::Simple, Direction::Charge, 1.0, 1, minute()).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "time_s,soc,applied_power_w,energy_wh");
    }
}
