//! Lossless linear battery: an energy bucket of capacity `C` with no power
//! limits and no inefficiency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::storage::{ParamValue, Parameterized, Storage, StorageResponse, StorageState};
use crate::units::{energy_of, DurationS, EnergyWh, PowerW, Soc};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpleParams {
    pub capacity_wh: EnergyWh,
    pub initial_soc: Soc,
}

impl SimpleParams {
    /// Pack capacity from a per-cell energy multiplied by the cell count.
    pub fn from_cells(cell_capacity_wh: EnergyWh, num_cells: usize, initial_soc: Soc) -> Self {
        Self {
            capacity_wh: cell_capacity_wh * num_cells as f64,
            initial_soc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity_wh.value() <= 0.0 {
            return Err(Error::invalid("capacity_wh", "must be > 0"));
        }
        Ok(())
    }
}

/// One step of the bucket update.
///
/// Returns the new energy level and the energy that entered (`> 0`) or left
/// (`< 0`) the battery. If a boundary is reached within the step, the moved
/// energy is exactly what it took to reach it.
pub fn simple_update(
    b_prev: EnergyWh,
    power: PowerW,
    duration: DurationS,
    capacity: EnergyWh,
) -> (EnergyWh, EnergyWh) {
    let (b, c) = (b_prev.value(), capacity.value());
    let requested = energy_of(power, duration);
    let raw = b + requested.value();
    if power.value() >= 0.0 {
        if raw > c {
            (capacity, EnergyWh::raw(c - b))
        } else {
            (EnergyWh::raw(raw), requested)
        }
    } else if raw < 0.0 {
        (EnergyWh::ZERO, EnergyWh::raw(-b))
    } else {
        (EnergyWh::raw(raw), requested)
    }
}

#[derive(Debug, Clone)]
pub struct SimpleBattery {
    capacity_wh: f64,
    energy_wh: f64,
}

impl SimpleBattery {
    pub fn new(capacity_wh: EnergyWh, initial_soc: Soc) -> Result<Self> {
        Self::from_params(&SimpleParams {
            capacity_wh,
            initial_soc,
        })
    }

    pub fn from_params(params: &SimpleParams) -> Result<Self> {
        params.validate()?;
        let capacity_wh = params.capacity_wh.value();
        Ok(Self {
            capacity_wh,
            energy_wh: capacity_wh * params.initial_soc.value(),
        })
    }

    pub fn energy(&self) -> EnergyWh {
        EnergyWh::raw(self.energy_wh)
    }

    pub fn capacity(&self) -> EnergyWh {
        EnergyWh::raw(self.capacity_wh)
    }
}

impl Parameterized for SimpleBattery {
    fn set_parameter(&mut self, key: &str, value: ParamValue) -> Result<()> {
        match key {
            "capacity_wh" => {
                let c = value.number(key)?;
                if c <= 0.0 {
                    return Err(Error::invalid(key, "must be > 0"));
                }
                self.capacity_wh = c;
                self.energy_wh = self.energy_wh.min(c);
                Ok(())
            }
            _ => Err(Error::UnknownParameter(key.to_owned())),
        }
    }

    fn parameter(&self, key: &str) -> Result<ParamValue> {
        match key {
            "capacity_wh" => Ok(self.capacity_wh.into()),
            _ => Err(Error::UnknownParameter(key.to_owned())),
        }
    }
}

impl Storage for SimpleBattery {
    fn model(&self) -> ModelKind {
        ModelKind::Simple
    }

    fn update(&mut self, requested: PowerW, duration: DurationS) -> Result<StorageResponse> {
        let (b_new, moved) =
            simple_update(self.energy(), requested, duration, self.capacity());
        self.energy_wh = b_new.value();
        // Boundary hits report the average power that moved exactly `moved`.
        let applied = if moved == energy_of(requested, duration) {
            requested
        } else {
            PowerW::raw(moved.value() / duration.hours())
        };
        Ok(StorageResponse {
            energy_moved: moved,
            applied_power: applied,
            soc: self.soc(),
        })
    }

    fn soc(&self) -> Soc {
        Soc::saturating(self.energy_wh / self.capacity_wh)
    }

    fn state(&self) -> StorageState {
        StorageState::new().with("b_wh", self.energy_wh)
    }

    fn power_limits(&self, duration: DurationS) -> (PowerW, PowerW) {
        let h = duration.hours();
        (
            PowerW::raw(-self.energy_wh / h),
            PowerW::raw((self.capacity_wh - self.energy_wh) / h),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn wh(v: f64) -> EnergyWh {
        EnergyWh::new(v).unwrap()
    }
    fn w(v: f64) -> PowerW {
        PowerW::new(v).unwrap()
    }
    fn s(v: f64) -> DurationS {
        DurationS::new(v).unwrap()
    }

    #[test]
    fn clamps_at_full() {
        let (b, e) = simple_update(wh(9.435), w(18.87), s(3600.0), wh(18.87));
        assert_eq!(b.value(), 18.87);
        assert_relative_eq!(e.value(), 9.435, epsilon = 1e-12);
    }

    #[test]
    fn zero_power_is_identity() {
        let (b, e) = simple_update(wh(3.3), w(0.0), s(60.0), wh(18.87));
        assert_eq!(b.value(), 3.3);
        assert_eq!(e.value(), 0.0);
    }

    #[test]
    fn clamps_at_empty() {
        let (b, e) = simple_update(wh(0.01), w(-36.0), s(3600.0), wh(18.87));
        assert_eq!(b.value(), 0.0);
        assert_eq!(e.value(), -0.01);
    }

    #[test]
    fn pack_capacity_scales_with_cells() {
        let p = SimpleParams::from_cells(wh(18.87), 256, Soc::new(0.5).unwrap());
        assert_relative_eq!(p.capacity_wh.value(), 4830.72, epsilon = 1e-9);
        let bat = SimpleBattery::from_params(&p).unwrap();
        assert_eq!(bat.soc().value(), 0.5);
        assert_eq!(bat.state().get("b_wh"), Some(p.capacity_wh.value() * 0.5));
    }

    #[test]
    fn empty_battery_refuses_discharge() {
        let mut bat = SimpleBattery::new(wh(18.87), Soc::EMPTY).unwrap();
        let r = bat.update(w(-100.0), s(60.0)).unwrap();
        assert_eq!(r.applied_power.value(), 0.0);
        assert_eq!(r.energy_moved.value(), 0.0);
    }

    #[test]
    fn boundary_hit_reports_average_power() {
        let mut bat = SimpleBattery::new(wh(10.0), Soc::new(0.9).unwrap()).unwrap();
        let d = s(3600.0);
        let r = bat.update(w(5.0), d).unwrap();
        assert_relative_eq!(r.energy_moved.value(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.applied_power.value(), 1.0, epsilon = 1e-12);
        assert_eq!(r.soc, Soc::FULL);
    }

    #[test]
    fn invalid_capacity() {
        assert!(SimpleBattery::new(wh(0.0), Soc::FULL).is_err());
        let mut bat = SimpleBattery::new(wh(1.0), Soc::FULL).unwrap();
        assert!(bat.set_parameter("capacity_wh", (-1.0).into()).is_err());
        assert!(matches!(
            bat.set_parameter("unknown", 1.0.into()),
            Err(Error::UnknownParameter(_))
        ));
    }

    proptest! {
        #[test]
        fn stays_in_bounds_and_conserves(
            soc0 in 0.0f64..=1.0,
            steps in proptest::collection::vec((-200.0f64..200.0, 1.0f64..3600.0), 1..200),
        ) {
            let c = 18.87;
            let mut bat = SimpleBattery::new(wh(c), Soc::new(soc0).unwrap()).unwrap();
            let b0 = bat.energy().value();
            let mut moved = 0.0;
            for (p, d) in steps {
                let r = bat.update(w(p), s(d)).unwrap();
                moved += r.energy_moved.value();
                let b = bat.energy().value();
                prop_assert!((0.0..=c).contains(&b));
                prop_assert!(r.applied_power.value().abs() <= p.abs() * (1.0 + 1e-12));
                prop_assert!(r.applied_power.value() * p >= 0.0);
            }
            prop_assert!((bat.energy().value() - b0 - moved).abs() < 1e-9);
        }

        #[test]
        fn clipping_is_idempotent(soc0 in 0.0f64..=1.0, p in -500.0f64..500.0, d in 1.0f64..3600.0) {
            let bat = SimpleBattery::new(wh(18.87), Soc::new(soc0).unwrap()).unwrap();
            let first = bat.clone().update(w(p), s(d)).unwrap();
            let second = bat.clone().update(first.applied_power, s(d)).unwrap();
            prop_assert!((first.applied_power.value() - second.applied_power.value()).abs()
                <= 1e-9 * first.applied_power.value().abs().max(1.0));
        }
    }
}
