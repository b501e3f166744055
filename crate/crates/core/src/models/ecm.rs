//! Equivalent-circuit cell: an OCV source in series with an internal
//! resistance, driven by a power request.
//!
//! The BMS clips the per-cell power to what the current limits, the terminal
//! voltage window and the remaining charge allow at the present OCV, then
//! solves `p = (ocv + I * r) * I` for the cell current. Coulomb counting is
//! exact, so every loss is ohmic.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ocv::OcvTable;
use crate::models::{ModelKind, CELL_CAPACITY_AH};
use crate::storage::{
    clip_power, ParamValue, Parameterized, Storage, StorageResponse, StorageState,
};
use crate::units::{hours_of, CurrentA, DurationS, PowerW, Soc};

/// Internal resistance that reproduces a 0.978 charge efficiency at 0.3C and
/// 3.63 V through `1 - I * R / V`.
pub const DEFAULT_R_INTERNAL_OHM: f64 = 0.05324;

#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub capacity_ah: f64,
    pub r_internal_ohm: f64,
    pub ocv_table: Arc<OcvTable>,
    pub i_charge_max_a: f64,
    pub i_discharge_max_a: f64,
    pub v_max: f64,
    pub v_min: f64,
}

impl Default for CellParams {
    fn default() -> Self {
        Self {
            capacity_ah: CELL_CAPACITY_AH,
            r_internal_ohm: DEFAULT_R_INTERNAL_OHM,
            ocv_table: Arc::new(OcvTable::default_cell()),
            i_charge_max_a: 0.7 * CELL_CAPACITY_AH,
            i_discharge_max_a: -1.5 * CELL_CAPACITY_AH,
            v_max: 4.2,
            v_min: 2.5,
        }
    }
}

impl CellParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.capacity_ah,
            self.r_internal_ohm,
            self.i_charge_max_a,
            self.i_discharge_max_a,
            self.v_max,
            self.v_min,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("cell parameters must be finite".into()));
        }
        if self.capacity_ah <= 0.0 {
            return Err(Error::invalid("capacity_ah", "must be > 0"));
        }
        if self.r_internal_ohm <= 0.0 {
            return Err(Error::invalid("r_internal_ohm", "must be > 0"));
        }
        if self.i_charge_max_a <= 0.0 {
            return Err(Error::invalid("i_charge_max_a", "must be > 0"));
        }
        if self.i_discharge_max_a >= 0.0 {
            return Err(Error::invalid("i_discharge_max_a", "must be < 0"));
        }
        if self.v_min >= self.v_max {
            return Err(Error::invalid("v_min", "must be below v_max"));
        }
        if self.ocv_table.min_ocv() < self.v_min || self.ocv_table.max_ocv() > self.v_max {
            return Err(Error::invalid(
                "ocv_table",
                format!(
                    "OCV range [{}, {}] V exceeds the voltage window [{}, {}] V",
                    self.ocv_table.min_ocv(),
                    self.ocv_table.max_ocv(),
                    self.v_min,
                    self.v_max
                ),
            ));
        }
        Ok(())
    }

    pub fn ocv_at_charge(&self, charge_ah: f64) -> f64 {
        self.ocv_table.ocv_of(charge_ah / self.capacity_ah)
    }

    /// Applies a runtime update to one of the electrical limits.
    pub(crate) fn set(&mut self, key: &str, value: ParamValue) -> Result<bool> {
        let mut next = self.clone();
        let slot = match key {
            "r_internal_ohm" => &mut next.r_internal_ohm,
            "i_charge_max_a" => &mut next.i_charge_max_a,
            "i_discharge_max_a" => &mut next.i_discharge_max_a,
            "v_max" => &mut next.v_max,
            "v_min" => &mut next.v_min,
            _ => return Ok(false),
        };
        *slot = value.number(key)?;
        next.validate()?;
        *self = next;
        Ok(true)
    }

    pub(crate) fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "r_internal_ohm" => self.r_internal_ohm,
            "i_charge_max_a" => self.i_charge_max_a,
            "i_discharge_max_a" => self.i_discharge_max_a,
            "v_max" => self.v_max,
            "v_min" => self.v_min,
            "capacity_ah" => self.capacity_ah,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcmParams {
    pub cell: CellParams,
    /// Cells sharing the request equally; the model steps one of them.
    pub num_cells: usize,
    pub initial_soc: Soc,
}

impl Default for EcmParams {
    fn default() -> Self {
        Self {
            cell: CellParams::default(),
            num_cells: 1,
            initial_soc: Soc::FULL,
        }
    }
}

impl EcmParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_cells == 0 {
            return Err(Error::invalid("num_cells", "must be >= 1"));
        }
        self.cell.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcmState {
    pub charge_ah: f64,
    pub last_current_a: f64,
    pub last_terminal_v: f64,
}

impl EcmState {
    pub fn at_soc(soc: Soc, cell: &CellParams) -> Self {
        let charge_ah = soc.value() * cell.capacity_ah;
        Self {
            charge_ah,
            last_current_a: 0.0,
            last_terminal_v: cell.ocv_at_charge(charge_ah),
        }
    }

    pub fn ocv(&self, cell: &CellParams) -> f64 {
        cell.ocv_at_charge(self.charge_ah)
    }

    /// BMS estimate: the SoC read back from the OCV lookup.
    pub fn soc(&self, cell: &CellParams) -> Soc {
        Soc::saturating(cell.ocv_table.soc_of(self.ocv(cell)))
    }

    /// Drives the cell with a constant `current` for `hours`, clamping the
    /// coulomb counter to `[0, Q]`. Returns the current actually applied.
    pub fn step_current(&mut self, current: f64, hours: f64, ocv: f64, r: f64, capacity_ah: f64) -> f64 {
        let raw = self.charge_ah + current * hours;
        let current = if raw > capacity_ah {
            let applied = (capacity_ah - self.charge_ah) / hours;
            self.charge_ah = capacity_ah;
            applied
        } else if raw < 0.0 {
            let applied = -self.charge_ah / hours;
            self.charge_ah = 0.0;
            applied
        } else {
            self.charge_ah = raw;
            current
        };
        self.last_current_a = current;
        self.last_terminal_v = ocv + current * r;
        current
    }
}

/// Cell current that delivers `p_cell` at the terminals given `ocv` and `r`.
///
/// This is the root of `r * I^2 + ocv * I - p = 0` with positive terminal
/// voltage, written in a form that stays accurate as `r -> 0`.
pub fn solve_current(p_cell: PowerW, ocv: f64, r: f64) -> Result<CurrentA> {
    let p = p_cell.value();
    if p == 0.0 {
        return Ok(CurrentA::ZERO);
    }
    let disc = ocv * ocv + 4.0 * r * p;
    if disc < 0.0 {
        return Err(Error::PowerBelowMinimum {
            power_w: p,
            minimum_w: -ocv * ocv / (4.0 * r),
            ocv_v: ocv,
        });
    }
    Ok(CurrentA::raw(2.0 * p / (ocv + disc.sqrt())))
}

/// Per-cell `(p_min, p_max)` from the current limits and the terminal voltage
/// window at `ocv`.
pub fn power_limits(ocv: f64, params: &CellParams) -> (PowerW, PowerW) {
    limits_with_r(ocv, params.r_internal_ohm, params)
}

pub(crate) fn limits_with_r(ocv: f64, r: f64, params: &CellParams) -> (PowerW, PowerW) {
    let i_charge = params.i_charge_max_a.min((params.v_max - ocv) / r).max(0.0);
    let i_discharge = params.i_discharge_max_a.max((params.v_min - ocv) / r).min(0.0);
    (
        PowerW::raw((ocv + i_discharge * r) * i_discharge),
        PowerW::raw((ocv + i_charge * r) * i_charge),
    )
}

/// Limits tightened so that a step of `hours` cannot over- or under-run the
/// coulomb counter.
pub(crate) fn step_limits(state: &EcmState, ocv: f64, r: f64, hours: f64, params: &CellParams) -> (f64, f64) {
    let (lo, hi) = limits_with_r(ocv, r, params);
    let i_head = (params.capacity_ah - state.charge_ah) / hours;
    let i_floor = -state.charge_ah / hours;
    let p_head = (ocv + i_head * r) * i_head;
    // discharge power is monotone in current only above the power minimum
    let p_floor = if i_floor > -ocv / (2.0 * r) {
        (ocv + i_floor * r) * i_floor
    } else {
        f64::NEG_INFINITY
    };
    (lo.value().max(p_floor), hi.value().min(p_head))
}

/// One power-driven step of a single (pack-scaled) cell.
pub fn ecm_update(
    state: &mut EcmState,
    requested: PowerW,
    duration: DurationS,
    params: &EcmParams,
) -> Result<StorageResponse> {
    let cell = &params.cell;
    let n = params.num_cells as f64;
    let h = hours_of(duration);
    let r = cell.r_internal_ohm;
    let ocv = state.ocv(cell);

    let (lo, hi) = step_limits(state, ocv, r, h, cell);
    let p_cell = clip_power(requested.value() / n, lo, hi);
    let current = solve_current(PowerW::raw(p_cell), ocv, r)?.value();
    let applied_current = state.step_current(current, h, ocv, r, cell.capacity_ah);
    let p_cell = if applied_current == current {
        p_cell
    } else {
        (ocv + applied_current * r) * applied_current
    };
    Ok(StorageResponse::constant(
        PowerW::raw(p_cell * n),
        duration,
        state.soc(cell),
    ))
}

#[derive(Debug, Clone)]
pub struct EcmBattery {
    params: EcmParams,
    state: EcmState,
}

impl EcmBattery {
    pub fn new(params: EcmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            state: EcmState::at_soc(params.initial_soc, &params.cell),
            params,
        })
    }

    pub fn params(&self) -> &EcmParams {
        &self.params
    }

    pub fn cell_state(&self) -> &EcmState {
        &self.state
    }
}

impl Parameterized for EcmBattery {
    fn set_parameter(&mut self, key: &str, value: ParamValue) -> Result<()> {
        if self.params.cell.set(key, value)? {
            Ok(())
        } else {
            Err(Error::UnknownParameter(key.to_owned()))
        }
    }

    fn parameter(&self, key: &str) -> Result<ParamValue> {
        self.params
            .cell
            .get(key)
            .map(ParamValue::Number)
            .ok_or_else(|| Error::UnknownParameter(key.to_owned()))
    }
}

impl Storage for EcmBattery {
    fn model(&self) -> ModelKind {
        ModelKind::Ecm
    }

    fn update(&mut self, requested: PowerW, duration: DurationS) -> Result<StorageResponse> {
        ecm_update(&mut self.state, requested, duration, &self.params)
    }

    fn soc(&self) -> Soc {
        self.state.soc(&self.params.cell)
    }

    fn state(&self) -> StorageState {
        StorageState::new()
            .with("ocv_v", self.state.ocv(&self.params.cell))
            .with("last_current_a", self.state.last_current_a)
            .with("terminal_v", self.state.last_terminal_v)
    }

    fn power_limits(&self, duration: DurationS) -> (PowerW, PowerW) {
        let cell = &self.params.cell;
        let n = self.params.num_cells as f64;
        let ocv = self.state.ocv(cell);
        let (lo, hi) = step_limits(&self.state, ocv, cell.r_internal_ohm, duration.hours(), cell);
        (PowerW::raw(lo.min(0.0) * n), PowerW::raw(hi.max(0.0) * n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn w(v: f64) -> PowerW {
        PowerW::new(v).unwrap()
    }
    fn s(v: f64) -> DurationS {
        DurationS::new(v).unwrap()
    }

    /// Bisection on `r I^2 + ocv I - p` over the physical branch.
    fn bisect_current(p: f64, ocv: f64, r: f64) -> f64 {
        let f = |i: f64| r * i * i + ocv * i - p;
        let (mut lo, mut hi) = (-ocv / (2.0 * r), 1e3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn current_solve_examples() {
        assert_eq!(solve_current(w(0.0), 3.7, 0.05324).unwrap().value(), 0.0);
        let i = solve_current(w(7.4), 3.7, 0.05324).unwrap().value();
        assert_relative_eq!(i, bisect_current(7.4, 3.7, 0.05324), epsilon = 1e-10);
        assert_relative_eq!(i, 1.9455, epsilon = 1e-4);
        let lossless = solve_current(w(7.4), 3.7, 1e-12).unwrap().value();
        assert_relative_eq!(lossless, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn current_solve_rejects_undeliverable_power() {
        // maximum deliverable power is ocv^2 / (4 r) = 64.3 W
        let err = solve_current(w(-70.0), 3.7, 0.05324).unwrap_err();
        assert!(matches!(err, Error::PowerBelowMinimum { .. }));
    }

    #[test]
    fn limits_examples() {
        let p = CellParams::default();
        let (_, hi) = power_limits(4.15, &p);
        let i = 0.05 / 0.05324;
        assert_relative_eq!(hi.value(), 4.2 * i, epsilon = 1e-12);
        assert_relative_eq!(hi.value(), 3.945, epsilon = 1e-3);
        let (_, hi) = power_limits(3.6, &p);
        assert_relative_eq!(hi.value(), (3.6 + 3.5 * 0.05324) * 3.5, epsilon = 1e-12);
        assert_relative_eq!(hi.value(), 13.252, epsilon = 1e-3);
        let (_, hi) = power_limits(4.2, &p);
        assert_eq!(hi.value(), 0.0);
        let (lo, _) = power_limits(2.5, &p);
        assert_eq!(lo.value(), 0.0);
    }

    #[test]
    fn zero_request_leaves_state() {
        let mut bat = EcmBattery::new(EcmParams {
            initial_soc: Soc::new(0.6).unwrap(),
            ..EcmParams::default()
        })
        .unwrap();
        let before = *bat.cell_state();
        let r = bat.update(w(0.0), s(60.0)).unwrap();
        assert_eq!(r.energy_moved.value(), 0.0);
        assert_eq!(bat.cell_state().charge_ah, before.charge_ah);
        assert_eq!(r.soc, bat.soc());
    }

    #[test]
    fn full_cell_rejects_charge() {
        let mut bat = EcmBattery::new(EcmParams::default()).unwrap();
        let r = bat.update(w(10.0), s(60.0)).unwrap();
        assert_eq!(r.applied_power.value(), 0.0);
        assert_eq!(r.energy_moved.value(), 0.0);
        assert_eq!(bat.soc(), Soc::FULL);
    }

    #[test]
    fn pack_scaled_request_splits_per_cell() {
        let params = EcmParams {
            num_cells: 256,
            initial_soc: Soc::new(0.5).unwrap(),
            ..EcmParams::default()
        };
        let mut bat = EcmBattery::new(params.clone()).unwrap();
        let ocv = bat.cell_state().ocv(&params.cell);
        let (_, hi) = power_limits(ocv, &params.cell);
        let p_cell = 12.5f64.min(hi.value());
        let i = solve_current(w(p_cell), ocv, params.cell.r_internal_ohm).unwrap().value();
        let r = bat.update(w(3200.0), s(60.0)).unwrap();
        assert_relative_eq!(r.applied_power.value(), p_cell * 256.0, epsilon = 1e-9);
        assert_relative_eq!(bat.cell_state().last_current_a, i, epsilon = 1e-12);
        assert_relative_eq!(bat.cell_state().charge_ah, 2.5 + i / 60.0, epsilon = 1e-12);
    }

    #[test]
    fn state_keys() {
        let bat = EcmBattery::new(EcmParams::default()).unwrap();
        let keys: Vec<_> = bat.state().keys().map(str::to_owned).collect();
        assert_eq!(keys, ["last_current_a", "ocv_v", "terminal_v"]);
    }

    #[test]
    fn parameters() {
        let mut bat = EcmBattery::new(EcmParams::default()).unwrap();
        bat.set_parameter("r_internal_ohm", 0.06.into()).unwrap();
        assert_eq!(bat.parameter("r_internal_ohm").unwrap(), ParamValue::Number(0.06));
        assert!(bat.set_parameter("r_internal_ohm", (-1.0).into()).is_err());
        assert!(bat.set_parameter("v_max", 4.0.into()).is_err());
        assert!(matches!(
            bat.set_parameter("bogus", 1.0.into()),
            Err(Error::UnknownParameter(_))
        ));
    }

    #[test]
    fn full_discharge_reaches_empty() {
        let params = EcmParams::default();
        let mut bat = EcmBattery::new(params).unwrap();
        let p = -0.2 * 5.0 * 3.63;
        for _ in 0..100_000 {
            let r = bat.update(w(p), s(60.0)).unwrap();
            if r.applied_power.value() == 0.0 {
                break;
            }
        }
        assert!(bat.soc().value() <= 0.02);
    }

    proptest! {
        #[test]
        fn terminal_voltage_and_current_stay_in_window(
            soc0 in 0.0f64..=1.0,
            steps in proptest::collection::vec((-40.0f64..40.0, 1.0f64..1800.0), 1..80),
        ) {
            let params = EcmParams { initial_soc: Soc::new(soc0).unwrap(), ..EcmParams::default() };
            let mut bat = EcmBattery::new(params).unwrap();
            for (req, d) in steps {
                let r = bat.update(w(req), s(d)).unwrap();
                let st = bat.cell_state();
                prop_assert!(st.last_terminal_v >= 2.5 - 1e-9 && st.last_terminal_v <= 4.2 + 1e-9);
                prop_assert!(st.last_current_a.abs() <= 7.5 + 1e-9);
                prop_assert!((0.0..=5.0).contains(&st.charge_ah));
                prop_assert!(r.applied_power.value().abs() <= req.abs() + 1e-12);
                prop_assert!(r.applied_power.value() * req >= 0.0);
            }
        }

        #[test]
        fn observers_are_pure(soc0 in 0.0f64..=1.0) {
            let params = EcmParams { initial_soc: Soc::new(soc0).unwrap(), ..EcmParams::default() };
            let bat = EcmBattery::new(params).unwrap();
            prop_assert_eq!(bat.soc(), bat.soc());
            prop_assert_eq!(bat.state(), bat.state());
        }

        #[test]
        fn clipping_is_idempotent(soc0 in 0.0f64..=1.0, req in -40.0f64..40.0, d in 1.0f64..3600.0) {
            let params = EcmParams { initial_soc: Soc::new(soc0).unwrap(), ..EcmParams::default() };
            let bat = EcmBattery::new(params).unwrap();
            let first = bat.clone().update(w(req), s(d)).unwrap();
            let second = bat.clone().update(first.applied_power, s(d)).unwrap();
            prop_assert!((first.applied_power.value() - second.applied_power.value()).abs()
                <= 1e-9 * first.applied_power.value().abs().max(1.0));
        }

        #[test]
        fn short_steps_move_less_energy(soc0 in 0.05f64..=0.95, req in -25.0f64..12.0) {
            let params = EcmParams { initial_soc: Soc::new(soc0).unwrap(), ..EcmParams::default() };
            let bat = EcmBattery::new(params).unwrap();
            let short = bat.clone().update(w(req), s(1.0)).unwrap();
            let long = bat.clone().update(w(req), s(60.0)).unwrap();
            prop_assert!(short.energy_moved.value().abs() <= req.abs() / 3600.0 * (1.0 + 1e-12));
            prop_assert!(short.energy_moved.value().abs() <= long.energy_moved.value().abs() + 1e-15);
        }
    }
}
