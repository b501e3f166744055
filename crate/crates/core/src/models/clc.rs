//! Linear battery with constant (dis)charge inefficiency, linear
//! current-dependent energy limits and a constant terminal voltage.
//!
//! Energy limits are per cell and expressed as lines in the current:
//! `a1(I) = u1 * I + v1` (lower) and `a2(I) = u2 * I + v2` (upper). Over a
//! step of `h` hours the stored energy must end between them, which yields
//! closed-form power bounds. All limits scale linearly with the cell count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelKind, CELL_CAPACITY_AH, CELL_NOMINAL_V};
use crate::storage::{
    clip_power, ParamValue, Parameterized, Storage, StorageResponse, StorageState,
};
use crate::units::{hours_of, CurrentA, DurationS, EnergyWh, PowerW, Soc};

/// Per-cell constants of the linear model; see [`ClcParams::default`] for the
/// fitted 21700 values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClcParams {
    /// Charge efficiency, `0 < eta_c <= 1`.
    pub eta_c: f64,
    /// Discharge inefficiency, `eta_d >= 1`.
    pub eta_d: f64,
    pub v_nominal: f64,
    /// Maximum charge current per cell (A, positive).
    pub alpha_c_a: f64,
    /// Maximum discharge current per cell (A, negative).
    pub alpha_d_a: f64,
    /// Lower energy limit slope (Wh/A) and intercept (Wh).
    pub u1: f64,
    pub v1: f64,
    /// Upper energy limit slope (Wh/A) and intercept (Wh).
    pub u2: f64,
    pub v2: f64,
    pub num_cells: usize,
    pub initial_soc: Soc,
}

impl Default for ClcParams {
    fn default() -> Self {
        Self {
            eta_c: 0.978,
            eta_d: 1.014,
            v_nominal: CELL_NOMINAL_V,
            alpha_c_a: 0.7 * CELL_CAPACITY_AH,
            alpha_d_a: -1.5 * CELL_CAPACITY_AH,
            u1: -0.087,
            v1: 0.0,
            u2: -1.326,
            v2: 19.14,
            num_cells: 1,
            initial_soc: Soc::FULL,
        }
    }
}

impl ClcParams {
    pub fn validate(&self) -> Result<()> {
        let values = [
            self.eta_c,
            self.eta_d,
            self.v_nominal,
            self.alpha_c_a,
            self.alpha_d_a,
            self.u1,
            self.v1,
            self.u2,
            self.v2,
        ];
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("CLC parameters must be finite".into()));
        }
        let checks: [(&str, bool, &str); 9] = [
            ("eta_c", self.eta_c > 0.0 && self.eta_c <= 1.0, "must be in (0, 1]"),
            ("eta_d", self.eta_d >= 1.0, "must be >= 1"),
            ("v_nominal", self.v_nominal > 0.0, "must be > 0"),
            ("alpha_c_a", self.alpha_c_a > 0.0, "must be > 0"),
            ("alpha_d_a", self.alpha_d_a < 0.0, "must be < 0"),
            ("v1", self.v1 >= 0.0, "must be >= 0"),
            ("v2", self.v2 > self.v1, "must exceed v1"),
            ("u1/u2", self.u1 <= 0.0 && self.u2 <= 0.0, "slopes must be <= 0"),
            ("num_cells", self.num_cells >= 1, "must be >= 1"),
        ];
        for (key, ok, reason) in checks {
            if !ok {
                return Err(Error::invalid(key, reason));
            }
        }
        Ok(())
    }

    fn cells(&self) -> f64 {
        self.num_cells as f64
    }

    /// Pack energy at full charge, `v2 * n`.
    pub fn capacity_wh(&self) -> f64 {
        self.v2 * self.cells()
    }
}

/// Efficiency implied by ohmic loss at `current`: `1 - I * R / V`.
///
/// Positive current gives the charge efficiency (< 1), negative current the
/// discharge inefficiency (> 1).
pub fn fit_efficiency(current: CurrentA, internal_resistance_ohm: f64, voltage: f64) -> f64 {
    1.0 - current.value() * internal_resistance_ohm / voltage
}

/// Resistance that makes [`fit_efficiency`] return `eta` at `current`.
pub fn resistance_for_efficiency(eta: f64, current: CurrentA, voltage: f64) -> f64 {
    (1.0 - eta) * voltage / current.value()
}

/// Power window `(p_min, p_max)` for a step from pack energy `b_prev`.
///
/// Combines the current limits with the energy-limit bounds, evaluated per
/// cell and scaled by the cell count. The duration enters in hours.
pub fn clc_power_bounds(
    b_prev: EnergyWh,
    duration: DurationS,
    params: &ClcParams,
) -> (PowerW, PowerW) {
    let n = params.cells();
    let v = params.v_nominal;
    let h = hours_of(duration);
    let b_cell = b_prev.value() / n;

    let current_min = params.alpha_d_a * v;
    let current_max = params.alpha_c_a * v;
    let energy_min = (b_cell - params.v1) / (params.u1 / v - h * params.eta_d);
    let energy_max = (b_cell - params.v2) / (params.u2 / v - h * params.eta_c);

    (
        PowerW::raw(current_min.max(energy_min) * n),
        PowerW::raw(current_max.min(energy_max) * n),
    )
}

/// One step of the linear model: `(b_new, applied, e_moved)`.
///
/// The request is clipped to [`clc_power_bounds`]; the stored energy changes
/// by `eta * applied * h`, while the terminal energy reported is
/// `applied * h`.
pub fn clc_update(
    b_prev: EnergyWh,
    requested: PowerW,
    duration: DurationS,
    params: &ClcParams,
) -> (EnergyWh, PowerW, EnergyWh) {
    let (p_min, p_max) = clc_power_bounds(b_prev, duration, params);
    let applied = clip_power(requested.value(), p_min.value(), p_max.value());
    let h = hours_of(duration);
    let eta = if applied >= 0.0 {
        params.eta_c
    } else {
        params.eta_d
    };
    let n = params.cells();
    let raw = b_prev.value() + eta * applied * h;
    debug_assert!(
        raw >= params.v1 * n - 1e-9 && raw <= params.v2 * n + 1e-9,
        "CLC energy {raw} left [{}, {}]",
        params.v1 * n,
        params.v2 * n
    );
    let b_new = raw.clamp(params.v1 * n, params.v2 * n);
    (
        EnergyWh::raw(b_new),
        PowerW::raw(applied),
        EnergyWh::raw(applied * h),
    )
}

/// Pack-level constants of [`clc_power_bounds`] for one step length, so a
/// step costs a handful of multiplications.
#[derive(Debug, Clone, Copy)]
struct StepConstants {
    seconds: f64,
    hours: f64,
    eta_c_hours: f64,
    eta_d_hours: f64,
    p_current_min: f64,
    p_current_max: f64,
    lower_wh: f64,
    upper_wh: f64,
    inv_den_min: f64,
    inv_den_max: f64,
    inv_capacity: f64,
}

impl StepConstants {
    fn new(params: &ClcParams, duration: DurationS) -> Self {
        let n = params.cells();
        let v = params.v_nominal;
        let h = hours_of(duration);
        Self {
            seconds: duration.seconds(),
            hours: h,
            eta_c_hours: params.eta_c * h,
            eta_d_hours: params.eta_d * h,
            p_current_min: params.alpha_d_a * v * n,
            p_current_max: params.alpha_c_a * v * n,
            lower_wh: params.v1 * n,
            upper_wh: params.v2 * n,
            inv_den_min: 1.0 / (params.u1 / v - h * params.eta_d),
            inv_den_max: 1.0 / (params.u2 / v - h * params.eta_c),
            inv_capacity: 1.0 / params.capacity_wh(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClcBattery {
    params: ClcParams,
    energy_wh: f64,
    constants: Option<StepConstants>,
}

impl ClcBattery {
    pub fn new(params: ClcParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            energy_wh: params.initial_soc.value() * params.capacity_wh(),
            params,
            constants: None,
        })
    }

    fn refresh_constants(&mut self, duration: DurationS) {
        if self.constants.map_or(true, |c| c.seconds != duration.seconds()) {
            self.constants = Some(StepConstants::new(&self.params, duration));
        }
    }

    pub fn params(&self) -> &ClcParams {
        &self.params
    }

    pub fn energy(&self) -> EnergyWh {
        EnergyWh::raw(self.energy_wh)
    }
}

impl Parameterized for ClcBattery {
    fn set_parameter(&mut self, key: &str, value: ParamValue) -> Result<()> {
        let mut next = self.params;
        let v = value.number(key);
        match key {
            "eta_c" => next.eta_c = v?,
            "eta_d" => next.eta_d = v?,
            "v_nominal" => next.v_nominal = v?,
            "alpha_c_a" => next.alpha_c_a = v?,
            "alpha_d_a" => next.alpha_d_a = v?,
            "u1" => next.u1 = v?,
            "v1" => next.v1 = v?,
            "u2" => next.u2 = v?,
            "v2" => next.v2 = v?,
            _ => return Err(Error::UnknownParameter(key.to_owned())),
        }
        next.validate()?;
        let n = next.cells();
        self.energy_wh = self.energy_wh.clamp(next.v1 * n, next.v2 * n);
        self.params = next;
        self.constants = None;
        Ok(())
    }

    fn parameter(&self, key: &str) -> Result<ParamValue> {
        let p = &self.params;
        let v = match key {
            "eta_c" => p.eta_c,
            "eta_d" => p.eta_d,
            "v_nominal" => p.v_nominal,
            "alpha_c_a" => p.alpha_c_a,
            "alpha_d_a" => p.alpha_d_a,
            "u1" => p.u1,
            "v1" => p.v1,
            "u2" => p.u2,
            "v2" => p.v2,
            _ => return Err(Error::UnknownParameter(key.to_owned())),
        };
        Ok(v.into())
    }
}

impl Storage for ClcBattery {
    fn model(&self) -> ModelKind {
        ModelKind::Clc
    }

    fn update(&mut self, requested: PowerW, duration: DurationS) -> Result<StorageResponse> {
        // Same arithmetic as `clc_update`, with the step constants hoisted.
        self.refresh_constants(duration);
        let Some(c) = self.constants.as_ref() else {
            unreachable!("constants refreshed above")
        };
        let b = self.energy_wh;
        let req = requested.value();
        // With b inside its limits p_min <= 0 <= p_max, so only the bound on
        // the side of the request can bind.
        let (applied, eta_h) = if req >= 0.0 {
            let e_max = (b - c.upper_wh) * c.inv_den_max;
            let p_max = if e_max < c.p_current_max { e_max } else { c.p_current_max };
            (if req < p_max { req } else { p_max }, c.eta_c_hours)
        } else {
            let e_min = (b - c.lower_wh) * c.inv_den_min;
            let p_min = if e_min > c.p_current_min { e_min } else { c.p_current_min };
            (if req > p_min { req } else { p_min }, c.eta_d_hours)
        };
        self.energy_wh = (b + eta_h * applied).clamp(c.lower_wh, c.upper_wh);
        Ok(StorageResponse {
            energy_moved: EnergyWh::raw(applied * c.hours),
            applied_power: PowerW::raw(applied),
            soc: Soc::saturating(self.energy_wh * c.inv_capacity),
        })
    }

    fn soc(&self) -> Soc {
        Soc::saturating(self.energy_wh / self.params.capacity_wh())
    }

    fn state(&self) -> StorageState {
        StorageState::new().with("b_wh", self.energy_wh)
    }

    fn power_limits(&self, duration: DurationS) -> (PowerW, PowerW) {
        let (lo, hi) = clc_power_bounds(self.energy(), duration, &self.params);
        if lo.value() > hi.value() {
            (PowerW::ZERO, PowerW::ZERO)
        } else {
            (
                PowerW::raw(lo.value().min(0.0)),
                PowerW::raw(hi.value().max(0.0)),
            )
        }
    }
}
