//! The storage interface every battery model implements.
//!
//! A step is a single [`Storage::update`] call: the caller asks for a power
//! over a duration, the model's BMS clips the request to whatever the
//! battery can take, and the response reports the energy that actually
//! moved. Clipping never fails; a full battery answers a charge request by
//! applying 0 W.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::units::{energy_of, DurationS, EnergyWh, PowerW, Soc};

/// Outcome of one storage step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageResponse {
    /// Signed energy stored (> 0) or discharged (< 0) at the terminals.
    pub energy_moved: EnergyWh,
    /// Power after BMS clipping.
    pub applied_power: PowerW,
    /// BMS state-of-charge estimate after the step.
    pub soc: Soc,
}

impl StorageResponse {
    pub(crate) fn constant(applied_power: PowerW, duration: DurationS, soc: Soc) -> Self {
        Self {
            energy_moved: energy_of(applied_power, duration),
            applied_power,
            soc,
        }
    }
}

/// Model-specific observables, keyed by stable names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StorageState(BTreeMap<String, f64>);

impl StorageState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.insert(key, value);
        self
    }

    pub fn insert(&mut self, key: &str, value: f64) {
        self.0.insert(key.to_owned(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn extend(&mut self, other: &StorageState) {
        for (k, v) in other.iter() {
            self.insert(k, v);
        }
    }
}

/// A runtime-tunable parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Flag(bool),
    /// Clears an optional parameter (e.g. the forced-charge directive).
    Unset,
}

impl ParamValue {
    pub fn number(self, key: &str) -> Result<f64> {
        match self {
            ParamValue::Number(v) if v.is_finite() => Ok(v),
            ParamValue::Number(v) => Err(Error::invalid(key, format!("{v} is not finite"))),
            other => Err(Error::invalid(key, format!("expected a number, got {other}"))),
        }
    }

    pub fn flag(self, key: &str) -> Result<bool> {
        match self {
            ParamValue::Flag(b) => Ok(b),
            other => Err(Error::invalid(key, format!("expected a boolean, got {other}"))),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Flag(b) => write!(f, "{b}"),
            ParamValue::Unset => f.write_str("unset"),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Flag(v)
    }
}

/// Anything whose configuration can be read and tweaked while a simulation runs.
pub trait Parameterized {
    fn set_parameter(&mut self, key: &str, value: ParamValue) -> Result<()>;
    fn parameter(&self, key: &str) -> Result<ParamValue>;
}

pub trait Storage: Parameterized + Send {
    fn model(&self) -> ModelKind;

    /// Advances the model by `duration` at (at most) `requested` power.
    fn update(&mut self, requested: PowerW, duration: DurationS) -> Result<StorageResponse>;

    fn soc(&self) -> Soc;

    fn state(&self) -> StorageState;

    /// `(p_min, p_max)` the BMS would allow for a step of `duration` from
    /// the current state, with `p_min <= 0 <= p_max`.
    fn power_limits(&self, duration: DurationS) -> (PowerW, PowerW);
}

impl<S: Storage + ?Sized> Parameterized for Box<S> {
    fn set_parameter(&mut self, key: &str, value: ParamValue) -> Result<()> {
        (**self).set_parameter(key, value)
    }

    fn parameter(&self, key: &str) -> Result<ParamValue> {
        (**self).parameter(key)
    }
}

impl<S: Storage + ?Sized> Storage for Box<S> {
    fn model(&self) -> ModelKind {
        (**self).model()
    }

    fn update(&mut self, requested: PowerW, duration: DurationS) -> Result<StorageResponse> {
        (**self).update(requested, duration)
    }

    fn soc(&self) -> Soc {
        (**self).soc()
    }

    fn state(&self) -> StorageState {
        (**self).state()
    }

    fn power_limits(&self, duration: DurationS) -> (PowerW, PowerW) {
        (**self).power_limits(duration)
    }
}

/// Clamps `requested` into `[p_min, p_max]`, applying 0 W when the window
/// is empty.
#[inline]
pub(crate) fn clip_power(requested: f64, p_min: f64, p_max: f64) -> f64 {
    if p_min > p_max {
        degenerate_window(p_min, p_max);
        return 0.0;
    }
    requested.clamp(p_min, p_max)
}

#[cold]
fn degenerate_window(p_min: f64, p_max: f64) {
    log::warn!("degenerate power window [{p_min}, {p_max}] W, applying 0 W");
}

/// Adds fixed charge/discharge power caps on top of another storage's BMS.
#[derive(Debug, Clone)]
pub struct PowerLimited<S> {
    inner: S,
    max_charge_w: f64,
    max_discharge_w: f64,
}

impl<S: Storage> PowerLimited<S> {
    /// Both caps are magnitudes in W and must be non-negative.
    pub fn new(inner: S, max_charge_w: f64, max_discharge_w: f64) -> Result<Self> {
        if !(max_charge_w >= 0.0 && max_charge_w.is_finite()) {
            return Err(Error::invalid("max_charge_w", "must be finite and >= 0"));
        }
        if !(max_discharge_w >= 0.0 && max_discharge_w.is_finite()) {
            return Err(Error::invalid("max_discharge_w", "must be finite and >= 0"));
        }
        Ok(Self {
            inner,
            max_charge_w,
            max_discharge_w,
        })
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: Storage> Parameterized for PowerLimited<S> {
    fn set_parameter(&mut self, key: &str, value: ParamValue) -> Result<()> {
        match key {
            "max_charge_w" | "max_discharge_w" => {
                let v = value.number(key)?;
                if v < 0.0 {
                    return Err(Error::invalid(key, "must be >= 0"));
                }
                if key == "max_charge_w" {
                    self.max_charge_w = v;
                } else {
                    self.max_discharge_w = v;
                }
                Ok(())
            }
            _ => self.inner.set_parameter(key, value),
        }
    }

    fn parameter(&self, key: &str) -> Result<ParamValue> {
        match key {
            "max_charge_w" => Ok(self.max_charge_w.into()),
            "max_discharge_w" => Ok(self.max_discharge_w.into()),
            _ => self.inner.parameter(key),
        }
    }
}

impl<S: Storage> Storage for PowerLimited<S> {
    fn model(&self) -> ModelKind {
        self.inner.model()
    }

    fn update(&mut self, requested: PowerW, duration: DurationS) -> Result<StorageResponse> {
        let capped = clip_power(requested.value(), -self.max_discharge_w, self.max_charge_w);
        self.inner.update(PowerW::raw(capped), duration)
    }

    fn soc(&self) -> Soc {
        self.inner.soc()
    }

    fn state(&self) -> StorageState {
        self.inner.state()
    }

    fn power_limits(&self, duration: DurationS) -> (PowerW, PowerW) {
        let (lo, hi) = self.inner.power_limits(duration);
        (
            PowerW::raw(lo.value().max(-self.max_discharge_w)),
            PowerW::raw(hi.value().min(self.max_charge_w)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::simple::SimpleBattery;

    fn big_simple() -> SimpleBattery {
        SimpleBattery::new(EnergyWh::new(1000.0).unwrap(), Soc::new(0.5).unwrap()).unwrap()
    }

    #[test]
    fn bms_cap_returns_clipped_energy() {
        let mut storage = PowerLimited::new(big_simple(), 15.0, 15.0).unwrap();
        let r = storage
            .update(PowerW::new(20.0).unwrap(), DurationS::new(10.0).unwrap())
            .unwrap();
        assert_eq!(r.applied_power.value(), 15.0);
        assert_eq!(r.energy_moved.value(), 150.0 / 3600.0);
    }

    #[test]
    fn param_value_parsing() {
        let v: ParamValue = serde_json::from_str("3200").unwrap();
        assert_eq!(v, ParamValue::Number(3200.0));
        let v: ParamValue = serde_json::from_str("false").unwrap();
        assert_eq!(v, ParamValue::Flag(false));
        let v: ParamValue = serde_json::from_str("null").unwrap();
        assert_eq!(v, ParamValue::Unset);
        assert!(ParamValue::Flag(true).number("x").is_err());
    }

    #[test]
    fn wrapper_forwards_unknown_keys() {
        let mut storage = PowerLimited::new(big_simple(), 15.0, 15.0).unwrap();
        assert!(matches!(
            storage.set_parameter("unknown", 1.0.into()),
            Err(Error::UnknownParameter(k)) if k == "unknown"
        ));
        storage.set_parameter("max_charge_w", 5.0.into()).unwrap();
        assert_eq!(storage.parameter("max_charge_w").unwrap(), ParamValue::Number(5.0));
    }

    #[test]
    fn clip_power_empty_window_is_zero() {
        assert_eq!(clip_power(5.0, 1.0, -1.0), 0.0);
        assert_eq!(clip_power(5.0, -1.0, 2.0), 2.0);
        assert_eq!(clip_power(-5.0, -1.0, 2.0), -1.0);
    }
}
