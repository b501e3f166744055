//! Actors, the energy-management policy and controllers.
//!
//! Each step the policy receives the summed actor power `delta`, decides how
//! much of it the storage should absorb or supply, and books the rest against
//! the public grid: `e_grid = delta * h - e_storage`.

use std::sync::Arc;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storage::{ParamValue, Parameterized, Storage, StorageState};
use crate::trace::{format_timestamp, Trace};
use crate::units::{energy_of, DurationS, PowerW, Soc};

/// PV output for a given irradiance: `irradiance * area * efficiency`.
pub fn solar_actor(irradiance_wm2: f64, area_m2: f64, efficiency: f64) -> Result<PowerW> {
    if !(irradiance_wm2 >= 0.0) {
        return Err(Error::invalid("irradiance_wm2", "must be >= 0"));
    }
    if !(area_m2 >= 0.0) {
        return Err(Error::invalid("area_m2", "must be >= 0"));
    }
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::invalid("efficiency", "must lie in [0, 1]"));
    }
    Ok(PowerW::new(irradiance_wm2 * area_m2 * efficiency)?)
}

/// Facility draw of a set of nodes: `-(sum of node power) * pue`.
pub fn datacenter_actor(node_powers_w: &[f64], pue: f64) -> Result<PowerW> {
    if !(pue >= 1.0) {
        return Err(Error::invalid("pue", "must be >= 1"));
    }
    if node_powers_w.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::invalid("node_powers_w", "node powers must be >= 0"));
    }
    let it: f64 = node_powers_w.iter().sum();
    if it == 0.0 {
        return Ok(PowerW::ZERO);
    }
    Ok(PowerW::new(-it * pue)?)
}

/// Producer (positive power) or consumer (negative power) evaluated per step.
pub trait Actor: Send + Sync {
    fn name(&self) -> &str;
    fn power_at(&self, time: NaiveDateTime) -> Result<PowerW>;
}

#[derive(Debug, Clone)]
pub struct SolarActor {
    pub name: String,
    pub trace: Arc<Trace>,
    pub area_m2: f64,
    pub efficiency: f64,
}

impl Actor for SolarActor {
    fn name(&self) -> &str {
        &self.name
    }

    fn power_at(&self, time: NaiveDateTime) -> Result<PowerW> {
        solar_actor(self.trace.value_at(time)?, self.area_m2, self.efficiency)
    }
}

#[derive(Debug, Clone)]
pub struct DatacenterActor {
    pub name: String,
    pub node_powers_w: Vec<f64>,
    pub pue: f64,
}

impl Actor for DatacenterActor {
    fn name(&self) -> &str {
        &self.name
    }

    fn power_at(&self, _time: NaiveDateTime) -> Result<PowerW> {
        datacenter_actor(&self.node_powers_w, self.pue)
    }
}

#[derive(Debug, Clone)]
pub struct ConstantActor {
    pub name: String,
    pub power: PowerW,
}

impl Actor for ConstantActor {
    fn name(&self) -> &str {
        &self.name
    }

    fn power_at(&self, _time: NaiveDateTime) -> Result<PowerW> {
        Ok(self.power)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Discharging stops once the storage SoC is at or below this value.
    pub min_soc: Soc,
    /// Forced-charge directive: when set, the storage charges at this power
    /// regardless of the delta.
    pub charge_power_w: Option<f64>,
    pub grid_connected: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            min_soc: Soc::EMPTY,
            charge_power_w: None,
            grid_connected: true,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.charge_power_w {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::invalid("charge_power_w", "must be > 0 when set"));
            }
        }
        Ok(())
    }
}

impl Parameterized for PolicyConfig {
    fn set_parameter(&mut self, key: &str, value: ParamValue) -> Result<()> {
        match key {
            "min_soc" => {
                self.min_soc = Soc::new(value.number(key)?)
                    .map_err(|e| Error::invalid(key, e.to_string()))?;
            }
            "charge_power_w" => {
                self.charge_power_w = match value {
                    ParamValue::Unset => None,
                    v => {
                        let p = v.number(key)?;
                        if p <= 0.0 {
                            return Err(Error::invalid(key, "must be > 0 when set"));
                        }
                        Some(p)
                    }
                };
            }
            "grid_connected" => self.grid_connected = value.flag(key)?,
            _ => return Err(Error::UnknownParameter(key.to_owned())),
        }
        Ok(())
    }

    fn parameter(&self, key: &str) -> Result<ParamValue> {
        match key {
            "min_soc" => Ok(self.min_soc.value().into()),
            "charge_power_w" => Ok(self.charge_power_w.map_or(ParamValue::Unset, ParamValue::Number)),
            "grid_connected" => Ok(self.grid_connected.into()),
            _ => Err(Error::UnknownParameter(key.to_owned())),
        }
    }
}

/// One row of simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    #[serde(with = "crate::trace::serde_timestamp")]
    pub time: NaiveDateTime,
    pub p_delta_w: f64,
    pub p_storage_w: f64,
    pub e_storage_wh: f64,
    pub e_grid_wh: f64,
    pub soc: f64,
    #[serde(flatten)]
    pub state: StorageState,
}

/// State keys the policy adds to every record.
pub const CURTAILED_KEY: &str = "curtailed_wh";
pub const UNMET_KEY: &str = "unmet_wh";

/// Splits `delta` between storage and grid for one step.
///
/// With a forced-charge directive the storage is asked for exactly that
/// power. Otherwise surplus is offered to the storage, and deficits are
/// drawn from it only while its SoC is above `min_soc` (checked before the
/// step). Whatever the storage does not cover goes to the grid, or is
/// recorded as curtailed or unmet energy when islanded.
pub fn policy_step(
    time: NaiveDateTime,
    delta: PowerW,
    duration: DurationS,
    storage: &mut dyn Storage,
    config: &PolicyConfig,
) -> Result<StepRecord> {
    let request = match config.charge_power_w {
        Some(p) => PowerW::new(p)?,
        None if delta.value() >= 0.0 => delta,
        None if storage.soc() > config.min_soc => delta,
        None => PowerW::ZERO,
    };
    let response = storage.update(request, duration)?;
    let e_storage = response.energy_moved.value();
    let uncovered = energy_of(delta, duration).value() - e_storage;

    let (e_grid, curtailed, unmet) = if config.grid_connected {
        (uncovered, 0.0, 0.0)
    } else if uncovered >= 0.0 {
        (0.0, uncovered, 0.0)
    } else {
        (0.0, 0.0, -uncovered)
    };

    let mut state = storage.state();
    state.insert(CURTAILED_KEY, curtailed);
    state.insert(UNMET_KEY, unmet);
    Ok(StepRecord {
        time,
        p_delta_w: delta.value(),
        p_storage_w: response.applied_power.value(),
        e_storage_wh: e_storage,
        e_grid_wh: e_grid,
        soc: response.soc.value(),
        state,
    })
}

/// Routes parameter access to the policy first and the storage second.
pub struct ControlTarget<'a> {
    pub policy: &'a mut PolicyConfig,
    pub storage: &'a mut dyn Storage,
}

impl Parameterized for ControlTarget<'_> {
    fn set_parameter(&mut self, key: &str, value: ParamValue) -> Result<()> {
        match self.policy.set_parameter(key, value) {
            Err(Error::UnknownParameter(_)) => self.storage.set_parameter(key, value),
            other => other,
        }
    }

    fn parameter(&self, key: &str) -> Result<ParamValue> {
        match self.policy.parameter(key) {
            Err(Error::UnknownParameter(_)) => self.storage.parameter(key),
            other => other,
        }
    }
}

/// What a controller sees at the start of a step: the current time and the
/// previous step's record (none at the first step).
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub time: NaiveDateTime,
    pub previous: Option<&'a StepRecord>,
}

impl Observation<'_> {
    pub fn previous_e_grid_wh(&self) -> f64 {
        self.previous.map_or(0.0, |r| r.e_grid_wh)
    }
}

pub trait Controller: Send {
    /// Checked once before the first step.
    fn validate(&self, target: &dyn Parameterized) -> Result<()>;
    fn step(&mut self, observation: &Observation<'_>, target: &mut dyn Parameterized) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledEvent {
    #[serde(with = "crate::trace::serde_timestamp")]
    pub start: NaiveDateTime,
    #[serde(with = "crate::trace::serde_timestamp")]
    pub end: NaiveDateTime,
    pub key: String,
    pub value: ParamValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Pending,
    Active(ParamValue),
    Done,
}

/// Sets a parameter for `[start, end)` and restores the prior value after.
#[derive(Debug, Clone)]
pub struct ScheduleController {
    events: Vec<ScheduledEvent>,
    phases: Vec<Phase>,
}

impl ScheduleController {
    pub fn new(events: Vec<ScheduledEvent>) -> Result<Self> {
        for e in &events {
            if e.start >= e.end {
                return Err(Error::InvalidConfig(format!(
                    "schedule event on `{}` ends ({}) before it starts ({})",
                    e.key,
                    format_timestamp(e.end),
                    format_timestamp(e.start)
                )));
            }
        }
        for (i, a) in events.iter().enumerate() {
            for b in &events[i + 1..] {
                if a.key == b.key && a.start < b.end && b.start < a.end {
                    return Err(Error::InvalidConfig(format!(
                        "overlapping schedule events on `{}`",
                        a.key
                    )));
                }
            }
        }
        let phases = vec![Phase::Pending; events.len()];
        Ok(Self { events, phases })
    }
}

impl Controller for ScheduleController {
    fn validate(&self, target: &dyn Parameterized) -> Result<()> {
        for e in &self.events {
            target.parameter(&e.key)?;
        }
        Ok(())
    }

    fn step(&mut self, observation: &Observation<'_>, target: &mut dyn Parameterized) -> Result<()> {
        let t = observation.time;
        // endings first so back-to-back windows on one key hand over cleanly
        for (e, phase) in self.events.iter().zip(self.phases.iter_mut()) {
            if let Phase::Active(prior) = *phase {
                if t >= e.end {
                    target.set_parameter(&e.key, prior)?;
                    *phase = Phase::Done;
                }
            }
        }
        for (e, phase) in self.events.iter().zip(self.phases.iter_mut()) {
            if *phase == Phase::Pending && t >= e.start {
                if t < e.end {
                    let prior = target.parameter(&e.key)?;
                    target.set_parameter(&e.key, e.value)?;
                    *phase = Phase::Active(prior);
                } else {
                    *phase = Phase::Done;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::simple::SimpleBattery;
    use crate::trace::parse_timestamp;
    use crate::units::EnergyWh;
    use approx::assert_relative_eq;

    fn t(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    fn simple(capacity: f64, soc: f64) -> SimpleBattery {
        SimpleBattery::new(EnergyWh::new(capacity).unwrap(), Soc::new(soc).unwrap()).unwrap()
    }

    fn hour() -> DurationS {
        DurationS::new(3600.0).unwrap()
    }

    #[test]
    fn solar_examples() {
        assert_eq!(solar_actor(800.0, 10.0, 0.15).unwrap().value(), 1200.0);
        assert_eq!(solar_actor(0.0, 10.0, 0.15).unwrap().value(), 0.0);
        assert_eq!(solar_actor(1000.0, 1.0, 1.0).unwrap().value(), 1000.0);
        assert!(solar_actor(-1.0, 10.0, 0.15).is_err());
        assert!(solar_actor(100.0, 10.0, 1.5).is_err());
    }

    #[test]
    fn datacenter_examples() {
        assert_relative_eq!(datacenter_actor(&[200.0, 50.0], 1.3).unwrap().value(), -325.0);
        assert_eq!(datacenter_actor(&[], 1.3).unwrap().value(), 0.0);
        assert_eq!(datacenter_actor(&[100.0], 1.0).unwrap().value(), -100.0);
        assert!(datacenter_actor(&[100.0], 0.9).is_err());
        assert!(datacenter_actor(&[-1.0], 1.3).is_err());
    }

    #[test]
    fn surplus_goes_to_storage() {
        let mut bat = simple(1000.0, 0.5);
        let rec = policy_step(
            t("2021-06-15T00:00:00"),
            PowerW::new(100.0).unwrap(),
            hour(),
            &mut bat,
            &PolicyConfig::default(),
        )
        .unwrap();
        assert_eq!(rec.e_storage_wh, 100.0);
        assert_eq!(rec.e_grid_wh, 0.0);
    }

    #[test]
    fn min_soc_blocks_discharge() {
        let mut bat = simple(1000.0, 0.3);
        let cfg = PolicyConfig {
            min_soc: Soc::new(0.3).unwrap(),
            ..PolicyConfig::default()
        };
        let rec = policy_step(
            t("2021-06-15T00:00:00"),
            PowerW::new(-250.0).unwrap(),
            hour(),
            &mut bat,
            &cfg,
        )
        .unwrap();
        assert_eq!(rec.e_storage_wh, 0.0);
        assert_eq!(rec.e_grid_wh, -250.0);
        assert_eq!(rec.soc, 0.3);
    }

    #[test]
    fn forced_charge_draws_from_grid() {
        let mut bat = simple(10_000.0, 0.1);
        let cfg = PolicyConfig {
            charge_power_w: Some(3200.0),
            ..PolicyConfig::default()
        };
        let rec = policy_step(
            t("2021-06-15T00:00:00"),
            PowerW::new(-50.0).unwrap(),
            hour(),
            &mut bat,
            &cfg,
        )
        .unwrap();
        assert_eq!(rec.e_storage_wh, 3200.0);
        assert_eq!(rec.e_grid_wh, -3250.0);
    }

    #[test]
    fn islanded_records_unmet_and_curtailed() {
        let cfg = PolicyConfig {
            grid_connected: false,
            ..PolicyConfig::default()
        };
        let mut empty = simple(100.0, 0.0);
        let rec = policy_step(t("2021-06-15T00:00:00"), PowerW::new(-40.0).unwrap(), hour(), &mut empty, &cfg)
            .unwrap();
        assert_eq!(rec.e_grid_wh, 0.0);
        assert_eq!(rec.state.get(UNMET_KEY), Some(40.0));
        let mut full = simple(100.0, 1.0);
        let rec = policy_step(t("2021-06-15T00:00:00"), PowerW::new(40.0).unwrap(), hour(), &mut full, &cfg)
            .unwrap();
        assert_eq!(rec.state.get(CURTAILED_KEY), Some(40.0));
        assert_eq!(rec.state.get(UNMET_KEY), Some(0.0));
    }

    #[test]
    fn policy_parameters() {
        let mut cfg = PolicyConfig::default();
        cfg.set_parameter("min_soc", 0.3.into()).unwrap();
        assert_eq!(cfg.min_soc.value(), 0.3);
        cfg.set_parameter("charge_power_w", 3200.0.into()).unwrap();
        assert_eq!(cfg.charge_power_w, Some(3200.0));
        assert_eq!(cfg.parameter("charge_power_w").unwrap(), ParamValue::Number(3200.0));
        cfg.set_parameter("charge_power_w", ParamValue::Unset).unwrap();
        assert_eq!(cfg.charge_power_w, None);
        assert!(cfg.set_parameter("min_soc", 1.5.into()).is_err());
        assert!(cfg.set_parameter("charge_power_w", (-1.0).into()).is_err());
        assert!(matches!(
            cfg.set_parameter("unknown", 1.0.into()),
            Err(Error::UnknownParameter(k)) if k == "unknown"
        ));
    }

    fn drive(ctrl: &mut ScheduleController, cfg: &mut PolicyConfig, bat: &mut SimpleBattery, at: &str) {
        let mut target = ControlTarget {
            policy: cfg,
            storage: bat,
        };
        ctrl.step(
            &Observation {
                time: t(at),
                previous: None,
            },
            &mut target,
        )
        .unwrap();
    }

    #[test]
    fn schedule_window_sets_and_restores() {
        let mut ctrl = ScheduleController::new(vec![ScheduledEvent {
            start: t("2021-06-16T11:00:00"),
            end: t("2021-06-16T12:00:00"),
            key: "charge_power_w".into(),
            value: 3200.0.into(),
        }])
        .unwrap();
        let mut cfg = PolicyConfig::default();
        let mut bat = simple(100.0, 0.5);
        drive(&mut ctrl, &mut cfg, &mut bat, "2021-06-16T10:59:00");
        assert_eq!(cfg.charge_power_w, None);
        drive(&mut ctrl, &mut cfg, &mut bat, "2021-06-16T11:00:00");
        assert_eq!(cfg.charge_power_w, Some(3200.0));
        drive(&mut ctrl, &mut cfg, &mut bat, "2021-06-16T11:59:00");
        assert_eq!(cfg.charge_power_w, Some(3200.0));
        drive(&mut ctrl, &mut cfg, &mut bat, "2021-06-16T12:00:00");
        assert_eq!(cfg.charge_power_w, None);
    }

    #[test]
    fn sequential_windows_hand_over() {
        let ev = |start: &str, end: &str, v: f64| ScheduledEvent {
            start: t(start),
            end: t(end),
            key: "min_soc".into(),
            value: v.into(),
        };
        let mut ctrl = ScheduleController::new(vec![
            ev("2021-06-15T01:00:00", "2021-06-15T02:00:00", 0.4),
            ev("2021-06-15T02:00:00", "2021-06-15T03:00:00", 0.6),
        ])
        .unwrap();
        let mut cfg = PolicyConfig::default();
        let mut bat = simple(100.0, 0.5);
        drive(&mut ctrl, &mut cfg, &mut bat, "2021-06-15T01:30:00");
        assert_eq!(cfg.min_soc.value(), 0.4);
        drive(&mut ctrl, &mut cfg, &mut bat, "2021-06-15T02:00:00");
        assert_eq!(cfg.min_soc.value(), 0.6);
        drive(&mut ctrl, &mut cfg, &mut bat, "2021-06-15T03:00:00");
        assert_eq!(cfg.min_soc.value(), 0.0);
    }

    #[test]
    fn schedule_routes_storage_keys_and_validates() {
        let ctrl = ScheduleController::new(vec![ScheduledEvent {
            start: t("2021-06-15T01:00:00"),
            end: t("2021-06-15T02:00:00"),
            key: "capacity_wh".into(),
            value: 50.0.into(),
        }])
        .unwrap();
        let mut cfg = PolicyConfig::default();
        let mut bat = simple(100.0, 0.5);
        let target = ControlTarget {
            policy: &mut cfg,
            storage: &mut bat,
        };
        ctrl.validate(&target).unwrap();

        let bad = ScheduleController::new(vec![ScheduledEvent {
            start: t("2021-06-15T01:00:00"),
            end: t("2021-06-15T02:00:00"),
            key: "bogus".into(),
            value: 1.0.into(),
        }])
        .unwrap();
        assert!(matches!(bad.validate(&target), Err(Error::UnknownParameter(_))));
    }

    #[test]
    fn schedule_rejects_overlap_and_inverted_windows() {
        let ev = |start: &str, end: &str| ScheduledEvent {
            start: t(start),
            end: t(end),
            key: "min_soc".into(),
            value: 0.5.into(),
        };
        assert!(ScheduleController::new(vec![
            ev("2021-06-15T01:00:00", "2021-06-15T03:00:00"),
            ev("2021-06-15T02:00:00", "2021-06-15T04:00:00"),
        ])
        .is_err());
        assert!(ScheduleController::new(vec![ev("2021-06-15T03:00:00", "2021-06-15T01:00:00")]).is_err());
        assert!(ScheduleController::new(vec![]).is_ok());
    }
}
