//! Scenario configuration files (TOML).
//!
//! ```toml
//! step_seconds = 60
//! horizon_seconds = 172800
//! start_time = "2021-06-15T00:00:00"
//!
//! [[actors]]
//! type = "solar"
//! trace = "solar_trace.csv"
//! area_m2 = 10.0
//! efficiency = 0.15
//!
//! [storage]
//! model = "pack"
//! ns = 16
//! np = 16
//! initial_soc = 0.5
//! ```
//!
//! Relative paths (traces, OCV tables, output) resolve against the directory
//! of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microgrid::{
    Actor, ConstantActor, Controller, DatacenterActor, PolicyConfig, ScheduleController,
    ScheduledEvent, SolarActor,
};
use crate::models::clc::resistance_for_efficiency;
use crate::models::ecm::DEFAULT_R_INTERNAL_OHM;
use crate::models::ocv::DEFAULT_TABLE_VERSION;
use crate::models::pack::DEFAULT_R_INTERCONNECT_OHM;
use crate::models::{
    near_square_topology, CellParams, ClcBattery, ClcParams, EcmBattery, EcmParams,
    Heterogeneity, ModelKind, OcvTable, PackBattery, PackParams, PackTopology, Parallelism,
    SimpleBattery, SimpleParams, CELL_CAPACITY_AH, CELL_ENERGY_WH, CELL_NOMINAL_V,
};
use crate::output::OutputFormat;
use crate::storage::Storage;
use crate::trace::Trace;
use crate::units::{CurrentA, DurationS, EnergyWh, Soc};

fn default_step() -> DurationS {
    DurationS::new(60.0).expect("positive")
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_owned()
    } else {
        base.join(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_step")]
    pub step_seconds: DurationS,
    pub horizon_seconds: f64,
    #[serde(with = "crate::trace::serde_timestamp")]
    pub start_time: NaiveDateTime,
    #[serde(default)]
    pub actors: Vec<ActorConfig>,
    pub storage: StorageConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub controllers: Vec<ControllerConfig>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ActorConfig {
    Solar {
        #[serde(default)]
        name: Option<String>,
        /// Irradiance trace, W/m².
        trace: PathBuf,
        area_m2: f64,
        efficiency: f64,
    },
    Datacenter {
        #[serde(default)]
        name: Option<String>,
        node_powers_w: Vec<f64>,
        pue: f64,
    },
    Constant {
        #[serde(default)]
        name: Option<String>,
        power_w: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ControllerConfig {
    Schedule {
        #[serde(default)]
        events: Vec<ScheduledEvent>,
    },
}

/// Where a cell's OCV curve comes from: a CSV file or inline `[soc, ocv]`
/// pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OcvSource {
    Path(PathBuf),
    Inline(OcvTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellConfig {
    pub capacity_ah: f64,
    /// Defaults to the resistance derived from the fitted charge efficiency.
    pub r_internal_ohm: Option<f64>,
    /// Defaults to the bundled 21700 table.
    pub ocv_table: Option<OcvSource>,
    pub i_charge_max_a: f64,
    pub i_discharge_max_a: f64,
    pub v_max: f64,
    pub v_min: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        let d = CellParams::default();
        Self {
            capacity_ah: d.capacity_ah,
            r_internal_ohm: None,
            ocv_table: None,
            i_charge_max_a: d.i_charge_max_a,
            i_discharge_max_a: d.i_discharge_max_a,
            v_max: d.v_max,
            v_min: d.v_min,
        }
    }
}

impl CellConfig {
    pub fn resolve(&self, base_dir: &Path) -> Result<CellParams> {
        let ocv_table = match &self.ocv_table {
            None => Arc::new(OcvTable::default_cell()),
            Some(OcvSource::Inline(t)) => Arc::new(t.clone()),
            Some(OcvSource::Path(p)) => Arc::new(OcvTable::from_csv_path(&resolve(base_dir, p))?),
        };
        let cell = CellParams {
            capacity_ah: self.capacity_ah,
            r_internal_ohm: self.r_internal_ohm.unwrap_or(DEFAULT_R_INTERNAL_OHM),
            ocv_table,
            i_charge_max_a: self.i_charge_max_a,
            i_discharge_max_a: self.i_discharge_max_a,
            v_max: self.v_max,
            v_min: self.v_min,
        };
        cell.validate()?;
        Ok(cell)
    }
}

fn full() -> Soc {
    Soc::FULL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimpleConfig {
    /// Total capacity; mutually exclusive with `num_cells`.
    #[serde(default)]
    pub capacity_wh: Option<f64>,
    #[serde(default)]
    pub cell_capacity_wh: Option<f64>,
    #[serde(default)]
    pub num_cells: Option<usize>,
    #[serde(default = "full")]
    pub initial_soc: Soc,
}

impl SimpleConfig {
    pub fn params(&self) -> Result<SimpleParams> {
        let capacity = match (self.capacity_wh, self.num_cells) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "simple storage takes either capacity_wh or num_cells, not both".into(),
                ))
            }
            (Some(c), None) => c,
            (None, n) => self.cell_capacity_wh.unwrap_or(CELL_ENERGY_WH) * n.unwrap_or(1) as f64,
        };
        let params = SimpleParams {
            capacity_wh: EnergyWh::new(capacity)?,
            initial_soc: self.initial_soc,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcmConfig {
    #[serde(default)]
    pub cell: CellConfig,
    #[serde(default = "one")]
    pub num_cells: usize,
    #[serde(default = "full")]
    pub initial_soc: Soc,
}

fn one() -> usize {
    1
}

fn default_interconnect() -> f64 {
    DEFAULT_R_INTERCONNECT_OHM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackConfig {
    pub ns: usize,
    pub np: usize,
    #[serde(default = "default_interconnect")]
    pub r_interconnect_ohm: f64,
    #[serde(default)]
    pub heterogeneity: Option<Heterogeneity>,
    #[serde(default)]
    pub cell: CellConfig,
    #[serde(default = "full")]
    pub initial_soc: Soc,
    #[serde(default)]
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum StorageConfig {
    Simple(SimpleConfig),
    Clc(ClcParams),
    Ecm(EcmConfig),
    Pack(PackConfig),
}

impl StorageConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            StorageConfig::Simple(_) => ModelKind::Simple,
            StorageConfig::Clc(_) => ModelKind::Clc,
            StorageConfig::Ecm(_) => ModelKind::Ecm,
            StorageConfig::Pack(_) => ModelKind::Pack,
        }
    }

    /// Cell count this storage represents; for a simple storage sized in Wh
    /// it is the nearest whole number of default cells.
    pub fn num_cells(&self) -> usize {
        match self {
            StorageConfig::Simple(c) => match (c.capacity_wh, c.num_cells) {
                (Some(wh), _) => ((wh / CELL_ENERGY_WH).round() as usize).max(1),
                (None, n) => n.unwrap_or(1),
            },
            StorageConfig::Clc(c) => c.num_cells,
            StorageConfig::Ecm(c) => c.num_cells,
            StorageConfig::Pack(c) => c.ns * c.np,
        }
    }

    pub fn initial_soc(&self) -> Soc {
        match self {
            StorageConfig::Simple(c) => c.initial_soc,
            StorageConfig::Clc(c) => c.initial_soc,
            StorageConfig::Ecm(c) => c.initial_soc,
            StorageConfig::Pack(c) => c.initial_soc,
        }
    }

    fn cell(&self) -> Option<&CellConfig> {
        match self {
            StorageConfig::Ecm(c) => Some(&c.cell),
            StorageConfig::Pack(c) => Some(&c.cell),
            _ => None,
        }
    }

    /// Default-parameter storage of `kind` with `num_cells` cells.
    pub fn for_model(kind: ModelKind, num_cells: usize, initial_soc: Soc) -> Self {
        match kind {
            ModelKind::Simple => StorageConfig::Simple(SimpleConfig {
                capacity_wh: None,
                cell_capacity_wh: None,
                num_cells: Some(num_cells),
                initial_soc,
            }),
            ModelKind::Clc => StorageConfig::Clc(ClcParams {
                num_cells,
                initial_soc,
                ..ClcParams::default()
            }),
            ModelKind::Ecm => StorageConfig::Ecm(EcmConfig {
                cell: CellConfig::default(),
                num_cells,
                initial_soc,
            }),
            ModelKind::Pack => {
                let (ns, np) = near_square_topology(num_cells);
                StorageConfig::Pack(PackConfig {
                    ns,
                    np,
                    r_interconnect_ohm: DEFAULT_R_INTERCONNECT_OHM,
                    heterogeneity: None,
                    cell: CellConfig::default(),
                    initial_soc,
                    parallelism: Parallelism::Auto,
                })
            }
        }
    }

    /// Same cell count, initial SoC and (where both use one) cell
    /// definition, but a different model. Returns `self` unchanged when the
    /// model already matches.
    pub fn with_model(&self, kind: ModelKind) -> Self {
        if kind == self.kind() {
            return self.clone();
        }
        let mut next = Self::for_model(kind, self.num_cells(), self.initial_soc());
        if let Some(cell) = self.cell() {
            match &mut next {
                StorageConfig::Ecm(c) => c.cell = cell.clone(),
                StorageConfig::Pack(c) => c.cell = cell.clone(),
                _ => {}
            }
        }
        next
    }

    pub fn build(&self, base_dir: &Path) -> Result<Box<dyn Storage>> {
        Ok(match self {
            StorageConfig::Simple(c) => Box::new(SimpleBattery::from_params(&c.params()?)?),
            StorageConfig::Clc(c) => Box::new(ClcBattery::new(*c)?),
            StorageConfig::Ecm(c) => Box::new(EcmBattery::new(EcmParams {
                cell: c.cell.resolve(base_dir)?,
                num_cells: c.num_cells,
                initial_soc: c.initial_soc,
            })?),
            StorageConfig::Pack(c) => Box::new(PackBattery::new(self.pack_params(c, base_dir)?)?),
        })
    }

    fn pack_params(&self, c: &PackConfig, base_dir: &Path) -> Result<PackParams> {
        Ok(PackParams {
            topology: PackTopology {
                ns: c.ns,
                np: c.np,
                r_interconnect_ohm: c.r_interconnect_ohm,
                heterogeneity: c.heterogeneity,
            },
            cell: c.cell.resolve(base_dir)?,
            initial_soc: c.initial_soc,
            parallelism: c.parallelism,
        })
    }

    /// Resolved parameters including derived quantities, for display.
    pub fn describe(&self, base_dir: &Path) -> Result<BTreeMap<String, serde_json::Value>> {
        use serde_json::json;
        let mut out = BTreeMap::new();
        let mut put = |k: &str, v: serde_json::Value| {
            out.insert(k.to_owned(), v);
        };
        put("model", json!(self.kind().name()));
        put("num_cells", json!(self.num_cells()));
        put("initial_soc", json!(self.initial_soc().value()));
        match self {
            StorageConfig::Simple(c) => {
                put("capacity_wh", json!(c.params()?.capacity_wh.value()));
            }
            StorageConfig::Clc(p) => {
                p.validate()?;
                let n = p.num_cells as f64;
                let c03 = CurrentA::new(0.3 * CELL_CAPACITY_AH)?;
                let c02 = CurrentA::new(-0.2 * CELL_CAPACITY_AH)?;
                for (k, v) in [
                    ("eta_c", p.eta_c),
                    ("eta_d", p.eta_d),
                    ("v_nominal", p.v_nominal),
                    ("alpha_c_a", p.alpha_c_a),
                    ("alpha_d_a", p.alpha_d_a),
                    ("u1", p.u1),
                    ("v1", p.v1),
                    ("u2", p.u2),
                    ("v2", p.v2),
                ] {
                    put(k, json!(v));
                }
                put("capacity_wh", json!(p.capacity_wh()));
                put("round_trip_efficiency", json!(p.eta_c / p.eta_d));
                put("max_charge_w", json!(p.alpha_c_a * p.v_nominal * n));
                put("max_discharge_w", json!(p.alpha_d_a * p.v_nominal * n));
                put(
                    "derived_r_charge_ohm",
                    json!(resistance_for_efficiency(p.eta_c, c03, p.v_nominal)),
                );
                put(
                    "derived_r_discharge_ohm",
                    json!(resistance_for_efficiency(p.eta_d, c02, p.v_nominal)),
                );
            }
            StorageConfig::Ecm(c) => {
                let cell = c.cell.resolve(base_dir)?;
                describe_cell(&cell, &c.cell, &mut put);
                let n = c.num_cells as f64;
                put("capacity_ah", json!(cell.capacity_ah * n));
                put("nominal_energy_wh", json!(cell.capacity_ah * CELL_NOMINAL_V * n));
            }
            StorageConfig::Pack(c) => {
                let params = self.pack_params(c, base_dir)?;
                params.validate()?;
                describe_cell(&params.cell, &c.cell, &mut put);
                put("ns", json!(c.ns));
                put("np", json!(c.np));
                put("r_interconnect_ohm", json!(c.r_interconnect_ohm));
                put(
                    "string_resistance_ohm",
                    json!(c.ns as f64 * (params.cell.r_internal_ohm + c.r_interconnect_ohm)),
                );
                put("capacity_ah", json!(params.cell.capacity_ah * c.np as f64));
                put("nominal_voltage_v", json!(CELL_NOMINAL_V * c.ns as f64));
                put(
                    "nominal_energy_wh",
                    json!(params.cell.capacity_ah * CELL_NOMINAL_V * (c.ns * c.np) as f64),
                );
                put("parallelism", json!(c.parallelism));
            }
        }
        Ok(out)
    }
}

fn describe_cell(cell: &CellParams, config: &CellConfig, put: &mut impl FnMut(&str, serde_json::Value)) {
    use serde_json::json;
    put("cell_capacity_ah", json!(cell.capacity_ah));
    put("r_internal_ohm", json!(cell.r_internal_ohm));
    if config.r_internal_ohm.is_none() {
        put(
            "r_internal_source",
            json!("derived from eta_c = 0.978 at 0.3C and 3.63 V"),
        );
    }
    put("i_charge_max_a", json!(cell.i_charge_max_a));
    put("i_discharge_max_a", json!(cell.i_discharge_max_a));
    put("v_max", json!(cell.v_max));
    put("v_min", json!(cell.v_min));
    put("ocv_min_v", json!(cell.ocv_table.min_ocv()));
    put("ocv_max_v", json!(cell.ocv_table.max_ocv()));
    let table = match &config.ocv_table {
        None => DEFAULT_TABLE_VERSION.to_owned(),
        Some(OcvSource::Path(p)) => p.display().to_string(),
        Some(OcvSource::Inline(_)) => "inline".to_owned(),
    };
    put("ocv_table", json!(table));
}

/// Everything needed to step a scenario.
pub struct Scenario {
    pub actors: Vec<Box<dyn Actor>>,
    pub storage: Box<dyn Storage>,
    pub policy: PolicyConfig,
    pub controllers: Vec<Box<dyn Controller>>,
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_owned).unwrap_or_default();
        toml::from_str::<Self>(&text)
            .map(|c| c.with_base_dir(base))
            .map_err(|source| Error::Toml {
                path: path.to_owned(),
                source,
            })
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        toml::from_str::<Self>(text)
            .map(|c| c.with_base_dir(base_dir.to_owned()))
            .map_err(|source| Error::Toml {
                path: PathBuf::from("<inline>"),
                source,
            })
    }

    pub fn with_base_dir(mut self, base_dir: PathBuf) -> Self {
        self.base_dir = base_dir;
        self
    }

    /// Replaces only the storage section with a default-parameter storage of
    /// `kind` of the same size.
    pub fn with_model(&self, kind: ModelKind) -> Self {
        Self {
            storage: self.storage.with_model(kind),
            ..self.clone()
        }
    }

    pub fn num_steps(&self) -> Result<usize> {
        let step = self.step_seconds.seconds();
        let h = self.horizon_seconds;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("horizon_seconds", "must be > 0"));
        }
        let n = (h / step).round();
        if (n * step - h).abs() > 1e-9 * h || n < 1.0 {
            return Err(Error::invalid(
                "horizon_seconds",
                format!("{h} s is not a multiple of step_seconds = {step} s"),
            ));
        }
        if step.fract() != 0.0 {
            return Err(Error::invalid("step_seconds", "must be a whole number of seconds"));
        }
        Ok(n as usize)
    }

    /// Time of step `k`.
    pub fn time_of(&self, k: usize) -> NaiveDateTime {
        self.start_time + chrono::Duration::seconds(k as i64 * self.step_seconds.seconds() as i64)
    }

    pub fn output_path(&self) -> Option<(PathBuf, OutputFormat)> {
        self.output
            .as_ref()
            .map(|o| (resolve(&self.base_dir, &o.path), o.format))
    }

    /// Builds actors, storage and controllers and checks everything that can
    /// fail during stepping: trace coverage, model parameters and controller
    /// keys.
    pub fn build(&self) -> Result<Scenario> {
        let steps = self.num_steps()?;
        self.policy.validate()?;
        let first = self.start_time;
        let last = self.time_of(steps - 1);

        let mut actors: Vec<Box<dyn Actor>> = Vec::with_capacity(self.actors.len());
        for (i, a) in self.actors.iter().enumerate() {
            let label = |name: &Option<String>, kind: &str| {
                name.clone().unwrap_or_else(|| format!("{kind}{i}"))
            };
            actors.push(match a {
                ActorConfig::Solar {
                    name,
                    trace,
                    area_m2,
                    efficiency,
                } => {
                    let trace = Trace::from_path(&resolve(&self.base_dir, trace))?;
                    trace.ensure_covers(first, last)?;
                    crate::microgrid::solar_actor(0.0, *area_m2, *efficiency)?;
                    Box::new(SolarActor {
                        name: label(name, "solar"),
                        trace: Arc::new(trace),
                        area_m2: *area_m2,
                        efficiency: *efficiency,
                    })
                }
                ActorConfig::Datacenter {
                    name,
                    node_powers_w,
                    pue,
                } => {
                    crate::microgrid::datacenter_actor(node_powers_w, *pue)?;
                    Box::new(DatacenterActor {
                        name: label(name, "datacenter"),
                        node_powers_w: node_powers_w.clone(),
                        pue: *pue,
                    })
                }
                ActorConfig::Constant { name, power_w } => Box::new(ConstantActor {
                    name: label(name, "constant"),
                    power: crate::units::PowerW::new(*power_w)?,
                }),
            });
        }

        let storage = self.storage.build(&self.base_dir)?;
        let mut controllers: Vec<Box<dyn Controller>> = Vec::new();
        for c in &self.controllers {
            match c {
                ControllerConfig::Schedule { events } => {
                    controllers.push(Box::new(ScheduleController::new(events.clone())?));
                }
            }
        }
        Ok(Scenario {
            actors,
            storage,
            policy: self.policy,
            controllers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        horizon_seconds = 600
        start_time = 2021-06-15T00:00:00

        [[actors]]
        type = "datacenter"
        node_powers_w = [200.0, 50.0]
        pue = 1.3

        [storage]
        model = "pack"
        ns = 4
        np = 2
        initial_soc = 0.5

        [policy]
        min_soc = 0.3

        [[controllers]]
        type = "schedule"
        [[controllers.events]]
        start = "2021-06-15T00:02:00"
        end = 2021-06-15T00:04:00
        key = "charge_power_w"
        value = 100.0
    "#;

    #[test]
    fn parses_basic() {
        let cfg = ScenarioConfig::from_toml_str(BASIC, Path::new(".")).unwrap();
        assert_eq!(cfg.step_seconds.seconds(), 60.0);
        assert_eq!(cfg.num_steps().unwrap(), 10);
        assert_eq!(cfg.storage.kind(), ModelKind::Pack);
        assert_eq!(cfg.storage.num_cells(), 8);
        assert_eq!(cfg.policy.min_soc.value(), 0.3);
        let scenario = cfg.build().unwrap();
        assert_eq!(scenario.actors.len(), 1);
        assert_eq!(scenario.controllers.len(), 1);
    }

    #[test]
    fn model_override_keeps_everything_else() {
        let cfg = ScenarioConfig::from_toml_str(BASIC, Path::new(".")).unwrap();
        let clc = cfg.with_model(ModelKind::Clc);
        assert_eq!(clc.storage.kind(), ModelKind::Clc);
        assert_eq!(clc.storage.num_cells(), 8);
        assert_eq!(clc.storage.initial_soc().value(), 0.5);
        assert_eq!(clc.actors, cfg.actors);
        assert_eq!(clc.policy, cfg.policy);
        assert_eq!(clc.controllers, cfg.controllers);
        assert_eq!(clc.horizon_seconds, cfg.horizon_seconds);
        assert_eq!(cfg.with_model(ModelKind::Pack), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = Path::new(".");
        let bad_horizon = BASIC.replace("horizon_seconds = 600", "horizon_seconds = 610");
        let cfg = ScenarioConfig::from_toml_str(&bad_horizon, base).unwrap();
        assert!(cfg.build().is_err());

        let unknown_field = BASIC.replace("np = 2", "np = 2\nbogus = 1");
        assert!(ScenarioConfig::from_toml_str(&unknown_field, base).is_err());

        let bad_soc = BASIC.replace("initial_soc = 0.5", "initial_soc = 1.5");
        assert!(ScenarioConfig::from_toml_str(&bad_soc, base).is_err());

        let bad_model = BASIC.replace("model = \"pack\"", "model = \"spme\"");
        assert!(ScenarioConfig::from_toml_str(&bad_model, base).is_err());

        let missing_trace = format!(
            "{BASIC}\n[[actors]]\ntype = \"solar\"\ntrace = \"nope.csv\"\narea_m2 = 1.0\nefficiency = 0.1\n"
        );
        let cfg = ScenarioConfig::from_toml_str(&missing_trace, base).unwrap();
        assert!(matches!(cfg.build(), Err(Error::Io { .. })));
    }

    #[test]
    fn describe_reports_derived_values() {
        let clc = StorageConfig::for_model(ModelKind::Clc, 1, Soc::FULL);
        let d = clc.describe(Path::new(".")).unwrap();
        let r = d["derived_r_charge_ohm"].as_f64().unwrap();
        assert!((r - DEFAULT_R_INTERNAL_OHM).abs() < 1e-4);
        assert!((d["round_trip_efficiency"].as_f64().unwrap() - 0.978 / 1.014).abs() < 1e-12);

        let pack = StorageConfig::for_model(ModelKind::Pack, 256, Soc::FULL);
        let d = pack.describe(Path::new(".")).unwrap();
        assert_eq!(d["ns"], 16);
        assert_eq!(d["np"], 16);
        assert_eq!(d["capacity_ah"].as_f64().unwrap(), 80.0);
    }

    #[test]
    fn simple_sizing() {
        let by_cells = StorageConfig::for_model(ModelKind::Simple, 256, Soc::FULL);
        let StorageConfig::Simple(c) = &by_cells else {
            unreachable!()
        };
        assert!((c.params().unwrap().capacity_wh.value() - 256.0 * CELL_ENERGY_WH).abs() < 1e-9);
        let both = SimpleConfig {
            capacity_wh: Some(10.0),
            cell_capacity_wh: None,
            num_cells: Some(2),
            initial_soc: Soc::FULL,
        };
        assert!(both.params().is_err());
    }
}
