//! The step loop: actors, grid sum, controllers, then policy and storage.
//!
//! Controllers see the previous step's record, so a decision taken at step
//! `t` can only react to the grid exchange of step `t - 1`.

use serde::{Deserialize, Serialize};

use crate::config::{Scenario, ScenarioConfig};
use crate::error::Result;
use crate::microgrid::{policy_step, ControlTarget, Observation, StepRecord, CURTAILED_KEY, UNMET_KEY};
use crate::models::ModelKind;
use crate::par;
use crate::units::PowerW;

/// Runs a scenario to completion. All configuration errors (trace coverage,
/// model parameters, controller keys) surface before the first step.
pub fn run(config: &ScenarioConfig) -> Result<Vec<StepRecord>> {
    let steps = config.num_steps()?;
    let scenario = config.build()?;
    run_built(config, scenario, steps)
}

fn run_built(config: &ScenarioConfig, scenario: Scenario, steps: usize) -> Result<Vec<StepRecord>> {
    let Scenario {
        actors,
        mut storage,
        mut policy,
        mut controllers,
    } = scenario;
    {
        let target = ControlTarget {
            policy: &mut policy,
            storage: storage.as_mut(),
        };
        for c in &controllers {
            c.validate(&target)?;
        }
    }

    let duration = config.step_seconds;
    let mut records: Vec<StepRecord> = Vec::with_capacity(steps);
    for k in 0..steps {
        let time = config.time_of(k);
        let mut delta = 0.0;
        for actor in &actors {
            delta += actor.power_at(time)?.value();
        }
        let delta = PowerW::new(delta)?;

        let observation = Observation {
            time,
            previous: records.last(),
        };
        for c in controllers.iter_mut() {
            let mut target = ControlTarget {
                policy: &mut policy,
                storage: storage.as_mut(),
            };
            c.step(&observation, &mut target)?;
        }

        let record = policy_step(time, delta, duration, storage.as_mut(), &policy)?;
        records.push(record);
    }
    Ok(records)
}

/// Runs independent scenarios, in parallel when the build allows it. Output
/// order matches input order.
pub fn run_many(configs: Vec<ScenarioConfig>, parallel: bool) -> Vec<Result<Vec<StepRecord>>> {
    par::map_ordered(configs, parallel, |c| run(&c))
}

/// Energy totals over a run. Grid import is energy drawn from the grid
/// (negative `e_grid_wh`), export the energy fed into it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub model: ModelKind,
    pub steps: usize,
    pub grid_import_wh: f64,
    pub grid_export_wh: f64,
    pub net_grid_import_wh: f64,
    pub storage_charged_wh: f64,
    pub storage_discharged_wh: f64,
    pub unmet_wh: f64,
    pub curtailed_wh: f64,
    pub initial_soc: f64,
    pub final_soc: f64,
}

impl ScenarioSummary {
    pub fn from_records(model: ModelKind, initial_soc: f64, records: &[StepRecord]) -> Self {
        let mut s = Self {
            model,
            steps: records.len(),
            grid_import_wh: 0.0,
            grid_export_wh: 0.0,
            net_grid_import_wh: 0.0,
            storage_charged_wh: 0.0,
            storage_discharged_wh: 0.0,
            unmet_wh: 0.0,
            curtailed_wh: 0.0,
            initial_soc,
            final_soc: records.last().map_or(initial_soc, |r| r.soc),
        };
        for r in records {
            if r.e_grid_wh < 0.0 {
                s.grid_import_wh -= r.e_grid_wh;
            } else {
                s.grid_export_wh += r.e_grid_wh;
            }
            if r.e_storage_wh > 0.0 {
                s.storage_charged_wh += r.e_storage_wh;
            } else {
                s.storage_discharged_wh -= r.e_storage_wh;
            }
            s.unmet_wh += r.state.get(UNMET_KEY).unwrap_or(0.0);
            s.curtailed_wh += r.state.get(CURTAILED_KEY).unwrap_or(0.0);
        }
        s.net_grid_import_wh = s.grid_import_wh - s.grid_export_wh;
        s
    }

    pub fn of(config: &ScenarioConfig, records: &[StepRecord]) -> Self {
        Self::from_records(
            config.storage.kind(),
            config.storage.initial_soc().value(),
            records,
        )
    }
}
