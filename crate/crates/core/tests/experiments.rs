use batsim_core::experiment::{constant_power_experiment, Direction};
use batsim_core::models::{c_rate_power_w, ModelKind};
use batsim_core::units::DurationS;

fn minute() -> DurationS {
    DurationS::new(60.0).unwrap()
}

#[test]
fn simple_soc_trace_is_a_straight_line() {
    for rate in [0.2, 1.0, 3.0] {
        let r = constant_power_experiment(ModelKind::Simple, Direction::Discharge, rate, 256, minute()).unwrap();
        let rows = &r.rows[..r.rows.len() - 1];
        let slope = rows[1].soc - rows[0].soc;
        for pair in rows.windows(2) {
            assert!(((pair[1].soc - pair[0].soc) - slope).abs() < 1e-12);
        }
    }
}

#[test]
fn clc_discharge_above_limit_equals_limit_run() {
    let fast = constant_power_experiment(ModelKind::Clc, Direction::Discharge, 2.0, 256, minute()).unwrap();
    let capped = constant_power_experiment(ModelKind::Clc, Direction::Discharge, 1.5, 256, minute()).unwrap();
    assert_eq!(fast.rows, capped.rows);
    let limit = -c_rate_power_w(1.5, 256);
    assert!((fast.rows[1].applied_power_w - limit).abs() < 1e-9 * limit.abs());
}

#[test]
fn ecm_delivers_less_at_high_rate() {
    let slow = constant_power_experiment(ModelKind::Ecm, Direction::Discharge, 0.2, 1, minute()).unwrap();
    let fast = constant_power_experiment(ModelKind::Ecm, Direction::Discharge, 1.5, 1, minute()).unwrap();
    assert!(fast.energy_wh() < slow.energy_wh());
}

#[test]
fn clc_charges_slower_than_simple() {
    let simple = constant_power_experiment(ModelKind::Simple, Direction::Charge, 0.5, 1, minute()).unwrap();
    let clc = constant_power_experiment(ModelKind::Clc, Direction::Charge, 0.5, 1, minute()).unwrap();
    assert!(clc.duration_s() > simple.duration_s());
}

#[test]
fn pack_and_scaled_cell_agree_on_discharge() {
    let pack = constant_power_experiment(ModelKind::Pack, Direction::Discharge, 0.5, 16, minute()).unwrap();
    let ecm = constant_power_experiment(ModelKind::Ecm, Direction::Discharge, 0.5, 16, minute()).unwrap();
    let rel = (pack.energy_wh() - ecm.energy_wh()).abs() / ecm.energy_wh();
    assert!(rel < 0.02, "pack {} Wh vs ecm {} Wh", pack.energy_wh(), ecm.energy_wh());
    assert!(pack.energy_wh() <= ecm.energy_wh());
}
