// Kept in its own test binary so nothing else runs while it times.

use batsim_core::bench::{measure, BenchConfig};
use batsim_core::models::ModelKind;

#[test]
fn simple_and_clc_step_costs_are_within_a_factor_of_two() {
    let config = BenchConfig {
        iterations: 1000,
        ..BenchConfig::default()
    };
    for cells in [16, 256] {
        let simple = measure(ModelKind::Simple, cells, &config).unwrap().summary.median;
        let clc = measure(ModelKind::Clc, cells, &config).unwrap().summary.median;
        let ratio = simple.max(clc) / simple.min(clc);
        assert!(ratio <= 2.0, "{cells} cells: simple {simple:e} s, clc {clc:e} s");
    }
}
