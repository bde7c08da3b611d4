//! Cases and tables shipped with the crate.

pub const FIDVR_8BUS: &str = include_str!("../fixtures/fidvr_8bus.toml");
pub const TWO_BUS: &str = include_str!("../fixtures/two_bus.toml");
pub const THREE_BUS: &str = include_str!("../fixtures/three_bus.toml");
pub const OVERLOAD: &str = include_str!("../fixtures/overload.toml");
/// Sample coverage counts per SVC count and fault duration, out of 40 contingencies.
pub const COVERAGE_CURVE_SAMPLE: &str = include_str!("../fixtures/coverage_curve_sample.csv");

/// Every shipped case, by file stem.
pub const CASES: [(&str, &str); 4] =
    [("fidvr_8bus", FIDVR_8BUS), ("two_bus", TWO_BUS), ("three_bus", THREE_BUS), ("overload", OVERLOAD)];
