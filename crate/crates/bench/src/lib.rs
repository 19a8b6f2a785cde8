//! Shared fixtures for the criterion benchmarks.

use primperc::graph::{GraphSpec, WeightOracle};

/// A balanced instance with a fixed seed, so every benchmark run measures
/// identical work.
pub fn fixture(n_b: u32, n_w: u32) -> (GraphSpec, WeightOracle) {
    let spec = GraphSpec::new(n_b, n_w, 0xBE7C_4A11).expect("valid fixture sizes");
    let oracle = WeightOracle::implicit(&spec);
    (spec, oracle)
}
