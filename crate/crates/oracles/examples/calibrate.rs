//! Regenerates the calibration fixture consumed by the wica test suites.
//!
//! cargo run -p wica-oracles --example calibrate --release > crates/core/tests/data/calibration.json

use wica_oracles::calibration::{calibrate_ots_null, calibrate_wii};

fn main() {
    let records = vec![
        calibrate_wii("normal", 10_000, 100, 20_240_101, 0.02),
        calibrate_wii("uniform", 10_000, 100, 20_240_102, 0.02),
        calibrate_ots_null(1000, 4, 20, 20_240_103, 0.25),
    ];
    for r in &records {
        assert!(r.supports_threshold(), "{} breaks its threshold: {r:?}", r.name);
    }
    println!("{}", serde_json::to_string_pretty(&records).unwrap());
}
