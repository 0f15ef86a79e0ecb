#![no_main]

use catafinger::proprio::TorqueRegressor;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = TorqueRegressor::from_bytes(data) {
        assert_eq!(m.to_bytes(), data);
    }
});
