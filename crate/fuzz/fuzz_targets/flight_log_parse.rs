#![no_main]

use kitepilot::harness::{summarize, Outcome};
use kitepilot::telemetry::{flight_rows, read_log};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_log(data) {
        for lag in 0..4 {
            let _ = flight_rows(&rows, lag);
        }
        let _ = summarize(&rows, Outcome::Completed, None, 2);
    }
});
