#![no_main]

use libfuzzer_sys::fuzz_target;
use schwarz_box::cli::{parse_args, ExperimentConfig};

// One argument per line; parsing and validation only, no solves.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let args = std::iter::once("schwarz-box").chain(text.lines());
    if let Ok(parsed) = parse_args(args) {
        let _ = ExperimentConfig::from(&parsed).validate();
    }
});
