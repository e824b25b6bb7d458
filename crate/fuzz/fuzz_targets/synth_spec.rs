#![no_main]

use libfuzzer_sys::fuzz_target;
use logseg::synth::SyntheticLogSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = SyntheticLogSpec::from_json(text) {
        assert!(spec.validate().is_ok());
    }
});
