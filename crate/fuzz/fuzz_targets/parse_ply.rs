#![no_main]

use libfuzzer_sys::fuzz_target;
use logseg::io::{format_ply, parse_ply};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cloud) = parse_ply(text, "fuzz") else { return };
    // anything accepted must survive a write/read cycle unchanged
    let written = format_ply(&cloud, cloud.labels.as_deref()).expect("mask length matches");
    let back = parse_ply(&written, "fuzz").expect("own output parses");
    assert_eq!(back.points, cloud.points);
    assert_eq!(back.labels, cloud.labels);
});
