#![no_main]

use libfuzzer_sys::fuzz_target;
use logseg::io::{format_xyz, parse_xyz};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cloud) = parse_xyz(text, "fuzz") else { return };
    let written = format_xyz(&cloud, cloud.labels.as_deref()).expect("mask length matches");
    let back = parse_xyz(&written, "fuzz").expect("own output parses");
    assert_eq!(back.points, cloud.points);
    assert_eq!(back.labels, cloud.labels);
});
