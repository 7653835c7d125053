#![no_main]

use fstefan::config::{Config, Override};
use libfuzzer_sys::fuzz_target;

const BASE: &str = "[model]\ns = 0.5\nL = 1\n[datum]\nP1 = 1\nP2 = 1\n[grid]\ndx = 0.05\ndomain_radius = 20\n[run]\nt_final = 1\n";

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(overrides) = text.lines().map(Override::parse).collect::<Result<Vec<_>, _>>() else { return };
    if let Ok(config) = Config::parse_with_overrides(BASE, &overrides) {
        let _ = config.validate();
    }
});
