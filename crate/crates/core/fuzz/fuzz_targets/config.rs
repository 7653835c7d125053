#![no_main]

use fstefan::config::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = Config::parse(text) else { return };
    let rendered = config.render();
    let again = Config::parse(&rendered).expect("rendered config must parse");
    assert_eq!(again.render(), rendered);
    let _ = config.validate();
});
