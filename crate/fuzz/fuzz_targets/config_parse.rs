#![no_main]

use libfuzzer_sys::fuzz_target;
use scgk::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = text.parse::<RunConfig>() {
        // Anything accepted must survive a round trip through its own text form.
        let again: RunConfig = cfg.to_text().parse().expect("round trip parses");
        assert_eq!(again.to_text(), cfg.to_text());
        let _ = cfg.validate();
    }
});
