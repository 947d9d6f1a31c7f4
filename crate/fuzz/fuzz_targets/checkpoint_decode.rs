#![no_main]

use libfuzzer_sys::fuzz_target;
use scgk::checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = checkpoint::decode(data) {
        // Accepted input is canonical: re-encoding reproduces it byte for byte.
        assert_eq!(checkpoint::encode(&c.params, &c.state), data);
    }
});
