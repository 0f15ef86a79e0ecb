#![no_main]

use catafinger::pnm::Pnm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = Pnm::decode(data) {
        let bytes = p.encode();
        assert_eq!(Pnm::decode(&bytes).expect("encoded image decodes"), p);
    }
});
