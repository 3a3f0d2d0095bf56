#![no_main]

use libfuzzer_sys::fuzz_target;
use vceo_cli::InstanceSpec;

fuzz_target!(|data: &str| {
    if let Ok(spec) = InstanceSpec::parse(data) {
        // anything that parses must survive the canonical round trip
        let text = spec.canonical();
        let back = InstanceSpec::parse(&text).expect("canonical form parses");
        assert_eq!(back, spec);
        let _ = spec.check_targets();
    }
});
