#![no_main]

use libfuzzer_sys::fuzz_target;
use vceo_cli::parse_range;

fuzz_target!(|data: &str| {
    if let Ok(r) = parse_range(data) {
        assert!(r.start.is_finite() && r.end.is_finite());
        let pts = r.points(3);
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0], r.start);
        assert_eq!(pts[2], r.end);
    }
});
