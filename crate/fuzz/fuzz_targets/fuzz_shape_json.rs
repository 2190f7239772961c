//! Shape specs (including raw polyrectangle vertex lists) must parse or fail
//! cleanly; building the polygon validates orientation and simplicity.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = serde_json::from_str::<crystal_flow::config::ShapeSpec>(text) {
            let _ = spec.to_polyrectangle();
        }
        if let Ok(poly) = serde_json::from_str::<crystal_flow::geometry::Polyrectangle>(text) {
            let _ = poly.area();
            let _ = poly.bounding_box();
        }
    }
});
