#![no_main]

use libfuzzer_sys::fuzz_target;

use ugvq::subjective::{parse_ratings_csv, process_ratings, MosOptions};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = parse_ratings_csv(data) {
        if let Ok(out) = process_ratings(&m, &MosOptions::with_screening()) {
            for rec in &out.records {
                assert!(rec.dimensions.values().all(|d| (0.0..=100.0).contains(&d.mos)));
            }
        }
    }
});
