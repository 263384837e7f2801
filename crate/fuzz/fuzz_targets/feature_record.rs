#![no_main]

use libfuzzer_sys::fuzz_target;
use ugvq::features::{decode_record, encode_record};

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = decode_record(data) {
        // Bit-level comparison, so NaN payloads count as equal.
        let bytes = encode_record(&r.fingerprint, &r.video_id, &r.bundle);
        let again = decode_record(&bytes).expect("re-encoded record decodes");
        assert_eq!(encode_record(&again.fingerprint, &again.video_id, &again.bundle), bytes);
    }
});
