#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(frames) = ugvq::corpus::decode_raw_clip(data) {
        assert_eq!(ugvq::corpus::decode_raw_clip(&ugvq::corpus::encode_raw_clip_f32(&frames)).unwrap(), frames);
    }
});
