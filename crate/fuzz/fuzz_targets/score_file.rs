#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = ugvq::eval::parse_score_file(text) {
            let again = ugvq::eval::parse_score_file(&ugvq::eval::format_score_file(&table)).unwrap();
            assert_eq!(again, table);
        }
    }
});
