#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(line) = std::str::from_utf8(data) {
        if let Ok(header) = pspin::cli::parse_header(line) {
            let again = pspin::cli::parse_header(&header.to_line()).expect("rendered header parses");
            assert_eq!(again.command, header.command);
        }
    }
});
