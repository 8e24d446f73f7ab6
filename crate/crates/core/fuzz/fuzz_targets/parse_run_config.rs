#![no_main]

use libfuzzer_sys::fuzz_target;

const COMMANDS: [&str; 6] = ["phase", "parisi", "fp", "shatter-scan", "simulate", "chaos"];

// First byte picks the command, the rest is the config document.
fuzz_target!(|data: &[u8]| {
    let Some((&sel, rest)) = data.split_first() else {
        return;
    };
    if let Ok(text) = std::str::from_utf8(rest) {
        let _ = pspin::cli::parse_any_config(text, COMMANDS[sel as usize % COMMANDS.len()]);
    }
});
