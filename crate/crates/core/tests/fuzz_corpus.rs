//! Replays the checked-in fuzz seeds through the fuzzed entry points and
//! throws random text at the same parsers.

use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use pspin::cli::{parse_any_config, parse_header};
use pspin::lab::{Disorder, Lineage};

const COMMANDS: [&str; 6] = ["phase", "parisi", "fp", "shatter-scan", "simulate", "chaos"];

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files.into_iter().map(|p| fs::read(p).unwrap()).collect()
}

#[test]
fn run_config_seeds_are_valid() {
    for data in seeds("parse_run_config") {
        let (sel, rest) = data.split_first().unwrap();
        let cmd = COMMANDS[*sel as usize % COMMANDS.len()];
        let text = std::str::from_utf8(rest).unwrap();
        parse_any_config(text, cmd).unwrap_or_else(|e| panic!("{cmd}: {e}"));
    }
}

#[test]
fn header_seeds_round_trip() {
    for data in seeds("parse_csv_header") {
        let line = std::str::from_utf8(&data).unwrap();
        let h = parse_header(line).unwrap();
        assert_eq!(parse_header(&h.to_line()).unwrap(), h);
    }
}

#[test]
fn lineage_seeds_replay() {
    for data in seeds("parse_lineage") {
        let lineage = Lineage::from_json(std::str::from_utf8(&data).unwrap()).unwrap();
        let d = Disorder::from_lineage(&lineage).unwrap();
        assert_eq!(d.lineage(), &lineage);
    }
}

proptest! {
    #[test]
    fn parsers_never_panic(text in ".{0,200}", sel in 0usize..6) {
        let _ = parse_any_config(&text, COMMANDS[sel]);
        let _ = parse_header(&text);
        let _ = Lineage::from_json(&text);
        let _ = parse_header(&format!("# {text}"));
    }

    #[test]
    fn json_shaped_inputs_never_panic(
        n in 0usize..40, p in 0usize..12, seed: u64, eps in -1.0f64..2.0, beta in -5.0f64..5.0,
    ) {
        let docs = [
            format!(r#"{{"n":{n},"p":{p},"seed":{seed}}}"#),
            format!(r#"{{"n":{n},"p":{p},"seed":{seed},"correlation":{{"parent":{{"n":{n},"p":{p},"seed":1}},"epsilon":{eps}}}}}"#),
            format!(r#"{{"n":{n},"p":{p},"beta":{beta},"epsilons":[{eps}]}}"#),
        ];
        for doc in &docs {
            if let Ok(l) = Lineage::from_json(doc) {
                if (l.n as u64).pow(l.p as u32) <= 4096 {
                    prop_assert!(Disorder::from_lineage(&l).is_ok());
                }
            }
            for cmd in COMMANDS {
                let _ = parse_any_config(doc, cmd);
            }
        }
    }
}
