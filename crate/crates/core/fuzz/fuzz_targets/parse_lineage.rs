#![no_main]

use libfuzzer_sys::fuzz_target;
use pspin::lab::{Disorder, Lineage};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(lineage) = Lineage::from_json(text) else {
        return;
    };
    // only replay small tensors
    let small = (lineage.n as u64).checked_pow(lineage.p as u32).is_some_and(|c| c <= 4096);
    if small {
        let d = Disorder::from_lineage(&lineage).expect("validated lineage replays");
        assert_eq!(d.lineage(), &lineage);
    }
});
