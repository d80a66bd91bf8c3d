#![no_main]

use hqcqp::io::{parse_problem, problem_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(prob) = parse_problem(text) else { return };
    let again = parse_problem(&problem_to_json(&prob)).expect("serialized problem parses");
    assert_eq!(again, prob);
});
