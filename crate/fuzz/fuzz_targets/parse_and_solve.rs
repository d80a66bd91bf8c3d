#![no_main]

use hqcqp::io::parse_problem;
use hqcqp::{solve, SearchConfig};
use libfuzzer_sys::fuzz_target;

const MAX_DIM: usize = 8;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(prob) = parse_problem(text) else { return };
    if prob.dim() > MAX_DIM {
        return;
    }
    if let Ok(sol) = solve(&prob, &SearchConfig::default()) {
        assert!(sol.p_star > 0.0 || sol.p_star.is_nan());
    }
});
