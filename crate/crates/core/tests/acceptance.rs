//! One line per acceptance criterion. Criteria listed in `KNOWN_RED` are
//! reported but do not fail the target.

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use aruba::suite::{criteria, run_criterion};

const KNOWN_RED: &[u8] = &[8];

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut unexpected = Vec::new();
    for (id, _, _) in criteria() {
        let start = Instant::now();
        let result = run_criterion(id).expect("listed criterion");
        let note = if !result.passed && KNOWN_RED.contains(&id) { " (known red)" } else { "" };
        let _ = writeln!(out, "{result}{note} [{:.1}s]", start.elapsed().as_secs_f64());
        if !result.passed && !KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        let _ = writeln!(out, "acceptance: no unexpected failures");
        ExitCode::SUCCESS
    } else {
        let _ = writeln!(out, "acceptance: unexpected failures in {unexpected:?}");
        ExitCode::FAILURE
    }
}
