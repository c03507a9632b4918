//! Candidate count, compute time and tracking error against the cone
//! width on a shortened doorway run.
//!
//!     cargo run --release --example ku_sweep -- [duration_s]

use grf_flock::cli::{sweep_k_u, sweep_table};
use grf_flock::sim::builtin_scenario;

fn main() -> grf_flock::Result<()> {
    let duration: f64 = std::env::args().nth(1).map_or(10.0, |s| s.parse().expect("duration"));
    let mut s = builtin_scenario("doorway")?;
    s.duration = duration;
    let rows = sweep_k_u(&s, &[0.1, 0.2, 0.35, 0.5, 1.0], 0, Some(1), false)?;
    print!("{}", sweep_table(&rows));
    Ok(())
}
