//! Writes a run to disk through the command-line layer, reads the CSV
//! back and checks that the offline metrics equal the live ones.

use grf_flock::cli::{cmd_metrics, cmd_run, MetricsArgs, RunArgs};
use grf_flock::controller::Method;

fn main() {
    let dir = std::env::temp_dir().join(format!("grf-flock-offline-{}", std::process::id()));
    let run = RunArgs {
        scenario: "open".into(),
        method: Method::Heuristic,
        seed: 1,
        from_manifest: None,
        out: dir.clone(),
        duration: Some(5.0),
        trace_beliefs: false,
        strip_timing: false,
        check: false,
        threads: None,
    };
    let live = cmd_run(&run).expect("run");
    let offline = cmd_metrics(&MetricsArgs {
        trajectory: live.trajectory.clone(),
        manifest: None,
        scenario: None,
        out: None,
        check: false,
    })
    .expect("metrics");
    println!("{}", offline.to_text());
    println!("offline report equals live report: {}", offline == live.output.metrics);
    let _ = std::fs::remove_dir_all(dir);
}
