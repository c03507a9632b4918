//! Two groups crossing in front of a wall and leaving through separate
//! openings. Prints the metrics of each method for a few seeds.
//!
//!     cargo run --release --example doorway_benchmark -- [seeds] [methods...]

use grf_flock::controller::Method;
use grf_flock::sim::{builtin_scenario, run, SimOptions};

fn main() -> grf_flock::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map_or(1, |s| s.parse().expect("seed count"));
    let methods: Vec<Method> = args.map(|m| m.parse()).collect::<Result<_, _>>()?;
    let methods = if methods.is_empty() { vec![Method::Heuristic, Method::NonHeuristic] } else { methods };
    let scenario = builtin_scenario("doorway")?;

    println!("method         seed  t_cal(ms)  cand   r_dev   u_avg  r_nb    r_static r_dyn   viol");
    for method in methods {
        for seed in 0..seeds {
            let out = run(&scenario, &SimOptions { method, seed, ..SimOptions::default() })?;
            let m = &out.metrics;
            let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!(
                "{:<14} {:>4}  {:>9.3}  {:>5.1}  {:.4}  {:.4}  {:<6} {:<8} {:<7} {}",
                method.name(),
                seed,
                m.t_cal_avg * 1e3,
                out.stats.mean_candidates(),
                m.r_dev_avg,
                m.u_avg,
                opt(m.r_neighbor_min),
                opt(m.r_static_min),
                opt(m.r_dynamic_min),
                m.violations
            );
        }
    }
    Ok(())
}
