//! Tabulates the pairwise, obstacle-repulsion and goal potentials against
//! distance, as CSV on stdout. Pipe into any plotting tool.
//!
//!     cargo run --example potentials_profile > profile.csv

use grf_flock::model::{PotentialParams, Zone};
use grf_flock::potentials::{psi_ar_at, psi_goal, psi_or_at, ReferenceState};
use grf_flock::{RobotState, Vec3};

fn main() {
    let p = PotentialParams::default();
    let dense_rf = p.effective_rf(Zone::Dense);
    let goal = ReferenceState::new(Vec3::zeros(), Vec3::zeros());
    println!("d,psi_ar_open,psi_ar_dense,psi_or,psi_rp");
    for k in 1..=120 {
        let d = k as f64 * 0.01;
        let (rp, _) = psi_goal(&RobotState::at_rest(Vec3::new(d, 0.0, 0.0)), &goal, &p);
        println!(
            "{d:.2},{:.6},{:.6},{:.6},{:.6}",
            psi_ar_at(d, p.r_f, p.k_a, p.k_t),
            psi_ar_at(d, dense_rf, p.k_a, p.k_t),
            psi_or_at(d, &p),
            rp
        );
    }
    eprintln!("pairwise minimum at r_f = {} m (open) and {:.4} m (dense)", p.r_f, dense_rf);
}
