//! Size of the biased candidate set as the cone widens, for a heuristic
//! pointing along +x and one pointing between grid directions.

use grf_flock::controller::{build_candidate_set, DirectionGrid};
use grf_flock::model::{ControllerParams, DynamicsParams};
use grf_flock::{RobotState, Vec3};

fn main() -> grf_flock::Result<()> {
    let c = ControllerParams::default();
    let d = DynamicsParams::default();
    let grid = DirectionGrid::for_params(&c);
    println!("{} distinct directions on a {}x{} grid", grid.len(), c.k_theta, c.k_phi);
    let x = RobotState::at_rest(Vec3::zeros());
    let axes = [("+x", Vec3::x()), ("oblique", Vec3::new(0.3, -0.5, 0.8))];
    println!("k_u    {:>8} {:>8}", axes[0].0, axes[1].0);
    for k_u in [0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0] {
        let cp = ControllerParams { k_u, ..c };
        let n: Vec<usize> = axes
            .iter()
            .map(|(_, a)| build_candidate_set(&x, a, &cp, &d).map(|s| s.len()))
            .collect::<grf_flock::Result<_>>()?;
        println!("{k_u:<5}  {:>8} {:>8}", n[0], n[1]);
    }
    Ok(())
}
