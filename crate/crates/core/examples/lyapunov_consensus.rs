//! Runs the plain gradient law on four robots and tracks the Lyapunov
//! function (pair potentials + goal potential + kinetic energy of the
//! velocity error) together with the worst velocity mismatch.

use grf_flock::controller::Method;
use grf_flock::environment::NeighborGraph;
use grf_flock::potentials::{psi_ar_at, psi_goal};
use grf_flock::sim::scenario::consensus_scenario;
use grf_flock::sim::World;
use grf_flock::Vec3;

fn main() -> grf_flock::Result<()> {
    let s = consensus_scenario();
    let p = s.groups[0].params.potential;
    let mut w = World::new(&s, Method::GradientOnly, 0)?;
    println!("t      V            max|v - v_r|");
    for k in 0..=s.steps() {
        let t = w.time();
        let r = s.groups[0].reference.at(t);
        let x = w.states();
        let pos: Vec<Vec3> = x.iter().map(|x| x.p).collect();
        let g = NeighborGraph::from_positions(&pos, p.r_s);
        let mut v = 0.0;
        for i in 0..x.len() {
            for &j in g.neighbors(i) {
                if j > i {
                    v += psi_ar_at((x[i].p - x[j].p).norm(), p.r_f, p.k_a, p.k_t);
                }
            }
            v += psi_goal(&x[i], &r, &p).0 + 0.5 * (x[i].v - r.v).norm_squared();
        }
        let worst = x.iter().map(|x| (x.v - r.v).norm()).fold(0.0, f64::max);
        if k % 100 == 0 {
            println!("{t:<6.1} {v:<12.6} {worst:.6}");
        }
        if k < s.steps() {
            w.step_world()?;
        }
    }
    Ok(())
}
