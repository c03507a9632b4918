//! Classifies a robot approaching a static point from several bearings
//! and shows the resulting sector, risk weight and avoidance energy.

use grf_flock::environment::{assess_risk, BetaAgent};
use grf_flock::model::{HeuristicParams, PotentialParams};
use grf_flock::potentials::{psi_obstacle, risk_weight};
use grf_flock::{RobotState, Vec3};

fn main() -> grf_flock::Result<()> {
    let p = PotentialParams::default();
    let h = HeuristicParams::default();
    let obstacle = BetaAgent::fixed(Vec3::zeros());
    let r_beta = 0.12;
    println!("bearing(deg)  sector  theta_I  theta_III  z       weight  psi_or   psi_od");
    for deg in [0.0, 10.0, 20.0, 30.0, 45.0, 60.0, 90.0, 135.0] {
        let a = f64::to_radians(deg);
        // Robot 0.4 m out on +x, moving at 0.2 m/s at `deg` off the line
        // of sight toward the obstacle.
        let x = RobotState::new(Vec3::new(0.4, 0.0, 0.0), Vec3::new(-a.cos(), a.sin(), 0.0) * 0.2);
        let risk = assess_risk(&x.p, &x.v, r_beta, &p)?;
        let e = psi_obstacle(&x, &obstacle, &p, &h)?;
        println!(
            "{deg:>12.0}  {:<6?}  {:.4}   {:.4}     {:.4}  {:.3}   {:.4}   {:.4}",
            risk.sector,
            risk.theta_i,
            risk.theta_iii,
            risk.z,
            risk_weight(&risk, &p),
            e.or,
            e.od
        );
    }
    Ok(())
}
