//! Builds the local avoidance frame for a few encounters and prints the
//! bypass direction it yields, including the head-on (collinear) case.

use grf_flock::environment::assess_risk;
use grf_flock::heuristic::build_avoidance_frame;
use grf_flock::model::PotentialParams;
use grf_flock::Vec3;

fn show(name: &str, p_ib: Vec3, v_ib: Vec3) -> grf_flock::Result<()> {
    let risk = assess_risk(&p_ib, &v_ib, 0.12, &PotentialParams::default())?;
    let f = build_avoidance_frame(&p_ib, &v_ib, &risk)?;
    let fmt = |v: Vec3| format!("({:+.4}, {:+.4}, {:+.4})", v.x, v.y, v.z);
    println!("{name}: sector {:?}{}", risk.sector, if f.degenerate { ", collinear fallback" } else { "" });
    println!("  L1   {}", fmt(f.l1));
    println!("  L2   {}", fmt(f.l2));
    println!("  L3   {}", fmt(f.l3));
    println!("  v_ob {}  (angle to L1: {:.4} rad)", fmt(f.v_ob), f.v_ob.dot(&f.l1).clamp(-1.0, 1.0).acos());
    Ok(())
}

fn main() -> grf_flock::Result<()> {
    show("head-on", Vec3::new(0.4, 0.0, 0.0), Vec3::new(-0.2, 0.0, 0.0))?;
    show("glancing", Vec3::new(0.4, 0.0, 0.0), Vec3::new(-0.2, 0.03, 0.0))?;
    show("from above", Vec3::new(0.0, 0.0, 0.35), Vec3::new(0.02, 0.0, -0.2))?;
    Ok(())
}
