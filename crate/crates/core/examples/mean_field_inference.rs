//! Mean-field inference on a small random field: prints the free energy
//! after each sweep and compares the fixed point with the exact marginals.

use grf_flock::controller::{exact_posterior, free_energy, mean_field_sweep, BeliefTable, LocalField, PairTerm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> grf_flock::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sizes = [4usize, 3, 5];
    let unary: Vec<Vec<f64>> = sizes.iter().map(|&n| (0..n).map(|_| rng.gen_range(0.0..2.0)).collect()).collect();
    let mut pairs = Vec::new();
    for a in 0..sizes.len() {
        for b in a + 1..sizes.len() {
            let energy = (0..sizes[a] * sizes[b]).map(|_| rng.gen_range(0.0..1.0)).collect();
            pairs.push(PairTerm { a, b, energy });
        }
    }
    let field = LocalField { unary, pairs };

    let mut q = BeliefTable::uniform(&sizes);
    println!("sweep  free_energy        max_change");
    println!("{:>5}  {:<18.12} -", 0, free_energy(&q, &field));
    for s in 1..=50 {
        q = mean_field_sweep(&q, &field)?;
        println!("{s:>5}  {:<18.12} {:.3e}", free_energy(&q, &field), q.max_change);
        if q.max_change < 1e-12 {
            break;
        }
    }

    let exact = exact_posterior(&field)?;
    println!("\nlog Z = {:.12} (upper bound on the free energy)", exact.log_z);
    for (h, (m, e)) in q.q.iter().zip(exact.marginals()).enumerate() {
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
        println!("agent {h}: mean-field [{}]  exact [{}]", fmt(m), fmt(&e));
    }
    println!("KL(q || p) = {:.3e}", exact.kl_from(&q));
    Ok(())
}
