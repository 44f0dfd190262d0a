// Scratch diagnostics for the Nash solver (not part of the deliverable surface).
use kickoff_core::arena::{maxent_nash, PayoffMatrix};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_antisymmetric(n: usize, rng: &mut ChaCha8Rng) -> PayoffMatrix {
    let mut a = PayoffMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.gen_range(-1.0..1.0);
            a.set(i, j, v);
            a.set(j, i, -v);
        }
    }
    a
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..60 {
        let n = rng.gen_range(2..=8);
        let a = random_antisymmetric(n, &mut rng);
        match maxent_nash(&a, 1e-8) {
            Ok(r) => println!(
                "trial {trial:2} n={n}: ok iters={:6} residual={:.2e} support={:?}",
                r.iterations,
                r.residual,
                r.p_star.iter().map(|&p| if p > 1e-9 { 1 } else { 0 }).collect::<Vec<_>>()
            ),
            Err(e) => {
                println!("trial {trial:2} n={n}: FAIL {e}");
                for i in 0..n {
                    let row: Vec<String> =
                        (0..n).map(|j| format!("{:+.3}", a.get(i, j))).collect();
                    println!("   [{}]", row.join(", "));
                }
            }
        }
    }
}
