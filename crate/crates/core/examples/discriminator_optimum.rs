//! For a fixed generator, the best discriminator at each `(x, y)` point is
//! `λ·p_d / (λ·p_d + p_g)`. This example checks that closed form against a
//! direct numerical maximization on random discrete distributions.
//!
//! ```text
//! cargo run --example discriminator_optimum
//! ```

use ergan::nn::{optimal_discriminator_check, DiscreteJointDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mass<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen() }).collect();
    let total: f64 = raw.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    raw.iter().map(|v| v / total).collect()
}

fn main() -> ergan::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dist = DiscreteJointDistribution::new(vec![0.4, 0.3, 0.2, 0.1], vec![0.1, 0.2, 0.3, 0.4])?;
    println!("point  p_data  p_gen  closed   numeric");
    for c in optimal_discriminator_check(&dist, 1.0) {
        println!(
            "{:<5}  {:<6}  {:<5}  {:.5}  {:.5}",
            c.point, dist.p_data[c.point], dist.p_gen[c.point], c.closed_form, c.numeric
        );
    }
    for lambda in [0.5, 1.0, 2.0] {
        let mut worst: f64 = 0.0;
        let mut points = 0;
        for _ in 0..100 {
            let n = rng.gen_range(2..12);
            let (pd, pg) = (random_mass(&mut rng, n), random_mass(&mut rng, n));
            let Ok(dist) = DiscreteJointDistribution::new(pd, pg) else { continue };
            for c in optimal_discriminator_check(&dist, lambda) {
                worst = worst.max(c.gap());
                points += 1;
            }
        }
        println!("lambda {lambda}: {points} points, worst gap {worst:.2e}");
    }
    Ok(())
}
