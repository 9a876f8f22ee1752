//! Compares the analytic gradients of the generator and discriminator
//! objectives with central finite differences on random networks.
//!
//! ```text
//! cargo run --release --example gradient_check -- [cases]
//! ```

use ergan::nn::{adversarial_gradients, AdversarialBatch, Gradients, LossSpec, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn loss(g: &Mlp, d: &Mlp, batch: AdversarialBatch<'_>, spec: LossSpec) -> f64 {
    adversarial_gradients(g, d, batch, spec).expect("shapes checked").loss
}

/// Largest relative error over all parameters of the network being trained.
fn worst_error(g: &Mlp, d: &Mlp, batch: AdversarialBatch<'_>, spec: LossSpec) -> f64 {
    let analytic = adversarial_gradients(g, d, batch, spec).expect("shapes checked");
    let trains_generator = !matches!(spec, LossSpec::Discriminator { .. });
    let grads: &Gradients = if trains_generator { &analytic.generator } else { &analytic.discriminator };
    let (mut g, mut d) = (g.clone(), d.clone());
    let mut worst: f64 = 0.0;
    for (k, &a) in grads.values().enumerate() {
        let probe = |g: &mut Mlp, d: &mut Mlp, delta: f64| {
            let target = if trains_generator { g } else { d };
            *target.params_mut().nth(k).expect("in range") += delta;
        };
        probe(&mut g, &mut d, STEP);
        let up = loss(&g, &d, batch, spec);
        probe(&mut g, &mut d, -2.0 * STEP);
        let down = loss(&g, &d, batch, spec);
        probe(&mut g, &mut d, STEP);
        let numeric = (up - down) / (2.0 * STEP);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

fn main() -> ergan::Result<()> {
    let cases: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let specs = [
        ("generator (minimax)", LossSpec::Generator),
        ("generator (non-saturating)", LossSpec::GeneratorNonSaturating),
        ("discriminator", LossSpec::Discriminator { lambda: 1.0 }),
    ];
    for (name, spec) in specs {
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let dims = rng.gen_range(1..5);
            let hidden = rng.gen_range(2..6);
            let g = Mlp::new(&[dims, hidden, 1], &mut rng)?;
            let d = Mlp::new(&[dims + 1, hidden, 1], &mut rng)?;
            let xs: Vec<Vec<f64>> = (0..6).map(|_| (0..dims).map(|_| rng.gen()).collect()).collect();
            let (fake, real) = xs.split_at(3);
            let fake: Vec<&[f64]> = fake.iter().map(Vec::as_slice).collect();
            let real: Vec<(&[f64], f64)> = real.iter().map(|x| (x.as_slice(), f64::from(rng.gen::<bool>()))).collect();
            let batch = AdversarialBatch { unlabeled: &fake, real: &real, fake_smoothing: None };
            worst = worst.max(worst_error(&g, &d, batch, spec));
        }
        println!("{name:<28} {cases} cases, worst relative error {worst:.2e}");
    }
    Ok(())
}
