//! Adversarial objectives and their exact gradients.
//!
//! The discriminator reads `[x, y]`: the feature vector with one label
//! channel appended. Real pairs carry `y ∈ {0, 1}`; generated pairs carry
//! the generator's soft output `G(x)`.

use super::mlp::{Gradients, Mlp, EPS};
use crate::error::{Error, Result};

fn clamp(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len();
    if n == 0 {
        0.0
    } else {
        v.sum::<f64>() / n as f64
    }
}

/// Generator objective: mean `log(1 - D(x, G(x)))`, minimized by G.
pub fn g_loss(d_on_fake: &[f64]) -> f64 {
    mean(d_on_fake.iter().map(|&d| (1.0 - clamp(d)).ln()))
}

/// Discriminator objective: mean `log(1 - D(fake)) + λ · mean log D(real)`,
/// maximized by D.
pub fn d_loss(d_on_fake: &[f64], d_on_real: &[f64], lambda: f64) -> f64 {
    mean(d_on_fake.iter().map(|&d| (1.0 - clamp(d)).ln()))
        + lambda * mean(d_on_real.iter().map(|&d| clamp(d).ln()))
}

/// Binary log loss, minimized by a plain classifier.
pub fn bce_loss(predicted: &[f64], targets: &[f64]) -> f64 {
    mean(
        predicted
            .iter()
            .zip(targets)
            .map(|(&p, &y)| -(y * clamp(p).ln() + (1.0 - y) * (1.0 - clamp(p)).ln())),
    )
}

/// Which objective to differentiate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    /// [`g_loss`], with D frozen.
    Generator,
    /// `-mean log D(x, G(x))`, with D frozen. Same fixed point as
    /// [`LossSpec::Generator`] but its gradient does not vanish when D
    /// confidently rejects the generated pairs.
    GeneratorNonSaturating,
    /// The negation of [`d_loss`], with G frozen.
    Discriminator { lambda: f64 },
}

/// One training step's inputs.
#[derive(Debug, Clone, Copy)]
pub struct AdversarialBatch<'a> {
    /// Unlabeled feature vectors, fed through G.
    pub unlabeled: &'a [&'a [f64]],
    /// Labeled feature vectors and their label channel value.
    pub real: &'a [(&'a [f64], f64)],
    /// Optional `(w, u)`: the generated label channel of unlabeled item `i`
    /// becomes [`smooth_label`]`(G(x_i), w, u[i])`.
    pub fake_smoothing: Option<(f64, &'a [f64])>,
}

/// `(1 - w)·y + w·u`: with `u ~ U[0, 1)` this spreads a hard label over a
/// band of width `w` at its end of `[0, 1]`.
pub fn smooth_label(y: f64, w: f64, u: f64) -> f64 {
    (1.0 - w) * y + w * u
}

#[derive(Debug, Clone)]
pub struct AdversarialGradients {
    /// Value of the minimized objective.
    pub loss: f64,
    pub generator: Gradients,
    pub discriminator: Gradients,
}

/// Appends the label channel to `x`.
pub fn joint_input(x: &[f64], y: f64) -> Vec<f64> {
    let mut s = Vec::with_capacity(x.len() + 1);
    s.extend_from_slice(x);
    s.push(y);
    s
}

fn check_pair(g: &Mlp, d: &Mlp) -> Result<()> {
    if d.input_dim() != g.input_dim() + 1 {
        return Err(Error::DimensionMismatch {
            expected: g.input_dim() + 1,
            found: d.input_dim(),
        });
    }
    Ok(())
}

/// `ln(1 + e^z)` without overflow. `-ln σ(z) = softplus(-z)` and
/// `-ln(1 - σ(z)) = softplus(z)`.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Exact gradients of `spec` with respect to both networks' parameters.
/// The frozen network's gradient is returned as zeros.
///
/// Losses are evaluated from the output logits rather than the clamped
/// probabilities, so gradients stay informative when a sigmoid saturates.
pub fn adversarial_gradients(
    g: &Mlp,
    d: &Mlp,
    batch: AdversarialBatch<'_>,
    spec: LossSpec,
) -> Result<AdversarialGradients> {
    check_pair(g, d)?;
    let mut g_grads = Gradients::zeros_like(g);
    let mut d_grads = Gradients::zeros_like(d);
    let n_fake = batch.unlabeled.len() as f64;
    let mut loss = 0.0;
    if let Some((_, u)) = batch.fake_smoothing {
        if u.len() != batch.unlabeled.len() {
            return Err(Error::DimensionMismatch {
                expected: batch.unlabeled.len(),
                found: u.len(),
            });
        }
    }
    // Label channel fed to D for unlabeled item `i`, and its derivative
    // with respect to G's output.
    let channel = |i: usize, gx: f64| match batch.fake_smoothing {
        Some((w, u)) => (smooth_label(gx, w, u[i]), 1.0 - w),
        None => (gx, 1.0),
    };

    match spec {
        LossSpec::Generator | LossSpec::GeneratorNonSaturating => {
            let saturating = spec == LossSpec::Generator;
            // D's parameter gradients are computed into scratch and dropped.
            let mut scratch = Gradients::zeros_like(d);
            for (i, x) in batch.unlabeled.iter().enumerate() {
                let gt = g.trace(x)?;
                let gp = gt.probability();
                let (y, dy) = channel(i, gp);
                let dt = d.trace(&joint_input(x, y))?;
                let (z, dp) = (dt.logit(), dt.probability());
                let d_logit = if saturating {
                    loss -= softplus(z) / n_fake;
                    -dp / n_fake
                } else {
                    loss += softplus(-z) / n_fake;
                    -(1.0 - dp) / n_fake
                };
                let d_input = d.backward_logit(&dt, d_logit, &mut scratch);
                let d_y = d_input[d_input.len() - 1];
                g.backward_logit(&gt, dy * d_y * gp * (1.0 - gp), &mut g_grads);
            }
        }
        LossSpec::Discriminator { lambda } => {
            for (i, x) in batch.unlabeled.iter().enumerate() {
                let (y, _) = channel(i, g.trace(x)?.probability());
                let dt = d.trace(&joint_input(x, y))?;
                loss += softplus(dt.logit()) / n_fake;
                d.backward_logit(&dt, dt.probability() / n_fake, &mut d_grads);
            }
            let n_real = batch.real.len() as f64;
            for (x, y) in batch.real {
                let dt = d.trace(&joint_input(x, *y))?;
                loss += lambda * softplus(-dt.logit()) / n_real;
                d.backward_logit(&dt, -lambda * (1.0 - dt.probability()) / n_real, &mut d_grads);
            }
        }
    }
    Ok(AdversarialGradients {
        loss,
        generator: g_grads,
        discriminator: d_grads,
    })
}

/// Gradient of [`bce_loss`] for a single network on labeled inputs.
pub fn classifier_gradients(model: &Mlp, batch: &[(&[f64], f64)]) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(model);
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for (x, y) in batch {
        let t = model.trace(x)?;
        let z = t.logit();
        loss += (y * softplus(-z) + (1.0 - y) * softplus(z)) / n;
        model.backward_logit(&t, (t.probability() - y) / n, &mut grads);
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn g_loss_examples() {
        assert_relative_eq!(g_loss(&[0.5]), -std::f64::consts::LN_2);
        assert_relative_eq!(g_loss(&[0.5, 0.5]), -std::f64::consts::LN_2);
        let tiny = g_loss(&[1e-12]);
        assert!(tiny <= 0.0 && tiny > -1e-6);
        assert!(g_loss(&[1.0]).is_finite());
    }

    #[test]
    fn d_loss_examples() {
        assert_relative_eq!(d_loss(&[0.5], &[0.5], 1.0), -2.0 * std::f64::consts::LN_2);
        assert_relative_eq!(d_loss(&[0.3], &[0.01], 0.0), (0.7f64).ln());
        assert_relative_eq!(d_loss(&[0.1], &[0.9], 1.0), 2.0 * 0.9f64.ln());
        assert!(d_loss(&[1.0], &[0.0], 1.0).is_finite());
    }

    #[test]
    fn bce_examples() {
        assert_relative_eq!(bce_loss(&[0.5], &[1.0]), std::f64::consts::LN_2);
        assert_relative_eq!(bce_loss(&[0.9, 0.2], &[1.0, 0.0]), -(0.9f64.ln() + 0.8f64.ln()) / 2.0);
    }

    #[test]
    fn generator_loss_leaves_discriminator_frozen() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Mlp::new(&[3, 4, 1], &mut rng).unwrap();
        let d = Mlp::new(&[4, 4, 1], &mut rng).unwrap();
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.gen()).collect()).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let real: Vec<(&[f64], f64)> = refs.iter().map(|x| (*x, 1.0)).collect();
        let batch = AdversarialBatch { unlabeled: &refs, real: &real, fake_smoothing: None };
        let gg = adversarial_gradients(&g, &d, batch, LossSpec::Generator).unwrap();
        assert!(gg.discriminator.is_zero());
        assert!(!gg.generator.is_zero());
        let dg = adversarial_gradients(&g, &d, batch, LossSpec::Discriminator { lambda: 1.0 }).unwrap();
        assert!(dg.generator.is_zero());
        assert!(!dg.discriminator.is_zero());
    }

    #[test]
    fn symmetric_point_has_zero_gradient() {
        // All-zero networks: the hidden layer is dead and D's output does
        // not depend on its label channel, so G receives no signal.
        let g = Mlp::zeros(&[2, 3, 1]).unwrap();
        let d = Mlp::zeros(&[3, 3, 1]).unwrap();
        let x = [0.2, 0.7];
        let refs: Vec<&[f64]> = vec![&x];
        let batch = AdversarialBatch { unlabeled: &refs, real: &[], fake_smoothing: None };
        let gg = adversarial_gradients(&g, &d, batch, LossSpec::Generator).unwrap();
        assert!(gg.generator.is_zero());
        assert_relative_eq!(gg.loss, -std::f64::consts::LN_2);
    }

    #[test]
    fn mismatched_pair_rejected() {
        let g = Mlp::zeros(&[2, 1]).unwrap();
        let d = Mlp::zeros(&[2, 1]).unwrap();
        let batch = AdversarialBatch { unlabeled: &[], real: &[], fake_smoothing: None };
        assert!(adversarial_gradients(&g, &d, batch, LossSpec::Generator).is_err());
    }
}
