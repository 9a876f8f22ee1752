//! Pointwise optimum of the discriminator objective for a fixed generator.
//!
//! At a support point where the labeled data has mass `p_d` and generated
//! pairs have mass `p_g`, the objective restricted to that point is
//! `p_g·log(1 − d) + λ·p_d·log(d)`, which is maximized at
//! `d* = λ·p_d / (λ·p_d + p_g)`. [`optimal_discriminator_check`] compares
//! this closed form with a direct numerical maximization.

use crate::error::{Error, Result};

/// Two distributions over a shared finite support of `(x, y)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJointDistribution {
    /// Labeled-data mass per point.
    pub p_data: Vec<f64>,
    /// Generated-pair mass per point.
    pub p_gen: Vec<f64>,
}

impl DiscreteJointDistribution {
    pub fn new(p_data: Vec<f64>, p_gen: Vec<f64>) -> Result<Self> {
        if p_data.len() != p_gen.len() {
            return Err(Error::DimensionMismatch {
                expected: p_data.len(),
                found: p_gen.len(),
            });
        }
        for (name, p) in [("p_data", &p_data), ("p_gen", &p_gen)] {
            if p.iter().any(|&v| v.is_nan() || v < 0.0) {
                return Err(Error::InvalidConfig(format!("{name} has a negative mass")));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("{name} sums to {total}, not 1")));
            }
        }
        Ok(Self { p_data, p_gen })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimumCheck {
    pub point: usize,
    pub closed_form: f64,
    pub numeric: f64,
}

impl OptimumCheck {
    pub fn gap(&self) -> f64 {
        (self.closed_form - self.numeric).abs()
    }
}

/// `λ·p_d / (λ·p_d + p_g)`.
pub fn closed_form_optimum(p_data: f64, p_gen: f64, lambda: f64) -> f64 {
    let real = lambda * p_data;
    real / (real + p_gen)
}

/// Pointwise objective at discriminator value `d`. Zero-mass terms vanish.
pub fn pointwise_objective(d: f64, p_data: f64, p_gen: f64, lambda: f64) -> f64 {
    let mut v = 0.0;
    if p_gen > 0.0 {
        v += p_gen * (1.0 - d).ln();
    }
    if lambda * p_data > 0.0 {
        v += lambda * p_data * d.ln();
    }
    v
}

/// Ternary search for the maximizer of a concave function on `[lo, hi]`.
fn ternary_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..300 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Closed form versus numeric optimum at every point with some mass.
/// Points where both masses vanish are skipped.
pub fn optimal_discriminator_check(dist: &DiscreteJointDistribution, lambda: f64) -> Vec<OptimumCheck> {
    dist.p_data
        .iter()
        .zip(&dist.p_gen)
        .enumerate()
        .filter(|(_, (&pd, &pg))| lambda * pd + pg > 0.0)
        .map(|(point, (&pd, &pg))| {
            let numeric = ternary_max(|d| pointwise_objective(d, pd, pg, lambda), 0.0, 1.0);
            OptimumCheck {
                point,
                closed_form: closed_form_optimum(pd, pg, lambda),
                numeric,
            }
        })
        .collect()
}
