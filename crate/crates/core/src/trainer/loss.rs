//! Binary cross entropy and the three training objectives, with their
//! derivatives with respect to the discriminator outputs.

use crate::netcore::{clamp_probability, PROB_EPS};

/// `-[t ln p + (1 - t) ln(1 - p)]` with `p` clamped away from 0 and 1.
pub fn bce(p: f64, target: f64) -> f64 {
    let p = clamp_probability(p);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// `d bce / d p`; zero where the clamp is active.
pub fn bce_grad(p: f64, target: f64) -> f64 {
    if p <= PROB_EPS || p >= 1.0 - PROB_EPS {
        return 0.0;
    }
    -target / p + (1.0 - target) / (1.0 - p)
}

/// Mean absolute difference; zero for empty inputs.
pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLoss {
    pub adversarial: f64,
    pub l1: f64,
    pub total: f64,
}

/// Adversarial realism term plus `lambda`-weighted L1 between the original
/// band `ob` and the generated band `gb`.
pub fn generator_loss(d_pred: f64, ob: &[f64], gb: &[f64], lambda: f64) -> GeneratorLoss {
    let adversarial = bce(d_pred, 1.0);
    let l1 = l1(ob, gb);
    GeneratorLoss {
        adversarial,
        l1,
        total: adversarial + lambda * l1,
    }
}

/// Inpainting-phase discriminator loss: originals are real, generated
/// pairs are fake.
pub fn discriminator_loss_phase1(p_real: f64, p_fake: f64) -> f64 {
    (bce(p_real, 1.0) + bce(p_fake, 0.0)) / 2.0
}

/// Classification-phase discriminator loss: generated positive pairs are
/// labeled 1, generated negative pairs 0.
pub fn discriminator_loss_phase2(p_pos: f64, p_neg: f64) -> f64 {
    (bce(p_pos, 1.0) + bce(p_neg, 0.0)) / 2.0
}
