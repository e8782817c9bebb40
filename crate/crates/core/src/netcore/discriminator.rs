use rand::Rng;

use super::layers::{leaky_relu, leaky_relu_grad, map, sigmoid, to_signed, Conv2d, LayerCache};
use super::{Architecture, Parameters, Tensor};
use crate::{Error, Result};

/// Markovian discriminator: stride-2 encoder levels, then a 3×3 valid
/// convolution producing one probability per patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    enc: Vec<Conv2d>,
    head: Conv2d,
    piece_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscOutput {
    /// Mean of the patch probabilities.
    pub prob: f64,
    /// `1 × P × P` patch probabilities.
    pub patches: Tensor,
}

pub struct DiscCache {
    enc_caches: Vec<LayerCache>,
    enc_out: Vec<Tensor>,
    head_cache: LayerCache,
    patches: Tensor,
}

/// Arithmetic mean of a patch map.
pub fn mean_probability(patches: &Tensor) -> f64 {
    patches.data.iter().sum::<f64>() / patches.data.len() as f64
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let ch = &arch.discriminator_channels;
        let lrelu_gain = (2.0 / (1.0 + 0.2f64 * 0.2)).sqrt();
        let enc = ch
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let in_c = if i == 0 { 3 } else { ch[i - 1] };
                let gain = if i == 0 { 1.0 } else { lrelu_gain };
                Conv2d::new(in_c, c, 4, 2, 1, gain, rng)
            })
            .collect();
        let head = Conv2d::new(*ch.last().expect("validated"), 1, 3, 1, 0, lrelu_gain, rng);
        Ok(Self {
            enc,
            head,
            piece_size: arch.piece_size,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            enc: self.enc.iter().map(Conv2d::zeros_like).collect(),
            head: self.head.zeros_like(),
            piece_size: self.piece_size,
        }
    }

    pub fn forward(&self, crop: &Tensor) -> Result<DiscOutput> {
        self.forward_train(crop).map(|(o, _)| o)
    }

    pub fn forward_train(&self, crop: &Tensor) -> Result<(DiscOutput, DiscCache)> {
        let s = self.piece_size;
        if crop.shape() != (3, s, s) {
            return Err(Error::invalid(format!(
                "discriminator expects a 3x{s}x{s} crop, got {}x{}x{}",
                crop.c, crop.h, crop.w
            )));
        }
        let mut enc_caches = Vec::with_capacity(self.enc.len());
        let mut enc_out: Vec<Tensor> = Vec::with_capacity(self.enc.len());
        for (i, layer) in self.enc.iter().enumerate() {
            let (y, cache) = if i == 0 {
                layer.forward(&map(crop, to_signed))
            } else {
                layer.forward(&map(&enc_out[i - 1], leaky_relu))
            };
            enc_caches.push(cache);
            enc_out.push(y);
        }
        let last = enc_out.last().expect("at least one level");
        let (logits, head_cache) = self.head.forward(&map(last, leaky_relu));
        let patches = map(&logits, sigmoid);
        let prob = mean_probability(&patches);
        let out = DiscOutput {
            prob,
            patches: patches.clone(),
        };
        Ok((
            out,
            DiscCache {
                enc_caches,
                enc_out,
                head_cache,
                patches,
            },
        ))
    }

    /// Parameter gradients and the input gradient for `dL/dprob`.
    pub fn backward(&self, cache: &DiscCache, d_prob: f64) -> (Discriminator, Tensor) {
        let mut grads = self.zeros_like();
        let n = cache.patches.data.len() as f64;
        let d_logits = map(&cache.patches, |p| d_prob / n * p * (1.0 - p));
        let mut d = self
            .head
            .backward(&cache.head_cache, &d_logits, &mut grads.head, true)
            .expect("requested");
        for i in (0..self.enc.len()).rev() {
            let pre = &cache.enc_out[i];
            for (g, p) in d.data.iter_mut().zip(&pre.data) {
                *g *= leaky_relu_grad(*p);
            }
            d = self.enc[i]
                .backward(&cache.enc_caches[i], &d, &mut grads.enc[i], true)
                .expect("requested");
        }
        for g in &mut d.data {
            *g *= 2.0;
        }
        (grads, d)
    }
}

impl Parameters for Discriminator {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in self.enc.iter().chain(std::iter::once(&self.head)) {
            out.push(l.weight.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in self.enc.iter_mut().chain(std::iter::once(&mut self.head)) {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.enc.len() {
            out.push(format!("discriminator.enc{i}.weight"));
            out.push(format!("discriminator.enc{i}.bias"));
        }
        out.push("discriminator.head.weight".into());
        out.push("discriminator.head.bias".into());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn six_by_six_patch_map() {
        let d = Discriminator::new(&Architecture::uniform(64, 2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let out = d.forward(&Tensor::full(3, 64, 64, 0.3)).unwrap();
        assert_eq!(out.patches.shape(), (1, 6, 6));
        assert!(out.prob > 0.0 && out.prob < 1.0);
        assert!((out.prob - mean_probability(&out.patches)).abs() < 1e-15);
    }

    #[test]
    fn mean_of_patch_maps() {
        assert_eq!(mean_probability(&Tensor::full(1, 6, 6, 0.5)), 0.5);
        let mut t = Tensor::zeros(1, 6, 6);
        t.data[17] = 1.0;
        assert!((mean_probability(&t) - 1.0 / 36.0).abs() < 1e-15);
        assert!((mean_probability(&t) - 0.02778).abs() < 1e-5);
    }

    #[test]
    fn rejects_wrong_size() {
        let d = Discriminator::new(&Architecture::uniform(64, 2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(d.forward(&Tensor::zeros(3, 64, 128)).is_err());
        assert!(d.forward(&Tensor::zeros(1, 64, 64)).is_err());
    }

    #[test]
    fn output_strictly_inside_unit_interval() {
        let arch = Architecture::uniform(64, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let mut d = Discriminator::new(&arch, &mut rng).unwrap();
            for t in d.tensors_mut() {
                for v in t.iter_mut() {
                    *v *= 3.0;
                }
            }
            let x = Tensor::from_vec(3, 64, 64, (0..3 * 64 * 64).map(|_| rng.gen()).collect()).unwrap();
            let p = d.forward(&x).unwrap().prob;
            assert!(p > 0.0 && p < 1.0, "{p}");
        }
    }
}
