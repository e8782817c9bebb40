use rand::Rng;

use super::layers::{leaky_relu, leaky_relu_grad, sigmoid, to_signed, Conv2d, ConvTranspose2d, LayerCache};
use super::{Architecture, Parameters, Tensor};
use crate::pairgen::PairSample;
use crate::{Error, Result};

/// Encoder-decoder inpainting network with symmetric skip connections.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    enc: Vec<Conv2d>,
    /// `dec[i]` produces the resolution of encoder level `i` (`dec[0]`
    /// produces the image).
    dec: Vec<ConvTranspose2d>,
}

/// Generator output with known pixels copied through.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPair {
    /// GI: the full `3 × S × 2S` generated pair.
    pub image: Tensor,
}

impl GeneratedPair {
    /// GB: generated values on the mask, channel-major.
    pub fn generated_band(&self, mask: &[bool]) -> Vec<f64> {
        masked_values(&self.image, mask)
    }
}

/// Values of `t` on `mask`, channel-major. With `t` = OI this is OB.
pub fn masked_values(t: &Tensor, mask: &[bool]) -> Vec<f64> {
    let plane = t.plane_len();
    let mut out = Vec::new();
    for ch in 0..t.c {
        for (i, m) in mask.iter().enumerate() {
            if *m {
                out.push(t.data[ch * plane + i]);
            }
        }
    }
    out
}

pub struct GeneratorCache {
    enc_caches: Vec<LayerCache>,
    enc_out: Vec<Tensor>,
    dec_caches: Vec<LayerCache>,
    /// Pre-activation input of each decoder layer.
    dec_in: Vec<Tensor>,
    out: Tensor,
    mask: Vec<bool>,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let ch = &arch.generator_channels;
        let levels = ch.len();
        let relu_gain = 2f64.sqrt();
        let lrelu_gain = (2.0 / (1.0 + 0.2f64 * 0.2)).sqrt();
        let mut enc = Vec::with_capacity(levels);
        for i in 0..levels {
            let in_c = if i == 0 { 3 } else { ch[i - 1] };
            let gain = if i == 0 { 1.0 } else { lrelu_gain };
            enc.push(Conv2d::new(in_c, ch[i], 4, 2, 1, gain, rng));
        }
        let mut dec = Vec::with_capacity(levels);
        for i in 0..levels {
            let in_c = if i == levels - 1 { ch[i] } else { 2 * ch[i] };
            let out_c = if i == 0 { 3 } else { ch[i - 1] };
            let gain = if i == 0 { 1.0 } else { relu_gain };
            dec.push(ConvTranspose2d::new(in_c, out_c, gain, rng));
        }
        Ok(Self { enc, dec })
    }

    pub fn levels(&self) -> usize {
        self.enc.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            enc: self.enc.iter().map(Conv2d::zeros_like).collect(),
            dec: self.dec.iter().map(ConvTranspose2d::zeros_like).collect(),
        }
    }

    fn check_input(&self, sample: &PairSample) -> Result<()> {
        let t = &sample.input;
        let unit = 1usize << self.levels();
        if t.c != 3 || t.w != 2 * t.h || !t.h.is_multiple_of(unit) || t.h == 0 {
            return Err(Error::invalid(format!(
                "generator needs a 3 x S x 2S input with S divisible by {unit}, got {}x{}x{}",
                t.c, t.h, t.w
            )));
        }
        if sample.mask.len() != t.h * t.w {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} entries for a {}x{} pair",
                sample.mask.len(),
                t.h,
                t.w
            )));
        }
        Ok(())
    }

    /// Inpaints the masked band; every unmasked value is copied verbatim.
    pub fn forward(&self, sample: &PairSample) -> Result<GeneratedPair> {
        self.forward_train(sample).map(|(g, _)| g)
    }

    pub fn forward_train(&self, sample: &PairSample) -> Result<(GeneratedPair, GeneratorCache)> {
        self.check_input(sample)?;
        let levels = self.levels();
        let mut enc_caches = Vec::with_capacity(levels);
        let mut enc_out: Vec<Tensor> = Vec::with_capacity(levels);
        for (i, layer) in self.enc.iter().enumerate() {
            let (y, cache) = if i == 0 {
                layer.forward(&super::layers::map(&sample.input, to_signed))
            } else {
                layer.forward(&super::layers::map(&enc_out[i - 1], leaky_relu))
            };
            enc_caches.push(cache);
            enc_out.push(y);
        }

        let mut dec_caches: Vec<Option<LayerCache>> = vec![None; levels];
        let mut dec_in: Vec<Option<Tensor>> = vec![None; levels];
        let mut below: Option<Tensor> = None;
        for i in (0..levels).rev() {
            let pre = match below.take() {
                None => enc_out[i].clone(),
                Some(up) => up.concat_channels(&enc_out[i]),
            };
            let (y, cache) = self.dec[i].forward(&super::layers::map(&pre, |v| v.max(0.0)));
            dec_caches[i] = Some(cache);
            dec_in[i] = Some(pre);
            below = Some(y);
        }
        let raw = below.expect("at least one level");
        let out = super::layers::map(&raw, sigmoid);

        let mut image = sample.input.clone();
        let plane = image.plane_len();
        for ch in 0..3 {
            for (i, m) in sample.mask.iter().enumerate() {
                if *m {
                    image.data[ch * plane + i] = out.data[ch * plane + i];
                }
            }
        }
        let cache = GeneratorCache {
            enc_caches,
            enc_out,
            dec_caches: dec_caches.into_iter().map(|c| c.expect("filled")).collect(),
            dec_in: dec_in.into_iter().map(|c| c.expect("filled")).collect(),
            out,
            mask: sample.mask.clone(),
        };
        Ok((GeneratedPair { image }, cache))
    }

    /// Parameter gradients given the gradient of the loss w.r.t. GI.
    /// Copied-through pixels carry no gradient into the network.
    #[allow(clippy::needless_range_loop)]
    pub fn backward(&self, cache: &GeneratorCache, d_image: &Tensor) -> Generator {
        let levels = self.levels();
        let mut grads = self.zeros_like();
        let plane = cache.out.plane_len();
        let mut d = Tensor::zeros(cache.out.c, cache.out.h, cache.out.w);
        for ch in 0..3 {
            for (i, m) in cache.mask.iter().enumerate() {
                if *m {
                    let j = ch * plane + i;
                    let s = cache.out.data[j];
                    d.data[j] = d_image.data[j] * s * (1.0 - s);
                }
            }
        }

        let mut d_enc: Vec<Tensor> = cache
            .enc_out
            .iter()
            .map(|t| Tensor::zeros(t.c, t.h, t.w))
            .collect();
        for i in 0..levels {
            let d_in = self.dec[i]
                .backward(&cache.dec_caches[i], &d, &mut grads.dec[i], true)
                .expect("requested");
            let pre = &cache.dec_in[i];
            let masked: Vec<f64> = d_in
                .data
                .iter()
                .zip(&pre.data)
                .map(|(g, p)| if *p > 0.0 { *g } else { 0.0 })
                .collect();
            if i == levels - 1 {
                add_into(&mut d_enc[i].data, &masked);
                break;
            }
            // first half flows to the decoder below, second half is the skip
            let split = d_enc[i].data.len();
            let (up, skip) = masked.split_at(masked.len() - split);
            add_into(&mut d_enc[i].data, skip);
            d = Tensor {
                c: pre.c - d_enc[i].c,
                h: pre.h,
                w: pre.w,
                data: up.to_vec(),
            };
        }

        for i in (0..levels).rev() {
            let need_dx = i > 0;
            let dx = self.enc[i].backward(&cache.enc_caches[i], &d_enc[i], &mut grads.enc[i], need_dx);
            if let Some(dx) = dx {
                let prev = &cache.enc_out[i - 1];
                let g: Vec<f64> = dx
                    .data
                    .iter()
                    .zip(&prev.data)
                    .map(|(g, p)| g * leaky_relu_grad(*p))
                    .collect();
                add_into(&mut d_enc[i - 1].data, &g);
            }
        }
        grads
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Parameters for Generator {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.enc {
            out.push(l.weight.as_slice());
            out.push(l.bias.as_slice());
        }
        for l in &self.dec {
            out.push(l.weight.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.enc {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        for l in &mut self.dec {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.enc.len() {
            out.push(format!("generator.enc{i}.weight"));
            out.push(format!("generator.enc{i}.bias"));
        }
        for i in 0..self.dec.len() {
            out.push(format!("generator.dec{i}.weight"));
            out.push(format!("generator.dec{i}.bias"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairgen::{band_mask, Direction, PairMeta};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(s: usize, w: usize, seed: u64) -> PairSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = band_mask(s, w);
        let mut input = Tensor::from_vec(3, s, 2 * s, (0..3 * s * 2 * s).map(|_| rng.gen()).collect()).unwrap();
        for ch in 0..3 {
            for (i, m) in mask.iter().enumerate() {
                if *m {
                    input.data[ch * s * 2 * s + i] = 0.0;
                }
            }
        }
        PairSample {
            input,
            mask,
            original: None,
            label: None,
            meta: PairMeta {
                x: 0,
                y: 1,
                direction: Direction::Right,
            },
        }
    }

    #[test]
    fn output_shape_and_copy_through() {
        let arch = Architecture::uniform(64, 2);
        let g = Generator::new(&arch, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let s = sample(64, 4, 1);
        let out = g.forward(&s).unwrap();
        assert_eq!(out.image.shape(), s.input.shape());
        for ch in 0..3 {
            for (i, m) in s.mask.iter().enumerate() {
                let j = ch * 64 * 128 + i;
                if *m {
                    assert!((0.0..=1.0).contains(&out.image.data[j]));
                } else {
                    assert_eq!(out.image.data[j].to_bits(), s.input.data[j].to_bits());
                }
            }
        }
        assert_eq!(out.generated_band(&s.mask).len(), 3 * 512);
    }

    #[test]
    fn empty_mask_is_identity() {
        let g = Generator::new(&Architecture::uniform(64, 2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let s = sample(64, 0, 2);
        assert_eq!(g.forward(&s).unwrap().image, s.input);
    }

    #[test]
    fn inference_is_deterministic() {
        let g = Generator::new(&Architecture::uniform(64, 3), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let s = sample(64, 6, 3);
        assert_eq!(g.forward(&s).unwrap(), g.forward(&s).unwrap());
    }

    #[test]
    fn rejects_bad_sizes() {
        let g = Generator::new(&Architecture::uniform(64, 2), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut s = sample(64, 2, 0);
        s.input = Tensor::zeros(3, 48, 96);
        s.mask = band_mask(48, 2);
        assert!(matches!(g.forward(&s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn standard_generator_runs_on_128() {
        // 6 levels also accept larger multiples of 64
        let mut arch = Architecture::uniform(128, 1);
        arch.discriminator_channels = vec![1, 1, 1];
        let g = Generator::new(&arch, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let s = sample(128, 8, 0);
        assert_eq!(g.forward(&s).unwrap().image.shape(), (3, 128, 256));
    }
}
