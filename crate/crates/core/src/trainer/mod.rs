//! Two-phase training: adversarial inpainting, then fine-tuning the
//! discriminator as a pair classifier while the generator stays frozen.

mod config;
mod corpus;
pub mod loss;
pub mod optim;

use std::fmt::Write as _;
use std::path::Path;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::netcore::{
    masked_values, save_checkpoint, Discriminator, Generator, ModelCheckpoint, Parameters, Phase,
    Tensor, TrainingMeta,
};
use crate::pairgen::{center_crop, make_phase1_example, make_phase2_pair, PairOptions, PairSample};
use crate::puzzle::permutation;
use crate::{Error, Result};

pub use config::TrainConfig;
pub use corpus::{check_disjoint, content_digest, load_corpus, make_puzzles, CorpusImage, TrainingPuzzle};
use loss::{bce, bce_grad, GeneratorLoss};
use optim::Adam;

/// Adds `from` into `into`, tensor by tensor.
pub fn accumulate<P: Parameters>(into: &mut P, from: &P) {
    for (a, b) in into.tensors_mut().into_iter().zip(from.tensors()) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

/// Embeds a `3 × S × S` crop gradient back into the `3 × S × 2S` pair.
fn uncrop(d_crop: &Tensor, s: usize) -> Tensor {
    let mut out = Tensor::zeros(3, s, 2 * s);
    for ch in 0..3 {
        for y in 0..s {
            for x in 0..s {
                out.set(ch, y, x + s / 2, d_crop.at(ch, y, x));
            }
        }
    }
    out
}

/// What the discriminator sees for a pair: the center crop of the inpainted
/// pair, or of the raw gapped pair when inpainting is disabled.
pub fn classifier_input(generator: &Generator, inpaint: bool, sample: &PairSample) -> Result<Tensor> {
    if inpaint {
        center_crop(&generator.forward(sample)?.image)
    } else {
        center_crop(&sample.input)
    }
}

/// Generator objective for one example, evaluated against `disc`.
pub fn generator_objective(g: &Generator, disc: &Discriminator, sample: &PairSample, lambda: f64) -> Result<GeneratorLoss> {
    let original = sample
        .original
        .as_ref()
        .ok_or_else(|| Error::invalid("generator objective needs the original pair"))?;
    let gen = g.forward(sample)?;
    let p = disc.forward(&center_crop(&gen.image)?)?.prob;
    Ok(loss::generator_loss(
        p,
        &masked_values(original, &sample.mask),
        &gen.generated_band(&sample.mask),
        lambda,
    ))
}

/// Generator loss and parameter gradients for one example; `disc` is held
/// fixed.
pub fn generator_step_gradients(
    g: &Generator,
    disc: &Discriminator,
    sample: &PairSample,
    lambda: f64,
) -> Result<(GeneratorLoss, Generator)> {
    let original = sample
        .original
        .as_ref()
        .ok_or_else(|| Error::invalid("generator step needs the original pair"))?;
    let s = sample.piece_size();
    let (gen, gcache) = g.forward_train(sample)?;
    let (dout, dcache) = disc.forward_train(&center_crop(&gen.image)?)?;
    let ob = masked_values(original, &sample.mask);
    let gb = gen.generated_band(&sample.mask);
    let value = loss::generator_loss(dout.prob, &ob, &gb, lambda);

    let (_, d_crop) = disc.backward(&dcache, bce_grad(dout.prob, 1.0));
    let mut d_image = uncrop(&d_crop, s);
    if !gb.is_empty() {
        let scale = lambda / gb.len() as f64;
        let plane = d_image.plane_len();
        let mut k = 0;
        for ch in 0..3 {
            for (i, m) in sample.mask.iter().enumerate() {
                if *m {
                    let diff = gb[k] - ob[k];
                    let sign = if diff > 0.0 {
                        1.0
                    } else if diff < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    d_image.data[ch * plane + i] += scale * sign;
                    k += 1;
                }
            }
        }
    }
    Ok((value, g.backward(&gcache, &d_image)))
}

/// Mean BCE of `disc` over a labeled pair of crops (`a` should score 1,
/// `b` 0), with gradients.
fn two_term_gradients(disc: &Discriminator, a: &Tensor, b: &Tensor) -> Result<(f64, f64, f64, Discriminator)> {
    let (oa, ca) = disc.forward_train(a)?;
    let (ob, cb) = disc.forward_train(b)?;
    let value = (bce(oa.prob, 1.0) + bce(ob.prob, 0.0)) / 2.0;
    let (mut grads, _) = disc.backward(&ca, bce_grad(oa.prob, 1.0) / 2.0);
    let (gb, _) = disc.backward(&cb, bce_grad(ob.prob, 0.0) / 2.0);
    accumulate(&mut grads, &gb);
    Ok((value, oa.prob, ob.prob, grads))
}

/// Inpainting-phase discriminator loss and gradients. The fake crop is a
/// plain tensor, so nothing flows back into the generator.
pub fn discriminator_phase1_gradients(disc: &Discriminator, real: &Tensor, fake: &Tensor) -> Result<(f64, Discriminator)> {
    two_term_gradients(disc, real, fake).map(|(v, _, _, g)| (v, g))
}

/// Classification-phase loss, both probabilities and gradients.
pub fn discriminator_phase2_gradients(
    disc: &Discriminator,
    positive: &Tensor,
    negative: &Tensor,
) -> Result<(f64, f64, f64, Discriminator)> {
    two_term_gradients(disc, positive, negative)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase1Record {
    pub step: usize,
    pub epoch: usize,
    pub generator: GeneratorLoss,
    pub discriminator: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase2Record {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub p_positive: f64,
    pub p_negative: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<R> {
    pub checkpoint: ModelCheckpoint,
    pub records: Vec<R>,
}

/// Per-example generator for index `k` of a phase.
fn example_rng(seed: u64, phase: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ phase.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(k as u64);
    rng
}

fn epoch_order(n: usize, seed: u64, phase: u64, epoch: usize) -> Vec<usize> {
    let s = seed
        .wrapping_add(phase.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add((epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    permutation(n, s)
}

fn csv_header(config: &TrainConfig, columns: &str) -> String {
    format!(
        "# tool = {}\n# seed = {}\n# config_hash = {}\n{columns}\n",
        crate::TOOL_VERSION,
        config.seed,
        config.hash()
    )
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn finite_or_diverged(step: usize, what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged {
            step,
            detail: format!("non-finite {what}: {values:?}"),
        })
    }
}

/// Runs the inpainting phase on the configured corpus.
pub fn train_phase1(config: &TrainConfig) -> Result<TrainOutcome<Phase1Record>> {
    let dir = config
        .phase1_corpus
        .as_ref()
        .ok_or_else(|| Error::invalid("phase1_corpus is not set"))?;
    let images = load_corpus(dir)?;
    if let Some(d2) = &config.phase2_corpus {
        if let Ok(other) = load_corpus(d2) {
            check_disjoint(&images, &other)?;
        }
    }
    let raw: Vec<_> = images.into_iter().map(|c| c.image).collect();
    train_phase1_on(config, &raw)
}

/// Inpainting phase: every example takes one discriminator step on the
/// real/fake objective, then one generator step against the updated
/// discriminator.
pub fn train_phase1_on(config: &TrainConfig, images: &[image::RgbImage]) -> Result<TrainOutcome<Phase1Record>> {
    config.validate()?;
    if images.is_empty() {
        return Err(Error::invalid("phase-1 corpus is empty"));
    }
    let arch = &config.architecture;
    let w = config.erosion_width()?;
    let opts = PairOptions {
        piece_size: arch.piece_size,
        erosion_width: w,
        erode_outer_frame: config.erode_outer_frame,
    };
    let mut init = ChaCha8Rng::seed_from_u64(config.seed);
    let mut g = Generator::new(arch, &mut init)?;
    let mut d = Discriminator::new(arch, &mut init)?;
    let mut opt_g = Adam::new(config.lr_generator);
    let mut opt_d = Adam::new(config.lr_discriminator_phase1);
    info!(
        "phase 1: {} images, {} examples x {} epochs, erosion width {w}, {} + {} parameters",
        images.len(),
        config.pairs_phase1,
        config.epochs_phase1,
        g.parameter_count(),
        d.parameter_count()
    );

    let mut records = Vec::with_capacity(config.pairs_phase1 * config.epochs_phase1);
    let mut csv = csv_header(config, "step,epoch,g_adv,g_l1,g_total,d_loss");
    let mut step = 0;
    let optimizer = opt_g.describe();
    let meta = |epochs: usize| TrainingMeta {
        epochs_phase1: epochs,
        epochs_phase2: 0,
        seed: config.seed,
        erosion_width: w,
        config_hash: config.hash(),
        optimizer: optimizer.clone(),
        inpaint: true,
        fresh_discriminator: false,
    };
    for epoch in 0..config.epochs_phase1 {
        for k in epoch_order(config.pairs_phase1, config.seed, 1, epoch) {
            let mut rng = example_rng(config.seed, 1, k);
            let image = &images[rng.gen_range(0..images.len())];
            let sample = make_phase1_example(image, &opts, &mut rng)?;
            let original = sample.original.as_ref().expect("phase-1 examples carry originals");

            let fake = center_crop(&g.forward(&sample)?.image)?;
            let real = center_crop(original)?;
            let (d_loss, d_grads) = discriminator_phase1_gradients(&d, &real, &fake)?;
            opt_d.step(&mut d, &d_grads);

            let (g_loss, g_grads) = generator_step_gradients(&g, &d, &sample, config.lambda)?;
            opt_g.step(&mut g, &g_grads);

            finite_or_diverged(step, "phase-1 loss", &[g_loss.total, d_loss])?;
            let _ = writeln!(
                csv,
                "{step},{epoch},{},{},{},{d_loss}",
                g_loss.adversarial, g_loss.l1, g_loss.total
            );
            records.push(Phase1Record {
                step,
                epoch,
                generator: g_loss,
                discriminator: d_loss,
            });
            step += 1;
        }
        let n = config.pairs_phase1.max(1) as f64;
        let tail = &records[records.len() - config.pairs_phase1..];
        info!(
            "phase 1 epoch {}/{}: g_total {:.4} g_l1 {:.4} d {:.4}",
            epoch + 1,
            config.epochs_phase1,
            tail.iter().map(|r| r.generator.total).sum::<f64>() / n,
            tail.iter().map(|r| r.generator.l1).sum::<f64>() / n,
            tail.iter().map(|r| r.discriminator).sum::<f64>() / n
        );
        if let Some(out) = &config.out_dir {
            let ckpt = ModelCheckpoint {
                architecture: arch.clone(),
                generator: g.clone(),
                discriminator: d.clone(),
                phase: Phase::Inpainting,
                meta: meta(epoch + 1),
            };
            save_checkpoint(&ckpt, &out.join(format!("phase1_epoch{:03}.ckpt", epoch + 1)))?;
            write_text(&out.join("phase1_loss.csv"), &csv)?;
        }
    }
    let checkpoint = ModelCheckpoint {
        architecture: arch.clone(),
        generator: g,
        discriminator: d,
        phase: Phase::Inpainting,
        meta: meta(config.epochs_phase1),
    };
    if let Some(out) = &config.out_dir {
        save_checkpoint(&checkpoint, &out.join("phase1.ckpt"))?;
        write_text(&out.join("phase1_loss.csv"), &csv)?;
    }
    Ok(TrainOutcome { checkpoint, records })
}

/// Runs the classification phase on the configured corpus.
pub fn train_phase2(config: &TrainConfig, warm: Option<&ModelCheckpoint>) -> Result<TrainOutcome<Phase2Record>> {
    let dir = config
        .phase2_corpus
        .as_ref()
        .ok_or_else(|| Error::invalid("phase2_corpus is not set"))?;
    let images = load_corpus(dir)?;
    if let Some(d1) = &config.phase1_corpus {
        if let Ok(other) = load_corpus(d1) {
            check_disjoint(&other, &images)?;
        }
    }
    let puzzles = make_puzzles(&images, config.architecture.piece_size, config.erosion_pct)?;
    train_phase2_on(config, warm, &puzzles)
}

/// Classification phase: the generator is frozen and the discriminator is
/// trained on one positive and one negative pair per iteration.
///
/// `warm` must be an inpainting checkpoint unless `fresh_discriminator` is
/// set, in which case the discriminator starts from fresh weights (and the
/// generator too if `warm` is absent).
pub fn train_phase2_on(
    config: &TrainConfig,
    warm: Option<&ModelCheckpoint>,
    puzzles: &[TrainingPuzzle],
) -> Result<TrainOutcome<Phase2Record>> {
    config.validate()?;
    if puzzles.is_empty() {
        return Err(Error::invalid("phase-2 corpus is empty"));
    }
    let arch = &config.architecture;
    let w = config.erosion_width()?;
    for p in puzzles {
        if p.bundle.erosion_width != w || p.bundle.piece_size != arch.piece_size {
            return Err(Error::Incompatible(format!(
                "training puzzle has {}-pixel pieces eroded by {}, configuration expects {} and {w}",
                p.bundle.piece_size, p.bundle.erosion_width, arch.piece_size
            )));
        }
    }
    let mut init = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_0002);
    let (g, mut d, epochs_phase1) = match warm {
        Some(ck) => {
            if ck.phase != Phase::Inpainting {
                return Err(Error::Incompatible(format!(
                    "phase 2 warm-starts from an inpainting checkpoint, got a {} checkpoint",
                    ck.phase.name()
                )));
            }
            if ck.architecture != *arch {
                return Err(Error::ArchitectureMismatch {
                    expected: arch.descriptor(),
                    found: ck.architecture.descriptor(),
                });
            }
            if ck.meta.erosion_width != w {
                return Err(Error::Incompatible(format!(
                    "checkpoint trained for erosion width {}, configuration uses {w}",
                    ck.meta.erosion_width
                )));
            }
            let d = if config.fresh_discriminator {
                Discriminator::new(arch, &mut init)?
            } else {
                ck.discriminator.clone()
            };
            (ck.generator.clone(), d, ck.meta.epochs_phase1)
        }
        None => {
            if !config.fresh_discriminator {
                return Err(Error::invalid(
                    "phase 2 without an inpainting checkpoint requires fresh_discriminator = true",
                ));
            }
            let g = Generator::new(arch, &mut init)?;
            let d = Discriminator::new(arch, &mut init)?;
            (g, d, 0)
        }
    };
    let frozen = g.clone();
    let mut opt = Adam::new(config.lr_phase2);
    info!(
        "phase 2: {} puzzles, {} iterations x {} epochs, inpaint {}, fresh discriminator {}",
        puzzles.len(),
        config.pairs_phase2,
        config.epochs_phase2,
        config.inpaint,
        config.fresh_discriminator
    );

    let mut records = Vec::with_capacity(config.pairs_phase2 * config.epochs_phase2);
    let mut csv = csv_header(config, "step,epoch,d_loss,p_pos,p_neg");
    let optimizer = opt.describe();
    let meta = |epochs: usize| TrainingMeta {
        epochs_phase1,
        epochs_phase2: epochs,
        seed: config.seed,
        erosion_width: w,
        config_hash: config.hash(),
        optimizer: optimizer.clone(),
        inpaint: config.inpaint,
        fresh_discriminator: config.fresh_discriminator,
    };
    let mut step = 0;
    for epoch in 0..config.epochs_phase2 {
        for k in epoch_order(config.pairs_phase2, config.seed, 2, epoch) {
            let mut rng = example_rng(config.seed, 2, k);
            let puzzle = &puzzles[rng.gen_range(0..puzzles.len())];
            let (pos, neg) = make_phase2_pair(&puzzle.bundle, &puzzle.solution, &mut rng)?;
            let pos_in = classifier_input(&g, config.inpaint, &pos)?;
            let neg_in = classifier_input(&g, config.inpaint, &neg)?;
            let (value, p_pos, p_neg, grads) = discriminator_phase2_gradients(&d, &pos_in, &neg_in)?;
            opt.step(&mut d, &grads);
            finite_or_diverged(step, "phase-2 loss", &[value])?;
            let _ = writeln!(csv, "{step},{epoch},{value},{p_pos},{p_neg}");
            records.push(Phase2Record {
                step,
                epoch,
                loss: value,
                p_positive: p_pos,
                p_negative: p_neg,
            });
            step += 1;
        }
        let tail = &records[records.len() - config.pairs_phase2..];
        let n = config.pairs_phase2.max(1) as f64;
        info!(
            "phase 2 epoch {}/{}: d {:.4} p_pos {:.3} p_neg {:.3}",
            epoch + 1,
            config.epochs_phase2,
            tail.iter().map(|r| r.loss).sum::<f64>() / n,
            tail.iter().map(|r| r.p_positive).sum::<f64>() / n,
            tail.iter().map(|r| r.p_negative).sum::<f64>() / n
        );
        if let Some(out) = &config.out_dir {
            let ckpt = ModelCheckpoint {
                architecture: arch.clone(),
                generator: g.clone(),
                discriminator: d.clone(),
                phase: Phase::Classifier,
                meta: meta(epoch + 1),
            };
            save_checkpoint(&ckpt, &out.join(format!("phase2_epoch{:03}.ckpt", epoch + 1)))?;
            write_text(&out.join("phase2_loss.csv"), &csv)?;
        }
    }
    if g != frozen {
        return Err(Error::Internal("generator changed during phase 2".into()));
    }
    let checkpoint = ModelCheckpoint {
        architecture: arch.clone(),
        generator: g,
        discriminator: d,
        phase: Phase::Classifier,
        meta: meta(config.epochs_phase2),
    };
    if let Some(out) = &config.out_dir {
        save_checkpoint(&checkpoint, &out.join("phase2.ckpt"))?;
        write_text(&out.join("phase2_loss.csv"), &csv)?;
    }
    Ok(TrainOutcome { checkpoint, records })
}

/// Mean classifier probability over `count` positive and `count` negative
/// pairs drawn from `puzzles`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierMeans {
    pub positive: f64,
    pub negative: f64,
}

impl ClassifierMeans {
    pub fn separation(&self) -> f64 {
        self.positive - self.negative
    }
}

pub fn classifier_means(ckpt: &ModelCheckpoint, puzzles: &[TrainingPuzzle], count: usize, seed: u64) -> Result<ClassifierMeans> {
    if puzzles.is_empty() || count == 0 {
        return Err(Error::invalid("classifier evaluation needs puzzles and a positive count"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pos, mut neg) = (0.0, 0.0);
    for _ in 0..count {
        let p = &puzzles[rng.gen_range(0..puzzles.len())];
        let (a, b) = make_phase2_pair(&p.bundle, &p.solution, &mut rng)?;
        pos += ckpt
            .discriminator
            .forward(&classifier_input(&ckpt.generator, ckpt.meta.inpaint, &a)?)?
            .prob;
        neg += ckpt
            .discriminator
            .forward(&classifier_input(&ckpt.generator, ckpt.meta.inpaint, &b)?)?
            .prob;
    }
    Ok(ClassifierMeans {
        positive: pos / count as f64,
        negative: neg / count as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::Architecture;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            architecture: Architecture::uniform(64, 2),
            pairs_phase1: 2,
            pairs_phase2: 2,
            epochs_phase1: 1,
            epochs_phase2: 1,
            ..Default::default()
        }
    }

    fn images() -> Vec<image::RgbImage> {
        (0..2)
            .map(|i| image::RgbImage::from_fn(192, 128, move |x, y| image::Rgb([(x + i * 40) as u8, (y * 2) as u8, ((x ^ y) & 255) as u8])))
            .collect()
    }

    #[test]
    fn phase1_runs_and_is_deterministic() {
        let c = tiny_config();
        let a = train_phase1_on(&c, &images()).unwrap();
        let b = train_phase1_on(&c, &images()).unwrap();
        assert_eq!(a.records.len(), 2);
        assert_eq!(a.records, b.records);
        assert_eq!(a.checkpoint.weights_hash(), b.checkpoint.weights_hash());
        assert_eq!(a.checkpoint.phase, Phase::Inpainting);
    }

    #[test]
    fn phase2_keeps_generator_and_checks_warm_phase() {
        let c = tiny_config();
        let warm = train_phase1_on(&c, &images()).unwrap().checkpoint;
        let corpus: Vec<_> = images()
            .into_iter()
            .enumerate()
            .map(|(i, im)| CorpusImage::new(format!("{i}.png").into(), im))
            .collect();
        let puzzles = make_puzzles(&corpus, 64, c.erosion_pct).unwrap();
        let out = train_phase2_on(&c, Some(&warm), &puzzles).unwrap();
        assert_eq!(out.checkpoint.generator, warm.generator);
        assert_ne!(out.checkpoint.discriminator, warm.discriminator);
        assert_eq!(out.checkpoint.phase, Phase::Classifier);
        // a classifier checkpoint cannot seed phase 2
        assert!(train_phase2_on(&c, Some(&out.checkpoint), &puzzles).is_err());
        // cold start requires the fresh flag
        assert!(train_phase2_on(&c, None, &puzzles).is_err());
        let fresh = TrainConfig {
            fresh_discriminator: true,
            ..c
        };
        assert!(train_phase2_on(&fresh, None, &puzzles).is_ok());
    }

    #[test]
    fn uncrop_places_center() {
        let crop = Tensor::full(3, 4, 4, 1.0);
        let t = uncrop(&crop, 4);
        assert_eq!(t.at(0, 0, 1), 0.0);
        assert_eq!(t.at(0, 0, 2), 1.0);
        assert_eq!(t.at(2, 3, 5), 1.0);
        assert_eq!(t.at(2, 3, 6), 0.0);
    }
}
