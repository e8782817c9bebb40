//! Procedural "natural-looking" images: layered value noise, a smooth color
//! gradient and a few soft-edged shapes. Used for demo and test corpora.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lattice value in `[-1, 1]`.
fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = splitmix(seed ^ splitmix((ix as u64).wrapping_mul(0x1656_67B1) ^ (iy as u64).wrapping_mul(0x27D4_EB2F_1656_67C5)));
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn smooth(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (tx, ty) = (smooth(x - x0), smooth(y - y0));
    let (ix, iy) = (x0 as i64, y0 as i64);
    let a = lattice(seed, ix, iy);
    let b = lattice(seed, ix + 1, iy);
    let c = lattice(seed, ix, iy + 1);
    let d = lattice(seed, ix + 1, iy + 1);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

/// Octave noise with the given largest period (pixels) and persistence.
fn fractal(seed: u64, x: f64, y: f64, period: f64, octaves: usize, persistence: f64) -> f64 {
    let (mut sum, mut amp, mut norm, mut p) = (0.0, 1.0, 0.0, period);
    for o in 0..octaves {
        sum += amp * value_noise(seed.wrapping_add(o as u64 * 7919), x / p, y / p);
        norm += amp;
        amp *= persistence;
        p /= 2.0;
    }
    sum / norm
}

struct Blob {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    angle: f64,
    color: [f64; 3],
    softness: f64,
}

/// A `width × height` image determined entirely by `seed`.
pub fn natural_image(width: u32, height: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [f64; 3] = [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)];
    let grad: [[f64; 2]; 3] = std::array::from_fn(|_| [rng.gen_range(-0.35..0.35), rng.gen_range(-0.35..0.35)]);
    let channel_seeds: [u64; 3] = std::array::from_fn(|_| rng.gen());
    let shared_seed: u64 = rng.gen();
    let period = rng.gen_range(96.0..192.0);
    let blobs: Vec<Blob> = (0..rng.gen_range(3..8))
        .map(|_| Blob {
            cx: rng.gen_range(0.0..width as f64),
            cy: rng.gen_range(0.0..height as f64),
            rx: rng.gen_range(20.0..(width.min(height) as f64 / 2.5).max(21.0)),
            ry: rng.gen_range(20.0..(width.min(height) as f64 / 2.5).max(21.0)),
            angle: rng.gen_range(0.0..std::f64::consts::PI),
            color: [rng.gen(), rng.gen(), rng.gen()],
            softness: rng.gen_range(0.05..0.3),
        })
        .collect();
    let (w, h) = (width as f64, height as f64);
    RgbImage::from_fn(width, height, |px, py| {
        let (x, y) = (px as f64, py as f64);
        let shared = fractal(shared_seed, x, y, period, 6, 0.55);
        let mut c = [0.0; 3];
        for ch in 0..3 {
            let own = fractal(channel_seeds[ch], x, y, period / 2.0, 5, 0.6);
            c[ch] = base[ch] + grad[ch][0] * (x / w - 0.5) + grad[ch][1] * (y / h - 0.5) + 0.30 * shared + 0.15 * own;
        }
        for b in &blobs {
            let (dx, dy) = (x - b.cx, y - b.cy);
            let (s, co) = b.angle.sin_cos();
            let u = (dx * co + dy * s) / b.rx;
            let v = (-dx * s + dy * co) / b.ry;
            let r = (u * u + v * v).sqrt();
            // 1 inside, 0 outside, smooth across the rim
            let t = ((1.0 - r) / b.softness).clamp(0.0, 1.0);
            let alpha = 0.7 * smooth(t);
            for (v, bc) in c.iter_mut().zip(b.color) {
                *v = *v * (1.0 - alpha) + (bc + 0.1 * shared) * alpha;
            }
        }
        Rgb(c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
    })
}

/// Writes `count` images named `img_000.png`, … into `dir`; image `i`
/// uses seed `seed + i`.
pub fn write_corpus(dir: &Path, count: usize, width: u32, height: u32, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..count)
        .map(|i| {
            let path = dir.join(format!("img_{i:03}.png"));
            let img = natural_image(width, height, seed.wrapping_add(i as u64));
            crate::puzzle::write_png(&img, &path, &[("seed", seed.wrapping_add(i as u64).to_string())])?;
            Ok(path)
        })
        .collect()
}
