//! Convolution primitives with explicit backward passes. Both layer kinds
//! lower to a single matrix product over an unfolded (im2col) buffer.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Tensor;

pub const LEAKY_SLOPE: f64 = 0.2;

/// `c = op(a) · op(b) + beta · c`, all buffers row-major. `op(a)` is
/// `m × k`, `op(b)` is `k × n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], trans_a: bool, b: &[f64], trans_b: bool, c: &mut [f64], beta: f64) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the kernel touches given
    // these strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of a square-kernel sliding window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Window {
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Window {
    pub fn out_len(self, n: usize) -> usize {
        (n + 2 * self.pad - self.k) / self.stride + 1
    }
}

/// Unfolds `x` into a `(C·k·k) × (oh·ow)` matrix.
pub(crate) fn im2col(x: &Tensor, win: Window, oh: usize, ow: usize) -> Vec<f64> {
    let Window { k, stride, pad } = win;
    let p = oh * ow;
    let mut cols = vec![0.0; x.c * k * k * p];
    for ci in 0..x.c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy as usize >= x.h {
                        continue;
                    }
                    let src = x.idx(ci, iy as usize, 0);
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && (ix as usize) < x.w {
                            dst[oy * ow + ox] = x.data[src + ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters columns back, summing overlaps.
pub(crate) fn col2im(cols: &[f64], c: usize, h: usize, w: usize, win: Window, oh: usize, ow: usize) -> Tensor {
    let Window { k, stride, pad } = win;
    let p = oh * ow;
    let mut out = Tensor::zeros(c, h, w);
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    let base = out.idx(ci, iy as usize, 0);
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && (ix as usize) < w {
                            out.data[base + ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Strided convolution. Weights are `out_c × (in_c·k·k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_c: usize,
    pub out_c: usize,
    pub(crate) win: Window,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Values a layer keeps from its forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    cols: Vec<f64>,
    in_shape: (usize, usize, usize),
}

impl Conv2d {
    pub fn new<R: Rng + ?Sized>(in_c: usize, out_c: usize, k: usize, stride: usize, pad: usize, gain: f64, rng: &mut R) -> Self {
        let fan_in = (in_c * k * k) as f64;
        let normal = Normal::new(0.0, gain / fan_in.sqrt()).expect("finite std");
        Self {
            in_c,
            out_c,
            win: Window { k, stride, pad },
            weight: (0..out_c * in_c * k * k).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; out_c],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
            ..self.clone()
        }
    }

    pub fn out_shape(&self, h: usize, w: usize) -> (usize, usize) {
        (self.win.out_len(h), self.win.out_len(w))
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, LayerCache) {
        debug_assert_eq!(x.c, self.in_c);
        let (oh, ow) = self.out_shape(x.h, x.w);
        let cols = im2col(x, self.win, oh, ow);
        let kk = self.in_c * self.win.k * self.win.k;
        let p = oh * ow;
        let mut out = Tensor::zeros(self.out_c, oh, ow);
        for (co, b) in self.bias.iter().enumerate() {
            out.data[co * p..(co + 1) * p].fill(*b);
        }
        gemm(self.out_c, kk, p, &self.weight, false, &cols, false, &mut out.data, 1.0);
        (
            out,
            LayerCache {
                cols,
                in_shape: x.shape(),
            },
        )
    }

    /// Accumulates parameter gradients into `grad` and returns the input
    /// gradient when `need_dx` is set.
    pub fn backward(&self, cache: &LayerCache, dout: &Tensor, grad: &mut Conv2d, need_dx: bool) -> Option<Tensor> {
        let kk = self.in_c * self.win.k * self.win.k;
        let p = dout.h * dout.w;
        gemm(self.out_c, p, kk, &dout.data, false, &cache.cols, true, &mut grad.weight, 1.0);
        for (co, g) in grad.bias.iter_mut().enumerate() {
            *g += dout.data[co * p..(co + 1) * p].iter().sum::<f64>();
        }
        if !need_dx {
            return None;
        }
        let mut dcols = vec![0.0; kk * p];
        gemm(kk, self.out_c, p, &self.weight, true, &dout.data, false, &mut dcols, 0.0);
        let (c, h, w) = cache.in_shape;
        Some(col2im(&dcols, c, h, w, self.win, dout.h, dout.w))
    }
}

/// Stride-2 transposed convolution (kernel 4, padding 1), doubling the
/// spatial extent. Weights are `in_c × (out_c·k·k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2d {
    pub in_c: usize,
    pub out_c: usize,
    pub(crate) win: Window,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvTranspose2d {
    pub fn new<R: Rng + ?Sized>(in_c: usize, out_c: usize, gain: f64, rng: &mut R) -> Self {
        let win = Window { k: 4, stride: 2, pad: 1 };
        // each output pixel sees in_c · (k / stride)² weights
        let fan_in = (in_c * 4) as f64;
        let normal = Normal::new(0.0, gain / fan_in.sqrt()).expect("finite std");
        Self {
            in_c,
            out_c,
            win,
            weight: (0..in_c * out_c * 16).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; out_c],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
            ..self.clone()
        }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, LayerCache) {
        debug_assert_eq!(x.c, self.in_c);
        let kk = self.out_c * self.win.k * self.win.k;
        let p = x.h * x.w;
        let mut cols = vec![0.0; kk * p];
        gemm(kk, self.in_c, p, &self.weight, true, &x.data, false, &mut cols, 0.0);
        let (oh, ow) = (x.h * 2, x.w * 2);
        let mut out = col2im(&cols, self.out_c, oh, ow, self.win, x.h, x.w);
        let plane = oh * ow;
        for (co, b) in self.bias.iter().enumerate() {
            out.data[co * plane..(co + 1) * plane].iter_mut().for_each(|v| *v += b);
        }
        // the backward pass needs the input itself, stored in `cols`
        (
            out,
            LayerCache {
                cols: x.data.clone(),
                in_shape: x.shape(),
            },
        )
    }

    pub fn backward(&self, cache: &LayerCache, dout: &Tensor, grad: &mut ConvTranspose2d, need_dx: bool) -> Option<Tensor> {
        let (c, h, w) = cache.in_shape;
        let p = h * w;
        let kk = self.out_c * self.win.k * self.win.k;
        let dcols = im2col(dout, self.win, h, w);
        gemm(self.in_c, p, kk, &cache.cols, false, &dcols, true, &mut grad.weight, 1.0);
        let plane = dout.h * dout.w;
        for (co, g) in grad.bias.iter_mut().enumerate() {
            *g += dout.data[co * plane..(co + 1) * plane].iter().sum::<f64>();
        }
        if !need_dx {
            return None;
        }
        let mut dx = Tensor::zeros(c, h, w);
        gemm(self.in_c, kk, p, &self.weight, false, &dcols, false, &mut dx.data, 0.0);
        Some(dx)
    }
}

#[inline]
pub fn leaky_relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

#[inline]
pub fn leaky_relu_grad(pre: f64) -> f64 {
    if pre > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Pixel values `[0, 1]` → `[-1, 1]`, applied at both network inputs.
#[inline]
pub fn to_signed(v: f64) -> f64 {
    2.0 * v - 1.0
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor {
        c: t.c,
        h: t.h,
        w: t.w,
        data: t.data.iter().map(|v| f(*v)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(c: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_vec(c, h, w, (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct nested-loop convolution.
    fn naive_conv(layer: &Conv2d, x: &Tensor) -> Tensor {
        let (oh, ow) = layer.out_shape(x.h, x.w);
        let Window { k, stride, pad } = layer.win;
        let mut out = Tensor::zeros(layer.out_c, oh, ow);
        for co in 0..layer.out_c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = layer.bias[co];
                    for ci in 0..layer.in_c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < x.h && (ix as usize) < x.w {
                                    acc += layer.weight[co * layer.in_c * k * k + (ci * k + ky) * k + kx]
                                        * x.at(ci, iy as usize, ix as usize);
                                }
                            }
                        }
                    }
                    out.set(co, oy, ox, acc);
                }
            }
        }
        out
    }

    /// Scatter definition of the transposed convolution.
    fn naive_conv_t(layer: &ConvTranspose2d, x: &Tensor) -> Tensor {
        let mut out = Tensor::zeros(layer.out_c, x.h * 2, x.w * 2);
        for co in 0..layer.out_c {
            for y in 0..out.h {
                for xx in 0..out.w {
                    out.set(co, y, xx, layer.bias[co]);
                }
            }
        }
        for ci in 0..layer.in_c {
            for iy in 0..x.h {
                for ix in 0..x.w {
                    for co in 0..layer.out_c {
                        for ky in 0..4 {
                            for kx in 0..4 {
                                let oy = (iy * 2 + ky) as isize - 1;
                                let ox = (ix * 2 + kx) as isize - 1;
                                if oy >= 0 && ox >= 0 && (oy as usize) < out.h && (ox as usize) < out.w {
                                    let wv = layer.weight[ci * layer.out_c * 16 + (co * 4 + ky) * 4 + kx];
                                    let i = out.idx(co, oy as usize, ox as usize);
                                    out.data[i] += wv * x.at(ci, iy, ix);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (k, s, p) in [(4, 2, 1), (3, 1, 0), (3, 1, 1)] {
            let mut layer = Conv2d::new(3, 5, k, s, p, 1.0, &mut rng);
            layer.bias = (0..5).map(|i| i as f64 * 0.1).collect();
            let x = random_tensor(3, 8, 12, &mut rng);
            let (fast, _) = layer.forward(&x);
            assert!(fast.max_abs_diff(&naive_conv(&layer, &x)) < 1e-12);
        }
    }

    #[test]
    fn conv_transpose_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut layer = ConvTranspose2d::new(4, 3, 1.0, &mut rng);
        layer.bias = vec![0.5, -0.25, 0.0];
        let x = random_tensor(4, 3, 5, &mut rng);
        let (fast, _) = layer.forward(&x);
        assert_eq!(fast.shape(), (3, 6, 10));
        assert!(fast.max_abs_diff(&naive_conv_t(&layer, &x)) < 1e-12);
    }

    /// `<conv(x), g>` checked against finite differences in x and weights.
    #[test]
    fn conv_backward_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = Conv2d::new(2, 3, 4, 2, 1, 1.0, &mut rng);
        let x = random_tensor(2, 6, 8, &mut rng);
        let (y, cache) = layer.forward(&x);
        let g = random_tensor(y.c, y.h, y.w, &mut rng);
        let objective = |l: &Conv2d, x: &Tensor| -> f64 {
            let (y, _) = l.forward(x);
            y.data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
        };
        let mut grad = layer.zeros_like();
        let dx = layer.backward(&cache, &g, &mut grad, true).unwrap();
        let h = 1e-6;
        for i in [0, 7, 30, 95] {
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let fd = (objective(&layer, &xp) - objective(&layer, &xm)) / (2.0 * h);
            assert!((fd - dx.data[i]).abs() < 1e-7);
        }
        for i in [0, 11, 50, 95] {
            let mut lp = layer.clone();
            lp.weight[i] += h;
            let mut lm = layer.clone();
            lm.weight[i] -= h;
            let fd = (objective(&lp, &x) - objective(&lm, &x)) / (2.0 * h);
            assert!((fd - grad.weight[i]).abs() < 1e-7);
        }
        let bias_fd: f64 = g.data[..y.h * y.w].iter().sum();
        assert!((grad.bias[0] - bias_fd).abs() < 1e-12);
    }

    #[test]
    fn conv_transpose_backward_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layer = ConvTranspose2d::new(3, 2, 1.0, &mut rng);
        let x = random_tensor(3, 3, 4, &mut rng);
        let (y, cache) = layer.forward(&x);
        let g = random_tensor(y.c, y.h, y.w, &mut rng);
        let objective = |l: &ConvTranspose2d, x: &Tensor| -> f64 {
            let (y, _) = l.forward(x);
            y.data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
        };
        let mut grad = layer.zeros_like();
        let dx = layer.backward(&cache, &g, &mut grad, true).unwrap();
        let h = 1e-6;
        for i in [0, 5, 17, 35] {
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let fd = (objective(&layer, &xp) - objective(&layer, &xm)) / (2.0 * h);
            assert!((fd - dx.data[i]).abs() < 1e-7);
        }
        for i in [0, 9, 40, 95] {
            let mut lp = layer.clone();
            lp.weight[i] += h;
            let mut lm = layer.clone();
            lm.weight[i] -= h;
            let fd = (objective(&lp, &x) - objective(&lm, &x)) / (2.0 * h);
            assert!((fd - grad.weight[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(-800.0).is_finite());
    }
}
