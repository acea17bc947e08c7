//! Primitive kernels shared by the tape, the plain forward pass and the
//! incremental mutant evaluator. Convolutions are cross-correlations over
//! `[C, H, W]` inputs with `[C_out, C_in, kH, kW]` kernels.

use super::Tensor;
use crate::{Error, Result};

/// Output extent of a strided, zero-padded correlation along one axis.
pub fn conv_out_extent(n: usize, k: usize, stride: usize, padding: usize) -> usize {
    (n + 2 * padding - k) / stride + 1
}

/// Resolved shapes of one convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(input: &[usize], kernels: &[usize], stride: usize, padding: usize) -> Result<Self> {
        let (&[c, h, w], &[o, ci, kh, kw]) = (input, kernels) else {
            return Err(Error::shape(
                "conv2d",
                format!(
                    "expected [C,H,W] input and [O,C,kH,kW] kernels, got {input:?} and {kernels:?}"
                ),
            ));
        };
        if ci != c {
            return Err(Error::shape(
                "conv2d",
                format!("input has {c} channels but kernels expect {ci} (input {input:?}, kernels {kernels:?})"),
            ));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument(
                "conv2d stride must be positive".into(),
            ));
        }
        if kh > h + 2 * padding || kw > w + 2 * padding {
            return Err(Error::shape(
                "conv2d",
                format!(
                    "kernel {kh}x{kw} larger than padded input {}x{}",
                    h + 2 * padding,
                    w + 2 * padding
                ),
            ));
        }
        Ok(Self {
            in_channels: c,
            in_h: h,
            in_w: w,
            out_channels: o,
            kh,
            kw,
            stride,
            padding,
            out_h: conv_out_extent(h, kh, stride, padding),
            out_w: conv_out_extent(w, kw, stride, padding),
        })
    }

    pub fn output_shape(&self) -> [usize; 3] {
        [self.out_channels, self.out_h, self.out_w]
    }

    fn in_plane(&self) -> usize {
        self.in_h * self.in_w
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    fn kernel_plane(&self) -> usize {
        self.kh * self.kw
    }

    /// Output positions `o` along one axis with `0 <= o*stride + offset - padding < n`.
    fn valid(&self, n: usize, offset: usize, out: usize) -> (usize, usize) {
        let s = self.stride;
        let p = self.padding;
        let lo = if p > offset {
            (p - offset).div_ceil(s)
        } else {
            0
        };
        let hi = if n + p > offset {
            ((n + p - offset - 1) / s + 1).min(out)
        } else {
            0
        };
        (lo, hi.max(lo))
    }
}

/// `out += correlate(input, kernel)` for a single input plane and a single 2-D kernel.
pub fn correlate_plane_acc(out: &mut [f64], input: &[f64], kernel: &[f64], g: &ConvGeometry) {
    for ki in 0..g.kh {
        let (y0, y1) = g.valid(g.in_h, ki, g.out_h);
        for kj in 0..g.kw {
            let w = kernel[ki * g.kw + kj];
            if w == 0.0 {
                continue;
            }
            let (x0, x1) = g.valid(g.in_w, kj, g.out_w);
            for oy in y0..y1 {
                let iy = oy * g.stride + ki - g.padding;
                let orow = &mut out[oy * g.out_w..(oy + 1) * g.out_w];
                let irow = &input[iy * g.in_w..(iy + 1) * g.in_w];
                if g.stride == 1 {
                    let shift = kj as isize - g.padding as isize;
                    let src = &irow[(x0 as isize + shift) as usize..(x1 as isize + shift) as usize];
                    for (o, &i) in orow[x0..x1].iter_mut().zip(src) {
                        *o += w * i;
                    }
                } else {
                    for ox in x0..x1 {
                        orow[ox] += w * irow[ox * g.stride + kj - g.padding];
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `input [C,H,W]` with `kernels [O,C,kH,kW]`.
pub fn conv2d(input: &Tensor, kernels: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let g = ConvGeometry::new(input.shape(), kernels.shape(), stride, padding)?;
    let mut out = vec![0.0; g.out_channels * g.out_plane()];
    let (ip, op, kp) = (g.in_plane(), g.out_plane(), g.kernel_plane());
    for o in 0..g.out_channels {
        let oplane = &mut out[o * op..(o + 1) * op];
        for c in 0..g.in_channels {
            let k = &kernels.data()[(o * g.in_channels + c) * kp..(o * g.in_channels + c + 1) * kp];
            correlate_plane_acc(oplane, &input.data()[c * ip..(c + 1) * ip], k, &g);
        }
    }
    Tensor::new(g.output_shape().to_vec(), out)
}

/// Gradient of a convolution with respect to its input.
pub fn conv2d_grad_input(grad_out: &Tensor, kernels: &Tensor, g: &ConvGeometry) -> Tensor {
    let mut gin = vec![0.0; g.in_channels * g.in_plane()];
    let (ip, op, kp) = (g.in_plane(), g.out_plane(), g.kernel_plane());
    for o in 0..g.out_channels {
        let go = &grad_out.data()[o * op..(o + 1) * op];
        for c in 0..g.in_channels {
            let k = &kernels.data()[(o * g.in_channels + c) * kp..(o * g.in_channels + c + 1) * kp];
            let gplane = &mut gin[c * ip..(c + 1) * ip];
            for ki in 0..g.kh {
                let (y0, y1) = g.valid(g.in_h, ki, g.out_h);
                for kj in 0..g.kw {
                    let w = k[ki * g.kw + kj];
                    if w == 0.0 {
                        continue;
                    }
                    let (x0, x1) = g.valid(g.in_w, kj, g.out_w);
                    for oy in y0..y1 {
                        let iy = oy * g.stride + ki - g.padding;
                        for ox in x0..x1 {
                            let ix = ox * g.stride + kj - g.padding;
                            gplane[iy * g.in_w + ix] += w * go[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![g.in_channels, g.in_h, g.in_w], gin).expect("geometry-derived shape")
}

/// Gradient of a convolution with respect to its kernels.
pub fn conv2d_grad_kernels(grad_out: &Tensor, input: &Tensor, g: &ConvGeometry) -> Tensor {
    let mut gk = vec![0.0; g.out_channels * g.in_channels * g.kernel_plane()];
    let (ip, op, kp) = (g.in_plane(), g.out_plane(), g.kernel_plane());
    for o in 0..g.out_channels {
        let go = &grad_out.data()[o * op..(o + 1) * op];
        for c in 0..g.in_channels {
            let inp = &input.data()[c * ip..(c + 1) * ip];
            let kslot = &mut gk[(o * g.in_channels + c) * kp..(o * g.in_channels + c + 1) * kp];
            for ki in 0..g.kh {
                let (y0, y1) = g.valid(g.in_h, ki, g.out_h);
                for kj in 0..g.kw {
                    let (x0, x1) = g.valid(g.in_w, kj, g.out_w);
                    let mut acc = 0.0;
                    for oy in y0..y1 {
                        let iy = oy * g.stride + ki - g.padding;
                        for ox in x0..x1 {
                            acc += go[oy * g.out_w + ox]
                                * inp[iy * g.in_w + ox * g.stride + kj - g.padding];
                        }
                    }
                    kslot[ki * g.kw + kj] = acc;
                }
            }
        }
    }
    Tensor::new(vec![g.out_channels, g.in_channels, g.kh, g.kw], gk)
        .expect("geometry-derived shape")
}

/// Adds `bias[c]` to every element of channel `c` of a `[C, ...]` tensor.
pub fn add_channel_bias(input: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let c = input.shape()[0];
    if bias.len() != c || input.rank() < 2 {
        return Err(Error::shape(
            "channel_bias",
            format!("input {:?} with bias {:?}", input.shape(), bias.shape()),
        ));
    }
    let plane = input.len() / c;
    let mut out = input.clone();
    for (ch, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
        let b = bias.data()[ch];
        chunk.iter_mut().for_each(|v| *v += b);
    }
    Ok(out)
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Non-overlapping max pooling with window and stride `size`. Returns the pooled
/// tensor and, per output element, the flat input index that won (first on ties).
pub fn maxpool2d(input: &Tensor, size: usize) -> Result<(Tensor, Vec<usize>)> {
    let &[c, h, w] = input.shape() else {
        return Err(Error::shape(
            "maxpool2d",
            format!("expected [C,H,W], got {:?}", input.shape()),
        ));
    };
    if size == 0 || size > h || size > w {
        return Err(Error::shape(
            "maxpool2d",
            format!("window {size} does not fit input {:?}", input.shape()),
        ));
    }
    let (oh, ow) = (h / size, w / size);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    let d = input.data();
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = ch * h * w + oy * size * w + ox * size;
                for dy in 0..size {
                    for dx in 0..size {
                        let idx = ch * h * w + (oy * size + dy) * w + ox * size + dx;
                        if d[idx] > d[best] {
                            best = idx;
                        }
                    }
                }
                out.push(d[best]);
                arg.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![c, oh, ow], out)?, arg))
}

/// `weight [M, N] · x` where `x` holds `N` values of any shape.
pub fn matvec(weight: &Tensor, x: &Tensor) -> Result<Tensor> {
    let &[m, n] = weight.shape() else {
        return Err(Error::shape(
            "matvec",
            format!("weight must be 2-D, got {:?}", weight.shape()),
        ));
    };
    if x.len() != n {
        return Err(Error::shape(
            "matvec",
            format!("weight {:?} applied to {} values", weight.shape(), x.len()),
        ));
    }
    let xs = x.data();
    let out = weight
        .data()
        .chunks_exact(n)
        .take(m)
        .map(|row| row.iter().zip(xs).map(|(a, b)| a * b).sum())
        .collect();
    Tensor::new(vec![m], out)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `log(sum(exp(z)))` without overflow.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_conv(input: &Tensor, k: &Tensor, stride: usize, pad: usize) -> Vec<f64> {
        let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (o, kh, kw) = (k.shape()[0], k.shape()[2], k.shape()[3]);
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (w + 2 * pad - kw) / stride + 1;
        let mut out = vec![0.0; o * oh * ow];
        for oc in 0..o {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = 0.0;
                    for ic in 0..c {
                        for ki in 0..kh {
                            for kj in 0..kw {
                                let iy = (y * stride + ki) as isize - pad as isize;
                                let ix = (x * stride + kj) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += input.data()[ic * h * w + iy as usize * w + ix as usize]
                                    * k.data()[((oc * c + ic) * kh + ki) * kw + kj];
                            }
                        }
                    }
                    out[(oc * oh + y) * ow + x] = acc;
                }
            }
        }
        out
    }

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::full(&[1, 3, 3], 1.0);
        let k = Tensor::full(&[1, 1, 1, 1], 1.0);
        let y = conv2d(&x, &k, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3]);
        assert!(y.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn full_sum_kernel() {
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let k = Tensor::full(&[1, 1, 2, 2], 1.0);
        let y = conv2d(&x, &k, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[10.0]);
    }

    #[test]
    fn matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&[2, 5, 5], &mut rng);
        let k = random(&[3, 2, 3, 3], &mut rng);
        for (stride, pad) in [(1, 0), (1, 1), (2, 0), (2, 1), (3, 2)] {
            let y = conv2d(&x, &k, stride, pad).unwrap();
            let want = naive_conv(&x, &k, stride, pad);
            assert_eq!(y.len(), want.len());
            for (a, b) in y.data().iter().zip(&want) {
                assert!(
                    (a - b).abs() < 1e-12,
                    "stride {stride} pad {pad}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn output_extents_follow_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for h in 3..8 {
            for k in 1..=3 {
                for stride in 1..=3 {
                    for pad in 0..=2 {
                        let x = random(&[1, h, h + 1], &mut rng);
                        let kern = random(&[2, 1, k, k], &mut rng);
                        let y = conv2d(&x, &kern, stride, pad).unwrap();
                        assert_eq!(y.shape()[1], (h + 2 * pad - k) / stride + 1);
                        assert_eq!(y.shape()[2], (h + 1 + 2 * pad - k) / stride + 1);
                        let want = naive_conv(&x, &kern, stride, pad);
                        assert!(y
                            .data()
                            .iter()
                            .zip(&want)
                            .all(|(a, b)| (a - b).abs() < 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn channel_mismatch_is_reported() {
        let x = Tensor::zeros(&[2, 4, 4]);
        let k = Tensor::zeros(&[1, 3, 3, 3]);
        let err = conv2d(&x, &k, 1, 0).unwrap_err().to_string();
        assert!(
            err.contains("2 channels") && err.contains("expect 3"),
            "{err}"
        );
    }

    #[test]
    fn maxpool_picks_first_max() {
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 3.0, 3.0, 0.0]).unwrap();
        let (y, arg) = maxpool2d(&x, 2).unwrap();
        assert_eq!(y.data(), &[3.0]);
        assert_eq!(arg, vec![1]);
    }

    #[test]
    fn softmax_normalizes() {
        let p = softmax(&[1000.0, 0.0, -3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
