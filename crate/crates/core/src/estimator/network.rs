use super::{Architecture, Example, RegressorParams};
use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};

/// Gradient buffers laid out like [`RegressorParams::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(p: &RegressorParams) -> Self {
        Self {
            tensors: p.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn check_shape(params: &RegressorParams, spec: &MelSpectrogram) -> Result<()> {
    if spec.shape() != params.input_shape {
        return Err(Error::Shape(format!(
            "model expects {:?} input, got {:?}",
            params.input_shape,
            spec.shape()
        )));
    }
    Ok(())
}

/// `out[co] = bias[co] + sum_ci k[co,ci] * in[ci]` with 3x3 zero-padded windows.
fn conv3x3(input: &[f64], c_in: usize, h: usize, w: usize, kernel: &[f64], bias: &[f64]) -> Vec<f64> {
    let c_out = bias.len();
    let plane = h * w;
    let mut out = vec![0.0; c_out * plane];
    for co in 0..c_out {
        let o = &mut out[co * plane..(co + 1) * plane];
        o.fill(bias[co]);
        for ci in 0..c_in {
            let x = &input[ci * plane..(ci + 1) * plane];
            for di in 0..3 {
                for dj in 0..3 {
                    let k = kernel[((co * c_in + ci) * 3 + di) * 3 + dj];
                    let (i0, i1) = (1usize.saturating_sub(di), (h + 1 - di).min(h));
                    let (j0, j1) = (1usize.saturating_sub(dj), (w + 1 - dj).min(w));
                    for i in i0..i1 {
                        let src = (i + di - 1) * w;
                        let dst = i * w;
                        for j in j0..j1 {
                            o[dst + j] += k * x[src + j + dj - 1];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates kernel/bias gradients and, when `d_input` is given, the input gradient.
#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f64],
    c_in: usize,
    h: usize,
    w: usize,
    kernel: &[f64],
    d_out: &[f64],
    d_kernel: &mut [f64],
    d_bias: &mut [f64],
    mut d_input: Option<&mut [f64]>,
) {
    let c_out = d_bias.len();
    let plane = h * w;
    for co in 0..c_out {
        let g = &d_out[co * plane..(co + 1) * plane];
        d_bias[co] += g.iter().sum::<f64>();
        for ci in 0..c_in {
            let x = &input[ci * plane..(ci + 1) * plane];
            for di in 0..3 {
                for dj in 0..3 {
                    let idx = ((co * c_in + ci) * 3 + di) * 3 + dj;
                    let k = kernel[idx];
                    let (i0, i1) = (1usize.saturating_sub(di), (h + 1 - di).min(h));
                    let (j0, j1) = (1usize.saturating_sub(dj), (w + 1 - dj).min(w));
                    let mut acc = 0.0;
                    for i in i0..i1 {
                        let src = (i + di - 1) * w;
                        let dst = i * w;
                        for j in j0..j1 {
                            acc += g[dst + j] * x[src + j + dj - 1];
                        }
                    }
                    d_kernel[idx] += acc;
                    if let Some(dx) = d_input.as_deref_mut() {
                        let dx = &mut dx[ci * plane..(ci + 1) * plane];
                        for i in i0..i1 {
                            let src = (i + di - 1) * w;
                            let dst = i * w;
                            for j in j0..j1 {
                                dx[src + j + dj - 1] += k * g[dst + j];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn relu_pool(pre: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (h2, w2) = (h / 2, w / 2);
    let mut out = vec![0.0; c * h2 * w2];
    for ch in 0..c {
        let p = &pre[ch * h * w..(ch + 1) * h * w];
        for i in 0..h2 {
            for j in 0..w2 {
                let s: f64 = [(0, 0), (0, 1), (1, 0), (1, 1)]
                    .iter()
                    .map(|&(a, b)| p[(2 * i + a) * w + 2 * j + b].max(0.0))
                    .sum();
                out[(ch * h2 + i) * w2 + j] = 0.25 * s;
            }
        }
    }
    out
}

/// Gradient w.r.t. the conv output given the gradient w.r.t. the pooled output.
fn relu_pool_backward(pre: &[f64], c: usize, h: usize, w: usize, d_pooled: &[f64]) -> Vec<f64> {
    let (h2, w2) = (h / 2, w / 2);
    let mut d_pre = vec![0.0; c * h * w];
    for ch in 0..c {
        for i in 0..h2 {
            for j in 0..w2 {
                let g = 0.25 * d_pooled[(ch * h2 + i) * w2 + j];
                for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let idx = ch * h * w + (2 * i + a) * w + 2 * j + b;
                    if pre[idx] > 0.0 {
                        d_pre[idx] = g;
                    }
                }
            }
        }
    }
    d_pre
}

struct Block {
    input: Vec<f64>,
    pre: Vec<f64>,
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
}

struct ConvTrace {
    blocks: Vec<Block>,
    features: Vec<f64>,
    last_plane: usize,
}

fn conv_forward(params: &RegressorParams, spec: &MelSpectrogram) -> (f64, ConvTrace) {
    let (mut h, mut w) = params.input_shape;
    let mut x = spec.data().to_vec();
    let mut c_in = 1;
    let n_blocks = (params.tensors.len() - 2) / 2;
    let mut blocks = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let (k, bias) = (&params.tensors[2 * b], &params.tensors[2 * b + 1]);
        let c_out = bias.data.len();
        let pre = conv3x3(&x, c_in, h, w, &k.data, &bias.data);
        let pooled = relu_pool(&pre, c_out, h, w);
        blocks.push(Block {
            input: std::mem::replace(&mut x, pooled),
            pre,
            c_in,
            c_out,
            h,
            w,
        });
        c_in = c_out;
        h /= 2;
        w /= 2;
    }
    let plane = h * w;
    let features: Vec<f64> = x
        .chunks_exact(plane)
        .map(|c| c.iter().sum::<f64>() / plane as f64)
        .collect();
    let head_w = &params.tensors[2 * n_blocks].data;
    let head_b = params.tensors[2 * n_blocks + 1].data[0];
    let y = head_b + features.iter().zip(head_w).map(|(a, b)| a * b).sum::<f64>();
    (
        y,
        ConvTrace {
            blocks,
            features,
            last_plane: plane,
        },
    )
}

pub fn forward(params: &RegressorParams, spec: &MelSpectrogram) -> Result<f64> {
    check_shape(params, spec)?;
    Ok(match params.architecture {
        Architecture::Linear => {
            params.tensors[1].data[0]
                + params.tensors[0]
                    .data
                    .iter()
                    .zip(spec.data())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        }
        Architecture::SmallConv => conv_forward(params, spec).0,
    })
}

/// Batch-mean squared error and its exact gradient.
pub fn grad(params: &RegressorParams, batch: &[Example]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::Argument("gradient of an empty batch".into()));
    }
    let mut g = Gradients::zeros_like(params);
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for (spec, target) in batch {
        check_shape(params, spec)?;
        match params.architecture {
            Architecture::Linear => {
                let y = forward(params, spec)?;
                let r = y - target;
                loss += r * r / n;
                let dy = 2.0 * r / n;
                for (gw, x) in g.tensors[0].iter_mut().zip(spec.data()) {
                    *gw += dy * x;
                }
                g.tensors[1][0] += dy;
            }
            Architecture::SmallConv => {
                let (y, trace) = conv_forward(params, spec);
                let r = y - target;
                loss += r * r / n;
                conv_backward(params, &trace, 2.0 * r / n, &mut g);
            }
        }
    }
    Ok((loss, g))
}

fn conv_backward(params: &RegressorParams, trace: &ConvTrace, dy: f64, g: &mut Gradients) {
    let nb = trace.blocks.len();
    let head_w = &params.tensors[2 * nb].data;
    for (k, f) in trace.features.iter().enumerate() {
        g.tensors[2 * nb][k] += dy * f;
    }
    g.tensors[2 * nb + 1][0] += dy;
    // global average pool spreads evenly over the last pooled map
    let plane = trace.last_plane;
    let mut d_x: Vec<f64> = head_w
        .iter()
        .flat_map(|&hw| std::iter::repeat_n(dy * hw / plane as f64, plane))
        .collect();
    for (b, blk) in trace.blocks.iter().enumerate().rev() {
        let d_pre = relu_pool_backward(&blk.pre, blk.c_out, blk.h, blk.w, &d_x);
        let (head, tail) = g.tensors.split_at_mut(2 * b + 1);
        let d_kernel = &mut head[2 * b];
        let d_bias = &mut tail[0];
        let mut d_in = if b > 0 {
            Some(vec![0.0; blk.c_in * blk.h * blk.w])
        } else {
            None
        };
        conv3x3_backward(
            &blk.input,
            blk.c_in,
            blk.h,
            blk.w,
            &params.tensors[2 * b].data,
            &d_pre,
            d_kernel,
            d_bias,
            d_in.as_deref_mut(),
        );
        if let Some(d) = d_in {
            d_x = d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{init_params, RegressorConfig};

    #[test]
    fn linear_constant_bias() {
        let mut p = init_params(&RegressorConfig::linear(), (2, 3)).unwrap();
        p.tensors[0].data.fill(0.0);
        p.tensors[1].data[0] = 0.5;
        let s = MelSpectrogram::new(2, 3, vec![9.0, -1.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(forward(&p, &s).unwrap(), 0.5);
    }

    #[test]
    fn zero_conv_outputs_zero() {
        let mut p = init_params(&RegressorConfig::default(), (16, 8)).unwrap();
        for t in &mut p.tensors {
            t.data.fill(0.0);
        }
        let s = MelSpectrogram::new(16, 8, (0..128).map(|i| i as f64).collect()).unwrap();
        assert_eq!(forward(&p, &s).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let p = init_params(&RegressorConfig::linear(), (2, 3)).unwrap();
        let s = MelSpectrogram::zeros(3, 2);
        assert!(matches!(forward(&p, &s), Err(Error::Shape(_))));
        assert!(matches!(grad(&p, &[(&s, 0.0)]), Err(Error::Shape(_))));
        assert!(grad(&p, &[]).is_err());
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        for cfg in [RegressorConfig::linear(), RegressorConfig::default()] {
            let p = init_params(&cfg, (8, 8)).unwrap();
            let s = MelSpectrogram::new(8, 8, (0..64).map(|i| (i as f64).sin()).collect()).unwrap();
            let y = forward(&p, &s).unwrap();
            let (loss, g) = grad(&p, &[(&s, y)]).unwrap();
            assert_eq!(loss, 0.0);
            assert_eq!(g.max_abs(), 0.0);
        }
    }

    #[test]
    fn linear_closed_form_gradient() {
        let p = init_params(&RegressorConfig::linear(), (1, 3)).unwrap();
        let s = MelSpectrogram::new(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        let y = forward(&p, &s).unwrap();
        let (_, g) = grad(&p, &[(&s, 1.0)]).unwrap();
        for (gw, x) in g.tensors[0].iter().zip(s.data()) {
            assert!((gw - 2.0 * (y - 1.0) * x).abs() < 1e-15);
        }
        assert!((g.tensors[1][0] - 2.0 * (y - 1.0)).abs() < 1e-15);
    }
}
