//! Dense channel-last 3-D feature maps and the few ops the network needs.

use rayon::prelude::*;

use super::weights::ConvWeights;
use crate::error::{Error, Result};

/// `[D0, D1, D2, C]` with channels fastest. For network inputs `D0 = H`,
/// `D1 = W`, `D2 = N` (sweep layer).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: [usize; 3],
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(dims: [usize; 3], channels: usize) -> Self {
        Tensor {
            dims,
            channels,
            data: vec![0.0; dims[0] * dims[1] * dims[2] * channels],
        }
    }

    pub fn from_vec(dims: [usize; 3], channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != dims[0] * dims[1] * dims[2] * channels {
            return Err(Error::shape(format!(
                "tensor buffer of {} values does not match {dims:?}x{channels}",
                data.len()
            )));
        }
        Ok(Tensor { dims, channels, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.dims[0], self.dims[1], self.dims[2], self.channels]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        ((i * self.dims[1] + j) * self.dims[2] + k) * self.channels
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> &[f32] {
        let b = self.index(i, j, k);
        &self.data[b..b + self.channels]
    }

    pub fn at_mut(&mut self, i: usize, j: usize, k: usize) -> &mut [f32] {
        let b = self.index(i, j, k);
        let c = self.channels;
        &mut self.data[b..b + c]
    }

    /// Channel concatenation of tensors with equal spatial dims.
    pub fn concat(parts: &[&Tensor]) -> Result<Tensor> {
        let dims = parts.first().ok_or_else(|| Error::shape("nothing to concatenate"))?.dims;
        if parts.iter().any(|p| p.dims != dims) {
            return Err(Error::shape(format!(
                "cannot concatenate tensors with spatial dims {:?}",
                parts.iter().map(|p| p.dims).collect::<Vec<_>>()
            )));
        }
        let channels = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2] * channels);
        for v in 0..dims[0] * dims[1] * dims[2] {
            for p in parts {
                data.extend_from_slice(&p.data[v * p.channels..(v + 1) * p.channels]);
            }
        }
        Ok(Tensor { dims, channels, data })
    }
}

/// Output size and leading pad for "same" padding: `out = ceil(in / s)`,
/// total padding `max((out - 1) s + d (k - 1) + 1 - in, 0)`, split with the
/// smaller half in front.
pub fn same_padding(input: usize, kernel: usize, stride: usize, dilation: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let k_eff = dilation * (kernel - 1) + 1;
    let total = ((out - 1) * stride + k_eff).saturating_sub(input);
    (out, total / 2)
}

/// 3x3x3 convolution with zero padding, applied isotropically with the given
/// stride and dilation, followed by ReLU when `relu` is set.
pub fn conv3d(input: &Tensor, w: &ConvWeights, stride: usize, dilation: usize, relu: bool) -> Result<Tensor> {
    let [k0, k1, k2, cin, cout] = w.shape;
    if cin != input.channels {
        return Err(Error::shape(format!(
            "{}: kernel expects {cin} input channels, got {}",
            w.name, input.channels
        )));
    }
    if stride == 0 || dilation == 0 {
        return Err(Error::domain(format!("{}: stride and dilation must be positive", w.name)));
    }
    let k = [k0, k1, k2];
    let mut out_dims = [0; 3];
    let mut pad = [0isize; 3];
    for a in 0..3 {
        let (o, p) = same_padding(input.dims[a], k[a], stride, dilation);
        out_dims[a] = o;
        pad[a] = p as isize;
    }
    let mut out = Tensor::zeros(out_dims, cout);
    let row = out_dims[1] * out_dims[2] * cout;
    let in_dims = input.dims.map(|d| d as isize);
    let (s, d) = (stride as isize, dilation as isize);

    out.data.par_chunks_mut(row).enumerate().for_each(|(o0, orow)| {
        let mut acc = vec![0.0f32; cout];
        for o1 in 0..out_dims[1] {
            for o2 in 0..out_dims[2] {
                acc.copy_from_slice(&w.bias);
                for a in 0..k0 {
                    let i0 = o0 as isize * s + a as isize * d - pad[0];
                    if i0 < 0 || i0 >= in_dims[0] {
                        continue;
                    }
                    for b in 0..k1 {
                        let i1 = o1 as isize * s + b as isize * d - pad[1];
                        if i1 < 0 || i1 >= in_dims[1] {
                            continue;
                        }
                        for c in 0..k2 {
                            let i2 = o2 as isize * s + c as isize * d - pad[2];
                            if i2 < 0 || i2 >= in_dims[2] {
                                continue;
                            }
                            let src = input.at(i0 as usize, i1 as usize, i2 as usize);
                            let kb = ((a * k1 + b) * k2 + c) * cin * cout;
                            for (ci, &v) in src.iter().enumerate() {
                                if v == 0.0 {
                                    continue;
                                }
                                let kr = &w.kernel[kb + ci * cout..kb + (ci + 1) * cout];
                                for (acc_o, &kv) in acc.iter_mut().zip(kr) {
                                    *acc_o += v * kv;
                                }
                            }
                        }
                    }
                }
                let dst = &mut orow[(o1 * out_dims[2] + o2) * cout..(o1 * out_dims[2] + o2 + 1) * cout];
                for (o, &v) in dst.iter_mut().zip(&acc) {
                    *o = if relu { v.max(0.0) } else { v };
                }
            }
        }
    });
    Ok(out)
}

/// Nearest-neighbour 2x upsampling along all three spatial axes.
pub fn upsample_nn2(t: &Tensor) -> Tensor {
    let dims = t.dims.map(|d| d * 2);
    let c = t.channels;
    let mut out = Tensor::zeros(dims, c);
    let row = dims[1] * dims[2] * c;
    out.data.par_chunks_mut(row).enumerate().for_each(|(i, orow)| {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let dst = (j * dims[2] + k) * c;
                orow[dst..dst + c].copy_from_slice(t.at(i / 2, j / 2, k / 2));
            }
        }
    });
    out
}
