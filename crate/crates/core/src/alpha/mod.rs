//! α estimation from a sweep volume: a training-free photo-consistency
//! estimator and the forward pass of the 3D encoder-decoder network.

mod net;
mod tensor;
mod weights;

pub use net::{forward, forward_to, encoder_decoder_spec, shape_check, LayerKind, LayerShape, LayerSpec, NetSpec, NET_INPUT};
pub use tensor::{conv3d, same_padding, upsample_nn2, Tensor};
pub use weights::{ConvWeights, WeightStore};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::AlphaVolume;
use crate::wssv::{softmax_weights, Wssv};

/// Output nonlinearity mapping raw network output to α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    /// `min(max(x, 0), 1)`
    ReluClamp,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Activation::ReluClamp => x.clamp(0.0, 1.0),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "reluclamp" => Ok(Activation::ReluClamp),
            _ => Err(Error::config(format!("unknown activation {s:?} (expected sigmoid or reluclamp)"))),
        }
    }
}

/// Applies `act` to every raw value.
pub fn alpha_activation(raw: &AlphaVolume, act: Activation) -> AlphaVolume {
    let data = raw.data().iter().map(|&x| act.apply(x)).collect();
    AlphaVolume::from_vec(raw.height(), raw.width(), raw.layers(), data).expect("same size")
}

pub const DEFAULT_BETA: f64 = 50.0;
pub const DEFAULT_SUPPORT_RADIUS: usize = 1;

/// Parameters of [`photoconsistency_alpha`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotoParams {
    /// Softmax sharpness applied to `-variance`.
    pub beta: f64,
    /// Half-width of the box filter over the layer axis; 0 disables it.
    pub support_radius: usize,
}

impl Default for PhotoParams {
    fn default() -> Self {
        PhotoParams {
            beta: DEFAULT_BETA,
            support_radius: DEFAULT_SUPPORT_RADIUS,
        }
    }
}

/// Converts per-layer visibility weights into compositing α, front to back,
/// so that over-compositing reproduces the weights.
pub fn weights_to_alpha(w: &[f64]) -> Vec<f64> {
    let mut seen = 0.0f64;
    w.iter()
        .map(|&wi| {
            let rest = 1.0 - seen;
            seen += wi;
            if rest <= 0.0 {
                1.0
            } else {
                (wi / rest).clamp(0.0, 1.0)
            }
        })
        .collect()
}

/// Per-layer scores at one pixel, after optional box smoothing over valid
/// neighbours. Invalid layers score `-inf`.
fn layer_scores(var: &[f32], count: &[u32], radius: usize, out: &mut Vec<f64>) {
    let n = var.len();
    out.clear();
    for i in 0..n {
        if count[i] == 0 {
            out.push(f64::NEG_INFINITY);
            continue;
        }
        let (lo, hi) = (i.saturating_sub(radius), (i + radius).min(n - 1));
        let (mut s, mut k) = (0.0f64, 0usize);
        for j in lo..=hi {
            if count[j] > 0 {
                s -= var[j] as f64;
                k += 1;
            }
        }
        out.push(s / k as f64);
    }
}

/// Training-free α: layers where the captures agree (low variance) become
/// opaque. Pixels with no valid layer get α = 0.
pub fn photoconsistency_alpha(wssv: &Wssv, params: &PhotoParams) -> Result<AlphaVolume> {
    if !(params.beta > 0.0 && params.beta.is_finite()) {
        return Err(Error::domain(format!("beta must be positive, got {}", params.beta)));
    }
    let [h, w, n, _] = wssv.shape();
    let mut data = vec![0.0f32; h * w * n];
    data.par_chunks_mut(w * n).enumerate().for_each(|(y, row)| {
        let mut scores = Vec::with_capacity(n);
        for x in 0..w {
            let base = (y * w + x) * n;
            let count = &wssv.count()[base..base + n];
            if count.iter().all(|&c| c == 0) {
                continue;
            }
            layer_scores(&wssv.variance()[base..base + n], count, params.support_radius, &mut scores);
            let scaled: Vec<f64> = scores.iter().map(|s| params.beta * s).collect();
            let weights = softmax_weights(&scaled);
            for (o, a) in row[x * n..x * n + n].iter_mut().zip(weights_to_alpha(&weights)) {
                *o = a as f32;
            }
        }
    });
    AlphaVolume::from_vec(h, w, n, data)
}
