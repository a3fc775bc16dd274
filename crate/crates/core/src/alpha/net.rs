//! Layer graph of the α network, shape propagation and the forward pass.

use std::collections::HashMap;

use super::tensor::{conv3d, upsample_nn2, Tensor};
use super::weights::WeightStore;
use super::Activation;
use crate::error::{Error, Result};
use crate::volume::AlphaVolume;
use crate::wssv::Wssv;

/// Name under which layers refer to the network input.
pub const NET_INPUT: &str = "wssv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv3d {
        stride: usize,
        dilation: usize,
        out_channels: usize,
    },
    /// 2x nearest-neighbour upsampling on all three spatial axes.
    NnUpsample,
}

/// One row of the graph. Several inputs are concatenated along channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetSpec {
    pub kernel: usize,
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

fn conv(name: &str, stride: usize, dilation: usize, out_channels: usize, input: &str) -> LayerSpec {
    LayerSpec {
        name: name.into(),
        kind: LayerKind::Conv3d {
            stride,
            dilation,
            out_channels,
        },
        inputs: vec![input.into()],
    }
}

fn nnup(name: &str, a: &str, b: &str) -> LayerSpec {
    LayerSpec {
        name: name.into(),
        kind: LayerKind::NnUpsample,
        inputs: vec![a.into(), b.into()],
    }
}

/// The 21-row encoder-decoder: three stride-2 stages, a dilated bottleneck
/// and three upsampling stages with skip concatenations.
pub fn encoder_decoder_spec() -> NetSpec {
    NetSpec {
        kernel: 3,
        input_channels: 3,
        layers: vec![
            conv("conv1_1", 1, 1, 8, NET_INPUT),
            conv("conv1_2", 2, 1, 16, "conv1_1"),
            conv("conv2_1", 1, 1, 16, "conv1_2"),
            conv("conv2_2", 2, 1, 32, "conv2_1"),
            conv("conv3_1", 1, 1, 32, "conv2_2"),
            conv("conv3_2", 1, 1, 32, "conv3_1"),
            conv("conv3_3", 2, 1, 64, "conv3_2"),
            conv("conv4_1", 1, 2, 64, "conv3_3"),
            conv("conv4_2", 1, 2, 64, "conv4_1"),
            conv("conv4_3", 1, 2, 64, "conv4_2"),
            nnup("nnup_5", "conv3_3", "conv4_3"),
            conv("conv5_1", 1, 1, 32, "nnup_5"),
            conv("conv5_2", 1, 1, 32, "conv5_1"),
            conv("conv5_3", 1, 1, 32, "conv5_2"),
            nnup("nnup_6", "conv2_2", "conv5_3"),
            conv("conv6_1", 1, 1, 16, "nnup_6"),
            conv("conv6_2", 1, 1, 16, "conv6_1"),
            nnup("nnup_7", "conv1_2", "conv6_2"),
            conv("conv7_1", 1, 1, 8, "nnup_7"),
            conv("conv7_2", 1, 1, 8, "conv7_1"),
            conv("conv7_3", 1, 1, 1, "conv7_2"),
        ],
    }
}

/// Input and output `[D0, D1, D2, C]` of one layer; the input is the
/// concatenation of all the layer's sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub name: String,
    pub input: [usize; 4],
    pub output: [usize; 4],
    /// Product of strides from the network input to this layer's input and output.
    pub stride_in: usize,
    pub stride_out: usize,
}

impl NetSpec {
    pub fn output_layer(&self) -> &str {
        self.layers.last().map(|l| l.name.as_str()).unwrap_or(NET_INPUT)
    }

    /// Propagates shapes without checking divisibility. Fails on unknown or
    /// forward references and on skip sources whose spatial dims differ.
    fn propagate(&self, input: [usize; 4]) -> Result<Vec<LayerShape>> {
        let mut known: HashMap<&str, ([usize; 4], usize)> = HashMap::new();
        known.insert(NET_INPUT, (input, 1));
        let mut out = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            if known.contains_key(l.name.as_str()) {
                return Err(Error::config(format!("duplicate layer name {}", l.name)));
            }
            let srcs = l
                .inputs
                .iter()
                .map(|i| {
                    known
                        .get(i.as_str())
                        .copied()
                        .ok_or_else(|| Error::config(format!("layer {} reads unknown input {i}", l.name)))
                })
                .collect::<Result<Vec<_>>>()?;
            let (first, stride_in) = *srcs
                .first()
                .ok_or_else(|| Error::config(format!("layer {} has no inputs", l.name)))?;
            if srcs.iter().any(|(s, _)| s[..3] != first[..3]) {
                return Err(Error::shape(format!(
                    "layer {}: concatenated inputs differ in spatial size",
                    l.name
                )));
            }
            let ch: usize = srcs.iter().map(|(s, _)| s[3]).sum();
            let in_shape = [first[0], first[1], first[2], ch];
            let (out_shape, stride_out) = match l.kind {
                LayerKind::Conv3d {
                    stride, out_channels, ..
                } => (
                    [
                        first[0].div_ceil(stride),
                        first[1].div_ceil(stride),
                        first[2].div_ceil(stride),
                        out_channels,
                    ],
                    stride_in * stride,
                ),
                LayerKind::NnUpsample => ([first[0] * 2, first[1] * 2, first[2] * 2, ch], stride_in / 2),
            };
            known.insert(&l.name, (out_shape, stride_out));
            out.push(LayerShape {
                name: l.name.clone(),
                input: in_shape,
                output: out_shape,
                stride_in,
                stride_out,
            });
        }
        Ok(out)
    }

    /// Largest accumulated stride reached anywhere in the graph.
    pub fn max_stride(&self) -> Result<usize> {
        let mut known: HashMap<&str, usize> = HashMap::from([(NET_INPUT, 1)]);
        let mut max = 1;
        for l in &self.layers {
            let src = l
                .inputs
                .first()
                .and_then(|i| known.get(i.as_str()))
                .copied()
                .ok_or_else(|| Error::config(format!("layer {} reads an unknown input", l.name)))?;
            let s = match l.kind {
                LayerKind::Conv3d { stride, .. } => src * stride,
                LayerKind::NnUpsample => (src / 2).max(1),
            };
            max = max.max(s);
            known.insert(&l.name, s);
        }
        Ok(max)
    }

    /// `(name, [k, k, k, in, out])` of every convolution.
    pub fn conv_shapes(&self) -> Result<Vec<(String, [usize; 5])>> {
        let m = self.max_stride()?;
        let shapes = self.propagate([m, m, m, self.input_channels])?;
        Ok(self
            .layers
            .iter()
            .zip(shapes)
            .filter_map(|(l, s)| match l.kind {
                LayerKind::Conv3d { out_channels, .. } => {
                    Some((l.name.clone(), [self.kernel, self.kernel, self.kernel, s.input[3], out_channels]))
                }
                LayerKind::NnUpsample => None,
            })
            .collect())
    }
}

/// Per-layer shapes for an `[H, W, N, C]` input. Every spatial dimension
/// must be divisible by the network's total stride.
pub fn shape_check(spec: &NetSpec, input: [usize; 4]) -> Result<Vec<LayerShape>> {
    let m = spec.max_stride()?;
    for (dim, label) in input[..3].iter().zip(["height", "width", "layer count"]) {
        if *dim == 0 || dim % m != 0 {
            return Err(Error::precondition(format!(
                "input {label} {dim} is not a positive multiple of {m}"
            )));
        }
    }
    if input[3] != spec.input_channels {
        return Err(Error::shape(format!(
            "input has {} channels, network expects {}",
            input[3], spec.input_channels
        )));
    }
    spec.propagate(input)
}

impl Tensor {
    /// `[H, W, N, 3]` colour volume.
    pub fn from_wssv(wssv: &Wssv) -> Tensor {
        let [h, w, n, c] = wssv.shape();
        Tensor::from_vec([h, w, n], c, wssv.color().to_vec()).expect("WSSV buffer is consistent")
    }
}

/// Runs the network up to and including `target`, returning that layer's
/// output (after ReLU for hidden convolutions; raw for the final one).
pub fn forward_to(spec: &NetSpec, weights: &WeightStore, input: &Tensor, target: &str) -> Result<Tensor> {
    shape_check(spec, input.shape())?;
    weights.validate(spec)?;
    let stop = spec
        .layers
        .iter()
        .position(|l| l.name == target)
        .ok_or_else(|| Error::config(format!("no layer named {target}")))?;
    let mut last_use: HashMap<&str, usize> = HashMap::new();
    for (i, l) in spec.layers[..=stop].iter().enumerate() {
        for src in &l.inputs {
            last_use.insert(src, i);
        }
    }
    let output = spec.output_layer();
    let mut live: HashMap<&str, Tensor> = HashMap::new();
    for (i, l) in spec.layers[..=stop].iter().enumerate() {
        let srcs: Vec<&Tensor> = l
            .inputs
            .iter()
            .map(|s| if s == NET_INPUT { input } else { &live[s.as_str()] })
            .collect();
        let joined;
        let x = if srcs.len() == 1 {
            srcs[0]
        } else {
            joined = Tensor::concat(&srcs)?;
            &joined
        };
        let y = match l.kind {
            LayerKind::Conv3d { stride, dilation, .. } => {
                let w = weights.get(&l.name).expect("validated");
                conv3d(x, w, stride, dilation, l.name != output)?
            }
            LayerKind::NnUpsample => upsample_nn2(x),
        };
        if i == stop {
            return Ok(y);
        }
        live.retain(|k, _| last_use.get(k).is_some_and(|&u| u > i));
        live.insert(&l.name, y);
    }
    unreachable!("stop index is within the layer list")
}

/// Full forward pass followed by the output activation.
pub fn forward(spec: &NetSpec, weights: &WeightStore, input: &Tensor, act: Activation) -> Result<AlphaVolume> {
    let raw = forward_to(spec, weights, input, spec.output_layer())?;
    if raw.channels != 1 {
        return Err(Error::shape(format!("network output has {} channels, expected 1", raw.channels)));
    }
    let [h, w, n] = raw.dims;
    AlphaVolume::from_vec(h, w, n, raw.data.into_iter().map(|x| act.apply(x)).collect())
}
