//! Convolution weights and their binary file layout.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::net::{LayerKind, NetSpec};
use crate::error::{Error, Result};
use crate::io::{read_f32s, read_u32, write_f32s};

/// Kernel `[k, k, k, in, out]` and bias `[out]` of one convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub name: String,
    pub shape: [usize; 5],
    pub kernel: Vec<f32>,
    pub bias: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightStore {
    pub layers: Vec<ConvWeights>,
}

const MAGIC: &[u8; 4] = b"SSWT";
const VERSION: u32 = 1;
const MAX_NAME: usize = 256;

impl WeightStore {
    /// All-zero kernels and biases for every convolution in `spec`.
    pub fn zeros(spec: &NetSpec) -> Result<Self> {
        Self::build(spec, |_, _| 0.0)
    }

    /// He-uniform kernels from a seeded ChaCha stream, zero biases.
    pub fn random(spec: &NetSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(spec, move |shape, _| {
            let fan_in = (shape[0] * shape[1] * shape[2] * shape[3]) as f32;
            let bound = (6.0 / fan_in).sqrt();
            rng.random_range(-bound..bound)
        })
    }

    fn build(spec: &NetSpec, mut init: impl FnMut([usize; 5], usize) -> f32) -> Result<Self> {
        let layers = spec
            .conv_shapes()?
            .into_iter()
            .map(|(name, shape)| {
                let n: usize = shape.iter().product();
                ConvWeights {
                    name,
                    shape,
                    kernel: (0..n).map(|i| init(shape, i)).collect(),
                    bias: vec![0.0; shape[4]],
                }
            })
            .collect();
        Ok(WeightStore { layers })
    }

    pub fn get(&self, name: &str) -> Option<&ConvWeights> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ConvWeights> {
        self.layers.iter_mut().find(|l| l.name == name)
    }

    /// Every convolution in `spec` has weights of the expected shape.
    pub fn validate(&self, spec: &NetSpec) -> Result<()> {
        for (name, shape) in spec.conv_shapes()? {
            let w = self
                .get(&name)
                .ok_or_else(|| Error::shape(format!("no weights for layer {name}")))?;
            if w.shape != shape {
                return Err(Error::shape(format!(
                    "layer {name}: weights have shape {:?}, network expects {shape:?}",
                    w.shape
                )));
            }
            if w.kernel.len() != shape.iter().product::<usize>() || w.bias.len() != shape[4] {
                return Err(Error::shape(format!("layer {name}: buffer sizes do not match shape")));
            }
        }
        let convs = spec.layers.iter().filter(|l| matches!(l.kind, LayerKind::Conv3d { .. })).count();
        if self.layers.len() != convs {
            return Err(Error::shape(format!(
                "weight file has {} layers, network has {convs} convolutions",
                self.layers.len()
            )));
        }
        Ok(())
    }

    /// Little-endian: magic `SSWT`, version, layer count (u32); then per
    /// layer the name length (u32) and UTF-8 name, kernel shape (5 x u32),
    /// kernel data (f32), bias length (u32) and bias data (f32).
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for l in &self.layers {
            w.write_all(&(l.name.len() as u32).to_le_bytes())?;
            w.write_all(l.name.as_bytes())?;
            for s in l.shape {
                w.write_all(&(s as u32).to_le_bytes())?;
            }
            write_f32s(w, &l.kernel)?;
            w.write_all(&(l.bias.len() as u32).to_le_bytes())?;
            write_f32s(w, &l.bias)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        const WHAT: &str = "weight file";
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format(WHAT, "bad magic"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::format(WHAT, format!("unsupported version {version}")));
        }
        let count = read_u32(r)? as usize;
        let mut layers = Vec::new();
        for _ in 0..count {
            let len = read_u32(r)? as usize;
            if len > MAX_NAME {
                return Err(Error::format(WHAT, format!("layer name length {len} too large")));
            }
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::format(WHAT, "layer name is not UTF-8"))?;
            let mut shape = [0usize; 5];
            for s in &mut shape {
                *s = read_u32(r)? as usize;
            }
            let kernel = read_f32s(r, shape.iter().product(), WHAT)?;
            let blen = read_u32(r)? as usize;
            if blen != shape[4] {
                return Err(Error::format(WHAT, format!("layer {name}: bias length {blen} != {}", shape[4])));
            }
            let bias = read_f32s(r, blen, WHAT)?;
            layers.push(ConvWeights {
                name,
                shape,
                kernel,
                bias,
            });
        }
        Ok(WeightStore { layers })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(crate::io::open(path)?);
        Self::read_from(&mut f)
    }
}
