//! Per-layer scalar volumes (`[H, W, N]`, layer index fastest), used for α.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::io::{read_f32s, read_u32, write_f32s};

/// Scalar value per ERP pixel per sweep layer. Layer 0 is the innermost sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVolume {
    height: usize,
    width: usize,
    layers: usize,
    data: Vec<f32>,
}

const MAGIC: &[u8; 4] = b"SSAV";
const VERSION: u32 = 1;

impl AlphaVolume {
    pub fn zeros(height: usize, width: usize, layers: usize) -> Self {
        AlphaVolume {
            height,
            width,
            layers,
            data: vec![0.0; height * width * layers],
        }
    }

    pub fn from_vec(height: usize, width: usize, layers: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * layers {
            return Err(Error::shape(format!(
                "volume buffer of {} values does not match [{height}, {width}, {layers}]",
                data.len()
            )));
        }
        Ok(AlphaVolume {
            height,
            width,
            layers,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    /// `[H, W, N, 1]`.
    pub fn shape(&self) -> [usize; 4] {
        [self.height, self.width, self.layers, 1]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, n: usize) -> f32 {
        self.data[(y * self.width + x) * self.layers + n]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, n: usize, v: f32) {
        self.data[(y * self.width + x) * self.layers + n] = v;
    }

    /// All layer values of one pixel.
    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        let i = (y * self.width + x) * self.layers;
        &self.data[i..i + self.layers]
    }

    /// Little-endian: magic `SSAV`, version, H, W, N (u32), then `H*W*N` f32.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [VERSION, self.height as u32, self.width as u32, self.layers as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        write_f32s(w, &self.data)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("alpha volume", "bad magic"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::format("alpha volume", format!("unsupported version {version}")));
        }
        let h = read_u32(r)? as usize;
        let w = read_u32(r)? as usize;
        let n = read_u32(r)? as usize;
        let data = read_f32s(r, h * w * n, "alpha volume")?;
        AlphaVolume::from_vec(h, w, n, data)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(crate::io::open(path)?);
        AlphaVolume::read_from(&mut f)
    }
}
