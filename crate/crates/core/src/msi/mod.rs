//! Multi-sphere image: `N` concentric RGBA spheres, rendered by front-to-back
//! "over" compositing from any eye position inside the innermost sphere.

mod bundle;
mod render;

pub use bundle::{export_msi, import_msi, BundleManifest, BUNDLE_FORMAT_VERSION, BUNDLE_MANIFEST};
pub use render::{
    render_grad_alpha, render_loss_l1, render_view, render_view_full, LossView, RenderOutput, ViewOutput,
    ViewRequest,
};

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{ErpGrid, Pose};
use crate::image::Image;
use crate::io::{read_f32s, read_f64, read_u32, write_f32s};
use crate::volume::AlphaVolume;
use crate::wssv::{read_pose, write_pose, SweepRadii, Wssv};

/// Tolerance for α values slightly outside `[0, 1]` from floating-point noise;
/// they are clamped. Anything further out is rejected.
pub const ALPHA_SLACK: f32 = 1e-4;

/// Layer 0 is the innermost sphere. Each layer is a 4-channel straight-alpha
/// ERP image (RGB in display encoding, then α).
#[derive(Debug, Clone, PartialEq)]
pub struct Msi {
    grid: ErpGrid,
    radii: SweepRadii,
    center: Pose,
    layers: Vec<Image>,
}

impl Msi {
    pub fn new(grid: ErpGrid, radii: SweepRadii, center: Pose, layers: Vec<Image>) -> Result<Msi> {
        if layers.len() != radii.len() {
            return Err(Error::shape(format!(
                "{} layers but {} radii",
                layers.len(),
                radii.len()
            )));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.width() != grid.width() || l.height() != grid.height() || l.channels() != 4 {
                return Err(Error::shape(format!(
                    "layer {i} is {}x{}x{}, expected {}x{}x4",
                    l.width(),
                    l.height(),
                    l.channels(),
                    grid.width(),
                    grid.height()
                )));
            }
            if l.data().chunks_exact(4).any(|p| !(p[3] >= 0.0 && p[3] <= 1.0)) {
                return Err(Error::domain(format!("layer {i} has alpha outside [0, 1]")));
            }
        }
        Ok(Msi {
            grid,
            radii,
            center,
            layers,
        })
    }

    /// Builds an MSI from layers in arbitrary order, sorting by radius.
    pub fn from_unsorted(grid: ErpGrid, radii: Vec<f64>, center: Pose, layers: Vec<Image>) -> Result<Msi> {
        if radii.len() != layers.len() {
            return Err(Error::shape("radii and layer counts differ"));
        }
        let mut pairs: Vec<(f64, Image)> = radii.into_iter().zip(layers).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (radii, layers): (Vec<f64>, Vec<Image>) = pairs.into_iter().unzip();
        Msi::new(grid, SweepRadii::from_radii(radii)?, center, layers)
    }

    pub fn grid(&self) -> &ErpGrid {
        &self.grid
    }

    pub fn radii(&self) -> &SweepRadii {
        &self.radii
    }

    pub fn center(&self) -> &Pose {
        &self.center
    }

    pub fn layers(&self) -> &[Image] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &Image {
        &self.layers[i]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// α of every layer as an `[H, W, N]` volume.
    pub fn alpha_volume(&self) -> AlphaVolume {
        let (w, h, n) = (self.grid.width(), self.grid.height(), self.num_layers());
        let mut data = vec![0.0f32; w * h * n];
        for (j, l) in self.layers.iter().enumerate() {
            for (i, p) in l.data().chunks_exact(4).enumerate() {
                data[i * n + j] = p[3];
            }
        }
        AlphaVolume::from_vec(h, w, n, data).expect("sizes agree")
    }

    /// Replaces α of every layer, keeping colours.
    pub fn with_alpha(&self, alpha: &AlphaVolume) -> Result<Msi> {
        let (w, h, n) = (self.grid.width(), self.grid.height(), self.num_layers());
        if alpha.shape() != [h, w, n, 1] {
            return Err(Error::shape(format!(
                "alpha volume {:?} does not match MSI [{h}, {w}, {n}, 1]",
                alpha.shape()
            )));
        }
        let mut layers = self.layers.clone();
        for (j, l) in layers.iter_mut().enumerate() {
            for (i, p) in l.data_mut().chunks_exact_mut(4).enumerate() {
                p[3] = checked_alpha(alpha.data()[i * n + j])?;
            }
        }
        Msi::new(self.grid, self.radii.clone(), self.center, layers)
    }

    /// Binary container, little-endian: magic `SSMI`, version, H, W, N (u32),
    /// radii (f64 x N), centre pose (f64 x 12, rotation row-major then
    /// translation), then layers in order as `[H, W, 4]` f32.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MSI_MAGIC)?;
        let n = self.num_layers();
        for v in [MSI_VERSION, self.grid.height() as u32, self.grid.width() as u32, n as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for r in self.radii.radii() {
            w.write_all(&r.to_le_bytes())?;
        }
        write_pose(w, &self.center)?;
        for l in &self.layers {
            write_f32s(w, l.data())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Msi> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MSI_MAGIC {
            return Err(Error::format("MSI file", "bad magic"));
        }
        let version = read_u32(r)?;
        if version != MSI_VERSION {
            return Err(Error::format("MSI file", format!("unsupported version {version}")));
        }
        let h = read_u32(r)? as usize;
        let w = read_u32(r)? as usize;
        let n = read_u32(r)? as usize;
        let grid = ErpGrid::new(w, h)?;
        let radii = SweepRadii::from_radii((0..n).map(|_| read_f64(r)).collect::<Result<_>>()?)?;
        let center = read_pose(r)?;
        let layers = (0..n)
            .map(|_| Image::from_vec(w, h, 4, read_f32s(r, w * h * 4, "MSI file")?))
            .collect::<Result<Vec<_>>>()?;
        Msi::new(grid, radii, center, layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Msi> {
        let mut f = std::io::BufReader::new(crate::io::open(path)?);
        Msi::read_from(&mut f)
    }
}

const MSI_MAGIC: &[u8; 4] = b"SSMI";
const MSI_VERSION: u32 = 1;

fn checked_alpha(a: f32) -> Result<f32> {
    if (-ALPHA_SLACK..=1.0 + ALPHA_SLACK).contains(&a) {
        Ok(a.clamp(0.0, 1.0))
    } else {
        Err(Error::domain(format!("alpha value {a} outside [0, 1]")))
    }
}

/// Combines WSSV colours with a predicted α volume.
pub fn assemble_msi(wssv: &Wssv, alpha: &AlphaVolume) -> Result<Msi> {
    let [h, w, n, _] = wssv.shape();
    if alpha.shape() != [h, w, n, 1] {
        return Err(Error::shape(format!(
            "alpha volume {:?} does not match WSSV [{h}, {w}, {n}, 1]",
            alpha.shape()
        )));
    }
    let mut layers = Vec::with_capacity(n);
    for j in 0..n {
        let mut l = Image::new(w, h, 4);
        for (i, p) in l.data_mut().chunks_exact_mut(4).enumerate() {
            let c = &wssv.color()[(i * n + j) * 3..(i * n + j) * 3 + 3];
            p[..3].copy_from_slice(c);
            p[3] = checked_alpha(alpha.data()[i * n + j])?;
        }
        layers.push(l);
    }
    Msi::new(*wssv.grid(), wssv.radii().clone(), *wssv.center(), layers)
}

/// Front-to-back over compositing of one ray's samples, innermost first.
/// Returns the colour and the residual transmittance `prod (1 - a_i)`.
#[inline]
pub fn composite_samples(colors: &[[f64; 3]], alphas: &[f64]) -> ([f64; 3], f64) {
    let mut out = [0.0; 3];
    let mut t = 1.0;
    for (c, &a) in colors.iter().zip(alphas) {
        let w = t * a;
        for k in 0..3 {
            out[k] += w * c[k];
        }
        t *= 1.0 - a;
    }
    (out, t)
}

/// Compositing weight `a_i prod_{j<i}(1 - a_j)` of each layer, plus the
/// residual transmittance.
pub fn compositing_weights(alphas: &[f64]) -> (Vec<f64>, f64) {
    let mut t = 1.0;
    let w = alphas
        .iter()
        .map(|&a| {
            let v = t * a;
            t *= 1.0 - a;
            v
        })
        .collect();
    (w, t)
}

/// Composites the layers at each ERP pixel, as seen from the centre.
pub fn composite_center(msi: &Msi) -> Image {
    let (w, h, n) = (msi.grid.width(), msi.grid.height(), msi.num_layers());
    let mut out = Image::new(w, h, 3);
    out.data_mut().par_chunks_mut(3).enumerate().for_each(|(i, o)| {
        let mut colors = Vec::with_capacity(n);
        let mut alphas = Vec::with_capacity(n);
        for l in &msi.layers {
            let p = &l.data()[i * 4..i * 4 + 4];
            colors.push([p[0] as f64, p[1] as f64, p[2] as f64]);
            alphas.push(p[3] as f64);
        }
        let (c, _) = composite_samples(&colors, &alphas);
        for k in 0..3 {
            o[k] = c[k] as f32;
        }
    });
    out
}
