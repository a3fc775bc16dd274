//! Weighted sphere-sweep volume.
//!
//! Every fisheye capture is reprojected onto `N` concentric spheres around
//! the rig centre. Where captures overlap on a sphere they are fused with a
//! softmax over the per-source weight `gamma = 1 - r`, `r` being the source
//! pixel's distance from the principal point relative to the image-circle
//! radius. Stacking the fused spheres gives an `[H, W, N, 3]` volume.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{dir_to_fisheye_pixel, ErpGrid, FisheyeIntrinsics, Pose, UnitVec, Vec3};
use crate::image::Image;
use crate::io::{read_f32s, read_f64, read_u32, write_f32s};

/// Sweep radii, strictly increasing. Radii from [`sweep_radii`] are uniform
/// in inverse depth.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRadii {
    radii: Vec<f64>,
}

impl SweepRadii {
    /// Wraps an arbitrary strictly increasing, positive list.
    pub fn from_radii(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::domain("radii list is empty"));
        }
        if !(radii[0] > 0.0) || radii.iter().any(|r| !r.is_finite()) {
            return Err(Error::domain("radii must be positive and finite"));
        }
        if radii.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::domain("radii must be strictly increasing"));
        }
        Ok(SweepRadii { radii })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn near(&self) -> f64 {
        self.radii[0]
    }

    pub fn far(&self) -> f64 {
        *self.radii.last().unwrap()
    }
}

/// `n` radii between `near` and `far`, evenly spaced in `1/d`.
pub fn sweep_radii(near: f64, far: f64, n: usize) -> Result<SweepRadii> {
    if !(near > 0.0 && near < far && far.is_finite()) {
        return Err(Error::domain(format!("need 0 < near < far, got near {near}, far {far}")));
    }
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 layers, got {n}")));
    }
    let (qn, qf) = (1.0 / near, 1.0 / far);
    let mut radii: Vec<f64> = (0..n)
        .map(|i| 1.0 / (qn + i as f64 / (n - 1) as f64 * (qf - qn)))
        .collect();
    radii[0] = near;
    radii[n - 1] = far;
    SweepRadii::from_radii(radii)
}

/// One calibrated fisheye capture.
#[derive(Debug, Clone)]
pub struct FisheyeView {
    pub image: Image,
    /// Pixels that may be sampled (inside the image circle).
    pub mask: Vec<bool>,
    pub intrinsics: FisheyeIntrinsics,
    pub pose: Pose,
    /// Optional per-pixel weight map (e.g. from lens MTF data) replacing `1 - r`.
    pub gamma_map: Option<Image>,
}

impl FisheyeView {
    pub fn new(image: Image, gamma_map: Option<Image>, intrinsics: FisheyeIntrinsics, pose: Pose) -> Result<Self> {
        let (w, h) = (intrinsics.width(), intrinsics.height());
        if image.width() != w || image.height() != h || image.channels() != 3 {
            return Err(Error::shape(format!(
                "fisheye image {}x{}x{} does not match {w}x{h}x3 intrinsics",
                image.width(),
                image.height(),
                image.channels()
            )));
        }
        if let Some(g) = &gamma_map {
            if g.width() != w || g.height() != h || g.channels() != 1 {
                return Err(Error::shape("gamma map must be single-channel and match the image"));
            }
        }
        let mask = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| intrinsics.pixel_in_circle(x, y))
            .collect();
        Ok(FisheyeView {
            image,
            mask,
            intrinsics,
            pose,
            gamma_map,
        })
    }
}

/// A capture reprojected onto one sweep sphere.
#[derive(Debug, Clone)]
pub struct ProjectedLayer {
    pub grid: ErpGrid,
    pub color: Image,
    /// Weight per pixel, 0 where invalid.
    pub gamma: Vec<f32>,
    pub valid: Vec<bool>,
}

/// Projects `view` onto the sphere of `radius` around `center`.
pub fn warp_to_sphere(view: &FisheyeView, center: &Pose, radius: f64, grid: &ErpGrid) -> Result<ProjectedLayer> {
    let offset = (view.pose.translation() - center.translation()).norm();
    if !(offset < radius) {
        return Err(Error::precondition(format!(
            "sensor is {offset:.4} m from the rig centre, outside the {radius} m sphere"
        )));
    }
    let (w, h) = (grid.width(), grid.height());
    let mut color = Image::new(w, h, 3);
    let mut gamma = vec![0.0f32; w * h];
    let mut valid = vec![false; w * h];
    let intr = &view.intrinsics;
    let (cx, cy) = intr.principal_point();
    let circle = intr.circle_radius();

    // Sphere point in world, re-expressed in the sensor frame, in one affine map.
    let rot: Matrix3<f64> = view.pose.rotation().transpose() * center.rotation();
    let shift: Vec3 = view.pose.rotation().transpose() * (center.translation() - view.pose.translation());

    color
        .data_mut()
        .par_chunks_mut(w * 3)
        .zip(gamma.par_chunks_mut(w))
        .zip(valid.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, ((crow, grow), vrow))| {
            let mut px = [0.0f32; 3];
            for x in 0..w {
                let d = grid.pixel_dir(x, y);
                let local = rot * (d.as_vec() * radius) + shift;
                let Some(dir) = UnitVec::new(local) else { continue };
                let Some((u, v)) = dir_to_fisheye_pixel(&dir, intr) else { continue };
                if !view.image.sample_masked(u, v, &view.mask, &mut px) {
                    continue;
                }
                crow[x * 3..x * 3 + 3].copy_from_slice(&px);
                grow[x] = match &view.gamma_map {
                    Some(g) => {
                        let mut gv = [0.0f32];
                        g.sample_clamped(u, v, &mut gv);
                        gv[0].clamp(0.0, 1.0)
                    }
                    None => (1.0 - ((u - cx).hypot(v - cy) / circle).clamp(0.0, 1.0)) as f32,
                };
                vrow[x] = true;
            }
        });
    Ok(ProjectedLayer {
        grid: *grid,
        color,
        gamma,
        valid,
    })
}

/// Softmax of `gamma`, shifted by the maximum for stability.
pub fn softmax_weights(gamma: &[f64]) -> Vec<f64> {
    let m = gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = gamma.iter().map(|g| (g - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Result of fusing all projections on one sphere.
#[derive(Debug, Clone)]
pub struct FusedLayer {
    pub color: Image,
    /// Number of valid sources per pixel.
    pub count: Vec<u32>,
    /// Mean over channels of the unweighted across-source variance.
    pub variance: Vec<f32>,
}

/// Softmax-weighted fusion of overlapping projections.
pub fn fuse_layer(projections: &[ProjectedLayer]) -> Result<FusedLayer> {
    let first = projections
        .first()
        .ok_or_else(|| Error::domain("fuse_layer needs at least one projection"))?;
    let grid = first.grid;
    if projections.iter().any(|p| p.grid != grid) {
        return Err(Error::shape("projections are on different ERP grids"));
    }
    let n = grid.pixel_count();
    let mut color = Image::new(grid.width(), grid.height(), 3);
    let mut count = vec![0u32; n];
    let mut variance = vec![0.0f32; n];
    color
        .data_mut()
        .par_chunks_mut(3)
        .zip(count.par_iter_mut())
        .zip(variance.par_iter_mut())
        .enumerate()
        .for_each(|(i, ((out, q), var))| {
            let mut max_g = f64::NEG_INFINITY;
            let mut valid = 0u32;
            for p in projections {
                if p.valid[i] {
                    valid += 1;
                    max_g = max_g.max(p.gamma[i] as f64);
                }
            }
            *q = valid;
            if valid == 0 {
                return;
            }
            let mut wsum = 0.0f64;
            let mut acc = [0.0f64; 3];
            let mut mean = [0.0f64; 3];
            for p in projections.iter().filter(|p| p.valid[i]) {
                let e = (p.gamma[i] as f64 - max_g).exp();
                wsum += e;
                let c = &p.color.data()[i * 3..i * 3 + 3];
                for k in 0..3 {
                    acc[k] += e * c[k] as f64;
                    mean[k] += c[k] as f64;
                }
            }
            let qf = valid as f64;
            for k in 0..3 {
                out[k] = (acc[k] / wsum) as f32;
                mean[k] /= qf;
            }
            let mut v = 0.0f64;
            for p in projections.iter().filter(|p| p.valid[i]) {
                let c = &p.color.data()[i * 3..i * 3 + 3];
                for k in 0..3 {
                    let d = c[k] as f64 - mean[k];
                    v += d * d;
                }
            }
            *var = (v / (3.0 * qf)) as f32;
        });
    Ok(FusedLayer {
        color,
        count,
        variance,
    })
}

/// The stacked volume with per-layer source statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Wssv {
    grid: ErpGrid,
    radii: SweepRadii,
    center: Pose,
    /// `[H, W, N, 3]`
    color: Vec<f32>,
    /// `[H, W, N]`
    variance: Vec<f32>,
    /// `[H, W, N]`
    count: Vec<u32>,
}

/// Warps every capture onto every sphere and stacks the fused layers.
pub fn build_wssv(views: &[FisheyeView], center: &Pose, radii: &SweepRadii, grid: &ErpGrid) -> Result<Wssv> {
    if views.is_empty() {
        return Err(Error::domain("build_wssv needs at least one view"));
    }
    let layers: Vec<FusedLayer> = radii
        .radii()
        .par_iter()
        .map(|&r| {
            let projections = views
                .iter()
                .map(|v| warp_to_sphere(v, center, r, grid))
                .collect::<Result<Vec<_>>>()?;
            fuse_layer(&projections)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Wssv::from_layers(*grid, radii.clone(), *center, &layers))
}

impl Wssv {
    fn from_layers(grid: ErpGrid, radii: SweepRadii, center: Pose, layers: &[FusedLayer]) -> Wssv {
        let n = layers.len();
        let px = grid.pixel_count();
        let mut color = vec![0.0f32; px * n * 3];
        let mut variance = vec![0.0f32; px * n];
        let mut count = vec![0u32; px * n];
        for (j, l) in layers.iter().enumerate() {
            for i in 0..px {
                let dst = i * n + j;
                color[dst * 3..dst * 3 + 3].copy_from_slice(&l.color.data()[i * 3..i * 3 + 3]);
                variance[dst] = l.variance[i];
                count[dst] = l.count[i];
            }
        }
        Wssv {
            grid,
            radii,
            center,
            color,
            variance,
            count,
        }
    }

    /// Assembles a volume from raw `[H, W, N, 3]`, `[H, W, N]`, `[H, W, N]` buffers.
    pub fn from_parts(
        grid: ErpGrid,
        radii: SweepRadii,
        center: Pose,
        color: Vec<f32>,
        variance: Vec<f32>,
        count: Vec<u32>,
    ) -> Result<Wssv> {
        let cells = grid.pixel_count() * radii.len();
        if color.len() != cells * 3 || variance.len() != cells || count.len() != cells {
            return Err(Error::shape("WSSV buffers do not match grid and layer count"));
        }
        if variance.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::domain("WSSV variance must be non-negative"));
        }
        Ok(Wssv {
            grid,
            radii,
            center,
            color,
            variance,
            count,
        })
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

    pub fn layers(&self) -> usize {
        self.radii.len()
    }

    /// `[H, W, N, 3]`.
    pub fn shape(&self) -> [usize; 4] {
        [self.grid.height(), self.grid.width(), self.layers(), 3]
    }

    pub fn color(&self) -> &[f32] {
        &self.color
    }

    pub fn variance(&self) -> &[f32] {
        &self.variance
    }

    pub fn count(&self) -> &[u32] {
        &self.count
    }

    #[inline]
    fn cell(&self, y: usize, x: usize, n: usize) -> usize {
        (y * self.grid.width() + x) * self.layers() + n
    }

    pub fn color_at(&self, y: usize, x: usize, n: usize) -> [f32; 3] {
        let i = self.cell(y, x, n) * 3;
        [self.color[i], self.color[i + 1], self.color[i + 2]]
    }

    pub fn variance_at(&self, y: usize, x: usize, n: usize) -> f32 {
        self.variance[self.cell(y, x, n)]
    }

    pub fn count_at(&self, y: usize, x: usize, n: usize) -> u32 {
        self.count[self.cell(y, x, n)]
    }

    pub fn is_valid(&self, y: usize, x: usize, n: usize) -> bool {
        self.count_at(y, x, n) > 0
    }

    /// Fused colour of layer `n` as an ERP image.
    pub fn layer_image(&self, n: usize) -> Image {
        let (w, h) = (self.grid.width(), self.grid.height());
        let mut img = Image::new(w, h, 3);
        for y in 0..h {
            for x in 0..w {
                img.pixel_mut(x, y).copy_from_slice(&self.color_at(y, x, n));
            }
        }
        img
    }

    /// Binary container, all little-endian:
    ///
    /// | field | type |
    /// |---|---|
    /// | magic `WSSV` | 4 bytes |
    /// | version (1) | u32 |
    /// | H, W, N | u32 x 3 |
    /// | radii | f64 x N |
    /// | rig centre rotation (row-major), translation | f64 x 12 |
    /// | colour `[H, W, N, 3]` | f32 |
    /// | variance `[H, W, N]` | f32 |
    /// | source count `[H, W, N]` | u32 |
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(WSSV_MAGIC)?;
        let [h, wd, n, _] = self.shape();
        for v in [WSSV_VERSION, h as u32, wd as u32, n as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for r in self.radii.radii() {
            w.write_all(&r.to_le_bytes())?;
        }
        write_pose(w, &self.center)?;
        write_f32s(w, &self.color)?;
        write_f32s(w, &self.variance)?;
        let mut buf = Vec::with_capacity(self.count.len() * 4);
        for c in &self.count {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Wssv> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != WSSV_MAGIC {
            return Err(Error::format("WSSV file", "bad magic"));
        }
        let version = read_u32(r)?;
        if version != WSSV_VERSION {
            return Err(Error::format("WSSV file", format!("unsupported version {version}")));
        }
        let h = read_u32(r)? as usize;
        let w = read_u32(r)? as usize;
        let n = read_u32(r)? as usize;
        let grid = ErpGrid::new(w, h)?;
        let radii = (0..n).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
        let radii = SweepRadii::from_radii(radii)?;
        let center = read_pose(r)?;
        let cells = h * w * n;
        let color = read_f32s(r, cells * 3, "WSSV file")?;
        let variance = read_f32s(r, cells, "WSSV file")?;
        let raw = read_f32s(r, cells, "WSSV file")?;
        let count = raw.into_iter().map(f32::to_bits).collect();
        Wssv::from_parts(grid, radii, center, color, variance, count)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Wssv> {
        let mut f = std::io::BufReader::new(crate::io::open(path)?);
        Wssv::read_from(&mut f)
    }
}

const WSSV_MAGIC: &[u8; 4] = b"WSSV";
const WSSV_VERSION: u32 = 1;

pub(crate) fn write_pose(w: &mut impl Write, p: &Pose) -> Result<()> {
    let r = p.rotation();
    for i in 0..3 {
        for j in 0..3 {
            w.write_all(&r[(i, j)].to_le_bytes())?;
        }
    }
    for k in 0..3 {
        w.write_all(&p.translation()[k].to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_pose(r: &mut impl Read) -> Result<Pose> {
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = read_f64(r)?;
        }
    }
    let t = Vec3::new(read_f64(r)?, read_f64(r)?, read_f64(r)?);
    Pose::new(m, t)
}
