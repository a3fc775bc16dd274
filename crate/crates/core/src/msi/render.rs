//! Novel-view rendering of an MSI and its α gradient.

use rayon::prelude::*;

use super::{composite_samples, Msi};
use crate::error::{Error, Result};
use crate::geom::{dir_to_erp_pixel, ray_sphere_point, ErpGrid, Pose, UnitVec, Vec3};
use crate::image::{erp_bilinear_taps, Image};
use crate::scene::render::Pinhole;

/// Output camera model of a [`ViewRequest`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViewOutput {
    Erp(ErpGrid),
    Pinhole(Pinhole),
}

impl ViewOutput {
    pub fn width(&self) -> usize {
        match self {
            ViewOutput::Erp(g) => g.width(),
            ViewOutput::Pinhole(p) => p.width,
        }
    }

    pub fn height(&self) -> usize {
        match self {
            ViewOutput::Erp(g) => g.height(),
            ViewOutput::Pinhole(p) => p.height,
        }
    }

    #[inline]
    fn pixel_dir(&self, x: usize, y: usize) -> UnitVec {
        match self {
            ViewOutput::Erp(g) => g.pixel_dir(x, y),
            ViewOutput::Pinhole(p) => p.pixel_dir(x as f64, y as f64),
        }
    }
}

/// Eye pose relative to the MSI centre frame, plus the output camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewRequest {
    pub pose: Pose,
    pub output: ViewOutput,
}

impl ViewRequest {
    pub fn erp(pose: Pose, grid: ErpGrid) -> Self {
        ViewRequest {
            pose,
            output: ViewOutput::Erp(grid),
        }
    }

    pub fn pinhole(pose: Pose, camera: Pinhole) -> Self {
        ViewRequest {
            pose,
            output: ViewOutput::Pinhole(camera),
        }
    }

    /// Request for a camera given in world coordinates.
    pub fn from_world(msi: &Msi, world_pose: &Pose, output: ViewOutput) -> Self {
        ViewRequest {
            pose: world_pose.relative_to(msi.center()),
            output,
        }
    }
}

/// Rendered colour in double precision plus the residual transmittance
/// (the fraction of each ray that passed through every layer).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub width: usize,
    pub height: usize,
    /// `[H, W, 3]`
    pub color: Vec<f64>,
    /// `[H, W]`
    pub transmittance: Vec<f64>,
}

impl RenderOutput {
    pub fn to_image(&self) -> Image {
        let data = self.color.iter().map(|&v| v as f32).collect();
        Image::from_vec(self.width, self.height, 3, data).expect("sizes agree")
    }
}

fn check_eye(msi: &Msi, req: &ViewRequest) -> Result<()> {
    let d = req.pose.translation().norm();
    let d1 = msi.radii().near();
    if !(d < d1) {
        return Err(Error::precondition(format!(
            "eye at {d:.4} m from the centre is not inside the innermost sphere ({d1} m)"
        )));
    }
    Ok(())
}

/// Per-layer samples along one ray.
struct RaySamples {
    colors: Vec<[f64; 3]>,
    alphas: Vec<f64>,
    taps: Vec<[(usize, f64); 4]>,
}

impl RaySamples {
    fn new(n: usize) -> Self {
        RaySamples {
            colors: Vec::with_capacity(n),
            alphas: Vec::with_capacity(n),
            taps: Vec::with_capacity(n),
        }
    }

    fn fill(&mut self, msi: &Msi, eye: &Vec3, dir: &Vec3) {
        self.colors.clear();
        self.alphas.clear();
        self.taps.clear();
        let grid = msi.grid();
        for (layer, &r) in msi.layers().iter().zip(msi.radii().radii()) {
            let p = ray_sphere_point(eye, dir, r);
            let d = UnitVec::new_unchecked(p / p.norm());
            let (u, v) = dir_to_erp_pixel(&d, grid);
            let taps = erp_bilinear_taps(grid.width(), grid.height(), u, v);
            let data = layer.data();
            let mut s = [0.0f64; 4];
            for &(idx, w) in &taps {
                for k in 0..4 {
                    s[k] += w * data[idx * 4 + k] as f64;
                }
            }
            self.colors.push([s[0], s[1], s[2]]);
            self.alphas.push(s[3]);
            self.taps.push(taps);
        }
    }
}

/// Renders the view described by `req`.
pub fn render_view(msi: &Msi, req: &ViewRequest) -> Result<Image> {
    Ok(render_view_full(msi, req)?.to_image())
}

/// [`render_view`] with double-precision output and the transmittance map.
pub fn render_view_full(msi: &Msi, req: &ViewRequest) -> Result<RenderOutput> {
    check_eye(msi, req)?;
    let (w, h) = (req.output.width(), req.output.height());
    let mut color = vec![0.0f64; w * h * 3];
    let mut transmittance = vec![0.0f64; w * h];
    let eye = *req.pose.translation();
    let rot = *req.pose.rotation();
    color
        .par_chunks_mut(w * 3)
        .zip(transmittance.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (crow, trow))| {
            let mut s = RaySamples::new(msi.num_layers());
            for x in 0..w {
                let dir = rot * req.output.pixel_dir(x, y).as_vec();
                s.fill(msi, &eye, &dir);
                let (c, t) = composite_samples(&s.colors, &s.alphas);
                crow[x * 3..x * 3 + 3].copy_from_slice(&c);
                trow[x] = t;
            }
        });
    Ok(RenderOutput {
        width: w,
        height: h,
        color,
        transmittance,
    })
}

/// Rows per partial gradient buffer. Fixed so that the reduction order (and
/// hence the result) does not depend on the thread count.
const GRAD_CHUNK_ROWS: usize = 32;

/// Gradient of `sum(upstream * render_view(msi, req))` with respect to every
/// layer α, laid out `[H, W, N]` like an α volume.
///
/// For one ray with samples `(c_i, a_i)` and transmittance
/// `T_i = prod_{j<i}(1 - a_j)`, `dc/da_i = T_i (c_i - B_i)` where `B_i` is
/// the colour composited from the layers behind `i` alone. `B` is
/// accumulated back to front, so no division by `1 - a_i` is needed.
pub fn render_grad_alpha(msi: &Msi, req: &ViewRequest, upstream: &[f64]) -> Result<Vec<f64>> {
    check_eye(msi, req)?;
    let (w, h) = (req.output.width(), req.output.height());
    if upstream.len() != w * h * 3 {
        return Err(Error::shape(format!(
            "upstream gradient has {} values, expected {}",
            upstream.len(),
            w * h * 3
        )));
    }
    let n = msi.num_layers();
    let cells = msi.grid().pixel_count() * n;
    let eye = *req.pose.translation();
    let rot = *req.pose.rotation();

    let partials: Vec<Vec<f64>> = (0..h.div_ceil(GRAD_CHUNK_ROWS))
        .into_par_iter()
        .map(|chunk| {
            let mut grad = vec![0.0f64; cells];
            let mut s = RaySamples::new(n);
            let mut behind = vec![[0.0f64; 3]; n];
            let rows = chunk * GRAD_CHUNK_ROWS..((chunk + 1) * GRAD_CHUNK_ROWS).min(h);
            for y in rows {
                for x in 0..w {
                    let g = &upstream[(y * w + x) * 3..(y * w + x) * 3 + 3];
                    if g.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let dir = rot * req.output.pixel_dir(x, y).as_vec();
                    s.fill(msi, &eye, &dir);
                    let mut b = [0.0f64; 3];
                    for i in (0..n).rev() {
                        behind[i] = b;
                        let (c, a) = (s.colors[i], s.alphas[i]);
                        for k in 0..3 {
                            b[k] = c[k] * a + (1.0 - a) * b[k];
                        }
                    }
                    let mut t = 1.0f64;
                    for i in 0..n {
                        if t == 0.0 {
                            break;
                        }
                        let c = s.colors[i];
                        let d: f64 = (0..3).map(|k| g[k] * t * (c[k] - behind[i][k])).sum();
                        for &(idx, wt) in &s.taps[i] {
                            grad[idx * n + i] += wt * d;
                        }
                        t *= 1.0 - s.alphas[i];
                    }
                }
            }
            grad
        })
        .collect();

    let mut total = vec![0.0f64; cells];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(total)
}

/// One supervising view for [`render_loss_l1`].
#[derive(Debug, Clone)]
pub struct LossView {
    pub request: ViewRequest,
    pub target: Image,
    pub mask: Vec<bool>,
}

/// Mean absolute error over masked pixels and channels, averaged over views.
pub fn render_loss_l1(msi: &Msi, views: &[LossView]) -> Result<f64> {
    if views.is_empty() {
        return Err(Error::domain("render_loss_l1 needs at least one view"));
    }
    let mut total = 0.0;
    for v in views {
        let out = render_view_full(msi, &v.request)?;
        let (w, h) = (out.width, out.height);
        if v.target.width() != w || v.target.height() != h || v.target.channels() != 3 || v.mask.len() != w * h {
            return Err(Error::shape("loss target or mask does not match the requested view"));
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for (i, _) in v.mask.iter().enumerate().filter(|(_, &m)| m) {
            for k in 0..3 {
                sum += (out.color[i * 3 + k] - v.target.data()[i * 3 + k] as f64).abs();
            }
            count += 3;
        }
        if count == 0 {
            return Err(Error::precondition("loss mask selects no pixels"));
        }
        total += sum / count as f64;
    }
    Ok(total / views.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::super::tests::uniform_msi;
    use super::super::{composite_center, Msi};
    use super::*;
    use crate::wssv::SweepRadii;
    use approx::assert_abs_diff_eq;

    fn random_msi(seed: u64, grid: ErpGrid, n: usize) -> Msi {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let radii = crate::wssv::sweep_radii(1.0, 20.0, n).unwrap();
        let layers = (0..n)
            .map(|_| {
                let data = (0..grid.pixel_count() * 4).map(|_| rng.random::<f32>()).collect();
                Image::from_vec(grid.width(), grid.height(), 4, data).unwrap()
            })
            .collect();
        Msi::new(grid, radii, Pose::identity(), layers).unwrap()
    }

    #[test]
    fn centre_view_matches_center_composite() {
        let grid = ErpGrid::new(32, 16).unwrap();
        let msi = random_msi(3, grid, 4);
        let a = render_view(&msi, &ViewRequest::erp(Pose::identity(), grid)).unwrap();
        let b = composite_center(&msi);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-6);
        }
    }

    #[test]
    fn eye_on_inner_sphere_is_rejected() {
        let msi = uniform_msi(&[[0.5; 3], [0.5; 3]], &[0.5, 1.0]);
        let req = ViewRequest::erp(Pose::from_translation(Vec3::new(0.0, 1.0, 0.0)), *msi.grid());
        assert!(matches!(render_view(&msi, &req), Err(Error::Precondition(_))));
    }

    #[test]
    fn translated_eye_samples_shifted_intersection() {
        let grid = ErpGrid::new(64, 32).unwrap();
        // inner layer opaque with colour encoding the ERP column
        let mut inner = Image::new(64, 32, 4);
        for y in 0..32 {
            for x in 0..64 {
                inner.pixel_mut(x, y).copy_from_slice(&[x as f32 / 64.0, y as f32 / 32.0, 0.0, 1.0]);
            }
        }
        let outer = Image::filled(64, 32, &[0.0, 0.0, 1.0, 1.0]);
        let radii = SweepRadii::from_radii(vec![2.0, 5.0]).unwrap();
        let msi = Msi::new(grid, radii, Pose::identity(), vec![inner.clone(), outer]).unwrap();
        let eye = Vec3::new(0.7, -0.3, 0.5);
        let out = render_view(&msi, &ViewRequest::erp(Pose::from_translation(eye), grid)).unwrap();
        for &(x, y) in &[(5usize, 9usize), (40, 20), (17, 3), (63, 28)] {
            let d = grid.pixel_dir(x, y).into_inner();
            // brute force: march then bisect on |eye + t d| = 2
            let (mut lo, mut hi) = (0.0f64, 10.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (eye + d * mid).norm() < 2.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let hit = UnitVec::new(eye + d * lo).unwrap();
            let (u, v) = dir_to_erp_pixel(&hit, &grid);
            let mut expect = [0.0f32; 4];
            inner.sample_erp(u, v, &mut expect);
            let got = out.pixel(x, y);
            assert_abs_diff_eq!(got[0], expect[0], epsilon = 1e-5);
            assert_abs_diff_eq!(got[1], expect[1], epsilon = 1e-5);
            assert_eq!(got[2], 0.0);
        }
    }

    #[test]
    fn pinhole_forward_view_at_centre() {
        let msi = uniform_msi(&[[0.25, 0.5, 0.75]], &[1.0]);
        let cam = Pinhole::new(9, 7, 1.2).unwrap();
        let img = render_view(&msi, &ViewRequest::pinhole(Pose::identity(), cam)).unwrap();
        assert_eq!((img.width(), img.height()), (9, 7));
        assert_abs_diff_eq!(img.pixel(4, 3)[1], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn transmittance_is_residual() {
        let msi = uniform_msi(&[[1.0; 3], [1.0; 3]], &[0.5, 0.5]);
        let out = render_view_full(&msi, &ViewRequest::erp(Pose::identity(), *msi.grid())).unwrap();
        assert!(out.transmittance.iter().all(|&t| (t - 0.25).abs() < 1e-7));
    }

    #[test]
    fn gradient_examples() {
        let msi = uniform_msi(&[[0.2, 0.4, 0.6]], &[0.5]);
        let grid = *msi.grid();
        let req = ViewRequest::erp(Pose::identity(), grid);
        // one-hot upstream on a single pixel's red channel
        let mut up = vec![0.0; grid.pixel_count() * 3];
        up[(2 * 8 + 3) * 3] = 1.0;
        let g = render_grad_alpha(&msi, &req, &up).unwrap();
        assert_abs_diff_eq!(g.iter().sum::<f64>(), 0.2f32 as f64, epsilon = 1e-12);

        let blocked = uniform_msi(&[[0.2; 3], [0.9; 3], [0.1; 3]], &[1.0, 0.3, 0.6]);
        let up = vec![1.0; grid.pixel_count() * 3];
        let g = render_grad_alpha(&blocked, &req, &up).unwrap();
        for i in 0..grid.pixel_count() {
            assert_eq!(g[i * 3 + 1], 0.0);
            assert_eq!(g[i * 3 + 2], 0.0);
        }
        assert!(render_grad_alpha(&blocked, &req, &up[1..]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let grid = ErpGrid::new(16, 8).unwrap();
        let msi = random_msi(11, grid, 3);
        let req = ViewRequest::erp(Pose::from_yaw_pitch(0.4, 0.1, Vec3::new(0.2, 0.1, -0.3)), grid);
        let up: Vec<f64> = (0..grid.pixel_count() * 3).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let g = render_grad_alpha(&msi, &req, &up).unwrap();
        let loss = |m: &Msi| -> f64 {
            let out = render_view_full(m, &req).unwrap();
            out.color.iter().zip(&up).map(|(c, u)| c * u).sum()
        };
        let h = 1e-3f32;
        for &(layer, px) in &[(0usize, 5usize), (1, 40), (2, 77), (1, 100)] {
            let a0 = msi.layer(layer).data()[px * 4 + 3];
            let mut plus = msi.clone();
            let mut minus = msi.clone();
            let (ap, am) = ((a0 + h).min(1.0), (a0 - h).max(0.0));
            plus.layers[layer].data_mut()[px * 4 + 3] = ap;
            minus.layers[layer].data_mut()[px * 4 + 3] = am;
            let fd = (loss(&plus) - loss(&minus)) / (ap as f64 - am as f64);
            assert_abs_diff_eq!(g[px * 3 + layer], fd, epsilon = 1e-6 + 1e-4 * fd.abs());
        }
    }

    #[test]
    fn l1_loss_examples() {
        let msi = uniform_msi(&[[0.5; 3]], &[1.0]);
        let grid = *msi.grid();
        let req = ViewRequest::erp(Pose::identity(), grid);
        let same = LossView {
            request: req,
            target: Image::filled(8, 4, &[0.5; 3]),
            mask: vec![true; 32],
        };
        assert_eq!(render_loss_l1(&msi, std::slice::from_ref(&same)).unwrap(), 0.0);
        let off = LossView {
            target: Image::filled(8, 4, &[0.6; 3]),
            ..same.clone()
        };
        assert_abs_diff_eq!(render_loss_l1(&msi, std::slice::from_ref(&off)).unwrap(), 0.1, epsilon = 1e-7);
        assert_abs_diff_eq!(render_loss_l1(&msi, &[same, off]).unwrap(), 0.05, epsilon = 1e-7);
        assert!(render_loss_l1(&msi, &[]).is_err());
    }
}
