//! Camera models over [`Scene::trace`]: pinhole faces, cube-to-ERP
//! composition, direct ERP and fisheye sensors.

use rayon::prelude::*;

use super::Scene;
use crate::error::{Error, Result};
use crate::geom::{fisheye_pixel_to_dir, ErpGrid, FisheyeIntrinsics, Pose, UnitVec, Vec3};
use crate::image::{DepthMap, Image};

/// Square-pixel pinhole camera; `fov` is the horizontal field of view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pinhole {
    pub width: usize,
    pub height: usize,
    pub fov: f64,
}

impl Pinhole {
    pub fn new(width: usize, height: usize, fov: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("pinhole image must be non-empty"));
        }
        if !(fov > 0.0 && fov < std::f64::consts::PI) {
            return Err(Error::domain(format!(
                "pinhole fov {:.1} deg must be in (0, 180)",
                fov.to_degrees()
            )));
        }
        Ok(Pinhole { width, height, fov })
    }

    pub fn focal(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.fov / 2.0).tan()
    }

    fn centre(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    /// Camera-frame ray through pixel coordinate `(u, v)`.
    pub fn pixel_dir(&self, u: f64, v: f64) -> UnitVec {
        let f = self.focal();
        let (cx, cy) = self.centre();
        UnitVec::new(Vec3::new((u - cx) / f, -(v - cy) / f, 1.0)).expect("finite ray")
    }

    /// Pixel coordinate of a camera-frame direction, if in front of the camera.
    pub fn project(&self, d: &Vec3) -> Option<(f64, f64)> {
        if d.z <= 0.0 {
            return None;
        }
        let f = self.focal();
        let (cx, cy) = self.centre();
        Some((cx + f * d.x / d.z, cy - f * d.y / d.z))
    }
}

/// One rendered cube face.
#[derive(Debug, Clone)]
pub struct Face {
    pub image: Image,
    pub depth: DepthMap,
    pub pose: Pose,
    pub camera: Pinhole,
}

pub fn render_pinhole(scene: &Scene, pose: &Pose, camera: &Pinhole) -> (Image, DepthMap) {
    let mut img = Image::new(camera.width, camera.height, 3);
    let mut depth = DepthMap::new(camera.width, camera.height);
    let origin = *pose.translation();
    img.data_mut()
        .par_chunks_mut(camera.width * 3)
        .zip(depth.data_mut().par_chunks_mut(camera.width))
        .enumerate()
        .for_each(|(y, (row, drow))| {
            for x in 0..camera.width {
                let d = pose.transform_dir(&camera.pixel_dir(x as f64, y as f64));
                let t = scene.trace(&origin, &d);
                row[x * 3..x * 3 + 3].copy_from_slice(&t.rgb);
                drow[x] = t.depth;
            }
        });
    (img, depth)
}

/// Rotation whose `+z` is `forward` and whose `+y` is `up`.
fn look(forward: Vec3, up: Vec3, t: Vec3) -> Pose {
    let right = up.cross(&forward);
    let m = nalgebra::Matrix3::from_columns(&[right, up, forward]);
    Pose::new(m, t).expect("axis-aligned frame is a rotation")
}

/// Poses of the six cube faces (`+x, -x, +y, -y, +z, -z`) sharing `center`'s origin.
pub fn cube_face_poses(center: &Pose) -> [Pose; 6] {
    let t = Vec3::zeros();
    let local = [
        look(Vec3::x(), Vec3::y(), t),
        look(-Vec3::x(), Vec3::y(), t),
        look(Vec3::y(), -Vec3::z(), t),
        look(-Vec3::y(), Vec3::z(), t),
        look(Vec3::z(), Vec3::y(), t),
        look(-Vec3::z(), Vec3::y(), t),
    ];
    local.map(|p| center.compose(&p))
}

/// Renders the six 120° faces around `center` at `size x size` each.
pub fn render_cube_faces(scene: &Scene, center: &Pose, size: usize) -> Result<Vec<Face>> {
    let camera = Pinhole::new(size, size, 120f64.to_radians())?;
    Ok(cube_face_poses(center)
        .into_iter()
        .map(|pose| {
            let (image, depth) = render_pinhole(scene, &pose, &camera);
            Face {
                image,
                depth,
                pose,
                camera,
            }
        })
        .collect())
}

/// Feathering weights of each face containing world direction `d`.
///
/// A face's raw weight is its angular margin to the nearest edge of its
/// square field of view; weights are normalized to sum to one.
pub fn face_blend_weights(d: &UnitVec, faces: &[Face]) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(3);
    let mut total = 0.0;
    for (i, f) in faces.iter().enumerate() {
        let l = f.pose.inverse_transform_dir(d);
        if l.z() <= 0.0 {
            continue;
        }
        let half = f.camera.fov / 2.0;
        let half_v = ((f.camera.fov / 2.0).tan() * f.camera.height as f64 / f.camera.width as f64).atan();
        let ax = (l.x() / l.z()).abs().atan();
        let ay = (l.y() / l.z()).abs().atan();
        let margin = (half - ax).min(half_v - ay);
        if margin > 0.0 {
            total += margin;
            out.push((i, margin));
        }
    }
    for (_, w) in &mut out {
        *w /= total;
    }
    out
}

fn check_faces(faces: &[Face]) -> Result<()> {
    if faces.len() != 6 {
        return Err(Error::config(format!("expected 6 cube faces, got {}", faces.len())));
    }
    let c0 = *faces[0].pose.translation();
    for f in faces {
        if (f.pose.translation() - c0).norm() > 1e-12 {
            return Err(Error::config("cube faces must share one optical center"));
        }
        if f.image.width() != f.depth.width() || f.image.height() != f.depth.height() {
            return Err(Error::config("face image and depth sizes differ"));
        }
    }
    let axes = [Vec3::x(), -Vec3::x(), Vec3::y(), -Vec3::y(), Vec3::z(), -Vec3::z()];
    let reference = faces[0].pose.rotation().transpose();
    for axis in axes {
        let found = faces.iter().any(|f| {
            let fwd = reference * f.pose.forward().into_inner();
            (fwd - axis).norm() < 1e-9
        });
        if !found {
            return Err(Error::config(format!(
                "no cube face looks along {:?}",
                [axis.x, axis.y, axis.z]
            )));
        }
    }
    Ok(())
}

/// Blends six coincident pinhole faces into an ERP colour image and depth map.
///
/// The ERP frame is aligned with the world axes at the faces' common centre.
pub fn compose_erp_from_faces(faces: &[Face], grid: &ErpGrid) -> Result<(Image, DepthMap)> {
    check_faces(faces)?;
    let (w, h) = (grid.width(), grid.height());
    let mut img = Image::new(w, h, 3);
    let mut depth = DepthMap::new(w, h);
    img.data_mut()
        .par_chunks_mut(w * 3)
        .zip(depth.data_mut().par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (row, drow))| {
            let mut px = [0.0f32; 3];
            for x in 0..w {
                let d = grid.pixel_dir(x, y);
                let weights = face_blend_weights(&d, faces);
                let mut acc = [0.0f64; 3];
                let mut best = (0usize, -1.0f64);
                for &(i, wt) in &weights {
                    let face = &faces[i];
                    let l = face.pose.inverse_transform_dir(&d);
                    let (u, v) = face.camera.project(l.as_vec()).expect("weighted faces see d");
                    face.image.sample_clamped(u, v, &mut px);
                    for c in 0..3 {
                        acc[c] += wt * px[c] as f64;
                    }
                    if wt > best.1 {
                        best = (i, wt);
                    }
                }
                for c in 0..3 {
                    row[x * 3 + c] = acc[c] as f32;
                }
                let face = &faces[best.0];
                let l = face.pose.inverse_transform_dir(&d);
                let (u, v) = face.camera.project(l.as_vec()).expect("weighted faces see d");
                let xi = (u.round().max(0.0) as usize).min(face.depth.width() - 1);
                let yi = (v.round().max(0.0) as usize).min(face.depth.height() - 1);
                drow[x] = face.depth.get(xi, yi);
            }
        });
    Ok((img, depth))
}

/// Traces every ERP pixel direction from `center` (ERP axes follow `center`'s rotation).
pub fn render_erp_direct(scene: &Scene, center: &Pose, grid: &ErpGrid) -> (Image, DepthMap) {
    let (w, h) = (grid.width(), grid.height());
    let mut img = Image::new(w, h, 3);
    let mut depth = DepthMap::new(w, h);
    let origin = *center.translation();
    img.data_mut()
        .par_chunks_mut(w * 3)
        .zip(depth.data_mut().par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (row, drow))| {
            for x in 0..w {
                let d = center.transform_dir(&grid.pixel_dir(x, y));
                let t = scene.trace(&origin, &d);
                row[x * 3..x * 3 + 3].copy_from_slice(&t.rgb);
                drow[x] = t.depth;
            }
        });
    (img, depth)
}

/// Fisheye sensor capture. Pixels outside the image circle are black and
/// `false` in the returned validity mask.
pub fn render_fisheye(scene: &Scene, pose: &Pose, intr: &FisheyeIntrinsics) -> (Image, Vec<bool>) {
    let (w, h) = (intr.width(), intr.height());
    let mut img = Image::new(w, h, 3);
    let mut mask = vec![false; w * h];
    let origin = *pose.translation();
    img.data_mut()
        .par_chunks_mut(w * 3)
        .zip(mask.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (row, mrow))| {
            for x in 0..w {
                if let Ok(Some(d)) = fisheye_pixel_to_dir(x as f64, y as f64, intr) {
                    let t = scene.trace(&origin, &pose.transform_dir(&d));
                    row[x * 3..x * 3 + 3].copy_from_slice(&t.rgb);
                    mrow[x] = true;
                }
            }
        });
    (img, mask)
}
