//! Synthetic rig footage and ground truth on disk.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::render::{compose_erp_from_faces, render_cube_faces, render_fisheye};
use super::Scene;
use crate::error::{Error, Result};
use crate::geom::{ErpGrid, FisheyeIntrinsics, Pose, Vec3};
use crate::image::{DepthMap, Image, INVERSE_DEPTH_SCALE};
use crate::volume::AlphaVolume;
use crate::wssv::FisheyeView;

/// Minimum distance between any camera location and scene geometry.
pub const MIN_CLEARANCE: f64 = 0.3;

/// Ring of outward-facing fisheye sensors sharing one lens model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigConfig {
    pub sensor_count: usize,
    /// Distance of each optical centre from the rig centre, meters.
    pub ring_radius: f64,
    pub intrinsics: FisheyeIntrinsics,
}

impl RigConfig {
    pub fn new(sensor_count: usize, ring_radius: f64, intrinsics: FisheyeIntrinsics) -> Result<Self> {
        let rig = RigConfig {
            sensor_count,
            ring_radius,
            intrinsics,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensor_count < 2 {
            return Err(Error::config(format!(
                "rig needs at least 2 sensors, got {}",
                self.sensor_count
            )));
        }
        if !(self.ring_radius >= 0.0 && self.ring_radius.is_finite()) {
            return Err(Error::config("ring_radius must be finite and non-negative"));
        }
        Ok(())
    }

    /// Checks that every optical centre lies inside the innermost sweep sphere.
    pub fn check_inside(&self, inner_radius: f64) -> Result<()> {
        if self.ring_radius >= inner_radius {
            return Err(Error::precondition(format!(
                "sensor ring radius {} m is not inside the innermost sphere ({inner_radius} m)",
                self.ring_radius
            )));
        }
        Ok(())
    }

    /// Pose of sensor `i` in the rig frame: yawed by `2 pi i / M`, facing outward.
    pub fn sensor_pose_local(&self, i: usize) -> Pose {
        let yaw = TAU * i as f64 / self.sensor_count as f64;
        let pos = Vec3::new(yaw.sin(), 0.0, yaw.cos()) * self.ring_radius;
        Pose::from_yaw_pitch(yaw, 0.0, pos)
    }

    pub fn sensor_poses(&self, center: &Pose) -> Vec<Pose> {
        (0..self.sensor_count)
            .map(|i| center.compose(&self.sensor_pose_local(i)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorEntry {
    pub pose: Pose,
    /// Fisheye capture, relative to the manifest directory.
    pub fisheye: String,
    /// Ground-truth ERP rendered at the sensor's optical centre (world-aligned).
    pub gt_erp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationEntry {
    pub id: u32,
    pub split: Split,
    pub center: Pose,
    pub resolution: ErpGrid,
    /// Image-circle field of view used for this location's sensors, degrees.
    pub fov_deg: f64,
    pub sensors: Vec<SensorEntry>,
    pub gt_erp: String,
    /// 16-bit inverse depth, see [`DatasetManifest::depth_scale`].
    pub gt_depth: String,
}

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    /// Depth PNG counts per inverse meter.
    pub depth_scale: f64,
    pub rig: RigConfig,
    pub locations: Vec<LocationEntry>,
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let m: DatasetManifest = serde_json::from_str(&text)?;
        if m.format_version != MANIFEST_VERSION {
            return Err(Error::format(
                "dataset manifest",
                format!("unsupported format_version {}", m.format_version),
            ));
        }
        m.rig.validate()?;
        Ok(m)
    }

    pub fn location(&self, id: u32) -> Result<&LocationEntry> {
        self.locations
            .iter()
            .find(|l| l.id == id)
            .ok_or_else(|| Error::config(format!("location {id} not in manifest")))
    }

    pub fn ids(&self, split: Split) -> Vec<u32> {
        self.locations.iter().filter(|l| l.split == split).map(|l| l.id).collect()
    }
}

impl LocationEntry {
    pub fn intrinsics(&self, rig: &RigConfig) -> Result<FisheyeIntrinsics> {
        rig.intrinsics.with_fov(self.fov_deg.to_radians())
    }

    /// Loads the fisheye captures with their calibration; validity follows the image circle.
    pub fn load_views(&self, root: &Path, rig: &RigConfig) -> Result<Vec<FisheyeView>> {
        let intr = self.intrinsics(rig)?;
        self.sensors
            .iter()
            .map(|s| {
                let image = Image::load_rgb_png(&root.join(&s.fisheye))?;
                FisheyeView::new(image, None, intr, s.pose)
            })
            .collect()
    }

    pub fn load_gt_depth(&self, root: &Path, scale: f64) -> Result<DepthMap> {
        DepthMap::load_inverse_png(&root.join(&self.gt_depth), scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOptions {
    pub grid: ErpGrid,
    /// Cube face resolution for ground-truth composition.
    pub face_size: usize,
    /// Fraction of locations assigned to training.
    pub split_ratio: f64,
    /// Per-location field of view is drawn from these (radians).
    pub fov_choices: Vec<f64>,
    pub seed: u64,
}

impl GenOptions {
    pub fn new(grid: ErpGrid) -> Self {
        GenOptions {
            grid,
            face_size: grid.width(),
            split_ratio: 0.8,
            fov_choices: vec![220f64.to_radians()],
            seed: 0,
        }
    }
}

/// Number of training locations for `n` locations at `ratio`.
pub fn train_count(n: usize, ratio: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::config(format!("split_ratio {ratio} must lie in [0, 1]")));
    }
    Ok(((n as f64) * ratio).round() as usize)
}

/// Draws `count` rig centres inside `[-extent, extent]^3` that keep `clearance`
/// from all geometry.
pub fn sample_locations(scene: &Scene, count: usize, extent: f64, clearance: f64, seed: u64) -> Result<Vec<Pose>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(Error::config("could not place locations with the requested clearance"));
        }
        let p = Vec3::new(
            rng.random_range(-extent..=extent),
            rng.random_range(-extent..=extent),
            rng.random_range(-extent..=extent),
        );
        if scene.clearance(&p) > clearance {
            out.push(Pose::from_translation(p));
        }
    }
    Ok(out)
}

/// Renders rig footage and ground truth for every location and writes the
/// dataset with its manifest into `out_dir`.
pub fn gen_dataset(
    scene: &Scene,
    rig: &RigConfig,
    locations: &[Pose],
    opts: &GenOptions,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    rig.validate()?;
    let n_train = train_count(locations.len(), opts.split_ratio)?;
    if opts.fov_choices.is_empty() {
        return Err(Error::config("fov_choices is empty"));
    }
    for (i, loc) in locations.iter().enumerate() {
        let gap = scene.clearance(loc.translation());
        if gap <= MIN_CLEARANCE {
            return Err(Error::precondition(format!(
                "location {i} is {gap:.3} m from scene geometry (minimum {MIN_CLEARANCE} m)"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..locations.len()).collect();
    order.shuffle(&mut rng);
    let mut split = vec![Split::Eval; locations.len()];
    for &i in &order[..n_train] {
        split[i] = Split::Train;
    }
    let fovs: Vec<f64> = (0..locations.len())
        .map(|_| opts.fov_choices[rng.random_range(0..opts.fov_choices.len())])
        .collect();

    fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(locations.len());
    for (i, center) in locations.iter().enumerate() {
        let id = i as u32;
        let dir_name = format!("loc_{id:04}");
        let loc_dir = out_dir.join(&dir_name);
        fs::create_dir_all(&loc_dir)?;
        let rel = |name: &str| format!("{dir_name}/{name}");
        let intr = rig.intrinsics.with_fov(fovs[i])?;

        let faces = render_cube_faces(scene, center, opts.face_size)?;
        let (erp, depth) = compose_erp_from_faces(&faces, &opts.grid)?;
        erp.save_rgb_png(&loc_dir.join("gt_erp.png"))?;
        depth.save_inverse_png(&loc_dir.join("gt_depth.png"), INVERSE_DEPTH_SCALE)?;

        let mut sensors = Vec::with_capacity(rig.sensor_count);
        for (k, pose) in rig.sensor_poses(center).into_iter().enumerate() {
            let (fish, _) = render_fisheye(scene, &pose, &intr);
            let fish_name = format!("fisheye_{k:02}.png");
            fish.save_rgb_png(&loc_dir.join(&fish_name))?;

            let at_sensor = Pose::from_translation(*pose.translation());
            let faces = render_cube_faces(scene, &at_sensor, opts.face_size)?;
            let (gt, _) = compose_erp_from_faces(&faces, &opts.grid)?;
            let gt_name = format!("erp_{k:02}.png");
            gt.save_rgb_png(&loc_dir.join(&gt_name))?;

            sensors.push(SensorEntry {
                pose,
                fisheye: rel(&fish_name),
                gt_erp: rel(&gt_name),
            });
        }
        entries.push(LocationEntry {
            id,
            split: split[i],
            center: *center,
            resolution: opts.grid,
            fov_deg: fovs[i].to_degrees(),
            sensors,
            gt_erp: rel("gt_erp.png"),
            gt_depth: rel("gt_depth.png"),
        });
    }

    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        depth_scale: INVERSE_DEPTH_SCALE,
        rig: rig.clone(),
        locations: entries,
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Paths referenced by a manifest, resolved against `root`.
pub fn referenced_files(manifest: &DatasetManifest, root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for l in &manifest.locations {
        out.push(root.join(&l.gt_erp));
        out.push(root.join(&l.gt_depth));
        for s in &l.sensors {
            out.push(root.join(&s.fisheye));
            out.push(root.join(&s.gt_erp));
        }
    }
    out
}

/// One-hot α at the layer nearest each pixel's depth in inverse-depth space.
///
/// Infinite depth selects the outermost layer. Exact ties go to the nearer
/// (smaller radius) layer.
pub fn gt_alpha_from_depth(depth: &DepthMap, radii: &[f64]) -> Result<AlphaVolume> {
    if radii.is_empty() {
        return Err(Error::domain("need at least one radius"));
    }
    if radii.windows(2).any(|w| !(w[0] < w[1])) || !(radii[0] > 0.0) {
        return Err(Error::domain("radii must be positive and strictly increasing"));
    }
    let inv: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
    let tie_tol = 1e-12 * inv[0];
    let n = radii.len();
    let (w, h) = (depth.width(), depth.height());
    let mut vol = AlphaVolume::zeros(h, w, n);
    for y in 0..h {
        for x in 0..w {
            let d = depth.get(x, y);
            if !(d > 0.0) {
                return Err(Error::domain(format!("depth {d} at ({x}, {y}) is not positive")));
            }
            let layer = if d.is_infinite() {
                n - 1
            } else {
                let q = 1.0 / d;
                let mut best = 0;
                let mut best_err = (q - inv[0]).abs();
                for (i, &r) in inv.iter().enumerate().skip(1) {
                    let err = (q - r).abs();
                    if err < best_err - tie_tol {
                        best = i;
                        best_err = err;
                    }
                }
                best
            };
            vol.set(y, x, layer, 1.0);
        }
    }
    Ok(vol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn depth_row(values: &[f64]) -> DepthMap {
        DepthMap::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn gt_alpha_cases() {
        let radii = [1.0, 2.0, 4.0];
        // exact radius, infinity, and the reciprocal midpoint between 1 and 2
        // (1/d = 0.75 is exact in binary; d = 4/3 is not, so build from 0.75)
        let mid = 1.0 / 0.75;
        let vol = gt_alpha_from_depth(&depth_row(&[2.0, f64::INFINITY, mid, 100.0, 0.5]), &radii).unwrap();
        assert_eq!(vol.pixel(0, 0), [0.0, 1.0, 0.0]);
        assert_eq!(vol.pixel(0, 1), [0.0, 0.0, 1.0]);
        assert_eq!(vol.pixel(0, 2), [1.0, 0.0, 0.0]);
        assert_eq!(vol.pixel(0, 3), [0.0, 0.0, 1.0]);
        assert_eq!(vol.pixel(0, 4), [1.0, 0.0, 0.0]);
        for y in 0..1 {
            for x in 0..5 {
                assert_eq!(vol.pixel(y, x).iter().sum::<f32>(), 1.0);
            }
        }
    }

    #[test]
    fn gt_alpha_tie_breaks_toward_nearer() {
        // Reciprocals 1.5 and 0.5 with midpoint exactly 1.0.
        let radii = [1.0 / 1.5, 2.0];
        let vol = gt_alpha_from_depth(&depth_row(&[1.0]), &radii).unwrap();
        assert_eq!(vol.pixel(0, 0), [1.0, 0.0]);
    }

    #[test]
    fn gt_alpha_rejects_bad_radii() {
        let d = depth_row(&[1.0]);
        assert!(matches!(gt_alpha_from_depth(&d, &[2.0, 1.0]), Err(Error::Domain(_))));
        assert!(gt_alpha_from_depth(&d, &[1.0, 1.0]).is_err());
        assert!(gt_alpha_from_depth(&depth_row(&[-1.0]), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn split_arithmetic() {
        assert_eq!(train_count(10, 0.8).unwrap(), 8);
        assert_eq!(train_count(2000, 0.8).unwrap(), 1600);
        assert!(matches!(train_count(10, 1.5), Err(Error::Config(_))));
    }

    #[test]
    fn ring_poses_face_outward() {
        let rig = RigConfig::new(6, 0.15, FisheyeIntrinsics::centered(32, 3.8).unwrap()).unwrap();
        let center = Pose::from_translation(Vec3::new(1.0, 2.0, 3.0));
        for p in rig.sensor_poses(&center) {
            let offset = p.translation() - center.translation();
            assert!((offset.norm() - 0.15).abs() < 1e-12);
            assert!((offset.normalize() - p.forward().into_inner()).norm() < 1e-12);
        }
        assert!(RigConfig::new(1, 0.1, rig.intrinsics).is_err());
        assert!(rig.check_inside(0.6).is_ok());
        assert!(rig.check_inside(0.1).is_err());
    }
}
