//! Spherical projection and ray geometry shared by every stage.
//!
//! Conventions, fixed throughout the crate:
//!
//! * Camera and rig frames are `+z` forward, `+y` up, `+x` to the image right.
//! * A pose maps its local frame into world: `p_world = R * p_local + t`,
//!   so `t` is the optical center in world coordinates.
//! * ERP pixel `(u, v)` follows
//!   `lon = (u + 0.5) / W * 2pi - pi`, `lat = pi/2 - (v + 0.5) / H * pi`,
//!   `dir = (cos lat sin lon, sin lat, cos lat cos lon)`.
//!   Integer coordinates are pixel centres; the image centre `(W/2 - 0.5, H/2 - 0.5)`
//!   looks straight down `+z`.
//! * Fisheye lenses are equidistant: image radius `r = focal * theta`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec(Vec3);

impl UnitVec {
    /// Normalizes `v`. Returns `None` for zero or non-finite input.
    pub fn new(v: Vec3) -> Option<Self> {
        let n = v.norm();
        if n > 0.0 && n.is_finite() {
            Some(UnitVec(v / n))
        } else {
            None
        }
    }

    /// Wraps a vector the caller already knows has unit length.
    pub fn new_unchecked(v: Vec3) -> Self {
        UnitVec(v)
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_inner(self) -> Vec3 {
        self.0
    }

    /// Angle to another direction, in radians.
    pub fn angle_to(&self, other: &UnitVec) -> f64 {
        let cross = self.0.cross(&other.0).norm();
        cross.atan2(self.0.dot(&other.0))
    }
}

/// Rigid transform placing a camera (or the rig) in world space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    /// Row-major 3x3 rotation.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let r = p.rotation;
        PoseRepr {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;

    fn try_from(r: PoseRepr) -> Result<Self> {
        let m = Matrix3::from_fn(|i, j| r.rotation[i][j]);
        Pose::new(m, Vec3::from(r.translation))
    }
}

const ORTHONORMAL_TOL: f64 = 1e-9;

impl Pose {
    /// Builds a pose, checking that `rotation` is a proper rotation.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(err <= ORTHONORMAL_TOL) {
            return Err(Error::domain(format!(
                "rotation is not orthonormal (max |RᵀR - I| = {err:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::domain(format!("rotation determinant is {det}, expected +1")));
        }
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(Error::domain("translation is not finite"));
        }
        Ok(Pose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation about `+y` by `yaw`, then about the rotated `+x` by `pitch`.
    /// Positive yaw turns `+z` toward `+x`; positive pitch tilts it toward `+y`.
    pub fn from_yaw_pitch(yaw: f64, pitch: f64, translation: Vec3) -> Self {
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), -pitch);
        Pose {
            rotation: *r.matrix(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Optical axis (`+z` of the local frame) in world coordinates.
    pub fn forward(&self) -> UnitVec {
        UnitVec::new_unchecked(self.rotation.column(2).into_owned())
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_dir(&self, d: &UnitVec) -> UnitVec {
        UnitVec::new_unchecked(self.rotation * d.0)
    }

    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.translation)
    }

    pub fn inverse_transform_dir(&self, d: &UnitVec) -> UnitVec {
        UnitVec::new_unchecked(self.rotation.transpose() * d.0)
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Pose of `self` expressed in the frame of `reference`.
    pub fn relative_to(&self, reference: &Pose) -> Pose {
        reference.inverse().compose(self)
    }
}

/// Full 360x180 equirectangular frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ErpGridRepr")]
pub struct ErpGrid {
    width: usize,
    height: usize,
}

#[derive(Deserialize)]
struct ErpGridRepr {
    width: usize,
    height: usize,
}

impl TryFrom<ErpGridRepr> for ErpGrid {
    type Error = Error;

    fn try_from(r: ErpGridRepr) -> Result<Self> {
        ErpGrid::new(r.width, r.height)
    }
}

impl ErpGrid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if height == 0 || width != 2 * height {
            return Err(Error::domain(format!(
                "ERP grid must be 2:1 and non-empty, got {width}x{height}"
            )));
        }
        Ok(ErpGrid { width, height })
    }

    /// Grid of the given height (width = 2 * height).
    pub fn with_height(height: usize) -> Result<Self> {
        ErpGrid::new(2 * height, height)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Direction through the centre of integer pixel `(x, y)`.
    pub fn pixel_dir(&self, x: usize, y: usize) -> UnitVec {
        erp_dir_unchecked(x as f64, y as f64, self)
    }
}

fn erp_dir_unchecked(u: f64, v: f64, grid: &ErpGrid) -> UnitVec {
    let lon = (u + 0.5) / grid.width as f64 * TAU - PI;
    let lat = FRAC_PI_2 - (v + 0.5) / grid.height as f64 * PI;
    let (slon, clon) = lon.sin_cos();
    let (slat, clat) = lat.sin_cos();
    UnitVec::new_unchecked(Vec3::new(clat * slon, slat, clat * clon))
}

/// Direction for ERP coordinate `(u, v)`; `0 <= u < W`, `0 <= v < H`.
pub fn erp_pixel_to_dir(u: f64, v: f64, grid: &ErpGrid) -> Result<UnitVec> {
    let (w, h) = (grid.width as f64, grid.height as f64);
    if !(0.0..w).contains(&u) || !(0.0..h).contains(&v) {
        return Err(Error::domain(format!(
            "ERP coordinate ({u}, {v}) outside [0, {w}) x [0, {h})"
        )));
    }
    Ok(erp_dir_unchecked(u, v, grid))
}

/// Inverse of [`erp_pixel_to_dir`].
///
/// Longitude wraps to `[-pi, pi)`; the resulting `u` is then folded into
/// `[0, W)` so it can be sampled with horizontal wrap-around, and `v` is
/// clamped at the top edge. The exact poles map to `(W/2, 0)` and `(W/2, H)`.
pub fn dir_to_erp_pixel(d: &UnitVec, grid: &ErpGrid) -> (f64, f64) {
    let (w, h) = (grid.width as f64, grid.height as f64);
    let (x, y, z) = (d.x(), d.y(), d.z());
    if x == 0.0 && z == 0.0 {
        return if y >= 0.0 { (w / 2.0, 0.0) } else { (w / 2.0, h) };
    }
    let mut lon = x.atan2(z);
    if lon >= PI {
        lon -= TAU;
    }
    let lat = y.atan2(x.hypot(z));
    let mut u = (lon + PI) / TAU * w - 0.5;
    if u < 0.0 {
        u += w;
    }
    if u >= w {
        u -= w;
    }
    let v = ((FRAC_PI_2 - lat) / PI * h - 0.5).clamp(0.0, h);
    (u, v)
}

/// Equidistant fisheye lens with a circular field-of-view mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FisheyeRepr", into = "FisheyeRepr")]
pub struct FisheyeIntrinsics {
    width: usize,
    height: usize,
    cx: f64,
    cy: f64,
    focal: f64,
    fov: f64,
}

#[derive(Serialize, Deserialize)]
struct FisheyeRepr {
    width: usize,
    height: usize,
    principal_point: [f64; 2],
    /// Pixels per radian.
    focal: f64,
    /// Full image-circle field of view, degrees.
    fov_deg: f64,
}

impl From<FisheyeIntrinsics> for FisheyeRepr {
    fn from(f: FisheyeIntrinsics) -> Self {
        FisheyeRepr {
            width: f.width,
            height: f.height,
            principal_point: [f.cx, f.cy],
            focal: f.focal,
            fov_deg: f.fov.to_degrees(),
        }
    }
}

impl TryFrom<FisheyeRepr> for FisheyeIntrinsics {
    type Error = Error;

    fn try_from(r: FisheyeRepr) -> Result<Self> {
        FisheyeIntrinsics::new(
            r.width,
            r.height,
            r.principal_point,
            r.focal,
            r.fov_deg.to_radians(),
        )
    }
}

impl FisheyeIntrinsics {
    pub fn new(
        width: usize,
        height: usize,
        principal_point: [f64; 2],
        focal: f64,
        fov: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("fisheye image must be non-empty"));
        }
        if !(fov > 0.0 && fov < TAU) {
            return Err(Error::domain(format!("fov {fov} rad outside (0, 2pi)")));
        }
        if !(focal > 0.0 && focal.is_finite()) {
            return Err(Error::domain(format!("focal {focal} must be positive")));
        }
        let [cx, cy] = principal_point;
        if !(-0.5..=width as f64 - 0.5).contains(&cx) || !(-0.5..=height as f64 - 0.5).contains(&cy) {
            return Err(Error::domain(format!(
                "principal point ({cx}, {cy}) outside the {width}x{height} image"
            )));
        }
        Ok(FisheyeIntrinsics {
            width,
            height,
            cx,
            cy,
            focal,
            fov,
        })
    }

    /// Square sensor whose image circle exactly fills the frame.
    pub fn centered(size: usize, fov: f64) -> Result<Self> {
        let c = (size as f64 - 1.0) / 2.0;
        let focal = (size as f64 / 2.0) / (fov / 2.0);
        FisheyeIntrinsics::new(size, size, [c, c], focal, fov)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn fov(&self) -> f64 {
        self.fov
    }

    /// Same lens geometry with a different mask.
    pub fn with_fov(&self, fov: f64) -> Result<Self> {
        FisheyeIntrinsics::new(self.width, self.height, [self.cx, self.cy], self.focal, fov)
    }

    /// Radius of the image circle in pixels.
    pub fn circle_radius(&self) -> f64 {
        self.focal * self.fov / 2.0
    }

    /// Whether the centre of integer pixel `(x, y)` lies inside the image circle.
    pub fn pixel_in_circle(&self, x: usize, y: usize) -> bool {
        let r = (x as f64 - self.cx).hypot(y as f64 - self.cy);
        r / self.focal <= self.fov / 2.0 + ANGLE_EPS
    }
}

/// Slack on the mask comparison so the boundary stays inclusive under rounding.
const ANGLE_EPS: f64 = 1e-12;

/// Camera-frame direction for fisheye pixel `(u, v)`; `None` outside the image circle.
pub fn fisheye_pixel_to_dir(u: f64, v: f64, intr: &FisheyeIntrinsics) -> Result<Option<UnitVec>> {
    let (w, h) = (intr.width as f64, intr.height as f64);
    if !(-0.5..=w - 0.5).contains(&u) || !(-0.5..=h - 0.5).contains(&v) {
        return Err(Error::domain(format!(
            "fisheye coordinate ({u}, {v}) outside the {w}x{h} image"
        )));
    }
    let dx = u - intr.cx;
    let dy = v - intr.cy;
    let r = dx.hypot(dy);
    let theta = r / intr.focal;
    if theta > intr.fov / 2.0 + ANGLE_EPS {
        return Ok(None);
    }
    if r == 0.0 {
        return Ok(Some(UnitVec::new_unchecked(Vec3::z())));
    }
    let (st, ct) = theta.sin_cos();
    Ok(Some(UnitVec::new_unchecked(Vec3::new(
        st * dx / r,
        -st * dy / r,
        ct,
    ))))
}

/// Fisheye pixel for a camera-frame direction; `None` beyond `fov / 2` off-axis.
pub fn dir_to_fisheye_pixel(d: &UnitVec, intr: &FisheyeIntrinsics) -> Option<(f64, f64)> {
    let (x, y, z) = (d.x(), d.y(), d.z());
    let rho = x.hypot(y);
    let theta = rho.atan2(z);
    if theta > intr.fov / 2.0 + ANGLE_EPS {
        return None;
    }
    if rho == 0.0 {
        return Some((intr.cx, intr.cy));
    }
    let r = intr.focal * theta;
    Some((intr.cx + r * x / rho, intr.cy - r * y / rho))
}

/// Intersection of a ray starting strictly inside a centred sphere with that sphere.
///
/// Solves `|o + t d| = radius` for the positive root
/// `t = -(o.d) + sqrt((o.d)^2 - |o|^2 + radius^2)`.
pub fn ray_sphere_intersect(origin: &Vec3, dir: &UnitVec, radius: f64) -> Result<Vec3> {
    let o2 = origin.norm_squared();
    if !(o2 < radius * radius) {
        return Err(Error::precondition(format!(
            "ray origin at distance {} is not inside sphere of radius {radius}",
            o2.sqrt()
        )));
    }
    Ok(ray_sphere_point(origin, dir.as_vec(), radius))
}

/// Unchecked variant for hot loops whose caller has validated the origin.
#[inline]
pub(crate) fn ray_sphere_point(origin: &Vec3, dir: &Vec3, radius: f64) -> Vec3 {
    let b = origin.dot(dir);
    let c = origin.norm_squared() - radius * radius;
    let t = -b + (b * b - c).sqrt();
    origin + dir * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> ErpGrid {
        ErpGrid::new(128, 64).unwrap()
    }

    #[test]
    fn erp_centre_is_forward() {
        let d = erp_pixel_to_dir(63.5, 31.5, &grid()).unwrap();
        assert_abs_diff_eq!(d.x(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.y(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.z(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn erp_top_row() {
        let d = erp_pixel_to_dir(63.5, 0.0, &grid()).unwrap();
        // latitude pi/2 - pi/128
        let lat = FRAC_PI_2 - PI / 128.0;
        assert_abs_diff_eq!(d.x(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.y(), lat.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.z(), lat.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.y(), 0.99970, epsilon = 1e-5);
        assert_abs_diff_eq!(d.z(), 0.02454, epsilon = 1e-5);
    }

    #[test]
    fn erp_rejects_out_of_range() {
        assert!(matches!(erp_pixel_to_dir(-1.0, 3.0, &grid()), Err(Error::Domain(_))));
        assert!(erp_pixel_to_dir(3.0, -0.5, &grid()).is_err());
        assert!(erp_pixel_to_dir(128.0, 3.0, &grid()).is_err());
        assert!(ErpGrid::new(100, 60).is_err());
    }

    #[test]
    fn erp_inverse_and_poles() {
        let (u, v) = dir_to_erp_pixel(&UnitVec::new_unchecked(Vec3::z()), &grid());
        assert_abs_diff_eq!(u, 63.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 31.5, epsilon = 1e-12);
        assert_eq!(dir_to_erp_pixel(&UnitVec::new_unchecked(Vec3::y()), &grid()), (64.0, 0.0));
        assert_eq!(dir_to_erp_pixel(&UnitVec::new_unchecked(-Vec3::y()), &grid()), (64.0, 64.0));
    }

    #[test]
    fn erp_round_trip_all_centres() {
        let g = grid();
        for y in 0..g.height() {
            for x in 0..g.width() {
                let d = erp_pixel_to_dir(x as f64, y as f64, &g).unwrap();
                let (u, v) = dir_to_erp_pixel(&d, &g);
                assert!((u - x as f64).abs() < 1e-9 && (v - y as f64).abs() < 1e-9, "{x},{y} -> {u},{v}");
            }
        }
    }

    fn lens(fov_deg: f64) -> FisheyeIntrinsics {
        FisheyeIntrinsics::centered(200, fov_deg.to_radians()).unwrap()
    }

    #[test]
    fn fisheye_principal_point_is_axis() {
        let l = lens(220.0);
        let (cx, cy) = l.principal_point();
        let d = fisheye_pixel_to_dir(cx, cy, &l).unwrap().unwrap();
        assert_eq!(d.into_inner(), Vec3::z());
        assert_eq!(dir_to_fisheye_pixel(&UnitVec::new_unchecked(Vec3::z()), &l), Some((cx, cy)));
    }

    #[test]
    fn fisheye_mask_boundary() {
        let l = FisheyeIntrinsics::new(400, 400, [199.5, 199.5], 50.0, 200f64.to_radians()).unwrap();
        let r = l.circle_radius();
        let d = fisheye_pixel_to_dir(199.5 + r, 199.5, &l).unwrap().unwrap();
        assert_abs_diff_eq!(d.angle_to(&UnitVec::new_unchecked(Vec3::z())), l.fov() / 2.0, epsilon = 1e-12);
        assert!(fisheye_pixel_to_dir(199.5 + 1.01 * r, 199.5, &l).unwrap().is_none());
        assert!(fisheye_pixel_to_dir(400.0, 0.0, &l).is_err());
    }

    #[test]
    fn fisheye_mask_comparison_between_lenses() {
        let off_axis = |deg: f64| {
            let t = deg.to_radians();
            UnitVec::new_unchecked(Vec3::new(t.sin(), 0.0, t.cos()))
        };
        // 220 deg covers up to 110 deg off-axis, 190 deg up to 95 deg.
        assert!(dir_to_fisheye_pixel(&off_axis(105.0), &lens(220.0)).is_some());
        assert!(dir_to_fisheye_pixel(&off_axis(105.0), &lens(190.0)).is_none());
        assert!(dir_to_fisheye_pixel(&off_axis(110.0), &lens(220.0)).is_some());
        assert!(dir_to_fisheye_pixel(&off_axis(111.0), &lens(220.0)).is_none());
    }

    #[test]
    fn fisheye_image_axes() {
        // +x is image right, +y is image up.
        let l = lens(180.0);
        let (cx, cy) = l.principal_point();
        let right = fisheye_pixel_to_dir(cx + 10.0, cy, &l).unwrap().unwrap();
        let up = fisheye_pixel_to_dir(cx, cy - 10.0, &l).unwrap().unwrap();
        assert!(right.x() > 0.0 && right.y().abs() < 1e-15);
        assert!(up.y() > 0.0 && up.x().abs() < 1e-15);
    }

    #[test]
    fn sphere_intersections() {
        let x = UnitVec::new_unchecked(Vec3::x());
        let y = UnitVec::new_unchecked(Vec3::y());
        assert_eq!(ray_sphere_intersect(&Vec3::zeros(), &x, 2.0).unwrap(), Vec3::new(2.0, 0.0, 0.0));
        let p = ray_sphere_intersect(&Vec3::new(1.0, 0.0, 0.0), &y, 2.0).unwrap();
        assert_abs_diff_eq!(p, Vec3::new(1.0, 3f64.sqrt(), 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.7320508, epsilon = 1e-7);
        assert!(matches!(
            ray_sphere_intersect(&Vec3::new(3.0, 0.0, 0.0), &x, 2.0),
            Err(Error::Precondition(_))
        ));
        assert!(ray_sphere_intersect(&Vec3::new(2.0, 0.0, 0.0), &x, 2.0).is_err());
    }

    #[test]
    fn pose_transforms() {
        let id = Pose::identity();
        let v = Vec3::new(0.3, -1.0, 2.0);
        assert_eq!(id.transform_point(&v), v);

        let shifted = Pose::from_translation(Vec3::new(5.0, 1.0, -2.0));
        let d = UnitVec::new(v).unwrap();
        assert_eq!(shifted.transform_dir(&d), d);

        let yaw = Pose::from_yaw_pitch(FRAC_PI_2, 0.0, Vec3::zeros());
        let out = yaw.transform_dir(&UnitVec::new_unchecked(Vec3::z()));
        assert_abs_diff_eq!(out.into_inner(), Vec3::x(), epsilon = 1e-15);

        let p = Pose::from_yaw_pitch(0.7, -0.3, Vec3::new(1.0, 2.0, 3.0));
        let round = p.compose(&p.inverse());
        assert_abs_diff_eq!(*round.rotation(), Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(*round.translation(), Vec3::zeros(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.inverse_transform_point(&p.transform_point(&v)), v, epsilon = 1e-12);
    }

    #[test]
    fn pose_rejects_non_rotation() {
        let mut m = Matrix3::identity();
        m[(0, 0)] = -1.0;
        assert!(Pose::new(m, Vec3::zeros()).is_err());
        assert!(Pose::new(Matrix3::identity() * 1.1, Vec3::zeros()).is_err());
    }

    #[test]
    fn pose_json_round_trip() {
        let p = Pose::from_yaw_pitch(0.4, 0.1, Vec3::new(1.0, 0.0, -2.0));
        let s = serde_json::to_string(&p).unwrap();
        let q: Pose = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
