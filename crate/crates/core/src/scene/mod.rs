//! Procedural ground-truth scenes.
//!
//! A [`Scene`] is a handful of analytic primitives with flat or procedural
//! textures, shaded Lambertian under one directional light plus ambient. No
//! shadows or inter-reflections are traced, so radiance at a surface point is
//! independent of the viewing position. The renderers in [`render`] and the
//! dataset writer in [`dataset`] build on [`Scene::trace`].

pub mod dataset;
pub mod render;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{UnitVec, Vec3};

pub type Rgb = [f32; 3];

fn default_light() -> [f64; 3] {
    [0.4, 0.8, 0.3]
}

fn default_ambient() -> f32 {
    0.35
}

/// Scene description, loadable from JSON.
///
/// ```json
/// {
///   "background": [0.5, 0.6, 0.8],
///   "light_dir": [0.4, 0.8, 0.3],
///   "ambient": 0.35,
///   "primitives": [
///     { "shape": { "type": "sphere", "center": [0, 0, 3], "radius": 0.5 },
///       "material": { "kind": "noise", "scale": 0.3, "a": [1, 0, 0], "b": [0, 0, 1], "seed": 7 } }
///   ]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
    pub background: Rgb,
    /// Direction toward the light (normalized on use).
    #[serde(default = "default_light")]
    pub light_dir: [f64; 3],
    #[serde(default = "default_ambient")]
    pub ambient: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub material: Material,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Sphere { center: [f64; 3], radius: f64 },
    /// Axis-aligned box.
    Box { min: [f64; 3], max: [f64; 3] },
    /// Infinite plane through `point`.
    Plane { point: [f64; 3], normal: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Material {
    Flat { color: Rgb },
    Checker { scale: f64, a: Rgb, b: Rgb },
    Stripe { scale: f64, a: Rgb, b: Rgb },
    /// Smooth value noise blending `a` and `b`.
    Noise { scale: f64, a: Rgb, b: Rgb, seed: u64 },
}

/// Result of a primary-ray query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trace {
    pub rgb: Rgb,
    /// Distance to the hit along the ray, `+inf` on a miss.
    pub depth: f64,
}

/// Surface intersection details, exposed for tests and tooling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    /// Normal facing the ray origin.
    pub normal: Vec3,
    pub uv: (f64, f64),
    pub primitive: usize,
}

/// Minimum ray parameter accepted as a hit.
const T_MIN: f64 = 1e-9;

impl Scene {
    pub fn from_json(s: &str) -> Result<Scene> {
        let scene: Scene = serde_json::from_str(s)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.primitives.iter().enumerate() {
            match p.shape {
                Shape::Sphere { radius, .. } if !(radius > 0.0) => {
                    return Err(Error::config(format!("primitive {i}: sphere radius must be positive")))
                }
                Shape::Box { min, max } if (0..3).any(|k| !(min[k] < max[k])) => {
                    return Err(Error::config(format!("primitive {i}: box min must be below max")))
                }
                Shape::Plane { normal, .. } if Vec3::from(normal).norm() == 0.0 => {
                    return Err(Error::config(format!("primitive {i}: plane normal is zero")))
                }
                _ => {}
            }
            match p.material {
                Material::Checker { scale, .. }
                | Material::Stripe { scale, .. }
                | Material::Noise { scale, .. }
                    if !(scale > 0.0) =>
                {
                    return Err(Error::config(format!("primitive {i}: texture scale must be positive")))
                }
                _ => {}
            }
        }
        if Vec3::from(self.light_dir).norm() == 0.0 {
            return Err(Error::config("light_dir is zero"));
        }
        Ok(())
    }

    /// Single flat-colored enclosing sphere, handy for uniform-image checks.
    pub fn uniform(color: Rgb, radius: f64) -> Scene {
        Scene {
            primitives: vec![Primitive {
                shape: Shape::Sphere {
                    center: [0.0; 3],
                    radius,
                },
                material: Material::Flat { color },
            }],
            background: color,
            light_dir: default_light(),
            ambient: 1.0,
        }
    }

    /// Closed room with textured walls and a few objects, centred near the origin.
    ///
    /// Every surface stays at least 1 m from the origin, so locations within
    /// about 0.5 m of it keep well clear of geometry.
    pub fn default_room(seed: u64) -> Scene {
        let wall = |point: [f64; 3], normal: [f64; 3], a: Rgb, b: Rgb, scale: f64, k: u64| Primitive {
            shape: Shape::Plane { point, normal },
            material: Material::Noise {
                scale,
                a,
                b,
                seed: seed.wrapping_add(k),
            },
        };
        let primitives = vec![
            wall([0.0, -1.5, 0.0], [0.0, 1.0, 0.0], [0.55, 0.45, 0.35], [0.30, 0.22, 0.15], 0.8, 1),
            wall([0.0, 2.5, 0.0], [0.0, -1.0, 0.0], [0.85, 0.85, 0.80], [0.70, 0.72, 0.75], 1.5, 2),
            wall([4.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.70, 0.55, 0.50], [0.45, 0.35, 0.40], 1.0, 3),
            wall([-4.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.45, 0.60, 0.55], [0.25, 0.40, 0.45], 1.0, 4),
            wall([0.0, 0.0, 5.0], [0.0, 0.0, -1.0], [0.60, 0.60, 0.75], [0.35, 0.35, 0.55], 1.2, 5),
            wall([0.0, 0.0, -5.0], [0.0, 0.0, 1.0], [0.75, 0.70, 0.50], [0.50, 0.45, 0.30], 1.2, 6),
            Primitive {
                shape: Shape::Sphere {
                    center: [1.2, 0.0, 2.2],
                    radius: 0.6,
                },
                material: Material::Noise {
                    scale: 0.25,
                    a: [0.85, 0.25, 0.20],
                    b: [0.95, 0.75, 0.30],
                    seed: seed.wrapping_add(7),
                },
            },
            Primitive {
                shape: Shape::Sphere {
                    center: [-2.0, 0.4, -1.5],
                    radius: 0.8,
                },
                material: Material::Noise {
                    scale: 0.35,
                    a: [0.20, 0.50, 0.85],
                    b: [0.60, 0.85, 0.95],
                    seed: seed.wrapping_add(8),
                },
            },
            Primitive {
                shape: Shape::Box {
                    min: [-1.6, -1.5, 1.6],
                    max: [-0.6, -0.5, 2.6],
                },
                material: Material::Noise {
                    scale: 0.2,
                    a: [0.30, 0.70, 0.30],
                    b: [0.70, 0.90, 0.45],
                    seed: seed.wrapping_add(9),
                },
            },
            Primitive {
                shape: Shape::Box {
                    min: [1.5, -1.5, -2.5],
                    max: [2.5, 0.3, -1.5],
                },
                material: Material::Checker {
                    scale: 0.5,
                    a: [0.75, 0.70, 0.65],
                    b: [0.55, 0.50, 0.48],
                },
            },
        ];
        Scene {
            primitives,
            background: [0.5, 0.6, 0.8],
            light_dir: default_light(),
            ambient: default_ambient(),
        }
    }

    /// Nearest intersection along a ray.
    pub fn intersect(&self, origin: &Vec3, dir: &UnitVec) -> Option<Hit> {
        let d = dir.as_vec();
        let mut best: Option<(f64, usize, Vec3)> = None;
        for (i, p) in self.primitives.iter().enumerate() {
            if let Some((t, n)) = p.shape.intersect(origin, d) {
                if best.is_none_or(|(bt, _, _)| t < bt) {
                    best = Some((t, i, n));
                }
            }
        }
        best.map(|(t, i, n)| {
            let point = origin + d * t;
            let normal = if n.dot(d) > 0.0 { -n } else { n };
            Hit {
                t,
                point,
                normal,
                uv: self.primitives[i].shape.uv(&point),
                primitive: i,
            }
        })
    }

    /// Shaded colour and depth for one primary ray.
    pub fn trace(&self, origin: &Vec3, dir: &UnitVec) -> Trace {
        match self.intersect(origin, dir) {
            None => Trace {
                rgb: self.background,
                depth: f64::INFINITY,
            },
            Some(hit) => {
                let albedo = self.primitives[hit.primitive].material.albedo(hit.uv);
                let shade = self.shading(&hit.normal);
                Trace {
                    rgb: albedo.map(|a| (a * shade).clamp(0.0, 1.0)),
                    depth: hit.t,
                }
            }
        }
    }

    /// Lambert factor `ambient + (1 - ambient) * max(0, n.l)`.
    pub fn shading(&self, normal: &Vec3) -> f32 {
        let l = Vec3::from(self.light_dir).normalize();
        let lambert = normal.dot(&l).max(0.0) as f32;
        self.ambient + (1.0 - self.ambient) * lambert
    }

    /// Distance from `p` to the closest primitive surface.
    pub fn clearance(&self, p: &Vec3) -> f64 {
        self.primitives
            .iter()
            .map(|prim| prim.shape.distance(p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Convenience for ad-hoc `trace` calls.
pub fn trace_ray(scene: &Scene, origin: &Vec3, dir: &UnitVec) -> Trace {
    scene.trace(origin, dir)
}

impl Shape {
    /// Smallest positive ray parameter and the geometric normal there.
    fn intersect(&self, o: &Vec3, d: &Vec3) -> Option<(f64, Vec3)> {
        match *self {
            Shape::Sphere { center, radius } => {
                let c = Vec3::from(center);
                let oc = o - c;
                let b = oc.dot(d);
                let q = oc.norm_squared() - radius * radius;
                let disc = b * b - q;
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                let t = if -b - s > T_MIN { -b - s } else { -b + s };
                (t > T_MIN).then(|| (t, (o + d * t - c) / radius))
            }
            Shape::Box { min, max } => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                let mut near_axis = 0;
                let mut far_axis = 0;
                for k in 0..3 {
                    if d[k] == 0.0 {
                        if o[k] < min[k] || o[k] > max[k] {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (min[k] - o[k]) / d[k];
                    let t2 = (max[k] - o[k]) / d[k];
                    let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
                    if lo > t_near {
                        t_near = lo;
                        near_axis = k;
                    }
                    if hi < t_far {
                        t_far = hi;
                        far_axis = k;
                    }
                }
                if t_near > t_far || t_far <= T_MIN {
                    return None;
                }
                let (t, axis) = if t_near > T_MIN { (t_near, near_axis) } else { (t_far, far_axis) };
                let mut n = Vec3::zeros();
                n[axis] = 1.0;
                Some((t, n))
            }
            Shape::Plane { point, normal } => {
                let n = Vec3::from(normal).normalize();
                let denom = n.dot(d);
                if denom == 0.0 {
                    return None;
                }
                let t = (Vec3::from(point) - o).dot(&n) / denom;
                (t > T_MIN).then_some((t, n))
            }
        }
    }

    /// Texture coordinates in meters on the surface.
    pub fn uv(&self, p: &Vec3) -> (f64, f64) {
        match *self {
            Shape::Sphere { center, radius } => {
                let l = (p - Vec3::from(center)) / radius;
                (l.x.atan2(l.z) * radius, l.y.clamp(-1.0, 1.0).asin() * radius)
            }
            Shape::Box { min, max } => {
                // Face axis: the coordinate closest to a slab boundary.
                let mut axis = 0;
                let mut best = f64::INFINITY;
                for k in 0..3 {
                    let gap = (p[k] - min[k]).abs().min((p[k] - max[k]).abs());
                    if gap < best {
                        best = gap;
                        axis = k;
                    }
                }
                let (a, b) = match axis {
                    0 => (2, 1),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                (p[a], p[b])
            }
            Shape::Plane { point, normal } => {
                let (t1, t2) = plane_basis(&Vec3::from(normal).normalize());
                let rel = p - Vec3::from(point);
                (rel.dot(&t1), rel.dot(&t2))
            }
        }
    }

    fn distance(&self, p: &Vec3) -> f64 {
        match *self {
            Shape::Sphere { center, radius } => ((p - Vec3::from(center)).norm() - radius).abs(),
            Shape::Box { min, max } => {
                let mut outside = Vec3::zeros();
                let mut inside = f64::NEG_INFINITY;
                for k in 0..3 {
                    let d = (min[k] - p[k]).max(p[k] - max[k]);
                    outside[k] = d.max(0.0);
                    inside = inside.max(d);
                }
                if inside > 0.0 {
                    outside.norm()
                } else {
                    -inside
                }
            }
            Shape::Plane { point, normal } => {
                (p - Vec3::from(point)).dot(&Vec3::from(normal).normalize()).abs()
            }
        }
    }
}

fn plane_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let t1 = n.cross(&helper).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

impl Material {
    /// Unshaded surface colour at texture coordinate `uv`.
    pub fn albedo(&self, (u, v): (f64, f64)) -> Rgb {
        match *self {
            Material::Flat { color } => color,
            Material::Checker { scale, a, b } => {
                let parity = ((u / scale).floor() + (v / scale).floor()).rem_euclid(2.0);
                if parity < 0.5 {
                    a
                } else {
                    b
                }
            }
            Material::Stripe { scale, a, b } => {
                if (u / scale).floor().rem_euclid(2.0) < 0.5 {
                    a
                } else {
                    b
                }
            }
            Material::Noise { scale, a, b, seed } => {
                let t = value_noise(u / scale, v / scale, seed) as f32;
                [
                    a[0] + (b[0] - a[0]) * t,
                    a[1] + (b[1] - a[1]) * t,
                    a[2] + (b[2] - a[2]) * t,
                ]
            }
        }
    }
}

/// Two-octave smooth lattice noise in `[0, 1]`.
pub fn value_noise(x: f64, y: f64, seed: u64) -> f64 {
    let base = lattice_noise(x, y, seed);
    let detail = lattice_noise(2.0 * x + 17.3, 2.0 * y - 5.1, seed ^ 0x9e37_79b9_7f4a_7c15);
    (base * 2.0 + detail) / 3.0
}

fn lattice_noise(x: f64, y: f64, seed: u64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (smooth(x - x0), smooth(y - y0));
    let (ix, iy) = (x0 as i64, y0 as i64);
    let h = |dx: i64, dy: i64| lattice_value(ix + dx, iy + dy, seed);
    let top = h(0, 0) + (h(1, 0) - h(0, 0)) * fx;
    let bottom = h(0, 1) + (h(1, 1) - h(0, 1)) * fx;
    top + (bottom - top) * fy
}

#[inline]
fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn lattice_value(ix: i64, iy: i64, seed: u64) -> f64 {
    // splitmix64 finalizer over the packed lattice coordinate
    let mut z = seed
        ^ (ix as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (iy as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dir(x: f64, y: f64, z: f64) -> UnitVec {
        UnitVec::new(Vec3::new(x, y, z)).unwrap()
    }

    #[test]
    fn miss_returns_background() {
        let scene = Scene {
            primitives: vec![],
            background: [0.1, 0.2, 0.3],
            light_dir: default_light(),
            ambient: 0.3,
        };
        let t = scene.trace(&Vec3::zeros(), &dir(0.0, 0.0, 1.0));
        assert_eq!(t.rgb, [0.1, 0.2, 0.3]);
        assert!(t.depth.is_infinite());
    }

    #[test]
    fn sphere_depth() {
        let scene = Scene {
            primitives: vec![Primitive {
                shape: Shape::Sphere {
                    center: [0.0, 0.0, 5.0],
                    radius: 1.0,
                },
                material: Material::Flat { color: [1.0, 0.0, 0.0] },
            }],
            background: [0.0; 3],
            light_dir: default_light(),
            ambient: 0.3,
        };
        let t = scene.trace(&Vec3::zeros(), &dir(0.0, 0.0, 1.0));
        assert_abs_diff_eq!(t.depth, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn hit_colour_is_texture_at_analytic_uv() {
        // Ray straight down onto a floor plane: the hit point is known exactly.
        let mat = Material::Noise {
            scale: 0.3,
            a: [0.9, 0.1, 0.2],
            b: [0.1, 0.8, 0.7],
            seed: 11,
        };
        let scene = Scene {
            primitives: vec![Primitive {
                shape: Shape::Plane {
                    point: [0.0, -2.0, 0.0],
                    normal: [0.0, 1.0, 0.0],
                },
                material: mat.clone(),
            }],
            background: [0.0; 3],
            light_dir: [0.0, 1.0, 0.0],
            ambient: 0.2,
        };
        let origin = Vec3::new(0.37, 0.0, -1.21);
        let t = scene.trace(&origin, &dir(0.0, -1.0, 0.0));
        assert_abs_diff_eq!(t.depth, 2.0, epsilon = 1e-12);
        let hit = Vec3::new(0.37, -2.0, -1.21);
        let expected = mat.albedo(Shape::Plane { point: [0.0, -2.0, 0.0], normal: [0.0, 1.0, 0.0] }.uv(&hit));
        // light straight overhead: full Lambert factor
        for c in 0..3 {
            assert_abs_diff_eq!(t.rgb[c], expected[c], epsilon = 1e-6);
        }
    }

    #[test]
    fn inside_sphere_and_box_hits() {
        let s = Shape::Sphere {
            center: [0.0; 3],
            radius: 3.0,
        };
        let (t, _) = s.intersect(&Vec3::zeros(), &Vec3::x()).unwrap();
        assert_abs_diff_eq!(t, 3.0, epsilon = 1e-12);
        let b = Shape::Box {
            min: [-1.0, -2.0, -3.0],
            max: [1.0, 2.0, 3.0],
        };
        let (t, n) = b.intersect(&Vec3::zeros(), &Vec3::y()).unwrap();
        assert_abs_diff_eq!(t, 2.0, epsilon = 1e-12);
        assert_eq!(n, Vec3::y());
        let (t, _) = b.intersect(&Vec3::new(0.0, 0.0, -10.0), &Vec3::z()).unwrap();
        assert_abs_diff_eq!(t, 7.0, epsilon = 1e-12);
    }

    #[test]
    fn textures() {
        let c = Material::Checker {
            scale: 1.0,
            a: [1.0; 3],
            b: [0.0; 3],
        };
        assert_eq!(c.albedo((0.5, 0.5)), [1.0; 3]);
        assert_eq!(c.albedo((1.5, 0.5)), [0.0; 3]);
        assert_eq!(c.albedo((-0.5, 0.5)), [0.0; 3]);
        for i in 0..100 {
            let n = value_noise(i as f64 * 0.37, i as f64 * -0.11, 3);
            assert!((0.0..=1.0).contains(&n));
        }
        assert_eq!(value_noise(1.3, 2.7, 5), value_noise(1.3, 2.7, 5));
        assert_ne!(value_noise(1.3, 2.7, 5), value_noise(1.3, 2.7, 6));
    }

    #[test]
    fn room_is_closed_and_clear() {
        let room = Scene::default_room(1);
        assert!(room.clearance(&Vec3::zeros()) >= 1.0);
        for i in 0..200 {
            let a = i as f64 * 0.731;
            let d = dir(a.sin(), (a * 1.7).cos(), a.cos());
            assert!(room.trace(&Vec3::zeros(), &d).depth.is_finite());
        }
    }

    #[test]
    fn json_round_trip() {
        let room = Scene::default_room(3);
        let s = serde_json::to_string_pretty(&room).unwrap();
        assert_eq!(Scene::from_json(&s).unwrap(), room);
        assert!(Scene::from_json(r#"{"primitives":[{"shape":{"type":"sphere","center":[0,0,0],"radius":-1},"material":{"kind":"flat","color":[1,1,1]}}],"background":[0,0,0]}"#).is_err());
    }
}
