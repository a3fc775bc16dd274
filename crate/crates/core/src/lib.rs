//! Sphere-sweep volumes and multi-sphere images for 6-DoF omnidirectional
//! video from multi-fisheye camera rigs.
//!
//! Pipeline: [`scene`] renders synthetic rig footage and ground truth,
//! [`wssv`] fuses the footage onto concentric spheres, [`alpha`] predicts per
//! sphere opacity, [`msi`] composites the result from new eye positions and
//! [`metrics`] scores the renders.
//!
//! Conventions used throughout: right-handed world with `+y` up and `+z`
//! forward; ERP pixel `(u, v)` with integer coordinates at pixel centres, `u`
//! growing eastward from longitude `-pi` and `v` growing downward from the
//! north pole; layer index 0 is the innermost sphere.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x < y)` deliberately rejects NaN

pub mod alpha;
pub mod error;
pub mod eval;
pub mod geom;
pub mod image;
mod io;
pub mod metrics;
pub mod msi;
pub mod scene;
pub mod volume;
pub mod wssv;

pub use error::{Error, Result};
pub use geom::{
    dir_to_erp_pixel, dir_to_fisheye_pixel, erp_pixel_to_dir, fisheye_pixel_to_dir, ray_sphere_intersect, ErpGrid,
    FisheyeIntrinsics, Pose, UnitVec, Vec3,
};
pub use image::{DepthMap, Image};
pub use msi::{assemble_msi, composite_center, render_view, Msi, ViewRequest};
pub use volume::AlphaVolume;
pub use wssv::{build_wssv, sweep_radii, FisheyeView, SweepRadii, Wssv};
