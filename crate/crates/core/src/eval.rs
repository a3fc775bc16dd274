//! Scoring MSI renders against ground truth at the capture positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{ErpGrid, Pose};
use crate::image::Image;
use crate::metrics::{evaluate, MeanStd, QualityReport};
use crate::msi::{render_view, Msi, ViewOutput, ViewRequest};

/// ERP pixels (world-aligned, seen from the sensor's optical centre) whose
/// direction is within `fov / 2` of the sensor's optical axis.
pub fn sensor_fov_mask(grid: &ErpGrid, sensor: &Pose, fov: f64) -> Vec<bool> {
    let axis = sensor.forward();
    let half = fov / 2.0;
    (0..grid.height())
        .flat_map(|y| (0..grid.width()).map(move |x| (x, y)))
        .map(|(x, y)| grid.pixel_dir(x, y).angle_to(&axis) <= half)
        .collect()
}

/// World-aligned ERP rendered from the sensor's optical centre.
pub fn render_at_sensor(msi: &Msi, sensor: &Pose, grid: &ErpGrid) -> Result<Image> {
    let eye = Pose::from_translation(*sensor.translation());
    render_view(msi, &ViewRequest::from_world(msi, &eye, ViewOutput::Erp(*grid)))
}

/// One evaluated view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewScore {
    pub location: u32,
    pub sensor: usize,
    #[serde(flatten)]
    pub report: QualityReport,
}

/// Renders at every sensor position and scores against `ground_truth`
/// (one world-aligned ERP per sensor) inside each sensor's field of view.
pub fn score_location(
    msi: &Msi,
    location: u32,
    sensors: &[Pose],
    ground_truth: &[Image],
    fov: f64,
) -> Result<Vec<ViewScore>> {
    if sensors.len() != ground_truth.len() {
        return Err(Error::shape(format!(
            "{} sensors but {} ground-truth images",
            sensors.len(),
            ground_truth.len()
        )));
    }
    sensors
        .iter()
        .zip(ground_truth)
        .enumerate()
        .map(|(k, (pose, gt))| {
            let grid = ErpGrid::new(gt.width(), gt.height())?;
            let img = render_at_sensor(msi, pose, &grid)?;
            let mask = sensor_fov_mask(&grid, pose, fov);
            Ok(ViewScore {
                location,
                sensor: k,
                report: evaluate(&img, gt, &mask)?,
            })
        })
        .collect()
}

/// Mean ± std over individual views and over per-location means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub views: usize,
    pub locations: usize,
    pub psnr_over_views: MeanStd,
    pub ssim_over_views: MeanStd,
    pub psnr_over_locations: MeanStd,
    pub ssim_over_locations: MeanStd,
}

pub fn summarize(rows: &[ViewScore]) -> Result<Summary> {
    if rows.is_empty() {
        return Err(Error::precondition("no views to summarize"));
    }
    let psnr: Vec<f64> = rows.iter().map(|r| r.report.psnr).collect();
    let ssim: Vec<f64> = rows.iter().map(|r| r.report.ssim).collect();
    let mut ids: Vec<u32> = rows.iter().map(|r| r.location).collect();
    ids.sort_unstable();
    ids.dedup();
    let per_loc = |f: fn(&QualityReport) -> f64| -> Vec<f64> {
        ids.iter()
            .map(|id| {
                let v: Vec<f64> = rows.iter().filter(|r| r.location == *id).map(|r| f(&r.report)).collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect()
    };
    let loc_psnr = per_loc(|r| r.psnr);
    let loc_ssim = per_loc(|r| r.ssim);
    let ms = |v: &[f64]| MeanStd::of(v).expect("non-empty");
    Ok(Summary {
        views: rows.len(),
        locations: ids.len(),
        psnr_over_views: ms(&psnr),
        ssim_over_views: ms(&ssim),
        psnr_over_locations: ms(&loc_psnr),
        ssim_over_locations: ms(&loc_ssim),
    })
}
