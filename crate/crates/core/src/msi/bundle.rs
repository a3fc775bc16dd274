//! Directory bundle: `manifest.json` plus one 8-bit RGBA PNG per layer.
//! This is the format consumed by the interactive viewer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Msi;
use crate::error::{Error, Result};
use crate::geom::{ErpGrid, Pose};
use crate::image::Image;
use crate::wssv::SweepRadii;

pub const BUNDLE_MANIFEST: &str = "manifest.json";
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub width: usize,
    pub height: usize,
    pub num_layers: usize,
    /// Ascending.
    pub radii_m: Vec<f64>,
    pub color_space: String,
    pub alpha: String,
    pub layer_files: Vec<String>,
    /// Rig centre in world coordinates. Readers that only care about the
    /// MSI frame may ignore it.
    #[serde(default = "Pose::identity")]
    pub center_pose: Pose,
}

impl BundleManifest {
    fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::format("MSI manifest", reason));
        if self.format_version != BUNDLE_FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        if self.color_space != "srgb" {
            return bad(format!("color_space must be \"srgb\", got {:?}", self.color_space));
        }
        if self.alpha != "straight" {
            return bad(format!("alpha must be \"straight\", got {:?}", self.alpha));
        }
        if self.radii_m.len() != self.num_layers {
            return bad(format!(
                "num_layers is {} but radii_m has {} entries",
                self.num_layers,
                self.radii_m.len()
            ));
        }
        if self.layer_files.len() != self.num_layers {
            return bad(format!(
                "num_layers is {} but layer_files has {} entries",
                self.num_layers,
                self.layer_files.len()
            ));
        }
        if self.radii_m.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("radii_m must be strictly increasing".into());
        }
        if self
            .layer_files
            .iter()
            .any(|f| f.is_empty() || f.contains(['/', '\\']) || f == "..")
        {
            return bad("layer_files must be plain file names".into());
        }
        Ok(())
    }
}

fn layer_file_name(i: usize) -> String {
    format!("layer_{i:03}.png")
}

/// Writes the bundle into `dir` (created if needed). Colours and α are
/// clamped to `[0, 1]` and rounded to 8 bits.
pub fn export_msi(msi: &Msi, dir: &Path) -> Result<BundleManifest> {
    std::fs::create_dir_all(dir)?;
    let manifest = BundleManifest {
        format_version: BUNDLE_FORMAT_VERSION,
        width: msi.grid().width(),
        height: msi.grid().height(),
        num_layers: msi.num_layers(),
        radii_m: msi.radii().radii().to_vec(),
        color_space: "srgb".into(),
        alpha: "straight".into(),
        layer_files: (0..msi.num_layers()).map(layer_file_name).collect(),
        center_pose: *msi.center(),
    };
    for (layer, name) in msi.layers().iter().zip(&manifest.layer_files) {
        layer.save_rgba_png(&dir.join(name))?;
    }
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join(BUNDLE_MANIFEST), json + "\n")?;
    Ok(manifest)
}

pub fn import_msi(dir: &Path) -> Result<Msi> {
    let path = dir.join(BUNDLE_MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.clone()),
        _ => Error::Io(e),
    })?;
    let manifest: BundleManifest =
        serde_json::from_str(&text).map_err(|e| Error::format("MSI manifest", e.to_string()))?;
    manifest.validate()?;
    let grid = ErpGrid::new(manifest.width, manifest.height)?;
    let radii = SweepRadii::from_radii(manifest.radii_m.clone())?;
    let layers = manifest
        .layer_files
        .iter()
        .map(|f| {
            let img = Image::load_rgba_png(&dir.join(f))?;
            if img.width() != grid.width() || img.height() != grid.height() {
                return Err(Error::format(
                    "MSI bundle",
                    format!("{f} is {}x{}, manifest says {}x{}", img.width(), img.height(), grid.width(), grid.height()),
                ));
            }
            Ok(img)
        })
        .collect::<Result<Vec<_>>>()?;
    Msi::new(grid, radii, manifest.center_pose, layers)
}
