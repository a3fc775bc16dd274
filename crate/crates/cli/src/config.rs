use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spheresweep::alpha::{Activation, PhotoParams, DEFAULT_BETA, DEFAULT_SUPPORT_RADIUS};
use spheresweep::scene::dataset::{RigConfig, MIN_CLEARANCE};
use spheresweep::{Error, ErpGrid, FisheyeIntrinsics, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMethod {
    Photo,
    Net,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Train,
    Eval,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigSection {
    pub sensor_count: usize,
    pub ring_radius: f64,
    /// Square fisheye image side, pixels.
    pub fisheye_size: usize,
    /// Lens model field of view; per-location fov is drawn from `gen.fov_deg`.
    pub fov_deg: f64,
}

impl Default for RigSection {
    fn default() -> Self {
        RigSection {
            sensor_count: 6,
            ring_radius: 0.15,
            fisheye_size: 512,
            fov_deg: 220.0,
        }
    }
}

/// Inline rig parameters or a path to a JSON file holding them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RigSource {
    Path(PathBuf),
    Inline(RigSection),
}

impl Default for RigSource {
    fn default() -> Self {
        RigSource::Inline(RigSection::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSection {
    pub locations: usize,
    /// Rig centres are drawn from `[-extent, extent]^3`, meters.
    pub extent: f64,
    pub clearance: f64,
    pub split_ratio: f64,
    pub fov_deg: Vec<f64>,
    /// Cube face side for ground-truth ERPs; defaults to the ERP width.
    pub face_size: Option<usize>,
}

impl Default for GenSection {
    fn default() -> Self {
        GenSection {
            locations: 4,
            extent: 0.5,
            clearance: 0.8,
            split_ratio: 0.5,
            fov_deg: vec![220.0],
            face_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub near: f64,
    pub far: f64,
    pub layers: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            near: 0.6,
            far: 1000.0,
            layers: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaSection {
    pub method: AlphaMethod,
    /// Network weights; without them the network runs with seeded random weights.
    pub weights: Option<PathBuf>,
    pub activation: Activation,
    pub beta: f64,
    pub support_radius: usize,
}

impl Default for AlphaSection {
    fn default() -> Self {
        AlphaSection {
            method: AlphaMethod::Photo,
            weights: None,
            activation: Activation::Sigmoid,
            beta: DEFAULT_BETA,
            support_radius: DEFAULT_SUPPORT_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Scene JSON; the built-in room is used when absent.
    pub scene: Option<PathBuf>,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub rig: RigSource,
    pub gen: GenSection,
    pub sweep: SweepSection,
    pub alpha: AlphaSection,
    pub eval_split: EvalSplit,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset_dir: None,
            output_dir: PathBuf::from("out"),
            scene: None,
            seed: 0,
            width: 400,
            height: 200,
            rig: RigSource::default(),
            gen: GenSection::default(),
            sweep: SweepSection::default(),
            alpha: AlphaSection::default(),
            eval_split: EvalSplit::Eval,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

impl PipelineConfig {
    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = serde_json::from_str(&read_text(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.dataset_dir.as_mut().map(fix);
        fix(&mut cfg.output_dir);
        cfg.scene.as_mut().map(fix);
        cfg.alpha.weights.as_mut().map(fix);
        if let RigSource::Path(p) = &mut cfg.rig {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<ErpGrid> {
        ErpGrid::new(self.width, self.height).map_err(|e| Error::Config(format!("width/height: {e}")))
    }

    pub fn rig_section(&self) -> Result<RigSection> {
        match &self.rig {
            RigSource::Inline(r) => Ok(r.clone()),
            RigSource::Path(p) => serde_json::from_str(&read_text(p)?)
                .map_err(|e| Error::Config(format!("rig {}: {e}", p.display()))),
        }
    }

    pub fn rig(&self) -> Result<RigConfig> {
        let r = self.rig_section()?;
        let intr = FisheyeIntrinsics::centered(r.fisheye_size, r.fov_deg.to_radians())
            .map_err(|e| Error::Config(format!("rig.fisheye_size/rig.fov_deg: {e}")))?;
        RigConfig::new(r.sensor_count, r.ring_radius, intr)
    }

    pub fn photo_params(&self) -> PhotoParams {
        PhotoParams {
            beta: self.alpha.beta,
            support_radius: self.alpha.support_radius,
        }
    }

    /// Field-level checks that need no file access beyond the rig.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::Config(format!("{field}: {why}")));
        let grid = self.grid()?;
        if !(0.0..=1.0).contains(&self.gen.split_ratio) {
            return bad("gen.split_ratio", format!("{} must lie in [0, 1]", self.gen.split_ratio));
        }
        if self.gen.locations == 0 {
            return bad("gen.locations", "must be at least 1".into());
        }
        if !(self.gen.extent >= 0.0 && self.gen.extent.is_finite()) {
            return bad("gen.extent", format!("{} must be finite and non-negative", self.gen.extent));
        }
        if !(self.gen.clearance > MIN_CLEARANCE) {
            return bad(
                "gen.clearance",
                format!("{} must exceed {MIN_CLEARANCE} m", self.gen.clearance),
            );
        }
        if self.gen.fov_deg.is_empty() || self.gen.fov_deg.iter().any(|f| !(*f > 0.0 && *f < 360.0)) {
            return bad("gen.fov_deg", "needs one or more values in (0, 360)".into());
        }
        let s = &self.sweep;
        if !(s.near > 0.0 && s.near < s.far && s.far.is_finite()) {
            return bad("sweep.near/sweep.far", format!("need 0 < near < far, got {} and {}", s.near, s.far));
        }
        if s.layers < 2 {
            return bad("sweep.layers", format!("need at least 2, got {}", s.layers));
        }
        if !(self.alpha.beta > 0.0 && self.alpha.beta.is_finite()) {
            return bad("alpha.beta", format!("{} must be positive", self.alpha.beta));
        }
        if self.alpha.method == AlphaMethod::Net {
            for (field, v) in [("sweep.layers", s.layers), ("width", grid.width()), ("height", grid.height())] {
                if v % 8 != 0 {
                    return bad(field, format!("{v} must be divisible by 8 for the network"));
                }
            }
        }
        let rig = self.rig()?;
        rig.check_inside(s.near).map_err(|e| Error::Config(format!("rig.ring_radius: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn net_needs_divisible_dims() {
        let mut c = PipelineConfig::default();
        c.alpha.method = AlphaMethod::Net;
        c.sweep.layers = 30;
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("sweep.layers"), "{e}");
    }

    #[test]
    fn rig_inside_near_sphere() {
        let mut c = PipelineConfig::default();
        c.sweep.near = 0.1;
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("rig.ring_radius"), "{e}");
    }

    #[test]
    fn rig_from_inline_or_path() {
        let text = r#"{"rig": {"sensor_count": 4}, "alpha": {"method": "net", "activation": "reluclamp"}}"#;
        let c: PipelineConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.rig().unwrap().sensor_count, 4);
        assert_eq!(c.alpha.activation, Activation::ReluClamp);
        let c: PipelineConfig = serde_json::from_str(r#"{"rig": "rig.json"}"#).unwrap();
        assert_eq!(c.rig, RigSource::Path("rig.json".into()));
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sweeep": {}}"#).is_err());
    }
}
