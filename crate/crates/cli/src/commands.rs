use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spheresweep::alpha::{forward, encoder_decoder_spec, photoconsistency_alpha, Tensor, WeightStore};
use spheresweep::eval::{score_location, summarize, Summary, ViewScore};
use spheresweep::msi::export_msi;
use spheresweep::msi::ViewOutput;
use spheresweep::scene::dataset::{gen_dataset, sample_locations, DatasetManifest, GenOptions, LocationEntry, Split, MANIFEST_FILE};
use spheresweep::scene::render::Pinhole;
use spheresweep::scene::Scene;
use spheresweep::{
    assemble_msi, build_wssv, render_view, sweep_radii, AlphaVolume, Error, ErpGrid, Image, Msi, Pose, Result, Vec3,
    ViewRequest, Wssv,
};

use crate::config::{AlphaMethod, EvalSplit, PipelineConfig};

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into())
}

fn out_dir(cfg: &PipelineConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(&cfg.output_dir)
}

fn dataset(cfg: &PipelineConfig) -> Result<(PathBuf, DatasetManifest)> {
    let root = cfg
        .dataset_dir
        .clone()
        .ok_or_else(|| Error::Config("dataset_dir is not set (use --dataset or the config key)".into()))?;
    let manifest = DatasetManifest::load(&root.join(MANIFEST_FILE))?;
    Ok((root, manifest))
}

pub fn gen(cfg: &PipelineConfig) -> Result<()> {
    let scene = match &cfg.scene {
        Some(p) => Scene::from_json(
            &fs::read_to_string(p).map_err(|e| Error::Config(format!("scene {}: {e}", p.display())))?,
        )?,
        None => Scene::default_room(cfg.seed),
    };
    let rig = cfg.rig()?;
    let g = &cfg.gen;
    let locations = sample_locations(&scene, g.locations, g.extent, g.clearance, cfg.seed)?;
    let grid = cfg.grid()?;
    let opts = GenOptions {
        face_size: g.face_size.unwrap_or(grid.width()),
        split_ratio: g.split_ratio,
        fov_choices: g.fov_deg.iter().map(|d| d.to_radians()).collect(),
        seed: cfg.seed,
        ..GenOptions::new(grid)
    };
    let out = out_dir(cfg)?;
    let manifest = gen_dataset(&scene, &rig, &locations, &opts, out)?;
    println!(
        "{}: {} locations ({} train, {} eval)",
        out.join(MANIFEST_FILE).display(),
        manifest.locations.len(),
        manifest.ids(Split::Train).len(),
        manifest.ids(Split::Eval).len()
    );
    Ok(())
}

fn build_location_wssv(cfg: &PipelineConfig, root: &Path, manifest: &DatasetManifest, loc: &LocationEntry) -> Result<Wssv> {
    let s = &cfg.sweep;
    manifest.rig.check_inside(s.near)?;
    let radii = sweep_radii(s.near, s.far, s.layers)?;
    let views = loc.load_views(root, &manifest.rig)?;
    build_wssv(&views, &loc.center, &radii, &loc.resolution)
}

pub fn sweep(cfg: &PipelineConfig, location: u32) -> Result<PathBuf> {
    let (root, manifest) = dataset(cfg)?;
    let wssv = build_location_wssv(cfg, &root, &manifest, manifest.location(location)?)?;
    let path = out_dir(cfg)?.join(format!("loc_{location:04}.wssv"));
    wssv.save(&path)?;
    println!("{}", path.display());
    Ok(path)
}

pub fn estimate_alpha(cfg: &PipelineConfig, wssv: &Wssv) -> Result<AlphaVolume> {
    match cfg.alpha.method {
        AlphaMethod::Photo => photoconsistency_alpha(wssv, &cfg.photo_params()),
        AlphaMethod::Net => {
            let spec = encoder_decoder_spec();
            let weights = match &cfg.alpha.weights {
                Some(p) => WeightStore::load(p)?,
                None => {
                    eprintln!("warning: no network weights configured, using random weights (seed {})", cfg.seed);
                    WeightStore::random(&spec, cfg.seed)?
                }
            };
            forward(&spec, &weights, &Tensor::from_wssv(wssv), cfg.alpha.activation)
        }
    }
}

/// Writes `<stem>.ssav` (α) and `<stem>.msi` next to each other in the output directory.
pub fn alpha(cfg: &PipelineConfig, wssv_path: &Path) -> Result<(PathBuf, PathBuf)> {
    let wssv = Wssv::load(wssv_path)?;
    let alpha = estimate_alpha(cfg, &wssv)?;
    let msi = assemble_msi(&wssv, &alpha)?;
    let out = out_dir(cfg)?;
    let stem = file_stem(wssv_path);
    let (a, m) = (out.join(format!("{stem}.ssav")), out.join(format!("{stem}.msi")));
    alpha.save(&a)?;
    msi.save(&m)?;
    println!("{}\n{}", a.display(), m.display());
    Ok((a, m))
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|_| "expected x,y,z".to_string())
}

#[derive(clap::Args, Debug, Clone)]
pub struct RenderArgs {
    pub msi: PathBuf,
    /// Eye position in world coordinates; defaults to the MSI centre.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, conflicts_with = "offset")]
    pub position: Option<[f64; 3]>,
    /// Eye position relative to the MSI centre (world axes).
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub offset: Option<[f64; 3]>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub yaw_deg: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub pitch_deg: f64,
    #[arg(long, default_value_t = 400)]
    pub width: usize,
    /// Pinhole output with this horizontal fov; ERP when absent.
    #[arg(long)]
    pub fov_deg: Option<f64>,
    /// Pinhole height; defaults to width * 3 / 4.
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long, default_value = "render.png")]
    pub name: String,
}

pub fn render(cfg: &PipelineConfig, args: &RenderArgs) -> Result<PathBuf> {
    let msi = Msi::load(&args.msi)?;
    let centre = *msi.center().translation();
    let position = match (args.position, args.offset) {
        (Some([x, y, z]), _) => Vec3::new(x, y, z),
        (None, Some([x, y, z])) => centre + Vec3::new(x, y, z),
        (None, None) => centre,
    };
    let eye = Pose::from_yaw_pitch(args.yaw_deg.to_radians(), args.pitch_deg.to_radians(), position);
    let output = match args.fov_deg {
        None => ViewOutput::Erp(ErpGrid::new(args.width, args.width / 2)?),
        Some(fov) => ViewOutput::Pinhole(Pinhole::new(
            args.width,
            args.height.unwrap_or(args.width * 3 / 4),
            fov.to_radians(),
        )?),
    };
    let img = render_view(&msi, &ViewRequest::from_world(&msi, &eye, output))?;
    if Path::new(&args.name).components().count() != 1 {
        return Err(Error::Config(format!("--name {:?} must be a plain file name", args.name)));
    }
    let path = out_dir(cfg)?.join(&args.name);
    img.save_rgb_png(&path)?;
    println!("{}", path.display());
    Ok(path)
}

#[derive(Serialize)]
struct Report<'a> {
    rows: &'a [ViewScore],
    summary: Summary,
}

fn score(msi: &Msi, root: &Path, loc: &LocationEntry) -> Result<Vec<ViewScore>> {
    let poses: Vec<Pose> = loc.sensors.iter().map(|s| s.pose).collect();
    let gts = loc
        .sensors
        .iter()
        .map(|s| Image::load_rgb_png(&root.join(&s.gt_erp)))
        .collect::<Result<Vec<_>>>()?;
    score_location(msi, loc.id, &poses, &gts, loc.fov_deg.to_radians())
}

pub fn eval(cfg: &PipelineConfig, split: Option<EvalSplit>, msi: Option<&Path>, location: Option<u32>) -> Result<()> {
    let (root, manifest) = dataset(cfg)?;
    let mut rows = Vec::new();
    if let Some(path) = msi {
        let id = location.ok_or_else(|| Error::Config("--msi needs --location".into()))?;
        rows.extend(score(&Msi::load(path)?, &root, manifest.location(id)?)?);
    } else {
        let split = split.unwrap_or(cfg.eval_split);
        let ids: Vec<u32> = match location {
            Some(id) => vec![id],
            None => match split {
                EvalSplit::Train => manifest.ids(Split::Train),
                EvalSplit::Eval => manifest.ids(Split::Eval),
                EvalSplit::All => manifest.locations.iter().map(|l| l.id).collect(),
            },
        };
        if ids.is_empty() {
            return Err(Error::Config(format!("no locations in split {split:?}")));
        }
        for id in ids {
            let loc = manifest.location(id)?;
            let wssv = build_location_wssv(cfg, &root, &manifest, loc)?;
            let msi = assemble_msi(&wssv, &estimate_alpha(cfg, &wssv)?)?;
            rows.extend(score(&msi, &root, loc)?);
        }
    }
    let summary = summarize(&rows)?;
    for r in &rows {
        println!(
            "location {:>4} sensor {:>2}  PSNR {:6.2} dB  SSIM {:.4}",
            r.location, r.sensor, r.report.psnr, r.report.ssim
        );
    }
    println!(
        "over {} views:     PSNR {} dB  SSIM {:.4}",
        summary.views, summary.psnr_over_views, summary.ssim_over_views
    );
    println!(
        "over {} locations: PSNR {} dB  SSIM {:.4}",
        summary.locations, summary.psnr_over_locations, summary.ssim_over_locations
    );
    let path = out_dir(cfg)?.join("report.json");
    let report = Report { rows: &rows, summary };
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    println!("{}", path.display());
    Ok(())
}

pub fn export(cfg: &PipelineConfig, msi_path: &Path) -> Result<()> {
    let msi = Msi::load(msi_path)?;
    let dir = out_dir(cfg)?.join(format!("{}_bundle", file_stem(msi_path)));
    export_msi(&msi, &dir)?;
    println!("{}", dir.display());
    Ok(())
}
