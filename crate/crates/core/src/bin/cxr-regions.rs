use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use cxr_regions::enhance::{clahe, znormalize};
use cxr_regions::io::{load_image, load_mask, save_image, save_mask};
use cxr_regions::orientation::{correct_orientation, Side};
use cxr_regions::pipeline::{
    evaluate_pairs, generate_corpus, load_detection, load_manifests, run_batch, write_eval_report,
    write_view_outputs, EvalPair, PipelineConfig,
};
use cxr_regions::template::{
    align_views, ap_regions, bbox_from_mask_fallback, crop_to_detection, lat_regions,
    verticalize_ap, CropParams,
};
use cxr_regions::{maskops, ViewKind};

#[derive(Parser)]
#[command(name = "cxr-regions", version, about = "Region extraction for paired AP/LAT chest radiographs")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    clip_limit: Option<f64>,
    /// CLAHE tile grid, e.g. 8x8.
    #[arg(long, global = true, value_parser = parse_wxh)]
    tiles: Option<(usize, usize)>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    confidence_threshold: Option<f64>,
    #[arg(long, global = true)]
    margin: Option<f64>,
    /// auto, left or right.
    #[arg(long, global = true)]
    spine_side: Option<String>,
    /// WxH or "native".
    #[arg(long, global = true)]
    resize_metrics: Option<String>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// CLAHE-enhance one image (optionally also write z-normalized values as JSON).
    Enhance {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        znorm: Option<PathBuf>,
    },
    /// Crop an image (and mask) to a detection box, or to the mask box.
    Crop {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        detection: Option<PathBuf>,
        #[arg(long, default_value = "AP")]
        view: ViewKind,
    },
    /// Put the spine of a lateral image on the right.
    Orient {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
    },
    /// Template regions for one already-cropped AP/LAT pair.
    Regions {
        #[arg(long)]
        case_id: String,
        #[arg(long)]
        ap_image: PathBuf,
        #[arg(long)]
        ap_mask: PathBuf,
        #[arg(long)]
        lat_image: PathBuf,
        #[arg(long)]
        lat_mask: PathBuf,
    },
    /// Compare predicted and reference masks.
    Evaluate {
        #[arg(long)]
        pred: Vec<PathBuf>,
        #[arg(long = "ref")]
        reference: Vec<PathBuf>,
        /// JSON list of {"case_id", "pred", "ref"} objects.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Generate a synthetic AP/LAT corpus with a manifest.
    Phantom {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Full pipeline over a manifest.
    Run { manifest: PathBuf },
}

fn parse_wxh(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w = w.parse().map_err(|_| format!("bad width {w:?}"))?;
    let h = h.parse().map_err(|_| format!("bad height {h:?}"))?;
    Ok((w, h))
}

enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

fn config_from(g: &GlobalOpts) -> anyhow::Result<PipelineConfig> {
    let mut c = match &g.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(j) = g.jobs {
        c.jobs = j;
    }
    if let Some(v) = g.clip_limit {
        c.clahe.clip_limit = v;
    }
    if let Some((x, y)) = g.tiles {
        c.clahe.tiles_x = x;
        c.clahe.tiles_y = y;
    }
    if let Some(v) = g.epsilon {
        c.epsilon = v;
    }
    if let Some(v) = g.confidence_threshold {
        c.confidence_threshold = v;
    }
    if let Some(v) = g.margin {
        c.margin = v;
    }
    if let Some(s) = &g.spine_side {
        c.spine_side = match s.as_str() {
            "auto" => None,
            other => Some(other.parse::<Side>()?),
        };
    }
    if let Some(s) = &g.resize_metrics {
        c.resize_metrics = match s.as_str() {
            "native" => None,
            other => Some(parse_wxh(other).map_err(anyhow::Error::msg)?),
        };
    }
    if c.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    if !(c.margin >= 0.0 && c.margin.is_finite()) {
        bail!("margin must be non-negative");
    }
    if !(0.0..=1.0).contains(&c.confidence_threshold) {
        bail!("confidence threshold must be in [0, 1]");
    }
    Ok(c)
}

fn out_file(dir: &Path, name: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(name))
}

fn execute(cmd: Command, c: &PipelineConfig, out: &Path) -> anyhow::Result<bool> {
    match cmd {
        Command::Enhance { input, output, znorm } => {
            let img = load_image(&input)?;
            save_image(&clahe(&img, &c.clahe)?, &output)?;
            if let Some(p) = znorm {
                let z = znormalize(&img, c.epsilon);
                let doc = serde_json::json!({
                    "width": z.width(), "height": z.height(), "values": z.values(),
                });
                std::fs::write(&p, serde_json::to_string(&doc)?)
                    .with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Crop { image, mask, detection, view } => {
            let img = load_image(&image)?;
            let mask = mask.map(load_mask).transpose()?;
            let params = CropParams {
                margin_frac: c.margin,
                confidence_threshold: c.confidence_threshold,
            };
            let det = match (detection, &mask) {
                (Some(p), _) => load_detection(&p)?,
                (None, Some(m)) => bbox_from_mask_fallback(m, view, c.margin)?,
                (None, None) => bail!("crop needs --detection or --mask"),
            };
            let (cropped, (x0, y0)) = crop_to_detection(&img, &det, view, &params)?;
            save_image(&cropped, out_file(out, "crop.png")?)?;
            if let Some(m) = mask {
                let b = cxr_regions::BBox::new(x0, y0, x0 + cropped.width() - 1, y0 + cropped.height() - 1);
                save_mask(&m.crop(&b)?, out_file(out, "crop_mask.png")?)?;
            }
            println!("{}", serde_json::json!({ "offset": [x0, y0] }));
        }
        Command::Orient { image, mask } => {
            let (img, m) = (load_image(&image)?, load_mask(&mask)?);
            let (oi, om, outcome) = correct_orientation(&img, &m, c.spine_side)?;
            save_image(&oi, out_file(out, "oriented.png")?)?;
            save_mask(&om, out_file(out, "oriented_mask.png")?)?;
            println!("{}", serde_json::to_string(&outcome)?);
        }
        Command::Regions { case_id, ap_image, ap_mask, lat_image, lat_mask } => {
            let ap_img = clahe(&load_image(&ap_image)?, &c.clahe)?;
            let ap_m = maskops::keep_largest(&load_mask(&ap_mask)?, 2);
            let v = verticalize_ap(&ap_img, &ap_m)?;
            let mut ap = ap_regions(&v.mask)?;
            ap.transform.rotation_deg = v.rotation_deg;
            ap.transform.rotation_center = v.center;
            let lat_img = clahe(&load_image(&lat_image)?, &c.clahe)?;
            let mut lat = lat_regions(&load_mask(&lat_mask)?)?;
            align_views(&mut ap, &mut lat);
            write_view_outputs(out, &case_id, &v.image, &ap)?;
            write_view_outputs(out, &case_id, &lat_img, &lat)?;
        }
        Command::Evaluate { pred, reference, pairs } => {
            let (pairs, base) = match pairs {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    let list: Vec<EvalPair> = serde_json::from_str(&text)?;
                    (list, p.parent().map(Path::to_path_buf).unwrap_or_default())
                }
                None => {
                    if pred.is_empty() || pred.len() != reference.len() {
                        bail!("give matching --pred/--ref lists or --pairs");
                    }
                    let list = pred
                        .into_iter()
                        .zip(reference)
                        .enumerate()
                        .map(|(i, (pred, reference))| EvalPair {
                            case_id: format!("case{:03}", i + 1),
                            pred,
                            reference,
                        })
                        .collect();
                    (list, PathBuf::new())
                }
            };
            let report = evaluate_pairs(&pairs, &base, c.resize_metrics)?;
            write_eval_report(&report, out)?;
            println!("{}", serde_json::to_string_pretty(&report.summary)?);
        }
        Command::Phantom { n, seed } => {
            let manifest = generate_corpus(n, seed, out)?;
            println!("{}", manifest.display());
        }
        Command::Run { manifest } => {
            let (cases, base) = load_manifests(&manifest)?;
            let results = run_batch(&cases, &base, c, out)?;
            let mut failed = false;
            for r in &results {
                let status = serde_json::to_string(&r.status)?;
                println!("{}\t{}", r.case_id, status);
                failed |= r.status.is_failed();
            }
            return Ok(!failed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config_from(&cli.global)
        .map_err(Failure::Usage)
        .and_then(|c| execute(cli.cmd, &c, &cli.global.out_dir).map_err(Failure::Run));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
