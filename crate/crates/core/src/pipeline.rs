//! Batch driver: CLAHE → crop → AP verticalization / LAT orientation →
//! template → view alignment → outputs.
//!
//! Segmentation masks are mandatory inputs; detections are optional and fall
//! back to the mask bounding box. Every case is isolated: a failing case gets a
//! `Failed` status naming the stage and does not affect other cases.
//!
//! Output layout for `out_dir`:
//!
//! ```text
//! results.json                    all case results, sorted by case id
//! <case>/result.json
//! <case>/AP_regions.json, LAT_regions.json
//! <case>/<case>_<ACRONYM>.png     one crop per region
//! <case>/AP_overlay.png, LAT_overlay.png
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enhance::{clahe, ClaheParams, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::imagecore::{BBox, BinaryMask, GrayImage, ViewKind};
use crate::io::{load_image, load_mask, save_image, save_mask, save_rgb};
use crate::maskops::keep_largest;
use crate::metrics::{evaluate_case, summarize, MetricsSummary, SegMetrics, DEFAULT_EVAL_SIZE};
use crate::orientation::{
    apply_orientation, decide_orientation, OrientationOutcome, Side, DEFAULT_STRIP_FRACTION,
};
use crate::synthgen::{make_corpus, CorpusCase, Phantom};
use crate::template::{
    align_views, ap_regions, bbox_from_mask_fallback, detection_crop_box, extract_region_images,
    lat_regions, render_overlay, verticalize_ap, CropParams, DetectionRecord, RegionSet,
    Transform, DEFAULT_CONFIDENCE_THRESHOLD,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Input files for one patient. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseManifest {
    pub case_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap_image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat_image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap_detection: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat_detection: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spine_side_override: Option<Side>,
}

impl CaseManifest {
    fn view_paths(&self, view: ViewKind) -> (&Option<PathBuf>, &Option<PathBuf>, &Option<PathBuf>) {
        match view {
            ViewKind::Ap => (&self.ap_image, &self.ap_mask, &self.ap_detection),
            ViewKind::Lat => (&self.lat_image, &self.lat_mask, &self.lat_detection),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestFile {
    List(Vec<CaseManifest>),
    Wrapped { cases: Vec<CaseManifest> },
}

/// Reads a manifest file: either a JSON array of cases or `{"cases": [...]}`.
/// Returns the cases and the directory relative paths resolve against.
pub fn load_manifests(path: &Path) -> Result<(Vec<CaseManifest>, PathBuf)> {
    let text = read_to_string(path)?;
    let cases = match serde_json::from_str(&text)? {
        ManifestFile::List(c) | ManifestFile::Wrapped { cases: c } => c,
    };
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((cases, base))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub clahe: ClaheParams,
    pub epsilon: f64,
    pub confidence_threshold: f64,
    /// Crop margin as a fraction of the lung box size.
    pub margin: f64,
    /// Global spine-side override; `None` runs the heuristic.
    pub spine_side: Option<Side>,
    pub strip_fraction: f64,
    /// Evaluation resize; `None` evaluates at native resolution.
    pub resize_metrics: Option<(usize, usize)>,
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            clahe: ClaheParams::default(),
            epsilon: DEFAULT_EPSILON,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            margin: 0.2,
            spine_side: None,
            strip_fraction: DEFAULT_STRIP_FRACTION,
            resize_metrics: Some(DEFAULT_EVAL_SIZE),
            jobs: 4,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_to_string(path)?)?)
    }

    fn crop_params(&self) -> CropParams {
        CropParams {
            margin_frac: self.margin,
            confidence_threshold: self.confidence_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CaseStatus {
    Ok,
    Warning(Vec<String>),
    Failed {
        stage: String,
        error: String,
        message: String,
    },
}

impl CaseStatus {
    pub fn is_failed(&self) -> bool {
        matches!(self, CaseStatus::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewOutput {
    pub regions: RegionSet,
    /// AP only: lung tilt measured before verticalization.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilt_deg: Option<f64>,
    /// LAT only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientation: Option<OrientationOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub schema_version: u32,
    pub case_id: String,
    pub status: CaseStatus,
    pub views: BTreeMap<ViewKind, ViewOutput>,
    /// Written files, relative to the output directory.
    pub outputs: Vec<PathBuf>,
}

/// On-disk region file for one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDocument {
    pub schema_version: u32,
    pub case_id: String,
    pub view: ViewKind,
    pub transform: Transform,
    pub regions: BTreeMap<crate::template::RegionName, BBox>,
}

impl RegionDocument {
    pub fn new(case_id: &str, rs: &RegionSet) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            case_id: case_id.to_string(),
            view: rs.view,
            transform: rs.transform,
            regions: rs.regions.clone(),
        }
    }
}

struct StageError {
    stage: &'static str,
    error: Error,
}

trait AtStage<T> {
    fn at(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

/// Processed rasters and regions for one view, before writing.
struct ViewProduct {
    image: GrayImage,
    regions: RegionSet,
    tilt_deg: Option<f64>,
    orientation: Option<OrientationOutcome>,
}

struct Loaded {
    raw: GrayImage,
    mask: BinaryMask,
    detection: Option<DetectionRecord>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path.to_path_buf())
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

pub fn load_detection(path: &Path) -> Result<DetectionRecord> {
    DetectionRecord::from_json(&read_to_string(path)?)
}

fn load_view(m: &CaseManifest, view: ViewKind, base: &Path) -> Result<Loaded> {
    let (img, mask, det) = m.view_paths(view);
    let lower = view.to_string().to_ascii_lowercase();
    let img = img
        .as_ref()
        .ok_or_else(|| Error::MissingInput(format!("{lower}_image")))?;
    let mask = mask
        .as_ref()
        .ok_or_else(|| Error::MissingInput(format!("{lower}_mask")))?;
    let raw = load_image(resolve(base, img))?;
    let mask = load_mask(resolve(base, mask))?;
    if (raw.width(), raw.height()) != (mask.width(), mask.height()) {
        return Err(Error::DimensionMismatch(
            raw.width(),
            raw.height(),
            mask.width(),
            mask.height(),
        ));
    }
    let detection = det
        .as_ref()
        .map(|p| load_detection(&resolve(base, p)))
        .transpose()?;
    Ok(Loaded {
        raw,
        mask,
        detection,
    })
}

/// Picks the crop rectangle, falling back to the mask box for missing or
/// low-confidence detections.
fn crop_box(
    view: ViewKind,
    loaded: &Loaded,
    config: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> Result<BBox> {
    let (w, h) = (loaded.raw.width(), loaded.raw.height());
    let params = config.crop_params();
    if let Some(det) = &loaded.detection {
        match detection_crop_box(det, view, w, h, &params) {
            Ok(b) => return Ok(b),
            Err(Error::LowConfidence {
                confidence,
                threshold,
            }) => warnings.push(format!(
                "{view} detection confidence {confidence} below {threshold}; using mask bounding box"
            )),
            Err(e) => return Err(e),
        }
    }
    let fallback = bbox_from_mask_fallback(&loaded.mask, view, config.margin)?;
    Ok(fallback.bbox)
}

fn process_view(
    view: ViewKind,
    loaded: Loaded,
    spine_override: Option<Side>,
    config: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> std::result::Result<ViewProduct, StageError> {
    let enhanced = clahe(&loaded.raw, &config.clahe).at("enhance")?;
    let b = crop_box(view, &loaded, config, warnings).at("crop")?;
    let raw = loaded.raw.crop(&b).at("crop")?;
    let enhanced = enhanced.crop(&b).at("crop")?;
    let mask = loaded.mask.crop(&b).at("crop")?;

    let mut transform = Transform::identity(b.width(), b.height());
    transform.crop_offset = (b.x_min, b.y_min);
    transform.source_size = (loaded.raw.width(), loaded.raw.height());

    match view {
        ViewKind::Ap => {
            let mask = keep_largest(&mask, 2);
            let v = verticalize_ap(&enhanced, &mask).at("verticalize")?;
            let mut regions = ap_regions(&v.mask).at("template")?;
            transform.rotation_deg = v.rotation_deg;
            transform.rotation_center = v.center;
            regions.transform = transform;
            Ok(ViewProduct {
                image: v.image,
                regions,
                tilt_deg: Some(v.tilt_deg),
                orientation: None,
            })
        }
        ViewKind::Lat => {
            let outcome = decide_orientation(&raw, &mask, spine_override, config.strip_fraction)
                .at("orient")?;
            let (image, mask) = apply_orientation(&enhanced, &mask, &outcome);
            let mut regions = lat_regions(&mask).at("template")?;
            transform.flipped = outcome.flipped;
            regions.transform = transform;
            Ok(ViewProduct {
                image,
                regions,
                tilt_deg: None,
                orientation: Some(outcome),
            })
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes region JSON, per-region crops and an overlay for one processed view.
/// Returns the written paths relative to `out_dir`.
pub fn write_view_outputs(
    out_dir: &Path,
    case_id: &str,
    image: &GrayImage,
    regions: &RegionSet,
) -> Result<Vec<PathBuf>> {
    let rel_dir = PathBuf::from(case_id);
    let dir = out_dir.join(&rel_dir);
    create_dir(&dir)?;
    let mut written = Vec::new();

    let json = rel_dir.join(format!("{}_regions.json", regions.view));
    write_json(&RegionDocument::new(case_id, regions), &out_dir.join(&json))?;
    written.push(json);

    for (name, crop) in extract_region_images(image, regions)? {
        let rel = rel_dir.join(format!("{case_id}_{name}.png"));
        save_image(&crop, out_dir.join(&rel))?;
        written.push(rel);
    }

    let overlay = rel_dir.join(format!("{}_overlay.png", regions.view));
    save_rgb(&render_overlay(image, regions), out_dir.join(&overlay))?;
    written.push(overlay);
    Ok(written)
}

fn run_case_inner(
    m: &CaseManifest,
    base: &Path,
    config: &PipelineConfig,
    out_dir: &Path,
    warnings: &mut Vec<String>,
    views: &mut BTreeMap<ViewKind, ViewOutput>,
    outputs: &mut Vec<PathBuf>,
) -> std::result::Result<(), StageError> {
    let ap = load_view(m, ViewKind::Ap, base).at("load")?;
    let lat = load_view(m, ViewKind::Lat, base).at("load")?;
    let spine_override = m.spine_side_override.or(config.spine_side);

    let ap = process_view(ViewKind::Ap, ap, None, config, warnings)?;
    let lat = process_view(ViewKind::Lat, lat, spine_override, config, warnings)?;
    let (mut ap_rs, mut lat_rs) = (ap.regions, lat.regions);
    align_views(&mut ap_rs, &mut lat_rs);

    for (image, rs) in [(&ap.image, &ap_rs), (&lat.image, &lat_rs)] {
        outputs.extend(write_view_outputs(out_dir, &m.case_id, image, rs).at("write")?);
    }
    views.insert(
        ViewKind::Ap,
        ViewOutput {
            regions: ap_rs,
            tilt_deg: ap.tilt_deg,
            orientation: None,
        },
    );
    views.insert(
        ViewKind::Lat,
        ViewOutput {
            regions: lat_rs,
            tilt_deg: None,
            orientation: lat.orientation,
        },
    );
    Ok(())
}

/// Runs one case end to end and writes its outputs under `out_dir/<case_id>/`.
pub fn run_pipeline(
    manifest: &CaseManifest,
    base_dir: &Path,
    config: &PipelineConfig,
    out_dir: &Path,
) -> PipelineResult {
    let mut warnings = Vec::new();
    let mut views = BTreeMap::new();
    let mut outputs = Vec::new();
    let status = match run_case_inner(
        manifest,
        base_dir,
        config,
        out_dir,
        &mut warnings,
        &mut views,
        &mut outputs,
    ) {
        Ok(()) if warnings.is_empty() => CaseStatus::Ok,
        Ok(()) => CaseStatus::Warning(warnings),
        Err(StageError { stage, error }) => {
            views.clear();
            CaseStatus::Failed {
                stage: stage.to_string(),
                error: error.kind().to_string(),
                message: error.to_string(),
            }
        }
    };
    let mut result = PipelineResult {
        schema_version: SCHEMA_VERSION,
        case_id: manifest.case_id.clone(),
        status,
        views,
        outputs,
    };
    let case_dir = out_dir.join(&manifest.case_id);
    let written = create_dir(&case_dir)
        .and_then(|_| write_json(&result, &case_dir.join("result.json")));
    if let Err(e) = written {
        if !result.status.is_failed() {
            result.status = CaseStatus::Failed {
                stage: "write".into(),
                error: e.kind().into(),
                message: e.to_string(),
            };
        }
    }
    result
}

/// Runs every case on a pool of `config.jobs` workers and writes `results.json`.
/// Results come back sorted by case id.
pub fn run_batch(
    manifests: &[CaseManifest],
    base_dir: &Path,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<Vec<PipelineResult>> {
    create_dir(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("worker pool: {e}")))?;
    let mut results: Vec<PipelineResult> = pool.install(|| {
        manifests
            .par_iter()
            .map(|m| run_pipeline(m, base_dir, config, out_dir))
            .collect()
    });
    results.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    write_json(&results, &out_dir.join("results.json"))?;
    Ok(results)
}

/// One prediction/reference pair for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub case_id: String,
    pub pred: PathBuf,
    #[serde(rename = "ref")]
    pub reference: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub resize: Option<(usize, usize)>,
    pub case_ids: Vec<String>,
    pub summary: MetricsSummary,
}

pub fn evaluate_pairs(
    pairs: &[EvalPair],
    base_dir: &Path,
    resize: Option<(usize, usize)>,
) -> Result<EvalReport> {
    let cases = pairs
        .iter()
        .map(|p| {
            let pred = load_mask(resolve(base_dir, &p.pred))?;
            let reference = load_mask(resolve(base_dir, &p.reference))?;
            evaluate_case(&pred, &reference, resize)
        })
        .collect::<Result<Vec<SegMetrics>>>()?;
    Ok(EvalReport {
        schema_version: SCHEMA_VERSION,
        resize,
        case_ids: pairs.iter().map(|p| p.case_id.clone()).collect(),
        summary: summarize(&cases)?,
    })
}

/// Writes `metrics.json` and `metrics.csv` into `out_dir`.
pub fn write_eval_report(report: &EvalReport, out_dir: &Path) -> Result<()> {
    create_dir(out_dir)?;
    write_json(report, &out_dir.join("metrics.json"))?;
    let path = out_dir.join("metrics.csv");
    let file = fs::File::create(&path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    crate::metrics::write_table_csv(&report.summary, &report.case_ids, file)
}

fn write_phantom(p: &Phantom, dir: &Path, stem: &str) -> Result<()> {
    save_image(&p.image, dir.join(format!("{stem}.png")))?;
    save_mask(&p.truth.mask, dir.join(format!("{stem}_mask.png")))?;
    #[derive(Serialize)]
    struct Truth<'a> {
        spec: &'a crate::synthgen::PhantomSpec,
        truth: &'a crate::synthgen::PhantomTruth,
    }
    write_json(
        &Truth {
            spec: &p.spec,
            truth: &p.truth,
        },
        &dir.join(format!("{stem}_truth.json")),
    )
}

/// Writes a phantom corpus plus `manifest.json` ready for [`run_batch`].
pub fn write_corpus(corpus: &[CorpusCase], out_dir: &Path) -> Result<PathBuf> {
    create_dir(out_dir)?;
    let manifests: Vec<CaseManifest> = corpus
        .iter()
        .map(|c| {
            let dir = out_dir.join(&c.case_id);
            create_dir(&dir)?;
            write_phantom(&c.ap, &dir, "ap")?;
            write_phantom(&c.lat, &dir, "lat")?;
            let rel = |f: &str| Some(PathBuf::from(&c.case_id).join(f));
            Ok(CaseManifest {
                case_id: c.case_id.clone(),
                ap_image: rel("ap.png"),
                lat_image: rel("lat.png"),
                ap_mask: rel("ap_mask.png"),
                lat_mask: rel("lat_mask.png"),
                ap_detection: None,
                lat_detection: None,
                spine_side_override: None,
            })
        })
        .collect::<Result<_>>()?;
    let path = out_dir.join("manifest.json");
    write_json(&manifests, &path)?;
    Ok(path)
}

/// Generates and writes an `n`-case corpus.
pub fn generate_corpus(n: usize, seed: u64, out_dir: &Path) -> Result<PathBuf> {
    write_corpus(&make_corpus(n, seed)?, out_dir)
}
