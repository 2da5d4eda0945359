//! Lung-field cropping and the twelve-region chest template.
//!
//! All region boxes are expressed in the *processed* frame: the cropped image
//! after AP verticalization or LAT flipping. [`Transform`] records how to get
//! back to the source image.

use std::collections::BTreeMap;
use std::fmt;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{bbox_of, BBox, BinaryMask, GrayImage, ViewKind};
use crate::maskops::{connected_components, estimate_ap_rotation, keep_largest, rotate};

/// Detections below this confidence are not used for cropping.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.7;

/// Tilts at or below this magnitude are left alone to avoid resampling blur.
pub const MIN_CORRECTED_TILT_DEG: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub view: ViewKind,
    pub bbox: BBox,
    pub confidence: f64,
}

impl DetectionRecord {
    pub fn from_json(text: &str) -> Result<Self> {
        let det: DetectionRecord = serde_json::from_str(text)?;
        if !(0.0..=1.0).contains(&det.confidence) {
            return Err(Error::InvalidParams(format!(
                "detection confidence {} outside [0, 1]",
                det.confidence
            )));
        }
        Ok(det)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegionName {
    #[serde(rename = "APUR")]
    Apur,
    #[serde(rename = "APMR")]
    Apmr,
    #[serde(rename = "APLR")]
    Aplr,
    #[serde(rename = "APUL")]
    Apul,
    #[serde(rename = "APML")]
    Apml,
    #[serde(rename = "APLL")]
    Apll,
    #[serde(rename = "APUM")]
    Apum,
    #[serde(rename = "APMM")]
    Apmm,
    #[serde(rename = "LATULS")]
    Latuls,
    #[serde(rename = "LATMLS")]
    Latmls,
    #[serde(rename = "LATLLS")]
    Latlls,
    #[serde(rename = "LATMM")]
    Latmm,
}

pub const AP_REGIONS: [RegionName; 8] = [
    RegionName::Apur,
    RegionName::Apmr,
    RegionName::Aplr,
    RegionName::Apul,
    RegionName::Apml,
    RegionName::Apll,
    RegionName::Apum,
    RegionName::Apmm,
];

pub const LAT_REGIONS: [RegionName; 4] = [
    RegionName::Latuls,
    RegionName::Latmls,
    RegionName::Latlls,
    RegionName::Latmm,
];

impl RegionName {
    pub fn acronym(self) -> &'static str {
        match self {
            RegionName::Apur => "APUR",
            RegionName::Apmr => "APMR",
            RegionName::Aplr => "APLR",
            RegionName::Apul => "APUL",
            RegionName::Apml => "APML",
            RegionName::Apll => "APLL",
            RegionName::Apum => "APUM",
            RegionName::Apmm => "APMM",
            RegionName::Latuls => "LATULS",
            RegionName::Latmls => "LATMLS",
            RegionName::Latlls => "LATLLS",
            RegionName::Latmm => "LATMM",
        }
    }

    pub fn view(self) -> ViewKind {
        if AP_REGIONS.contains(&self) {
            ViewKind::Ap
        } else {
            ViewKind::Lat
        }
    }

    pub fn for_view(view: ViewKind) -> &'static [RegionName] {
        match view {
            ViewKind::Ap => &AP_REGIONS,
            ViewKind::Lat => &LAT_REGIONS,
        }
    }

    /// Lung (not mediastinal) regions.
    pub fn is_lung(self) -> bool {
        !matches!(
            self,
            RegionName::Apum | RegionName::Apmm | RegionName::Latmm
        )
    }
}

impl fmt::Display for RegionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.acronym())
    }
}

/// Back-mapping metadata from the processed frame to the source image.
///
/// processed = flip(rotate(crop(source))); `rotation_deg` is the rotation that
/// was applied, about `rotation_center` in cropped coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub crop_offset: (usize, usize),
    pub rotation_deg: f64,
    pub rotation_center: (f64, f64),
    pub flipped: bool,
    pub align_scale: f64,
    pub frame_size: (usize, usize),
    pub source_size: (usize, usize),
}

impl Transform {
    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            crop_offset: (0, 0),
            rotation_deg: 0.0,
            rotation_center: (0.0, 0.0),
            flipped: false,
            align_scale: 1.0,
            frame_size: (width, height),
            source_size: (width, height),
        }
    }

    /// Maps a processed-frame point to source-image coordinates.
    pub fn to_source(&self, x: f64, y: f64) -> (f64, f64) {
        let x = if self.flipped {
            (self.frame_size.0 - 1) as f64 - x
        } else {
            x
        };
        let (sin, cos) = self.rotation_deg.to_radians().sin_cos();
        let (c0, c1) = self.rotation_center;
        let (dx, dy) = (x - c0, y - c1);
        let (rx, ry) = (c0 + dx * cos + dy * sin, c1 - dx * sin + dy * cos);
        (
            rx + self.crop_offset.0 as f64,
            ry + self.crop_offset.1 as f64,
        )
    }

    /// Source-image positions of the four corners of `b`.
    pub fn box_to_source(&self, b: &BBox) -> [(f64, f64); 4] {
        b.corners()
            .map(|(x, y)| self.to_source(x as f64, y as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub view: ViewKind,
    pub regions: BTreeMap<RegionName, BBox>,
    pub transform: Transform,
}

impl RegionSet {
    pub fn get(&self, name: RegionName) -> Option<&BBox> {
        self.regions.get(&name)
    }

    /// Union box of the lung regions.
    pub fn lung_union(&self) -> Option<BBox> {
        self.regions
            .iter()
            .filter(|(n, _)| n.is_lung())
            .map(|(_, b)| *b)
            .reduce(|a, b| a.union(&b))
    }

    /// Checks the name set matches the view and every box lies in the frame.
    pub fn validate(&self) -> Result<()> {
        let expected = RegionName::for_view(self.view);
        let names: Vec<RegionName> = self.regions.keys().copied().collect();
        let mut want = expected.to_vec();
        want.sort();
        if names != want {
            return Err(Error::InvalidParams(format!(
                "{} region set has names {:?}",
                self.view, names
            )));
        }
        let (w, h) = self.transform.frame_size;
        for b in self.regions.values() {
            if !b.fits_within(w, h) {
                return Err(Error::BoxOutsideImage(*b, w, h));
            }
        }
        Ok(())
    }

    /// True when every region corner maps back inside the source canvas.
    pub fn back_maps_inside_source(&self) -> bool {
        let (w, h) = self.transform.source_size;
        let tol = 1e-9;
        self.regions.values().all(|b| {
            self.transform.box_to_source(b).iter().all(|&(x, y)| {
                x >= -tol && y >= -tol && x <= (w - 1) as f64 + tol && y <= (h - 1) as f64 + tol
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropParams {
    /// Fraction of the box width (height) added on the left and right (top and bottom).
    pub margin_frac: f64,
    pub confidence_threshold: f64,
}

impl Default for CropParams {
    fn default() -> Self {
        Self {
            margin_frac: 0.0,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
        }
    }
}

/// Grows `b` by `round(margin · width)` horizontally and `round(margin · height)`
/// vertically on each side, clamped to a `width × height` canvas.
pub fn expand_box(b: &BBox, margin_frac: f64, width: usize, height: usize) -> Result<BBox> {
    if !(margin_frac >= 0.0 && margin_frac.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "margin must be non-negative, got {margin_frac}"
        )));
    }
    if !b.fits_within(width, height) {
        return Err(Error::BoxOutsideImage(*b, width, height));
    }
    let dx = (margin_frac * b.width() as f64).round() as usize;
    let dy = (margin_frac * b.height() as f64).round() as usize;
    Ok(BBox::new(
        b.x_min.saturating_sub(dx),
        b.y_min.saturating_sub(dy),
        (b.x_max + dx).min(width - 1),
        (b.y_max + dy).min(height - 1),
    ))
}

/// The source rectangle `crop_to_detection` would cut out.
pub fn detection_crop_box(
    det: &DetectionRecord,
    expected_view: ViewKind,
    width: usize,
    height: usize,
    params: &CropParams,
) -> Result<BBox> {
    if det.view != expected_view {
        return Err(Error::ViewMismatch {
            expected: expected_view,
            found: det.view,
        });
    }
    if det.confidence < params.confidence_threshold {
        return Err(Error::LowConfidence {
            confidence: det.confidence,
            threshold: params.confidence_threshold,
        });
    }
    expand_box(&det.bbox, params.margin_frac, width, height)
}

/// Crops to the detection box plus margin; returns the crop and its offset.
pub fn crop_to_detection(
    img: &GrayImage,
    det: &DetectionRecord,
    expected_view: ViewKind,
    params: &CropParams,
) -> Result<(GrayImage, (usize, usize))> {
    let b = detection_crop_box(det, expected_view, img.width(), img.height(), params)?;
    Ok((img.crop(&b)?, (b.x_min, b.y_min)))
}

/// Detection stand-in built from the mask's bounding box.
pub fn bbox_from_mask_fallback(
    mask: &BinaryMask,
    view: ViewKind,
    margin_frac: f64,
) -> Result<DetectionRecord> {
    let b = bbox_of(mask)?;
    Ok(DetectionRecord {
        view,
        bbox: expand_box(&b, margin_frac, mask.width(), mask.height())?,
        confidence: 1.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verticalized {
    pub image: GrayImage,
    pub mask: BinaryMask,
    /// Lung tilt estimated before correction.
    pub tilt_deg: f64,
    /// Rotation applied (the negated tilt, or 0 below the correction threshold).
    pub rotation_deg: f64,
    pub center: (f64, f64),
}

/// Rotates an AP image and mask about the mask centroid so the lungs stand upright.
pub fn verticalize_ap(img: &GrayImage, mask: &BinaryMask) -> Result<Verticalized> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(Error::DimensionMismatch(
            img.width(),
            img.height(),
            mask.width(),
            mask.height(),
        ));
    }
    let tilt = estimate_ap_rotation(mask)?;
    let center = mask.centroid()?;
    if tilt.abs() <= MIN_CORRECTED_TILT_DEG {
        return Ok(Verticalized {
            image: img.clone(),
            mask: mask.clone(),
            tilt_deg: tilt,
            rotation_deg: 0.0,
            center,
        });
    }
    let angle = -tilt;
    Ok(Verticalized {
        image: rotate(img, angle, center)?,
        mask: rotate(mask, angle, center)?,
        tilt_deg: tilt,
        rotation_deg: angle,
        center,
    })
}

/// Offsets `(round(n/3), round(2n/3))` of the two internal cuts of a length-`n` span.
fn third_cuts(n: usize) -> (usize, usize) {
    ((n + 1) / 3, (2 * n + 1) / 3)
}

/// Upper, middle and lower thirds of `b`. Cuts at `y_min + round(h/3)` and
/// `y_min + round(2h/3)`.
pub fn split_thirds(b: &BBox) -> Result<[BBox; 3]> {
    let h = b.height();
    if h < 3 {
        return Err(Error::TooSmall(h));
    }
    let (c1, c2) = third_cuts(h);
    let (y1, y2) = (b.y_min + c1, b.y_min + c2);
    Ok([
        BBox::new(b.x_min, b.y_min, b.x_max, y1 - 1),
        BBox::new(b.x_min, y1, b.x_max, y2 - 1),
        BBox::new(b.x_min, y2, b.x_max, b.y_max),
    ])
}

/// Left, middle and right thirds of `b`, same rounding rule as [`split_thirds`].
pub fn split_thirds_horizontal(b: &BBox) -> Result<[BBox; 3]> {
    let w = b.width();
    if w < 3 {
        return Err(Error::TooSmall(w));
    }
    let (c1, c2) = third_cuts(w);
    let (x1, x2) = (b.x_min + c1, b.x_min + c2);
    Ok([
        BBox::new(b.x_min, b.y_min, x1 - 1, b.y_max),
        BBox::new(x1, b.y_min, x2 - 1, b.y_max),
        BBox::new(x2, b.y_min, b.x_max, b.y_max),
    ])
}

/// AP template: lung thirds for each lung plus the upper and middle thirds of
/// the mediastinal column between the lungs' inner edges.
///
/// The image-left blob is the patient's right lung.
pub fn ap_regions(mask: &BinaryMask) -> Result<RegionSet> {
    let blobs = connected_components(mask);
    if blobs.len() < 2 {
        return Err(Error::NotTwoLungs(blobs.len()));
    }
    let mut boxes: Vec<BBox> = blobs
        .iter()
        .take(2)
        .map(|b| {
            let xs = b.pixels.iter().map(|p| p.0);
            let ys = b.pixels.iter().map(|p| p.1);
            BBox::new(
                xs.clone().min().unwrap(),
                ys.clone().min().unwrap(),
                xs.max().unwrap(),
                ys.max().unwrap(),
            )
        })
        .collect();
    boxes.sort_by_key(|b| (b.x_min, b.x_max));
    let (right_lung, left_lung) = (boxes[0], boxes[1]);
    if right_lung.x_max + 1 >= left_lung.x_min {
        return Err(Error::OverlappingLungs {
            right_inner: right_lung.x_max,
            left_inner: left_lung.x_min,
        });
    }

    let mut regions = BTreeMap::new();
    let [ur, mr, lr] = split_thirds(&right_lung)?;
    let [ul, ml, ll] = split_thirds(&left_lung)?;
    regions.insert(RegionName::Apur, ur);
    regions.insert(RegionName::Apmr, mr);
    regions.insert(RegionName::Aplr, lr);
    regions.insert(RegionName::Apul, ul);
    regions.insert(RegionName::Apml, ml);
    regions.insert(RegionName::Apll, ll);

    let union = right_lung.union(&left_lung);
    let column = BBox::new(
        right_lung.x_max + 1,
        union.y_min,
        left_lung.x_min - 1,
        union.y_max,
    );
    let [um, mm, _] = split_thirds(&column)?;
    regions.insert(RegionName::Apum, um);
    regions.insert(RegionName::Apmm, mm);

    Ok(RegionSet {
        view: ViewKind::Ap,
        regions,
        transform: Transform::identity(mask.width(), mask.height()),
    })
}

/// LAT template: vertical thirds of the lung box plus its central ninth.
pub fn lat_regions(mask: &BinaryMask) -> Result<RegionSet> {
    let lungs = keep_largest(mask, 1);
    let b = bbox_of(&lungs)?;
    let [upper, middle, lower] = split_thirds(&b)?;
    let [_, centre, _] = split_thirds_horizontal(&middle)?;
    let regions = BTreeMap::from([
        (RegionName::Latuls, upper),
        (RegionName::Latmls, middle),
        (RegionName::Latlls, lower),
        (RegionName::Latmm, centre),
    ]);
    Ok(RegionSet {
        view: ViewKind::Lat,
        regions,
        transform: Transform::identity(mask.width(), mask.height()),
    })
}

/// Ratio of the lung-union heights of two region sets.
pub fn vertical_scale(from: &RegionSet, to: &RegionSet) -> f64 {
    let h = |rs: &RegionSet| rs.lung_union().map_or(1, |b| b.height()) as f64;
    h(from) / h(to)
}

/// Records the AP/LAT vertical scale in both transforms and returns it.
/// Region boxes are not resampled.
pub fn align_views(ap: &mut RegionSet, lat: &mut RegionSet) -> f64 {
    let s = vertical_scale(ap, lat);
    ap.transform.align_scale = s;
    lat.transform.align_scale = s;
    s
}

pub fn extract_region_images(
    img: &GrayImage,
    rs: &RegionSet,
) -> Result<BTreeMap<RegionName, GrayImage>> {
    rs.regions
        .iter()
        .map(|(&name, b)| Ok((name, img.crop(b)?)))
        .collect()
}

const PALETTE: [[u8; 3]; 12] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
];

/// 5x7 glyphs for the letters used by the region acronyms, one row per byte,
/// most significant of the low five bits is the leftmost column.
fn glyph(c: char) -> [u8; 7] {
    match c {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        _ => [0; 7],
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, Rgb(color));
    }
}

fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, color: [u8; 3]) {
    for (i, c) in text.chars().enumerate() {
        let ox = x + 6 * i as i64;
        for (row, bits) in glyph(c).iter().enumerate() {
            for col in 0..5 {
                if bits & (0x10 >> col) != 0 {
                    put(img, ox + col, y + row as i64, color);
                }
            }
        }
    }
}

/// RGB copy of `img` with each region outlined and labelled with its acronym.
pub fn render_overlay(img: &GrayImage, rs: &RegionSet) -> RgbImage {
    let shift = img.depth().bits() - 8;
    let mut out = RgbImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        let v = (img.get(x as usize, y as usize) >> shift) as u8;
        Rgb([v, v, v])
    });
    for (name, b) in &rs.regions {
        let color = PALETTE[*name as usize];
        let (x0, y0, x1, y1) = (
            b.x_min as i64,
            b.y_min as i64,
            b.x_max as i64,
            b.y_max as i64,
        );
        for x in x0..=x1 {
            put(&mut out, x, y0, color);
            put(&mut out, x, y1, color);
        }
        for y in y0..=y1 {
            put(&mut out, x0, y, color);
            put(&mut out, x1, y, color);
        }
        draw_text(&mut out, x0 + 2, y0 + 2, name.acronym(), color);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::BitDepth;

    fn rects(w: usize, h: usize, rs: &[BBox]) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| rs.iter().any(|r| r.contains(x, y))).unwrap()
    }

    #[test]
    fn crop_identity_and_inner() {
        let img = GrayImage::from_fn(64, 64, BitDepth::Eight, |x, y| ((x + y) % 256) as u16).unwrap();
        let full = DetectionRecord {
            view: ViewKind::Ap,
            bbox: BBox::new(0, 0, 63, 63),
            confidence: 0.9,
        };
        let (c, off) = crop_to_detection(&img, &full, ViewKind::Ap, &CropParams::default()).unwrap();
        assert_eq!((c, off), (img.clone(), (0, 0)));

        let inner = DetectionRecord {
            bbox: BBox::new(10, 10, 19, 19),
            ..full
        };
        let (c, off) = crop_to_detection(&img, &inner, ViewKind::Ap, &CropParams::default()).unwrap();
        assert_eq!((c.width(), c.height(), off), (10, 10, (10, 10)));
    }

    #[test]
    fn crop_margin_clamps() {
        // box 40 wide, 20 tall at the top-right corner of a 64x64 canvas, margin 0.1:
        // dx = 4, dy = 2 -> [20, 0, 63, 21]
        let b = expand_box(&BBox::new(24, 0, 63, 19), 0.1, 64, 64).unwrap();
        assert_eq!(b, BBox::new(20, 0, 63, 21));
    }

    #[test]
    fn crop_errors() {
        let img = GrayImage::filled(32, 32, BitDepth::Eight, 0).unwrap();
        let det = DetectionRecord {
            view: ViewKind::Lat,
            bbox: BBox::new(0, 0, 10, 10),
            confidence: 0.69,
        };
        let p = CropParams::default();
        assert!(matches!(
            crop_to_detection(&img, &det, ViewKind::Lat, &p),
            Err(Error::LowConfidence { .. })
        ));
        let ok = DetectionRecord {
            confidence: 0.7,
            ..det
        };
        assert!(crop_to_detection(&img, &ok, ViewKind::Lat, &p).is_ok());
        assert!(matches!(
            crop_to_detection(&img, &ok, ViewKind::Ap, &p),
            Err(Error::ViewMismatch { .. })
        ));
        let outside = DetectionRecord {
            bbox: BBox::new(5, 5, 40, 10),
            ..ok
        };
        assert!(matches!(
            crop_to_detection(&img, &outside, ViewKind::Lat, &p),
            Err(Error::BoxOutsideImage(..))
        ));
    }

    #[test]
    fn detection_json() {
        let d = DetectionRecord::from_json(r#"{"view":"AP","bbox":[1,2,30,40],"confidence":0.93}"#)
            .unwrap();
        assert_eq!(d.bbox, BBox::new(1, 2, 30, 40));
        assert!(DetectionRecord::from_json(r#"{"view":"AP","bbox":[1,2,30,40],"confidence":1.5}"#)
            .is_err());
    }

    #[test]
    fn fallback_boxes() {
        let full = BinaryMask::from_fn(20, 10, |_, _| true).unwrap();
        let d = bbox_from_mask_fallback(&full, ViewKind::Ap, 0.0).unwrap();
        assert_eq!((d.bbox, d.confidence), (BBox::new(0, 0, 19, 9), 1.0));
        let two = rects(50, 40, &[BBox::new(5, 8, 15, 30), BBox::new(30, 4, 44, 28)]);
        let d = bbox_from_mask_fallback(&two, ViewKind::Ap, 0.0).unwrap();
        assert_eq!(d.bbox, BBox::new(5, 4, 44, 30));
        assert!(matches!(
            bbox_from_mask_fallback(&BinaryMask::empty(3, 3).unwrap(), ViewKind::Ap, 0.0),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn thirds() {
        let t = split_thirds(&BBox::new(0, 0, 5, 8)).unwrap();
        assert!(t.iter().all(|b| b.height() == 3));
        let t = split_thirds(&BBox::new(2, 10, 5, 19)).unwrap();
        assert_eq!(t.map(|b| b.height()), [3, 4, 3]);
        assert_eq!(t[0].y_min, 10);
        assert_eq!(t[2].y_max, 19);
        assert!(matches!(split_thirds(&BBox::new(0, 0, 4, 1)), Err(Error::TooSmall(2))));
    }

    #[test]
    fn ap_mediastinum_example() {
        let m = rects(80, 90, &[BBox::new(10, 0, 30, 89), BBox::new(50, 0, 70, 89)]);
        let rs = ap_regions(&m).unwrap();
        assert_eq!(rs.regions.len(), 8);
        assert_eq!(rs.get(RegionName::Apum), Some(&BBox::new(31, 0, 49, 29)));
        assert_eq!(rs.get(RegionName::Apmm), Some(&BBox::new(31, 30, 49, 59)));
        assert_eq!(rs.get(RegionName::Apur).unwrap().x_min, 10);
        assert_eq!(rs.get(RegionName::Apul).unwrap().x_min, 50);
        rs.validate().unwrap();
    }

    #[test]
    fn ap_errors() {
        let one = rects(80, 90, &[BBox::new(10, 0, 30, 89)]);
        assert!(matches!(ap_regions(&one), Err(Error::NotTwoLungs(1))));
        // L-shaped right lung reaching past the left lung's inner edge
        let overlapping = rects(
            80,
            90,
            &[
                BBox::new(10, 0, 30, 40),
                BBox::new(10, 41, 55, 45),
                BBox::new(50, 60, 70, 89),
            ],
        );
        assert!(matches!(
            ap_regions(&overlapping),
            Err(Error::OverlappingLungs { .. })
        ));
    }

    #[test]
    fn lat_example() {
        let m = rects(40, 100, &[BBox::new(0, 0, 29, 89)]);
        let rs = lat_regions(&m).unwrap();
        assert_eq!(rs.get(RegionName::Latmls), Some(&BBox::new(0, 30, 29, 59)));
        assert_eq!(rs.get(RegionName::Latmm), Some(&BBox::new(10, 30, 19, 59)));
        assert!(rs
            .get(RegionName::Latmls)
            .unwrap()
            .contains_box(rs.get(RegionName::Latmm).unwrap()));
        rs.validate().unwrap();
    }

    #[test]
    fn alignment_scale() {
        let mut ap = ap_regions(&rects(80, 100, &[BBox::new(10, 5, 30, 94), BBox::new(50, 5, 70, 94)]))
            .unwrap();
        let mut lat = lat_regions(&rects(40, 60, &[BBox::new(5, 5, 30, 49)])).unwrap();
        assert_eq!(align_views(&mut ap, &mut lat), 2.0);
        assert_eq!(ap.transform.align_scale, 2.0);
        assert_eq!(lat.transform.align_scale, 2.0);
        assert_eq!(vertical_scale(&ap, &ap), 1.0);
        assert!((vertical_scale(&ap, &lat) * vertical_scale(&lat, &ap) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn region_crops() {
        let img = GrayImage::from_fn(80, 90, BitDepth::Eight, |x, y| ((x * 3 + y) % 256) as u16).unwrap();
        let m = rects(80, 90, &[BBox::new(10, 0, 30, 89), BBox::new(50, 0, 70, 89)]);
        let rs = ap_regions(&m).unwrap();
        let crops = extract_region_images(&img, &rs).unwrap();
        assert_eq!(crops.len(), 8);
        for (name, c) in &crops {
            let b = rs.get(*name).unwrap();
            assert_eq!((c.width(), c.height()), (b.width(), b.height()));
            assert_eq!(c.get(1, 2), img.get(b.x_min + 1, b.y_min + 2));
        }
    }

    #[test]
    fn overlay_is_deterministic() {
        let img = GrayImage::from_fn(80, 90, BitDepth::Sixteen, |x, y| (x * 500 + y) as u16).unwrap();
        let m = rects(80, 90, &[BBox::new(10, 0, 30, 89), BBox::new(50, 0, 70, 89)]);
        let rs = ap_regions(&m).unwrap();
        let a = render_overlay(&img, &rs);
        assert_eq!((a.width(), a.height()), (80, 90));
        assert_eq!(a, render_overlay(&img, &rs));
        // outline of APUR drawn in its colour
        assert_eq!(a.get_pixel(10, 0).0, PALETTE[RegionName::Apur as usize]);
    }

    #[test]
    fn back_mapping_inverts_flip_and_rotation() {
        let mut t = Transform::identity(20, 10);
        t.flipped = true;
        t.crop_offset = (5, 7);
        t.source_size = (40, 40);
        assert_eq!(t.to_source(0.0, 0.0), (24.0, 7.0));

        let m = rects(60, 60, &[BBox::new(28, 28, 30, 30)]);
        let r = rotate(&m, 20.0, (10.0, 10.0)).unwrap();
        let t = Transform {
            rotation_deg: 20.0,
            rotation_center: (10.0, 10.0),
            ..Transform::identity(60, 60)
        };
        // every rotated pixel maps back onto the original square (nearest-neighbour)
        for (x, y) in r.set_pixels() {
            let (sx, sy) = t.to_source(x as f64, y as f64);
            assert!(m.get(sx.round() as usize, sy.round() as usize));
        }
    }
}
