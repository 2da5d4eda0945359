//! Seed-deterministic chest phantoms with known geometry.
//!
//! Lungs are dark ellipses on a brighter background. AP phantoms may carry a
//! bright mediastinal band between the lungs; LAT phantoms carry a bright
//! vertical spine band just outside the lung box on the requested side. The
//! whole scene is rotated about the canvas centre, then uniform noise is added.
//! The truth mask is the rasterized ellipse union, before noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{bbox_of, BBox, BinaryMask, BitDepth, GrayImage, ViewKind};
use crate::maskops::MAX_ROTATION_DEG;
use crate::orientation::Side;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub intensity: u16,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = ((x - self.cx) / self.semi_x, (y - self.cy) / self.semi_y);
        u * u + v * v <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub view: ViewKind,
    pub width: usize,
    pub height: usize,
    pub bit_depth: BitDepth,
    /// Clockwise scene rotation about the canvas centre.
    pub rotation_deg: f64,
    /// LAT only.
    pub spine_side: Option<Side>,
    /// Pre-rotation geometry.
    pub lungs: Vec<Ellipse>,
    pub background_level: u16,
    pub spine_level: u16,
    /// Spine band width as a fraction of the lung box width (LAT).
    pub spine_width_frac: f64,
    /// Gap in pixels between the lung box and the spine band (LAT).
    pub spine_gap: f64,
    /// Bright band between the AP lungs, if any.
    pub mediastinum_level: Option<u16>,
    /// Noise is uniform in `[-amplitude, amplitude]`.
    pub noise_amplitude: u16,
    pub noise_seed: u64,
}

impl PhantomSpec {
    /// Symmetric upright AP pair on a `size × size` 8-bit canvas.
    pub fn ap_default(size: usize) -> Self {
        let s = size as f64;
        let c = (s - 1.0) / 2.0;
        let lung = |cx| Ellipse {
            cx,
            cy: c,
            semi_x: 0.11 * s,
            semi_y: 0.27 * s,
            intensity: 50,
        };
        Self {
            view: ViewKind::Ap,
            width: size,
            height: size,
            bit_depth: BitDepth::Eight,
            rotation_deg: 0.0,
            spine_side: None,
            lungs: vec![lung(c - 0.17 * s), lung(c + 0.17 * s)],
            background_level: 150,
            spine_level: 230,
            spine_width_frac: 0.0,
            spine_gap: 0.0,
            mediastinum_level: Some(190),
            noise_amplitude: 10,
            noise_seed: 0,
        }
    }

    /// Single lung blob with the spine on `side`, on a `size × size` 8-bit canvas.
    pub fn lat_default(size: usize, side: Side) -> Self {
        let s = size as f64;
        let c = (s - 1.0) / 2.0;
        let shift = 0.08 * s;
        let cx = match side {
            Side::Right => c - shift,
            Side::Left => c + shift,
        };
        Self {
            view: ViewKind::Lat,
            width: size,
            height: size,
            bit_depth: BitDepth::Eight,
            rotation_deg: 0.0,
            spine_side: Some(side),
            lungs: vec![
                Ellipse {
                    cx,
                    cy: c - 0.02 * s,
                    semi_x: 0.21 * s,
                    semi_y: 0.27 * s,
                    intensity: 50,
                },
                Ellipse {
                    cx,
                    cy: c + 0.04 * s,
                    semi_x: 0.19 * s,
                    semi_y: 0.24 * s,
                    intensity: 50,
                },
            ],
            background_level: 110,
            spine_level: 235,
            spine_width_frac: 0.3,
            spine_gap: 2.0,
            mediastinum_level: None,
            noise_amplitude: 10,
            noise_seed: 0,
        }
    }

    fn center(&self) -> (f64, f64) {
        (
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        )
    }

    /// Unrotated position of output pixel `(x, y)`.
    fn unrotated(&self, x: usize, y: usize) -> (f64, f64) {
        let (c0, c1) = self.center();
        let (sin, cos) = self.rotation_deg.to_radians().sin_cos();
        let (dx, dy) = (x as f64 - c0, y as f64 - c1);
        (c0 + dx * cos + dy * sin, c1 - dx * sin + dy * cos)
    }

    /// Pre-rotation `(x_min, x_max, y_min, y_max)` of the ellipse union.
    fn lung_extent(&self) -> (f64, f64, f64, f64) {
        self.lungs.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), e| {
                (
                    a.min(e.cx - e.semi_x),
                    b.max(e.cx + e.semi_x),
                    c.min(e.cy - e.semi_y),
                    d.max(e.cy + e.semi_y),
                )
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.width < 8 || self.height < 8 {
            return bad(format!("canvas {}x{} too small", self.width, self.height));
        }
        if self.lungs.is_empty() {
            return bad("no lungs".into());
        }
        if !self.rotation_deg.is_finite() || self.rotation_deg.abs() > MAX_ROTATION_DEG {
            return bad(format!("rotation {}° out of range", self.rotation_deg));
        }
        if self.view == ViewKind::Lat && self.spine_side.is_none() {
            return bad("LAT phantom needs a spine side".into());
        }
        let max = self.bit_depth.max_value();
        let levels = [self.background_level, self.spine_level, self.noise_amplitude]
            .into_iter()
            .chain(self.mediastinum_level)
            .chain(self.lungs.iter().map(|e| e.intensity));
        if levels.clone().any(|v| v > max) {
            return bad(format!("intensity above {max}"));
        }
        let lung_max = self.lungs.iter().map(|e| e.intensity).max().unwrap_or(0);
        if self.spine_level <= lung_max {
            return bad("spine must be brighter than the lungs".into());
        }
        let (c0, c1) = self.center();
        let (sin, cos) = self.rotation_deg.to_radians().sin_cos();
        for e in &self.lungs {
            if !(e.semi_x > 0.0 && e.semi_y > 0.0) {
                return bad("ellipse semi-axes must be positive".into());
            }
            let (dx, dy) = (e.cx - c0, e.cy - c1);
            let (rx, ry) = (c0 + dx * cos - dy * sin, c1 + dx * sin + dy * cos);
            let ex = (e.semi_x * cos).hypot(e.semi_y * sin);
            let ey = (e.semi_x * sin).hypot(e.semi_y * cos);
            if rx - ex < 0.0
                || ry - ey < 0.0
                || rx + ex > (self.width - 1) as f64
                || ry + ey > (self.height - 1) as f64
            {
                return bad("lung ellipse leaves the canvas after rotation".into());
            }
        }
        Ok(())
    }
}

/// Ground truth; the mask is written separately, the rest serializes to JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhantomTruth {
    #[serde(skip)]
    pub mask: BinaryMask,
    pub rotation_deg: f64,
    pub spine_side: Option<Side>,
    pub lung_bboxes: Vec<BBox>,
    pub union_bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub spec: PhantomSpec,
    pub image: GrayImage,
    pub truth: PhantomTruth,
}

/// Rasterizes each rotated lung ellipse at pixel centres.
pub fn rasterize_lungs(spec: &PhantomSpec) -> Result<Vec<BinaryMask>> {
    spec.lungs
        .iter()
        .map(|e| {
            BinaryMask::from_fn(spec.width, spec.height, |x, y| {
                let (ux, uy) = spec.unrotated(x, y);
                e.contains(ux, uy)
            })
        })
        .collect()
}

pub fn make_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let lungs = rasterize_lungs(spec)?;
    let lung_bboxes = lungs.iter().map(bbox_of).collect::<Result<Vec<_>>>()?;
    let mask = BinaryMask::from_fn(spec.width, spec.height, |x, y| {
        lungs.iter().any(|m| m.get(x, y))
    })?;
    let union_bbox = bbox_of(&mask)?;

    let (lx0, lx1, ly0, ly1) = spec.lung_extent();
    let lung_w = lx1 - lx0;
    let spine_band = match (spec.view, spec.spine_side) {
        (ViewKind::Lat, Some(side)) => {
            let bw = spec.spine_width_frac * lung_w;
            Some(match side {
                Side::Right => (lx1 + spec.spine_gap, lx1 + spec.spine_gap + bw),
                Side::Left => (lx0 - spec.spine_gap - bw, lx0 - spec.spine_gap),
            })
        }
        _ => None,
    };
    let mediastinum = match (spec.view, spec.mediastinum_level, spec.lungs.as_slice()) {
        (ViewKind::Ap, Some(level), [a, b, ..]) => {
            let (l, r) = if a.cx <= b.cx { (a, b) } else { (b, a) };
            let inner = (l.cx + l.semi_x, r.cx - r.semi_x);
            let mid = (inner.0 + inner.1) / 2.0;
            let half = 0.25 * (inner.1 - inner.0).max(0.0);
            Some((mid - half, mid + half, level))
        }
        _ => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
    let amp = spec.noise_amplitude as i32;
    let max = spec.bit_depth.max_value() as i32;
    let mut pixels = Vec::with_capacity(spec.width * spec.height);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let (ux, uy) = spec.unrotated(x, y);
            let mut level = spec.background_level;
            let in_rows = (ly0..=ly1).contains(&uy);
            if let Some((a, b, m)) = mediastinum {
                if in_rows && (a..=b).contains(&ux) {
                    level = m;
                }
            }
            if let Some((a, b)) = spine_band {
                if in_rows && (a..=b).contains(&ux) {
                    level = spec.spine_level;
                }
            }
            if let Some(e) = spec.lungs.iter().find(|e| e.contains(ux, uy)) {
                level = e.intensity;
            }
            let noise = if amp > 0 { rng.gen_range(-amp..=amp) } else { 0 };
            pixels.push((level as i32 + noise).clamp(0, max) as u16);
        }
    }
    let image = GrayImage::new(spec.width, spec.height, spec.bit_depth, pixels)?;

    Ok(Phantom {
        spec: spec.clone(),
        image,
        truth: PhantomTruth {
            mask,
            rotation_deg: spec.rotation_deg,
            spine_side: spec.spine_side,
            lung_bboxes,
            union_bbox,
        },
    })
}

/// One AP and one LAT phantom for the same synthetic patient.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusCase {
    pub case_id: String,
    pub ap: Phantom,
    pub lat: Phantom,
}

impl CorpusCase {
    pub fn phantoms(&self) -> [&Phantom; 2] {
        [&self.ap, &self.lat]
    }
}

pub const CORPUS_SIZE: usize = 256;
pub const CORPUS_MAX_ROTATION_DEG: f64 = 15.0;

/// `n` AP + LAT pairs with rotations uniform in ±15° and random spine sides.
pub fn make_corpus(n: usize, base_seed: u64) -> Result<Vec<CorpusCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    let r = CORPUS_MAX_ROTATION_DEG;
    (0..n)
        .map(|i| {
            let mut ap = PhantomSpec::ap_default(CORPUS_SIZE);
            for lung in &mut ap.lungs {
                lung.semi_x *= rng.gen_range(0.95..=1.05);
                lung.semi_y *= rng.gen_range(0.95..=1.05);
            }
            let side = if rng.gen_bool(0.5) { Side::Left } else { Side::Right };
            let mut lat = PhantomSpec::lat_default(CORPUS_SIZE, side);
            for lung in &mut lat.lungs {
                lung.semi_x *= rng.gen_range(0.95..=1.05);
                lung.semi_y *= rng.gen_range(0.95..=1.05);
            }
            ap.rotation_deg = rng.gen_range(-r..=r);
            lat.rotation_deg = rng.gen_range(-r..=r);
            ap.noise_seed = rng.gen();
            lat.noise_seed = rng.gen();
            Ok(CorpusCase {
                case_id: format!("case{:03}", i + 1),
                ap: make_phantom(&ap)?,
                lat: make_phantom(&lat)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maskops::{connected_components, estimate_ap_rotation};

    #[test]
    fn deterministic() {
        let spec = PhantomSpec::ap_default(128);
        assert_eq!(make_phantom(&spec).unwrap(), make_phantom(&spec).unwrap());
    }

    #[test]
    fn upright_symmetric_ap() {
        let p = make_phantom(&PhantomSpec::ap_default(128)).unwrap();
        assert_eq!(connected_components(&p.truth.mask).len(), 2);
        assert!(estimate_ap_rotation(&p.truth.mask).unwrap().abs() <= 0.5);
    }

    #[test]
    fn rotated_ap_recovers_angle() {
        let mut spec = PhantomSpec::ap_default(256);
        spec.rotation_deg = 10.0;
        let p = make_phantom(&spec).unwrap();
        let est = estimate_ap_rotation(&p.truth.mask).unwrap();
        assert!((est - 10.0).abs() <= 1.0, "{est}");
    }

    #[test]
    fn truth_consistent() {
        let mut spec = PhantomSpec::lat_default(200, Side::Left);
        spec.rotation_deg = -7.0;
        let p = make_phantom(&spec).unwrap();
        assert_eq!(bbox_of(&p.truth.mask).unwrap(), p.truth.union_bbox);
        let again = rasterize_lungs(&spec).unwrap();
        let union = BinaryMask::from_fn(200, 200, |x, y| again.iter().any(|m| m.get(x, y))).unwrap();
        assert_eq!(&union, &p.truth.mask);
        assert_eq!(connected_components(&p.truth.mask).len(), 1);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = PhantomSpec::ap_default(128);
        spec.lungs[0].semi_y = 100.0;
        assert!(matches!(make_phantom(&spec), Err(Error::InvalidSpec(_))));
        let mut lat = PhantomSpec::lat_default(128, Side::Right);
        lat.spine_side = None;
        assert!(make_phantom(&lat).is_err());
        let mut dim = PhantomSpec::lat_default(128, Side::Right);
        dim.spine_level = 40;
        assert!(make_phantom(&dim).is_err());
    }

    #[test]
    fn corpus_shape_and_seeds() {
        let a = make_corpus(3, 7).unwrap();
        assert_eq!(a.iter().flat_map(|c| c.phantoms()).count(), 6);
        assert_eq!(a, make_corpus(3, 7).unwrap());
        let b = make_corpus(3, 8).unwrap();
        let rots = |c: &[CorpusCase]| c.iter().map(|c| c.ap.truth.rotation_deg).collect::<Vec<_>>();
        assert_ne!(rots(&a), rots(&b));
        for c in &a {
            assert!(c.ap.truth.rotation_deg.abs() <= 15.0);
            assert!(c.lat.truth.spine_side.is_some());
        }
    }
}
