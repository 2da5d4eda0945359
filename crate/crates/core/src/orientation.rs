//! Lateral-view orientation: find which side of the lungs the vertebral column
//! lies on and flip horizontally so it always ends up on the image right.
//!
//! The detector is a deterministic intensity heuristic. Over the rows spanned by
//! the lung bounding box it compares the mean intensity of two vertical strips,
//! `[x_min − f·w, x_min]` and `[x_max, x_max + f·w]` (clamped to the canvas,
//! `f` = strip fraction, `w` = lung box width). The brighter strip is taken as
//! the spine. The score is the strip margin normalized by the contrast between
//! the brighter strip and the mean lung intensity, clamped to `[0, 1]`. Exact
//! ties resolve to `Right`, which means no flip.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{bbox_of, BinaryMask, GrayImage};

pub const DEFAULT_STRIP_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn mirrored(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            _ => Err(Error::InvalidParams(format!("unknown side {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpineSide {
    pub side: Side,
    /// Heuristic confidence in `[0, 1]`.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionSource {
    Heuristic,
    Override,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationOutcome {
    pub flipped: bool,
    pub detected: SpineSide,
    pub source: DecisionSource,
}

/// Rasters that can be mirrored left-right.
pub trait HFlip {
    fn hflipped(&self) -> Self;
}

/// Swaps column `i` with column `width - 1 - i`.
pub fn hflip<T: HFlip>(raster: &T) -> T {
    raster.hflipped()
}

impl HFlip for GrayImage {
    fn hflipped(&self) -> Self {
        let w = self.width();
        GrayImage::from_fn(w, self.height(), self.depth(), |x, y| self.get(w - 1 - x, y))
            .expect("same dims")
    }
}

impl HFlip for BinaryMask {
    fn hflipped(&self) -> Self {
        let w = self.width();
        BinaryMask::from_fn(w, self.height(), |x, y| self.get(w - 1 - x, y)).expect("same dims")
    }
}

fn check_dims(img: &GrayImage, mask: &BinaryMask) -> Result<()> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(Error::DimensionMismatch(
            img.width(),
            img.height(),
            mask.width(),
            mask.height(),
        ));
    }
    Ok(())
}

pub fn detect_spine_side(img: &GrayImage, mask: &BinaryMask) -> Result<SpineSide> {
    detect_spine_side_with(img, mask, DEFAULT_STRIP_FRACTION)
}

pub fn detect_spine_side_with(
    img: &GrayImage,
    mask: &BinaryMask,
    strip_fraction: f64,
) -> Result<SpineSide> {
    check_dims(img, mask)?;
    if !(strip_fraction >= 0.0 && strip_fraction.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "strip fraction must be non-negative, got {strip_fraction}"
        )));
    }
    let b = bbox_of(mask)?;
    let w = img.width();
    let strip = (strip_fraction * b.width() as f64).round() as usize;

    let column_mean = |x0: usize, x1: usize| -> f64 {
        let mut sum = 0u64;
        for y in b.y_min..=b.y_max {
            for x in x0..=x1 {
                sum += img.get(x, y) as u64;
            }
        }
        sum as f64 / ((x1 - x0 + 1) * b.height()) as f64
    };
    let left = column_mean(b.x_min.saturating_sub(strip), b.x_min);
    let right = column_mean(b.x_max, (b.x_max + strip).min(w - 1));

    let (lung_sum, lung_n) = mask
        .set_pixels()
        .fold((0u64, 0u64), |(s, n), (x, y)| (s + img.get(x, y) as u64, n + 1));
    let lung_mean = lung_sum as f64 / lung_n as f64;

    let (side, bright, dim) = if left > right {
        (Side::Left, left, right)
    } else {
        (Side::Right, right, left)
    };
    let contrast = bright - lung_mean;
    let score = if contrast > 0.0 {
        ((bright - dim) / contrast).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(SpineSide { side, score })
}

/// Flips image and mask when the spine is detected (or declared) on the left.
pub fn correct_orientation(
    img: &GrayImage,
    mask: &BinaryMask,
    override_side: Option<Side>,
) -> Result<(GrayImage, BinaryMask, OrientationOutcome)> {
    let outcome = decide_orientation(img, mask, override_side, DEFAULT_STRIP_FRACTION)?;
    let (img, mask) = apply_orientation(img, mask, &outcome);
    Ok((img, mask, outcome))
}

/// Runs detection (or honours the override) without touching the rasters.
pub fn decide_orientation(
    img: &GrayImage,
    mask: &BinaryMask,
    override_side: Option<Side>,
    strip_fraction: f64,
) -> Result<OrientationOutcome> {
    let (detected, source) = match override_side {
        Some(side) => {
            check_dims(img, mask)?;
            bbox_of(mask)?;
            (SpineSide { side, score: 1.0 }, DecisionSource::Override)
        }
        None => (
            detect_spine_side_with(img, mask, strip_fraction)?,
            DecisionSource::Heuristic,
        ),
    };
    Ok(OrientationOutcome {
        flipped: detected.side == Side::Left,
        detected,
        source,
    })
}

pub fn apply_orientation<T: HFlip + Clone, U: HFlip + Clone>(
    img: &T,
    mask: &U,
    outcome: &OrientationOutcome,
) -> (T, U) {
    if outcome.flipped {
        (hflip(img), hflip(mask))
    } else {
        (img.clone(), mask.clone())
    }
}
