//! Raster value types and geometry primitives shared by every stage.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BitDepth {
    #[serde(rename = "8")]
    Eight,
    #[serde(rename = "16")]
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    pub fn max_value(self) -> u16 {
        match self {
            BitDepth::Eight => u8::MAX as u16,
            BitDepth::Sixteen => u16::MAX,
        }
    }
}

/// Single-channel intensity raster, row-major, 8 or 16 bits per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    depth: BitDepth,
    pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, depth: BitDepth, pixels: Vec<u16>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        let max = depth.max_value();
        if let Some(&v) = pixels.iter().find(|&&v| v > max) {
            return Err(Error::InvalidImage(format!(
                "intensity {v} exceeds {max} for {}-bit image",
                depth.bits()
            )));
        }
        Ok(Self {
            width,
            height,
            depth,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, depth: BitDepth, value: u16) -> Result<Self> {
        Self::new(width, height, depth, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        depth: BitDepth,
        mut f: impl FnMut(usize, usize) -> u16,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, depth, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth(&self) -> BitDepth {
        self.depth
    }

    pub fn max_value(&self) -> u16 {
        self.depth.max_value()
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u16> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }

    pub fn bounds(&self) -> BBox {
        BBox::new(0, 0, self.width - 1, self.height - 1)
    }

    /// Copies out the inclusive rectangle `b`.
    pub fn crop(&self, b: &BBox) -> Result<Self> {
        if !b.fits_within(self.width, self.height) {
            return Err(Error::BoxOutsideImage(*b, self.width, self.height));
        }
        let mut pixels = Vec::with_capacity(b.area());
        for y in b.y_min..=b.y_max {
            let row = y * self.width;
            pixels.extend_from_slice(&self.pixels[row + b.x_min..=row + b.x_max]);
        }
        Ok(Self {
            width: b.width(),
            height: b.height(),
            depth: self.depth,
            pixels,
        })
    }
}

/// Real-valued raster, used for z-normalized images.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl RealImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite value".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Binary raster. Set bits are foreground (lung).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height, bits.len())?;
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Iterates `(x, y)` of every set bit in row-major order.
    pub fn set_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn crop(&self, b: &BBox) -> Result<Self> {
        if !b.fits_within(self.width, self.height) {
            return Err(Error::BoxOutsideImage(*b, self.width, self.height));
        }
        let mut bits = Vec::with_capacity(b.area());
        for y in b.y_min..=b.y_max {
            let row = y * self.width;
            bits.extend_from_slice(&self.bits[row + b.x_min..=row + b.x_max]);
        }
        Ok(Self {
            width: b.width(),
            height: b.height(),
            bits,
        })
    }

    /// Mean `(x, y)` of the set bits.
    pub fn centroid(&self) -> Result<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for (x, y) in self.set_pixels() {
            sx += x as f64;
            sy += y as f64;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyMask);
        }
        Ok((sx / n as f64, sy / n as f64))
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "zero-sized raster {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::InvalidImage(format!(
            "buffer of {len} samples does not match {width}x{height}"
        )));
    }
    Ok(())
}

/// Axis-aligned box with inclusive integer corners.
///
/// Serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 4]", into = "[usize; 4]")]
pub struct BBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BBox {
    /// Panics if the corners are not ordered.
    pub fn new(x_min: usize, y_min: usize, x_max: usize, y_max: usize) -> Self {
        Self::try_new(x_min, y_min, x_max, y_max).expect("unordered box corners")
    }

    pub fn try_new(x_min: usize, y_min: usize, x_max: usize, y_max: usize) -> Result<Self> {
        if x_min > x_max || y_min > y_max {
            return Err(Error::InvalidParams(format!(
                "box [{x_min},{y_min},{x_max},{y_max}] has unordered corners"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn width(&self) -> usize {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        self.contains(other.x_min, other.y_min) && self.contains(other.x_max, other.y_max)
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.x_min <= other.x_max
            && other.x_min <= self.x_max
            && self.y_min <= other.y_max
            && other.y_min <= self.y_max
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        self.x_max < width && self.y_max < height
    }

    pub fn corners(&self) -> [(usize, usize); 4] {
        [
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        ]
    }
}

impl TryFrom<[usize; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [usize; 4]) -> Result<Self> {
        BBox::try_new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [usize; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewKind {
    #[serde(rename = "AP")]
    Ap,
    #[serde(rename = "LAT")]
    Lat,
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewKind::Ap => "AP",
            ViewKind::Lat => "LAT",
        })
    }
}

impl std::str::FromStr for ViewKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AP" => Ok(ViewKind::Ap),
            "LAT" => Ok(ViewKind::Lat),
            _ => Err(Error::InvalidParams(format!("unknown view {s:?}"))),
        }
    }
}

/// Tightest box around the set bits of `mask`.
pub fn bbox_of(mask: &BinaryMask) -> Result<BBox> {
    let mut it = mask.set_pixels();
    let (x0, y0) = it.next().ok_or(Error::EmptyMask)?;
    let mut b = BBox::new(x0, y0, x0, y0);
    for (x, y) in it {
        b.x_min = b.x_min.min(x);
        b.x_max = b.x_max.max(x);
        b.y_max = y;
    }
    Ok(b)
}
