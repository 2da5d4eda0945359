//! Blob detection, per-lung principal-axis orientation and raster rotation.
//!
//! Angles are in degrees in image coordinates (x right, y down). A positive
//! angle is a clockwise rotation as displayed on screen: rotating by `θ` maps an
//! offset `(dx, dy)` from the center to
//! `(dx·cosθ − dy·sinθ, dx·sinθ + dy·cosθ)`. [`principal_axis`] reports the
//! angle that [`rotate`] would have applied to a vertical axis to produce the
//! observed one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{BinaryMask, GrayImage};

/// Largest rotation accepted by [`rotate`].
pub const MAX_ROTATION_DEG: f64 = 45.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    /// 1-based, in sorted order.
    pub label: usize,
    pub area: usize,
    pub centroid: (f64, f64),
    /// Row-major order; the first pixel is the topmost-leftmost one.
    pub pixels: Vec<(usize, usize)>,
}

impl Blob {
    pub fn from_pixels(label: usize, pixels: Vec<(usize, usize)>) -> Self {
        let area = pixels.len();
        let (sx, sy) = pixels
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
        Self {
            label,
            area,
            centroid: (sx / area as f64, sy / area as f64),
            pixels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalAxis {
    /// Major-axis angle from the image vertical, in `(-90, 90]`, clockwise positive.
    pub angle_deg: f64,
    /// Larger over smaller covariance eigenvalue; infinite for collinear blobs.
    pub eigen_ratio: f64,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// 8-connected foreground components, sorted by area (descending), ties broken
/// by the `(y, x)` position of each blob's topmost-leftmost pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<Blob> {
    let (w, h) = (mask.width(), mask.height());
    let mut parent: Vec<usize> = (0..w * h).collect();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let i = y * w + x;
            // previously visited neighbours: W, NW, N, NE
            if x > 0 && mask.get(x - 1, y) {
                union(&mut parent, i, i - 1);
            }
            if y > 0 {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if mask.get(nx, y - 1) {
                        union(&mut parent, i, (y - 1) * w + nx);
                    }
                }
            }
        }
    }

    // Roots are the smallest index in their set, i.e. the topmost-leftmost pixel,
    // so the first time a root is seen in raster order fixes the tie-break key.
    let mut slot = vec![usize::MAX; w * h];
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    for (i, &on) in mask.bits().iter().enumerate() {
        if !on {
            continue;
        }
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push((i % w, i / w));
    }

    // groups are already in (y, x)-of-first-pixel order; a stable sort keeps it for ties
    groups.sort_by_key(|g| std::cmp::Reverse(g.len()));
    groups
        .into_iter()
        .enumerate()
        .map(|(i, px)| Blob::from_pixels(i + 1, px))
        .collect()
}

/// Mask containing only the `k` largest components.
pub fn keep_largest(mask: &BinaryMask, k: usize) -> BinaryMask {
    let blobs = connected_components(mask);
    if blobs.len() <= k {
        return mask.clone();
    }
    let mut out = BinaryMask::empty(mask.width(), mask.height()).expect("valid dims");
    for blob in blobs.iter().take(k) {
        for &(x, y) in &blob.pixels {
            out.set(x, y, true);
        }
    }
    out
}

/// Major-axis orientation of a blob from the eigen-decomposition of its 2x2
/// coordinate covariance.
pub fn principal_axis(blob: &Blob) -> Result<PrincipalAxis> {
    if blob.area < 2 {
        return Err(Error::DegenerateBlob(blob.area));
    }
    let (cx, cy) = blob.centroid;
    let n = blob.area as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in &blob.pixels {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (sxx, syy, sxy) = (sxx / n, syy / n, sxy / n);

    let mean = (sxx + syy) / 2.0;
    let spread = (((sxx - syy) / 2.0).powi(2) + sxy * sxy).sqrt();
    let (l1, l2) = (mean + spread, mean - spread);

    if spread <= 1e-12 * mean.abs().max(f64::MIN_POSITIVE) {
        return Ok(PrincipalAxis {
            angle_deg: 0.0,
            eigen_ratio: 1.0,
        });
    }

    // major axis direction, measured from +x
    let phi = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    // rotate() maps the vertical (0, 1) to (-sinθ, cosθ), so θ = φ - 90°
    let mut angle = phi.to_degrees() - 90.0;
    if angle <= -90.0 {
        angle += 180.0;
    } else if angle > 90.0 {
        angle -= 180.0;
    }
    let eigen_ratio = if l2 > 0.0 { l1 / l2 } else { f64::INFINITY };
    Ok(PrincipalAxis {
        angle_deg: angle,
        eigen_ratio,
    })
}

/// Area-weighted mean principal angle of the (up to) two largest components.
pub fn estimate_ap_rotation(mask: &BinaryMask) -> Result<f64> {
    let blobs = connected_components(mask);
    if blobs.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut weighted = 0.0;
    let mut total = 0.0;
    for blob in blobs.iter().take(2) {
        let axis = match principal_axis(blob) {
            Ok(a) => a,
            Err(Error::DegenerateBlob(_)) => continue,
            Err(e) => return Err(e),
        };
        weighted += axis.angle_deg * blob.area as f64;
        total += blob.area as f64;
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(weighted / total)
}

/// Raster types that can be rotated in place on their own canvas.
pub trait Rotate: Sized {
    fn rotated(&self, angle_deg: f64, center: (f64, f64)) -> Result<Self>;
}

/// Inverse-mapping rotation by `angle_deg` about `center` on a canvas of the same size.
pub fn rotate<T: Rotate>(raster: &T, angle_deg: f64, center: (f64, f64)) -> Result<T> {
    raster.rotated(angle_deg, center)
}

fn check_angle(angle_deg: f64) -> Result<()> {
    if !angle_deg.is_finite() || angle_deg.abs() > MAX_ROTATION_DEG {
        return Err(Error::AngleOutOfRange(angle_deg));
    }
    Ok(())
}

/// Source position sampled by output pixel `(x, y)`.
#[inline]
fn source_of(x: usize, y: usize, cos: f64, sin: f64, center: (f64, f64)) -> (f64, f64) {
    let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
    (
        center.0 + dx * cos + dy * sin,
        center.1 - dx * sin + dy * cos,
    )
}

impl Rotate for GrayImage {
    /// Bilinear interpolation; samples outside the source canvas are 0.
    fn rotated(&self, angle_deg: f64, center: (f64, f64)) -> Result<Self> {
        check_angle(angle_deg)?;
        if angle_deg == 0.0 {
            return Ok(self.clone());
        }
        let (w, h) = (self.width(), self.height());
        let (sin, cos) = angle_deg.to_radians().sin_cos();
        let max = self.max_value() as f64;
        GrayImage::from_fn(w, h, self.depth(), |x, y| {
            let (sx, sy) = source_of(x, y, cos, sin, center);
            if sx < 0.0 || sy < 0.0 || sx > (w - 1) as f64 || sy > (h - 1) as f64 {
                return 0;
            }
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let p = |x: usize, y: usize| self.get(x, y) as f64;
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, max) as u16
        })
    }
}

impl Rotate for BinaryMask {
    /// Nearest-neighbour sampling; samples outside the source canvas are background.
    fn rotated(&self, angle_deg: f64, center: (f64, f64)) -> Result<Self> {
        check_angle(angle_deg)?;
        if angle_deg == 0.0 {
            return Ok(self.clone());
        }
        let (w, h) = (self.width(), self.height());
        let (sin, cos) = angle_deg.to_radians().sin_cos();
        BinaryMask::from_fn(w, h, |x, y| {
            let (sx, sy) = source_of(x, y, cos, sin, center);
            let (nx, ny) = ((sx + 0.5).floor(), (sy + 0.5).floor());
            if nx < 0.0 || ny < 0.0 || nx >= w as f64 || ny >= h as f64 {
                return false;
            }
            self.get(nx as usize, ny as usize)
        })
    }
}
