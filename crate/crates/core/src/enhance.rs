//! Contrast enhancement (CLAHE) and z-normalization.
//!
//! CLAHE here follows the classic contextual-region scheme:
//!
//! 1. The image is partitioned into `tiles_x × tiles_y` tiles. Tile `i` along an
//!    axis of length `n` covers `[⌊i·n/t⌋, ⌊(i+1)·n/t⌋)`, so tiles differ in size
//!    by at most one pixel when `n` is not divisible by `t`.
//! 2. Each tile builds a histogram with 256 bins (8-bit) or 4096 bins (16-bit,
//!    `bin = v >> 4`).
//! 3. Bins are clipped at the real-valued height `clip_limit · tile_pixels / bins`.
//!    The total excess is spread uniformly in one pass (`excess / bins` per
//!    bin); bins pushed back over the clip are not clipped again.
//! 4. The tile mapping is the scaled cumulative histogram,
//!    `cdf(b) · maxval / tile_pixels`. Every quantity scales with the tile size,
//!    so tiles of different sizes with the same intensity distribution get the
//!    same mapping (a constant image stays constant).
//! 5. Each output pixel bilinearly interpolates the mappings of the (up to) four
//!    tiles whose centers surround it. Outside the outermost centers the
//!    interpolation clamps to the nearest center.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{BitDepth, GrayImage, RealImage};

/// Default z-normalization guard.
pub const DEFAULT_EPSILON: f64 = 1e-10;

/// `e^-10`, the alternative reading of the guard constant.
pub const EPSILON_E_NEG10: f64 = 4.539_992_976_248_485e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaheParams {
    /// Histogram clip height as a multiple of the uniform bin height.
    pub clip_limit: f64,
    pub tiles_x: usize,
    pub tiles_y: usize,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            clip_limit: 2.0,
            tiles_x: 8,
            tiles_y: 8,
        }
    }
}

impl ClaheParams {
    pub fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        if !(self.clip_limit > 0.0 && self.clip_limit.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "clip limit must be positive, got {}",
                self.clip_limit
            )));
        }
        if self.tiles_x == 0 || self.tiles_y == 0 {
            return Err(Error::InvalidParams("tile grid must be at least 1x1".into()));
        }
        if self.tiles_x > width || self.tiles_y > height {
            return Err(Error::InvalidParams(format!(
                "{}x{} tile grid larger than {width}x{height} image",
                self.tiles_x, self.tiles_y
            )));
        }
        Ok(())
    }
}

/// Number of histogram bins and the right shift mapping an intensity to its bin.
pub fn histogram_layout(depth: BitDepth) -> (usize, u32) {
    match depth {
        BitDepth::Eight => (256, 0),
        BitDepth::Sixteen => (4096, 4),
    }
}

/// Tile boundaries along one axis: `bounds[i]..bounds[i + 1]` is tile `i`.
fn tile_bounds(len: usize, tiles: usize) -> Vec<usize> {
    (0..=tiles).map(|i| i * len / tiles).collect()
}

/// Clipped, redistributed, cumulative mapping for one tile, scaled to `[0, maxval]`.
fn tile_mapping(
    img: &GrayImage,
    xs: (usize, usize),
    ys: (usize, usize),
    clip_limit: f64,
) -> Vec<f64> {
    let (bins, shift) = histogram_layout(img.depth());
    let mut hist = vec![0u64; bins];
    for y in ys.0..ys.1 {
        for x in xs.0..xs.1 {
            hist[(img.get(x, y) >> shift) as usize] += 1;
        }
    }
    let n = ((xs.1 - xs.0) * (ys.1 - ys.0)) as f64;
    let clip = clip_limit * n / bins as f64;

    let mut excess = 0.0;
    let clipped: Vec<f64> = hist
        .iter()
        .map(|&h| {
            let h = h as f64;
            if h > clip {
                excess += h - clip;
                clip
            } else {
                h
            }
        })
        .collect();
    let add = excess / bins as f64;

    let scale = img.max_value() as f64 / n;
    let mut cum = 0.0;
    clipped
        .iter()
        .map(|&h| {
            cum += h + add;
            cum * scale
        })
        .collect()
}

/// Interpolation anchors along one axis for coordinate `p`: lower tile, upper tile
/// and the weight of the upper tile.
fn axis_weights(p: usize, centers: &[f64]) -> (usize, usize, f64) {
    let p = p as f64;
    let last = centers.len() - 1;
    if p <= centers[0] {
        return (0, 0, 0.0);
    }
    if p >= centers[last] {
        return (last, last, 0.0);
    }
    let hi = centers.partition_point(|&c| c <= p);
    let lo = hi - 1;
    let t = (p - centers[lo]) / (centers[hi] - centers[lo]);
    (lo, hi, t)
}

/// Contrast-limited adaptive histogram equalization.
pub fn clahe(img: &GrayImage, params: &ClaheParams) -> Result<GrayImage> {
    let (w, h) = (img.width(), img.height());
    params.validate_for(w, h)?;
    let (_, shift) = histogram_layout(img.depth());
    let xb = tile_bounds(w, params.tiles_x);
    let yb = tile_bounds(h, params.tiles_y);

    let maps: Vec<Vec<f64>> = (0..params.tiles_y * params.tiles_x)
        .into_par_iter()
        .map(|t| {
            let (ty, tx) = (t / params.tiles_x, t % params.tiles_x);
            tile_mapping(
                img,
                (xb[tx], xb[tx + 1]),
                (yb[ty], yb[ty + 1]),
                params.clip_limit,
            )
        })
        .collect();

    let center = |b: &[usize], i: usize| (b[i] + b[i + 1] - 1) as f64 / 2.0;
    let cx: Vec<f64> = (0..params.tiles_x).map(|i| center(&xb, i)).collect();
    let cy: Vec<f64> = (0..params.tiles_y).map(|i| center(&yb, i)).collect();
    let xw: Vec<_> = (0..w).map(|x| axis_weights(x, &cx)).collect();
    let max = img.max_value() as f64;

    let pixels: Vec<u16> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let (ty0, ty1, v) = axis_weights(y, &cy);
            let xw = &xw;
            let maps = &maps;
            (0..w).map(move |x| {
                let (tx0, tx1, u) = xw[x];
                let bin = (img.get(x, y) >> shift) as usize;
                let m = |ty: usize, tx: usize| maps[ty * params.tiles_x + tx][bin];
                let top = (1.0 - u) * m(ty0, tx0) + u * m(ty0, tx1);
                let bottom = (1.0 - u) * m(ty1, tx0) + u * m(ty1, tx1);
                let value = (1.0 - v) * top + v * bottom;
                value.round().clamp(0.0, max) as u16
            })
        })
        .collect();

    GrayImage::new(w, h, img.depth(), pixels)
}

/// `(x - mean) / (std + epsilon)` per pixel, population standard deviation.
pub fn znormalize(img: &GrayImage, epsilon: f64) -> RealImage {
    let n = img.pixels().len() as f64;
    let mean = img.pixels().iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = img
        .pixels()
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    let denom = var.sqrt() + epsilon;
    let values = img
        .pixels()
        .iter()
        .map(|&v| (v as f64 - mean) / denom)
        .collect();
    RealImage::new(img.width(), img.height(), values).expect("finite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_stays_constant() {
        for depth in [BitDepth::Eight, BitDepth::Sixteen] {
            let img = GrayImage::filled(40, 30, depth, 128).unwrap();
            for (tx, ty) in [(1, 1), (2, 3), (8, 8)] {
                let params = ClaheParams {
                    clip_limit: 2.0,
                    tiles_x: tx,
                    tiles_y: ty,
                };
                let out = clahe(&img, &params).unwrap();
                let first = out.pixels()[0];
                assert!(out.pixels().iter().all(|&v| v == first));
                assert_eq!(out.depth(), depth);
            }
        }
    }

    #[test]
    fn tile_grid_larger_than_image_rejected() {
        let img = GrayImage::filled(4, 4, BitDepth::Eight, 1).unwrap();
        let params = ClaheParams {
            clip_limit: 2.0,
            tiles_x: 5,
            tiles_y: 1,
        };
        assert!(matches!(clahe(&img, &params), Err(Error::InvalidParams(_))));
        let bad_clip = ClaheParams {
            clip_limit: 0.0,
            ..ClaheParams::default()
        };
        assert!(clahe(&GrayImage::filled(16, 16, BitDepth::Eight, 1).unwrap(), &bad_clip).is_err());
    }

    #[test]
    fn sixteen_bit_range_preserved() {
        let img = GrayImage::from_fn(64, 48, BitDepth::Sixteen, |x, y| {
            ((x * 1000 + y * 37) % 65536) as u16
        })
        .unwrap();
        let out = clahe(&img, &ClaheParams::default()).unwrap();
        assert_eq!(out.depth(), BitDepth::Sixteen);
        assert!(out.pixels().iter().any(|&v| v > 255));
    }

    #[test]
    fn tile_bounds_partition() {
        assert_eq!(tile_bounds(10, 3), vec![0, 3, 6, 10]);
        assert_eq!(tile_bounds(64, 2), vec![0, 32, 64]);
    }

    #[test]
    fn znormalize_small_example() {
        let img = GrayImage::new(2, 2, BitDepth::Eight, vec![0, 1, 2, 3]).unwrap();
        let out = znormalize(&img, DEFAULT_EPSILON);
        let expected = [-1.341_640_786, -0.447_213_595, 0.447_213_595, 1.341_640_786];
        for (a, b) in out.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn znormalize_constant_is_zero() {
        let img = GrayImage::filled(5, 5, BitDepth::Sixteen, 999).unwrap();
        assert!(znormalize(&img, DEFAULT_EPSILON)
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn e_neg10_constant() {
        assert!((EPSILON_E_NEG10 - (-10f64).exp()).abs() < 1e-20);
    }
}
