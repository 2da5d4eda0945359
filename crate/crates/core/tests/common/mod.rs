//! Independent reference implementations. Deliberately naive: no union-find,
//! no distance transform, no cached tile mappings.
#![allow(dead_code)]

use cxr_regions::{BinaryMask, GrayImage};
use rand::Rng;

/// Random mask with a random fill density, so sparse and dense cases both occur.
pub fn random_mask<R: Rng>(rng: &mut R, w: usize, h: usize) -> BinaryMask {
    let density = rng.gen_range(0.05..0.9);
    BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(density)).unwrap()
}

/// Components by iterative flood fill, 8-connectivity. Returns sorted pixel sets,
/// biggest first, ties by first pixel in row-major order.
pub fn flood_fill_components(mask: &BinaryMask) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || seen[y * w + x] {
                continue;
            }
            let mut stack = vec![(x, y)];
            seen[y * w + x] = true;
            let mut comp = Vec::new();
            while let Some((cx, cy)) = stack.pop() {
                comp.push((cx, cy));
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if mask.get(nx, ny) && !seen[ny * w + nx] {
                            seen[ny * w + nx] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            comp.sort_by_key(|&(x, y)| (y, x));
            out.push(comp);
        }
    }
    // discovery order is already row-major by first pixel; stable sort keeps it for ties
    out.sort_by_key(|c| std::cmp::Reverse(c.len()));
    out
}

/// (tp, fp, fn) by walking both masks pixel by pixel.
pub fn count_overlap(pred: &BinaryMask, reference: &BinaryMask) -> (usize, usize, usize) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &r) in pred.bits().iter().zip(reference.bits()) {
        match (p, r) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    (tp, fp, fn_)
}

fn is_boundary(m: &BinaryMask, x: usize, y: usize) -> bool {
    if !m.get(x, y) {
        return false;
    }
    let (w, h) = (m.width(), m.height());
    x == 0 || y == 0 || x + 1 == w || y + 1 == h
        || !m.get(x - 1, y)
        || !m.get(x + 1, y)
        || !m.get(x, y - 1)
        || !m.get(x, y + 1)
}

pub fn boundary_points(m: &BinaryMask) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for y in 0..m.height() {
        for x in 0..m.width() {
            if is_boundary(m, x, y) {
                v.push((x, y));
            }
        }
    }
    v
}

/// Symmetric average surface distance by all-pairs search; `None` if either
/// mask is empty.
pub fn brute_force_asd(a: &BinaryMask, b: &BinaryMask) -> Option<f64> {
    let (pa, pb) = (boundary_points(a), boundary_points(b));
    if pa.is_empty() || pb.is_empty() {
        return None;
    }
    let nearest = |p: (usize, usize), set: &[(usize, usize)]| {
        set.iter()
            .map(|q| {
                let dx = p.0 as f64 - q.0 as f64;
                let dy = p.1 as f64 - q.1 as f64;
                (dx * dx + dy * dy).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let total: f64 = pa.iter().map(|&p| nearest(p, &pb)).sum::<f64>()
        + pb.iter().map(|&p| nearest(p, &pa)).sum::<f64>();
    Some(total / (pa.len() + pb.len()) as f64)
}

/// Direct CLAHE: for every pixel, rebuild the histograms of the surrounding
/// tiles from scratch and blend their equalized values.
pub fn direct_clahe(img: &GrayImage, clip_limit: f64, tiles_x: usize, tiles_y: usize) -> Vec<u16> {
    let (w, h) = (img.width(), img.height());
    let (bins, shift) = if img.max_value() == 255 { (256usize, 0) } else { (4096, 4) };
    let maxval = img.max_value() as f64;
    let start = |i: usize, n: usize, t: usize| i * n / t;
    let center = |i: usize, n: usize, t: usize| {
        (start(i, n, t) as f64 + start(i + 1, n, t) as f64 - 1.0) / 2.0
    };

    let equalized = |tx: usize, ty: usize, bin: usize| -> f64 {
        let (x0, x1) = (start(tx, w, tiles_x), start(tx + 1, w, tiles_x));
        let (y0, y1) = (start(ty, h, tiles_y), start(ty + 1, h, tiles_y));
        let mut hist = vec![0.0f64; bins];
        for y in y0..y1 {
            for x in x0..x1 {
                hist[(img.get(x, y) >> shift) as usize] += 1.0;
            }
        }
        let n = ((x1 - x0) * (y1 - y0)) as f64;
        let clip = clip_limit * n / bins as f64;
        let excess: f64 = hist.iter().map(|&c| (c - clip).max(0.0)).sum();
        let below: f64 = hist[..=bin].iter().map(|&c| c.min(clip)).sum();
        (below + (bin + 1) as f64 * excess / bins as f64) * maxval / n
    };

    // neighbouring tile indices and the weight of the second one
    let neighbours = |p: usize, n: usize, t: usize| -> (usize, usize, f64) {
        let p = p as f64;
        for i in 0..t - 1 {
            let (c0, c1) = (center(i, n, t), center(i + 1, n, t));
            if p > c0 && p < c1 {
                return (i, i + 1, (p - c0) / (c1 - c0));
            }
            if p == c1 {
                return (i + 1, i + 1, 0.0);
            }
        }
        if p <= center(0, n, t) {
            (0, 0, 0.0)
        } else {
            (t - 1, t - 1, 0.0)
        }
    };

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (ya, yb, v) = neighbours(y, h, tiles_y);
        for x in 0..w {
            let (xa, xb, u) = neighbours(x, w, tiles_x);
            let bin = (img.get(x, y) >> shift) as usize;
            let value = (1.0 - u) * (1.0 - v) * equalized(xa, ya, bin)
                + u * (1.0 - v) * equalized(xb, ya, bin)
                + (1.0 - u) * v * equalized(xa, yb, bin)
                + u * v * equalized(xb, yb, bin);
            out.push(value.round().clamp(0.0, maxval) as u16);
        }
    }
    out
}
