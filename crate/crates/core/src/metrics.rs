//! Segmentation evaluation (Dice, precision, recall, average surface distance)
//! and the training losses as plain functions.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::BinaryMask;

/// Masks are resampled to this size before evaluation unless told otherwise.
pub const DEFAULT_EVAL_SIZE: (usize, usize) = (256, 256);

/// Probability clamp used by the cross-entropy loss.
pub const BCE_CLAMP: f64 = 1e-7;

/// Per-pixel foreground probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    probs: Vec<f64>,
}

impl ProbMap {
    pub fn new(width: usize, height: usize, probs: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != probs.len() {
            return Err(Error::InvalidParams(format!(
                "{} probabilities for a {width}x{height} map",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParams(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            probs,
        })
    }

    pub fn filled(width: usize, height: usize, p: f64) -> Result<Self> {
        Self::new(width, height, vec![p; width * height])
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            probs: mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn check_against(&self, mask: &BinaryMask) -> Result<()> {
        if self.width != mask.width() || self.height != mask.height() {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                mask.width(),
                mask.height(),
            ));
        }
        Ok(())
    }
}

/// Nearest-neighbour resampling. Output pixel `x` samples source column
/// `⌊(x + ½)·src_w / w⌋`.
pub fn resize_mask(mask: &BinaryMask, width: usize, height: usize) -> Result<BinaryMask> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParams(format!(
            "cannot resize to {width}x{height}"
        )));
    }
    if (width, height) == (mask.width(), mask.height()) {
        return Ok(mask.clone());
    }
    let sample = |i: usize, dst: usize, src: usize| ((2 * i + 1) * src / (2 * dst)).min(src - 1);
    let xs: Vec<usize> = (0..width).map(|x| sample(x, width, mask.width())).collect();
    BinaryMask::from_fn(width, height, |x, y| {
        mask.get(xs[x], sample(y, height, mask.height()))
    })
}

/// Confusion counts of a prediction against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Overlap {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Overlap {
    pub fn of(pred: &BinaryMask, reference: &BinaryMask) -> Result<Self> {
        pred.same_dims(reference)?;
        let mut o = Overlap::default();
        for (&p, &r) in pred.bits().iter().zip(reference.bits()) {
            match (p, r) {
                (true, true) => o.tp += 1,
                (true, false) => o.fp += 1,
                (false, true) => o.fn_ += 1,
                (false, false) => {}
            }
        }
        Ok(o)
    }

    pub fn both_empty(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }

    /// `2·tp / (|P| + |R|)`; 1.0 when both masks are empty.
    pub fn dice(&self) -> f64 {
        if self.both_empty() {
            return 1.0;
        }
        let inter = self.tp as f64;
        (2.0 * inter) / ((self.tp + self.fp) as f64 + (self.tp + self.fn_) as f64)
    }

    /// 1.0 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fp)
    }

    /// 1.0 when the reference is empty.
    pub fn recall(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fn_)
    }
}

fn ratio_or_one(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Dice coefficient. Two empty masks score 1.0 and a warning is logged.
pub fn dice(pred: &BinaryMask, reference: &BinaryMask) -> Result<f64> {
    let o = Overlap::of(pred, reference)?;
    if o.both_empty() {
        log::warn!("dice of two empty masks reported as 1.0");
    }
    Ok(o.dice())
}

pub fn precision_recall(pred: &BinaryMask, reference: &BinaryMask) -> Result<(f64, f64)> {
    let o = Overlap::of(pred, reference)?;
    Ok((o.precision(), o.recall()))
}

/// Set pixels with at least one 4-neighbour that is background or off-canvas.
pub fn boundary(mask: &BinaryMask) -> Vec<(usize, usize)> {
    let (w, h) = (mask.width(), mask.height());
    mask.set_pixels()
        .filter(|&(x, y)| {
            x == 0
                || y == 0
                || x == w - 1
                || y == h - 1
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1)
        })
        .collect()
}

/// 1-D squared distance transform (lower envelope of parabolas) over the finite
/// entries of `f`.
fn sq_dt_1d(f: &[f64], out: &mut [f64]) {
    let sites: Vec<usize> = (0..f.len()).filter(|&i| f[i].is_finite()).collect();
    if sites.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut v: Vec<usize> = Vec::with_capacity(sites.len());
    let mut z: Vec<f64> = Vec::with_capacity(sites.len() + 1);
    let key = |q: usize| f[q] + (q * q) as f64;
    for &q in &sites {
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = (key(q) - key(p)) / (2.0 * (q as f64 - p as f64));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    let mut k = 0;
    for (i, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < i as f64 {
            k += 1;
        }
        let d = i as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance from every pixel to the nearest site.
fn squared_distance_field(width: usize, height: usize, sites: &[(usize, usize)]) -> Vec<f64> {
    let mut grid = vec![f64::INFINITY; width * height];
    for &(x, y) in sites {
        grid[y * width + x] = 0.0;
    }
    let mut col = vec![0.0; height];
    let mut col_out = vec![0.0; height];
    for x in 0..width {
        for y in 0..height {
            col[y] = grid[y * width + x];
        }
        sq_dt_1d(&col, &mut col_out);
        for y in 0..height {
            grid[y * width + x] = col_out[y];
        }
    }
    let mut row_out = vec![0.0; width];
    for y in 0..height {
        let row = &grid[y * width..(y + 1) * width];
        sq_dt_1d(row, &mut row_out);
        grid[y * width..(y + 1) * width].copy_from_slice(&row_out);
    }
    grid
}

/// Symmetric average surface distance, in pixels.
pub fn asd(pred: &BinaryMask, reference: &BinaryMask) -> Result<f64> {
    pred.same_dims(reference)?;
    let (bp, br) = (boundary(pred), boundary(reference));
    if bp.is_empty() || br.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (w, h) = (pred.width(), pred.height());
    let to_ref = squared_distance_field(w, h, &br);
    let to_pred = squared_distance_field(w, h, &bp);
    let sum_p: f64 = bp.iter().map(|&(x, y)| to_ref[y * w + x].sqrt()).sum();
    let sum_r: f64 = br.iter().map(|&(x, y)| to_pred[y * w + x].sqrt()).sum();
    Ok((sum_p + sum_r) / (bp.len() + br.len()) as f64)
}

/// Mean binary cross-entropy with predictions clamped to `[BCE_CLAMP, 1 − BCE_CLAMP]`.
pub fn bce_loss(pred: &ProbMap, reference: &BinaryMask) -> Result<f64> {
    pred.check_against(reference)?;
    let total: f64 = pred
        .probs
        .iter()
        .zip(reference.bits())
        .map(|(&q, &p)| {
            let q = q.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            if p {
                -q.ln()
            } else {
                -(1.0 - q).ln()
            }
        })
        .sum();
    Ok(total / pred.probs.len() as f64)
}

/// Soft Dice loss `−2·Σ y·ŷ / (Σ y + Σ ŷ)`, in `[−1, 0]`.
pub fn dice_loss(pred: &ProbMap, reference: &BinaryMask) -> Result<f64> {
    pred.check_against(reference)?;
    let (mut inter, mut sum_pred, mut sum_ref) = (0.0, 0.0, 0.0);
    for (&q, &p) in pred.probs.iter().zip(reference.bits()) {
        sum_pred += q;
        if p {
            inter += q;
            sum_ref += 1.0;
        }
    }
    let denom = sum_ref + sum_pred;
    if denom == 0.0 {
        return Err(Error::BothEmpty);
    }
    Ok(-(2.0 * inter) / denom)
}

/// `dice_loss + bce_loss`.
pub fn combined_loss(pred: &ProbMap, reference: &BinaryMask) -> Result<f64> {
    Ok(dice_loss(pred, reference)? + bce_loss(pred, reference)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub dice: f64,
    pub precision: f64,
    pub recall: f64,
    /// Pixels, at the evaluation resolution.
    pub asd: f64,
}

/// Resizes both masks (when `resize_to` is set) and computes all four metrics.
pub fn evaluate_case(
    pred: &BinaryMask,
    reference: &BinaryMask,
    resize_to: Option<(usize, usize)>,
) -> Result<SegMetrics> {
    let (pred, reference) = match resize_to {
        Some((w, h)) => (resize_mask(pred, w, h)?, resize_mask(reference, w, h)?),
        None => (pred.clone(), reference.clone()),
    };
    let o = Overlap::of(&pred, &reference)?;
    Ok(SegMetrics {
        dice: o.dice(),
        precision: o.precision(),
        recall: o.recall(),
        asd: asd(&pred, &reference)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MetricStats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return Err(Error::EmptyList);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub cases: Vec<SegMetrics>,
    pub dice: MetricStats,
    pub precision: MetricStats,
    pub recall: MetricStats,
    pub asd: MetricStats,
}

pub fn summarize(cases: &[SegMetrics]) -> Result<MetricsSummary> {
    Ok(MetricsSummary {
        cases: cases.to_vec(),
        dice: MetricStats::of(cases.iter().map(|c| c.dice))?,
        precision: MetricStats::of(cases.iter().map(|c| c.precision))?,
        recall: MetricStats::of(cases.iter().map(|c| c.recall))?,
        asd: MetricStats::of(cases.iter().map(|c| c.asd))?,
    })
}

/// Writes a `case,DICE,PRC,RCL,ASD` table. Overlap metrics are percentages, as in
/// the usual reporting; the final row holds `mean ± std`.
pub fn write_table_csv<W: Write>(
    summary: &MetricsSummary,
    case_ids: &[String],
    out: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::CorruptData(format!("csv: {e}"));
    wtr.write_record(["case", "DICE", "PRC", "RCL", "ASD"])
        .map_err(csv_err)?;
    for (i, m) in summary.cases.iter().enumerate() {
        let id = case_ids.get(i).cloned().unwrap_or_else(|| i.to_string());
        wtr.write_record([
            id,
            format!("{:.2}", 100.0 * m.dice),
            format!("{:.2}", 100.0 * m.precision),
            format!("{:.2}", 100.0 * m.recall),
            format!("{:.2}", m.asd),
        ])
        .map_err(csv_err)?;
    }
    let pct = |s: &MetricStats| format!("{:.2} ± {:.2}", 100.0 * s.mean, 100.0 * s.std);
    wtr.write_record([
        "mean ± std".to_string(),
        pct(&summary.dice),
        pct(&summary.precision),
        pct(&summary.recall),
        format!("{:.2} ± {:.2}", summary.asd.mean, summary.asd.std),
    ])
    .map_err(csv_err)?;
    wtr.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: usize, h: usize, on: &[(usize, usize)]) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| on.contains(&(x, y))).unwrap()
    }

    #[test]
    fn resize_identity_and_checkerboard() {
        let cb = BinaryMask::from_fn(2, 2, |x, y| (x + y) % 2 == 0).unwrap();
        assert_eq!(resize_mask(&cb, 2, 2).unwrap(), cb);
        let up = resize_mask(&cb, 4, 4).unwrap();
        assert!(up.get(0, 0) && up.get(1, 1) && !up.get(2, 0) && up.get(3, 3));
        assert_eq!(resize_mask(&up, 2, 2).unwrap(), cb);
        let ones = BinaryMask::from_fn(7, 3, |_, _| true).unwrap();
        assert_eq!(resize_mask(&ones, 13, 11).unwrap().count(), 143);
    }

    #[test]
    fn dice_cases() {
        let a = mask(4, 4, &[(0, 0), (1, 1)]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let b = mask(4, 4, &[(3, 3)]);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        // |P| = |R| = 8, overlap 4
        let p = BinaryMask::from_fn(4, 4, |_, y| y < 2).unwrap();
        let r = BinaryMask::from_fn(4, 4, |x, _| x < 2).unwrap();
        assert_eq!(dice(&p, &r).unwrap(), 0.5);
        let e = BinaryMask::empty(4, 4).unwrap();
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert!(matches!(
            dice(&e, &BinaryMask::empty(3, 4).unwrap()),
            Err(Error::DimensionMismatch(..))
        ));
    }

    #[test]
    fn precision_recall_cases() {
        let a = mask(4, 4, &[(0, 0), (1, 1)]);
        assert_eq!(precision_recall(&a, &a).unwrap(), (1.0, 1.0));
        let big = mask(4, 4, &[(0, 0), (1, 1), (2, 2)]);
        let (p, r) = precision_recall(&big, &a).unwrap();
        assert!(p < 1.0 && r == 1.0);
        // tp 3, fp 1, fn 2
        let pred = mask(4, 4, &[(0, 0), (1, 0), (2, 0), (3, 0)]);
        let reference = mask(4, 4, &[(0, 0), (1, 0), (2, 0), (0, 1), (1, 1)]);
        assert_eq!(precision_recall(&pred, &reference).unwrap(), (0.75, 0.6));
    }

    #[test]
    fn asd_cases() {
        let a = BinaryMask::from_fn(10, 10, |x, y| (2..7).contains(&x) && (3..8).contains(&y)).unwrap();
        assert_eq!(asd(&a, &a).unwrap(), 0.0);
        let p = mask(12, 3, &[(1, 1)]);
        let r = mask(12, 3, &[(6, 1)]);
        assert_eq!(asd(&p, &r).unwrap(), 5.0);
        assert!(matches!(
            asd(&p, &BinaryMask::empty(12, 3).unwrap()),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn boundary_includes_canvas_edge() {
        let full = BinaryMask::from_fn(3, 3, |_, _| true).unwrap();
        let b = boundary(&full);
        assert_eq!(b.len(), 8);
        assert!(!b.contains(&(1, 1)));
    }

    #[test]
    fn bce_cases() {
        let r = mask(3, 2, &[(0, 0), (2, 1)]);
        let half = ProbMap::filled(3, 2, 0.5).unwrap();
        assert!((bce_loss(&half, &r).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);

        let exact = ProbMap::from_mask(&r);
        let v = bce_loss(&exact, &r).unwrap();
        assert!((v - -(1.0f64 - 1e-7).ln()).abs() < 1e-15);

        let one = mask(1, 1, &[(0, 0)]);
        let q = ProbMap::new(1, 1, vec![0.25]).unwrap();
        assert!((bce_loss(&q, &one).unwrap() - 1.386_294_361_119_890_6).abs() < 1e-12);
    }

    #[test]
    fn dice_loss_cases() {
        let y = mask(2, 1, &[(0, 0)]);
        assert_eq!(dice_loss(&ProbMap::from_mask(&y), &y).unwrap(), -1.0);
        let other = ProbMap::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(dice_loss(&other, &y).unwrap(), 0.0);
        let half = ProbMap::filled(2, 1, 0.5).unwrap();
        assert_eq!(dice_loss(&half, &y).unwrap(), -0.5);
        let zero = ProbMap::filled(2, 1, 0.0).unwrap();
        assert!(matches!(
            dice_loss(&zero, &BinaryMask::empty(2, 1).unwrap()),
            Err(Error::BothEmpty)
        ));
        let combined = combined_loss(&half, &y).unwrap();
        assert!((combined - (std::f64::consts::LN_2 - 0.5)).abs() < 1e-12);
        assert!((combined - 0.1931).abs() < 1e-4);
    }

    #[test]
    fn prob_map_validation() {
        assert!(ProbMap::new(1, 1, vec![1.5]).is_err());
        assert!(ProbMap::new(2, 1, vec![0.5]).is_err());
    }

    #[test]
    fn summarize_cases() {
        let m = |d| SegMetrics {
            dice: d,
            precision: 1.0,
            recall: 1.0,
            asd: 0.0,
        };
        let one = summarize(&[m(0.7)]).unwrap();
        assert_eq!(one.dice.std, 0.0);
        let two = summarize(&[m(0.9), m(1.0)]).unwrap();
        assert!((two.dice.mean - 0.95).abs() < 1e-12);
        assert!((two.dice.std - 0.05).abs() < 1e-12);
        assert!(matches!(summarize(&[]), Err(Error::EmptyList)));
    }

    #[test]
    fn evaluate_identical_and_native() {
        let a = BinaryMask::from_fn(40, 30, |x, y| (5..20).contains(&x) && (4..25).contains(&y)).unwrap();
        let m = evaluate_case(&a, &a, Some(DEFAULT_EVAL_SIZE)).unwrap();
        assert_eq!((m.dice, m.asd), (1.0, 0.0));
        let native = evaluate_case(&a, &a, None).unwrap();
        assert_eq!(native.dice, 1.0);
    }

    #[test]
    fn csv_table() {
        let m = SegMetrics {
            dice: 0.9647,
            precision: 0.95,
            recall: 0.98,
            asd: 1.5,
        };
        let s = summarize(&[m]).unwrap();
        let mut buf = Vec::new();
        write_table_csv(&s, &["c1".into()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("case,DICE,PRC,RCL,ASD\nc1,96.47,95.00,98.00,1.50\n"));
        assert!(text.contains("96.47 ± 0.00"));
    }
}
