//! Cropping to a detector box, the confidence gate, and the mask fallback.

use cxr_regions::template::{
    bbox_from_mask_fallback, crop_to_detection, CropParams, DetectionRecord,
};
use cxr_regions::synthgen::{make_phantom, PhantomSpec};
use cxr_regions::{BBox, ViewKind};

fn main() -> cxr_regions::Result<()> {
    let p = make_phantom(&PhantomSpec::ap_default(200))?;
    let params = CropParams::default();

    let json = r#"{"view": "AP", "bbox": [30, 25, 170, 180], "confidence": 0.93}"#;
    let det = DetectionRecord::from_json(json)?;
    let (crop, offset) = crop_to_detection(&p.image, &det, ViewKind::Ap, &params)?;
    println!("detector crop {}x{} at {offset:?}", crop.width(), crop.height());

    let weak = DetectionRecord { confidence: 0.4, ..det };
    match crop_to_detection(&p.image, &weak, ViewKind::Ap, &params) {
        Err(e) => println!("weak detection rejected: {e}"),
        Ok(_) => unreachable!(),
    }

    let fallback = bbox_from_mask_fallback(&p.truth.mask, ViewKind::Ap, 0.1)?;
    println!("mask fallback box {:?}", fallback.bbox);

    let outside = DetectionRecord { bbox: BBox::new(150, 150, 260, 199), ..det };
    if let Err(e) = crop_to_detection(&p.image, &outside, ViewKind::Ap, &params) {
        println!("{} error: {e}", e.kind());
    }
    Ok(())
}
