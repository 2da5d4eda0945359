//! Spine-side detection on lateral phantoms and the resulting flip.

use cxr_regions::orientation::{correct_orientation, detect_spine_side, Side};
use cxr_regions::synthgen::{make_phantom, PhantomSpec};

fn main() -> cxr_regions::Result<()> {
    for side in [Side::Left, Side::Right] {
        let p = make_phantom(&PhantomSpec::lat_default(160, side))?;
        let s = detect_spine_side(&p.image, &p.truth.mask)?;
        let (_, _, outcome) = correct_orientation(&p.image, &p.truth.mask, None)?;
        println!(
            "spine drawn on the {side:?}: detected {:?} (score {:.2}), flipped: {}",
            s.side, s.score, outcome.flipped
        );
    }

    // an override skips the heuristic entirely
    let p = make_phantom(&PhantomSpec::lat_default(160, Side::Right))?;
    let (_, _, forced) = correct_orientation(&p.image, &p.truth.mask, Some(Side::Left))?;
    println!("override Left: flipped {}, source {:?}", forced.flipped, forced.source);
    Ok(())
}
