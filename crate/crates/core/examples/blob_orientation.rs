//! Connected components, principal axes and the AP tilt estimate.

use cxr_regions::maskops::{connected_components, estimate_ap_rotation, keep_largest, principal_axis, rotate};
use cxr_regions::synthgen::{make_phantom, PhantomSpec};
use cxr_regions::BinaryMask;

fn main() -> cxr_regions::Result<()> {
    let mut spec = PhantomSpec::ap_default(192);
    spec.rotation_deg = 9.0;
    let phantom = make_phantom(&spec)?;

    // sprinkle a few specks a segmentation model might leave behind
    let mut mask: BinaryMask = phantom.truth.mask.clone();
    for (x, y) in [(3, 3), (180, 10), (100, 185)] {
        mask.set(x, y, true);
    }

    let blobs = connected_components(&mask);
    println!("{} components", blobs.len());
    for b in &blobs {
        match principal_axis(b) {
            Ok(a) => println!(
                "  #{} area {:5} centroid ({:6.1}, {:6.1}) angle {:6.2}° ratio {:.2}",
                b.label, b.area, b.centroid.0, b.centroid.1, a.angle_deg, a.eigen_ratio
            ),
            Err(e) => println!("  #{} area {:5} skipped: {e}", b.label, b.area),
        }
    }

    let lungs = keep_largest(&mask, 2);
    let tilt = estimate_ap_rotation(&lungs)?;
    println!("true rotation {:.2}°, estimated {tilt:.2}°", spec.rotation_deg);

    let centroid = lungs.centroid()?;
    let upright = rotate(&lungs, -tilt, centroid)?;
    println!("after rotating back: {:.2}°", estimate_ap_rotation(&upright)?);
    Ok(())
}
