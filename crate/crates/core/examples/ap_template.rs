//! AP verticalization and the 8-region template, with LAT alignment and overlays.
//!
//! ```bash
//! cargo run --example ap_template -- [out_dir]
//! ```

use cxr_regions::io::save_rgb;
use cxr_regions::orientation::Side;
use cxr_regions::synthgen::{make_phantom, PhantomSpec};
use cxr_regions::template::{align_views, ap_regions, lat_regions, render_overlay, verticalize_ap};

fn main() -> cxr_regions::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/example-out".into());
    std::fs::create_dir_all(&out).expect("out dir");

    let mut spec = PhantomSpec::ap_default(256);
    spec.rotation_deg = -11.0;
    let ap = make_phantom(&spec)?;
    let v = verticalize_ap(&ap.image, &ap.truth.mask)?;
    println!("tilt {:.2}°, applied rotation {:.2}°", v.tilt_deg, v.rotation_deg);

    let mut ap_rs = ap_regions(&v.mask)?;
    ap_rs.transform.rotation_deg = v.rotation_deg;
    ap_rs.transform.rotation_center = v.center;

    let lat = make_phantom(&PhantomSpec::lat_default(256, Side::Right))?;
    let mut lat_rs = lat_regions(&lat.truth.mask)?;
    let scale = align_views(&mut ap_rs, &mut lat_rs);
    println!("AP/LAT vertical scale {scale:.3}");

    for rs in [&ap_rs, &lat_rs] {
        for (name, b) in &rs.regions {
            let src = rs.transform.box_to_source(b);
            println!(
                "  {name:<7} {:?}  top-left in source ({:.1}, {:.1})",
                [b.x_min, b.y_min, b.x_max, b.y_max],
                src[0].0,
                src[0].1
            );
        }
    }
    save_rgb(&render_overlay(&v.image, &ap_rs), format!("{out}/ap_overlay.png"))?;
    save_rgb(&render_overlay(&lat.image, &lat_rs), format!("{out}/lat_overlay.png"))?;
    println!("overlays written to {out}");
    Ok(())
}
