//! CLAHE on a low-contrast synthetic radiograph, then z-normalization.
//!
//! ```bash
//! cargo run --example clahe_enhance -- [out_dir]
//! ```

use cxr_regions::enhance::{clahe, znormalize, ClaheParams, DEFAULT_EPSILON};
use cxr_regions::io::save_image;
use cxr_regions::synthgen::{make_phantom, PhantomSpec};

fn spread(px: &[u16]) -> (u16, u16) {
    (*px.iter().min().unwrap(), *px.iter().max().unwrap())
}

fn main() -> cxr_regions::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/example-out".into());
    std::fs::create_dir_all(&out).expect("out dir");

    // squeeze the phantom into a narrow band of gray levels
    let mut spec = PhantomSpec::ap_default(256);
    spec.background_level = 120;
    spec.spine_level = 150;
    spec.mediastinum_level = Some(140);
    for lung in &mut spec.lungs {
        lung.intensity = 100;
    }
    let img = make_phantom(&spec)?.image;

    for (clip, tiles) in [(1.0, 4), (2.0, 8), (4.0, 8)] {
        let params = ClaheParams { clip_limit: clip, tiles_x: tiles, tiles_y: tiles };
        let enhanced = clahe(&img, &params)?;
        let (lo, hi) = spread(enhanced.pixels());
        println!("clip {clip:<3} tiles {tiles}x{tiles}: range {lo}..={hi}");
        save_image(&enhanced, format!("{out}/clahe_clip{clip}_t{tiles}.png"))?;
    }
    let (lo, hi) = spread(img.pixels());
    println!("input range {lo}..={hi}");

    let z = znormalize(&img, DEFAULT_EPSILON);
    let mean = z.values().iter().sum::<f64>() / z.values().len() as f64;
    println!("z-normalized mean {mean:.2e}");
    Ok(())
}
