//! PNG/PGM round trips at 8 and 16 bits, and mask validation.

use cxr_regions::io::{load_image, load_mask, save_image};
use cxr_regions::{BitDepth, GrayImage};

fn main() -> cxr_regions::Result<()> {
    let dir = std::env::temp_dir().join("cxr-regions-io-example");
    std::fs::create_dir_all(&dir).expect("temp dir");

    let img16 = GrayImage::from_fn(40, 30, BitDepth::Sixteen, |x, y| (x * 1500 + y * 40) as u16)?;
    for ext in ["png", "pgm"] {
        let path = dir.join(format!("ramp16.{ext}"));
        save_image(&img16, &path)?;
        let back = load_image(&path)?;
        println!("{ext}: 16-bit round trip exact: {}", back == img16);
    }

    // a gray-level image is not a valid mask
    let gray = GrayImage::from_fn(8, 8, BitDepth::Eight, |x, _| if x < 4 { 0 } else { 128 })?;
    let path = dir.join("gray.png");
    save_image(&gray, &path)?;
    match load_mask(&path) {
        Err(e) => println!("mask rejected ({}): {e}", e.kind()),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
