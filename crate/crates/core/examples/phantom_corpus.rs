//! Seeded phantom corpus: ground truth for rotation and spine side.
//!
//! ```bash
//! cargo run --example phantom_corpus -- [out_dir]
//! ```

use cxr_regions::pipeline::write_corpus;
use cxr_regions::synthgen::make_corpus;

fn main() -> cxr_regions::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/example-out/corpus".into());
    let corpus = make_corpus(6, 42)?;
    for c in &corpus {
        println!(
            "{}  AP rotation {:+6.2}°  LAT spine {:?}  AP lungs {:?}",
            c.case_id,
            c.ap.truth.rotation_deg,
            c.lat.truth.spine_side.unwrap(),
            c.ap.truth.lung_bboxes
        );
    }
    let manifest = write_corpus(&corpus, std::path::Path::new(&out))?;
    println!("manifest: {}", manifest.display());
    Ok(())
}
