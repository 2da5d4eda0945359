//! End-to-end batch run over a generated corpus, including one broken case.
//!
//! ```bash
//! cargo run --release --example batch_pipeline -- [work_dir]
//! ```

use std::path::PathBuf;

use cxr_regions::pipeline::{generate_corpus, load_manifests, run_batch, CaseStatus, PipelineConfig};

fn main() -> cxr_regions::Result<()> {
    let work = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-out/batch".into()));
    let manifest = generate_corpus(8, 7, &work.join("corpus"))?;
    let (mut cases, base) = load_manifests(&manifest)?;
    cases[3].lat_mask = None;

    let config = PipelineConfig { jobs: 4, ..PipelineConfig::default() };
    let results = run_batch(&cases, &base, &config, &work.join("out"))?;
    for r in &results {
        match &r.status {
            CaseStatus::Ok => println!("{}: ok, {} files", r.case_id, r.outputs.len()),
            CaseStatus::Warning(w) => println!("{}: ok with warnings {w:?}", r.case_id),
            CaseStatus::Failed { stage, error, .. } => println!("{}: failed at {stage} ({error})", r.case_id),
        }
    }
    println!("results in {}", work.join("out/results.json").display());
    Ok(())
}
