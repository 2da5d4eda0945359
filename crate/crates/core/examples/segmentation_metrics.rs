//! Dice / precision / recall / ASD, the training losses, and the summary table.

use cxr_regions::metrics::{
    bce_loss, combined_loss, dice_loss, evaluate_case, summarize, write_table_csv, ProbMap,
};
use cxr_regions::BinaryMask;

fn square(size: usize, x0: usize, y0: usize, side: usize) -> BinaryMask {
    BinaryMask::from_fn(size, size, |x, y| {
        (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y)
    })
    .unwrap()
}

fn main() -> cxr_regions::Result<()> {
    let reference = square(64, 16, 16, 32);
    let preds = [square(64, 16, 16, 32), square(64, 18, 16, 32), square(64, 20, 22, 24)];

    let cases = preds
        .iter()
        .map(|p| evaluate_case(p, &reference, None))
        .collect::<cxr_regions::Result<Vec<_>>>()?;
    for (i, m) in cases.iter().enumerate() {
        println!(
            "case{:03}: dice {:.4} precision {:.4} recall {:.4} asd {:.3}",
            i + 1,
            m.dice,
            m.precision,
            m.recall,
            m.asd
        );
    }

    let summary = summarize(&cases)?;
    let ids: Vec<String> = (1..=cases.len()).map(|i| format!("case{i:03}")).collect();
    write_table_csv(&summary, &ids, std::io::stdout())?;

    let soft = ProbMap::filled(64, 64, 0.5)?;
    println!("bce at 0.5: {:.6}", bce_loss(&soft, &reference)?);
    let hard = ProbMap::from_mask(&preds[1]);
    println!(
        "dice loss {:.4}, combined {:.4}",
        dice_loss(&hard, &reference)?,
        combined_loss(&hard, &reference)?
    );
    Ok(())
}
