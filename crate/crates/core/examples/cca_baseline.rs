//! Train the CCA baseline on the paired rows only and compare it to PCCMH,
//! which also uses the unpaired rows through its anchor graphs.

use pccmh::datamodel::{generate_synthetic, split_dataset, SyntheticSpec};
use pccmh::retrieval::{evaluate_split, EvalOptions};
use pccmh::{train, train_cca, Direction, TrainConfig};

fn main() -> pccmh::Result<()> {
    let ds = generate_synthetic(&SyntheticSpec::default())?;
    let (train_ds, test) = split_dataset(&ds, 0.8, 5)?;
    let paired: Vec<usize> = (0..train_ds.n_corr()).collect();

    let cca = train_cca(&train_ds.x.select_rows(&paired)?, &train_ds.y.select_rows(&paired)?, 15, 1e-4)?;
    let corr: Vec<String> = cca.correlations.iter().take(5).map(|r| format!("{r:.3}")).collect();
    println!("leading canonical correlations: {}", corr.join(" "));

    let pccmh = train(
        &train_ds,
        &TrainConfig {
            m_x: 50,
            m_y: 50,
            c: 16,
            ..TrainConfig::default()
        },
    )?;

    let opts = EvalOptions {
        corr_ratio: train_ds.corr_ratio(),
        ..EvalOptions::default()
    };
    for direction in Direction::BOTH {
        let a = evaluate_split(&cca, &train_ds, &test, direction, &opts)?;
        let b = evaluate_split(&pccmh, &train_ds, &test, direction, &opts)?;
        println!("{direction}: CCA {:.4} (c={})  PCCMH {:.4} (c={})", a.map, a.code_length, b.map, b.code_length);
    }
    Ok(())
}
