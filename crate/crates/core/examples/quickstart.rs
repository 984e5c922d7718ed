//! Generate a clustered two-modality dataset, train on 60% paired rows, and
//! score cross-modal MAP@50 against the label-permutation baseline.

use pccmh::datamodel::{generate_synthetic, split_dataset, SyntheticSpec};
use pccmh::retrieval::{evaluate_split, permutation_baseline_split, EvalOptions};
use pccmh::{train, Direction, TrainConfig};

fn main() -> pccmh::Result<()> {
    let ds = generate_synthetic(&SyntheticSpec::default())?;
    let (train_ds, test) = split_dataset(&ds, 0.8, 7)?;
    println!(
        "train rows {} (paired {}), test rows {}",
        train_ds.x.rows(),
        train_ds.n_corr(),
        test.x.rows()
    );

    let cfg = TrainConfig {
        m_x: 50,
        m_y: 50,
        c: 16,
        lambda: 0.6,
        ..TrainConfig::default()
    };
    let model = train(&train_ds, &cfg)?;
    println!("sigma_x {:.4} sigma_y {:.4}", model.sigma_x, model.sigma_y);

    let opts = EvalOptions {
        corr_ratio: train_ds.corr_ratio(),
        ..EvalOptions::default()
    };
    for direction in Direction::BOTH {
        let report = evaluate_split(&model, &train_ds, &test, direction, &opts)?;
        let base = permutation_baseline_split(&model, &train_ds, &test, direction, &opts, 10)?;
        println!("{direction}: MAP@{} {:.4} (permutation baseline {:.4})", report.r, report.map, base);
    }
    Ok(())
}
