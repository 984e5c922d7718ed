//! Look inside training: the block system, its spectrum, which eigenvectors
//! became bits, and how the objective moves with lambda.

use pccmh::datamodel::{generate_synthetic, SyntheticSpec};
use pccmh::trainer::{train_with_state, EigenSelection};
use pccmh::TrainConfig;

fn main() -> pccmh::Result<()> {
    let ds = generate_synthetic(&SyntheticSpec::default())?;
    let base = TrainConfig {
        m_x: 40,
        m_y: 40,
        c: 8,
        ..TrainConfig::default()
    };

    let state = train_with_state(&ds, &base)?;
    let sys = &state.system;
    println!("system {}x{}, {} pairs", sys.dim(), sys.dim(), ds.n_corr());
    let ev: Vec<String> = state.model.eigenvalues.iter().map(|v| format!("{v:.4}")).collect();
    println!("selected eigenvalues: {}", ev.join(" "));
    println!("objective tr(B'MB) = {:.4}", sys.objective(&state.model.stacked()));

    println!("\nlambda  objective  corr-term  smooth-term");
    for lambda in [0.0, 0.1, 0.6, 2.0, 10.0] {
        let st = train_with_state(&ds, &TrainConfig { lambda, ..base.clone() })?;
        let b = st.model.stacked();
        let corr = (b.transpose() * &st.system.corr_block * &b).trace();
        let smooth = (b.transpose() * &st.system.lap_block * &b).trace();
        println!("{lambda:>6}  {:>9.4}  {corr:>9.4}  {smooth:>11.4}", st.system.objective(&b));
    }

    let balanced = train_with_state(
        &ds,
        &TrainConfig {
            selection: EigenSelection::BalancedFrom2c,
            ..base
        },
    )?;
    let share: Vec<String> = (0..balanced.model.c())
        .map(|k| {
            let x = balanced.model.b_x.column(k).norm_squared();
            let y = balanced.model.b_y.column(k).norm_squared();
            format!("{:.2}", x / (x + y))
        })
        .collect();
    println!("\nbalanced selection, x share of each bit's energy: {}", share.join(" "));
    Ok(())
}
