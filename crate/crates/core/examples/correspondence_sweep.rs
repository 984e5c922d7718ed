//! MAP@50 as the paired fraction of the training rows grows, for PCCMH and
//! for CCA trained on the paired rows alone.
//!
//! ```bash
//! cargo run --release --example correspondence_sweep -- [noise_std] [repeats]
//! ```

use pccmh::datamodel::{generate_synthetic, SyntheticSpec};
use pccmh::retrieval::{correspondence_sweep, parse_ratios, Method, SweepConfig};
use pccmh::{Direction, TrainConfig};

fn main() -> pccmh::Result<()> {
    let mut args = std::env::args().skip(1);
    let noise_std: f64 = args.next().map_or(Ok(0.35), |a| a.parse()).expect("noise_std");
    let repeats: usize = args.next().map_or(Ok(5), |a| a.parse()).expect("repeats");

    let ds = generate_synthetic(&SyntheticSpec {
        noise_std,
        corr_ratio: 1.0,
        ..SyntheticSpec::default()
    })?;
    let ratios = parse_ratios("0.2:0.8:0.1")?;
    let train = TrainConfig {
        m_x: 50,
        m_y: 50,
        c: 16,
        lambda: 0.6,
        ..TrainConfig::default()
    };
    for (name, method, c) in [("pccmh", Method::Pccmh, 16), ("cca", Method::Cca, 15)] {
        let cfg = SweepConfig {
            train: TrainConfig { c, ..train.clone() },
            method,
            ..SweepConfig::default()
        };
        let result = correspondence_sweep(&ds, &cfg, &ratios, repeats)?;
        println!("{name}");
        for &ratio in &ratios {
            let means: Vec<String> = Direction::BOTH
                .iter()
                .map(|&d| result.mean(ratio, d).map_or("error".into(), |m| format!("{m:.4}")))
                .collect();
            println!("  ratio {ratio:.1}  x2y {}  y2x {}", means[0], means[1]);
        }
    }
    Ok(())
}
