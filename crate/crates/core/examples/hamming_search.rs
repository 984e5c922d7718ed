//! Hash image-side rows, then search a text-side code database by Hamming
//! distance. Prints the top hits of a few queries and their labels.

use pccmh::datamodel::{generate_synthetic, split_dataset, SyntheticSpec};
use pccmh::retrieval::rank_by_hamming;
use pccmh::{encode, hamming_distance, train, Modality, TrainConfig};

fn main() -> pccmh::Result<()> {
    let ds = generate_synthetic(&SyntheticSpec::default())?;
    let (train_ds, test) = split_dataset(&ds, 0.8, 3)?;
    let model = train(
        &train_ds,
        &TrainConfig {
            m_x: 50,
            m_y: 50,
            c: 32,
            ..TrainConfig::default()
        },
    )?;

    let db = encode(&model, &train_ds.y, Modality::Y)?;
    let queries = encode(&model, &test.x, Modality::X)?;
    println!("{} db codes of {} bits ({} bytes total)", db.len(), db.c(), db.as_bytes().len());

    let db_labels = train_ds.labels_y.as_ref().expect("labels");
    let q_labels = test.labels_x.as_ref().expect("labels");
    for q in 0..3 {
        let hits = rank_by_hamming(q, queries.code(q), &db, 8)?;
        let shown: Vec<String> = hits
            .ranked
            .iter()
            .map(|&(i, d)| format!("{i}(d={d},l={})", db_labels.get(i)[0]))
            .collect();
        println!("query {q} label {}: {}", q_labels.get(q)[0], shown.join(" "));
    }

    let own = hamming_distance(queries.code(0), queries.code(0))?;
    let far = (0..db.len())
        .map(|i| hamming_distance(queries.code(0), db.code(i)))
        .collect::<pccmh::Result<Vec<_>>>()?;
    println!("self distance {own}, farthest db item {}", far.iter().max().unwrap());
    Ok(())
}
