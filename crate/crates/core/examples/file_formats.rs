//! Round-trip every on-disk format: CSV and binary (f32) matrices, labels,
//! manifests, models and codes.

use pccmh::cca::{load_cca, save_cca};
use pccmh::datamodel::{
    generate_synthetic, load_feature_matrix, load_labels, read_manifest, save_feature_matrix,
    save_labels, write_manifest, MatrixFormat, SyntheticSpec,
};
use pccmh::encoder::{load_codes, save_codes};
use pccmh::trainer::{load_model, save_model};
use pccmh::{encode, train, train_cca, Modality, TrainConfig};
use std::collections::BTreeMap;

fn main() -> pccmh::Result<()> {
    let dir = std::env::temp_dir().join(format!("pccmh-formats-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| pccmh::Error::io(&dir, e))?;
    let ds = generate_synthetic(&SyntheticSpec {
        points_per_cluster: 40,
        ..SyntheticSpec::default()
    })?;

    for (name, format) in [("x.csv", MatrixFormat::Csv), ("x.bin", MatrixFormat::Binary)] {
        let path = dir.join(name);
        save_feature_matrix(&ds.x, &path, format)?;
        let back = load_feature_matrix(&path, MatrixFormat::from_path(&path))?;
        let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
        let err = back
            .data()
            .iter()
            .zip(ds.x.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!("{name}: {size} bytes, max abs round-trip error {err:.1e}");
    }

    let labels = ds.labels_x.clone().expect("labels");
    save_labels(&labels, &dir.join("labels.txt"))?;
    println!("labels round trip {}", load_labels(&dir.join("labels.txt"))? == labels);

    let mut manifest = BTreeMap::new();
    manifest.insert("x".to_string(), "x.bin".to_string());
    manifest.insert("n_corr".to_string(), ds.n_corr().to_string());
    write_manifest(&manifest, &dir.join("manifest.txt"))?;
    println!("manifest round trip {}", read_manifest(&dir.join("manifest.txt"))? == manifest);

    let model = train(
        &ds,
        &TrainConfig {
            m_x: 30,
            m_y: 30,
            c: 12,
            ..TrainConfig::default()
        },
    )?;
    save_model(&model, &dir.join("model.bin"))?;
    let loaded = load_model(&dir.join("model.bin"))?;
    println!("model round trip {}", loaded == model);

    let codes = encode(&loaded, &ds.y, Modality::Y)?;
    save_codes(&codes, &dir.join("y.codes"))?;
    println!("codes round trip {}", load_codes(&dir.join("y.codes"))? == codes);

    let idx: Vec<usize> = (0..ds.n_corr()).collect();
    let cca = train_cca(&ds.x.select_rows(&idx)?, &ds.y.select_rows(&idx)?, 10, 1e-4)?;
    save_cca(&cca, &dir.join("cca.bin"))?;
    println!("cca round trip {}", load_cca(&dir.join("cca.bin"))? == cca);

    std::fs::remove_dir_all(&dir).map_err(|e| pccmh::Error::io(&dir, e))?;
    Ok(())
}
