//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod oracles;

use nalgebra::{DMatrix, DVector};
use oracles::{jacobi_eigen, reference_ap, reference_map};
use pccmh::anchor_graph::{approx_affinity, compute_z, estimate_sigma, reduced_laplacian, AnchorGraph};
use pccmh::anchors::kmeans_fit;
use pccmh::cca::train_cca;
use pccmh::datamodel::{generate_synthetic, split_dataset, FeatureMatrix, Labels, MultiModalDataset, SyntheticSpec};
use pccmh::encoder::{encode, HashCodeSet, Modality};
use pccmh::linalg::symmetric_eigen;
use pccmh::retrieval::{
    average_precision, correspondence_sweep, evaluate_split, map_from_codes, parse_ratios,
    permutation_baseline_split, EvalOptions, Relevance, SweepConfig,
};
use pccmh::trainer::{compute_thresholds, train, train_with_state, write_model, HashModel, TrainConfig};
use pccmh::Direction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn criterion5_config() -> TrainConfig {
    TrainConfig {
        m_x: 50,
        m_y: 50,
        c: 16,
        lambda: 0.6,
        ..TrainConfig::default()
    }
}

/// Criterion-5 data split 80/20; `corr_ratio` overrides the paired fraction.
fn criterion5_split(corr_ratio: f64) -> (MultiModalDataset, MultiModalDataset) {
    let ds = generate_synthetic(&SyntheticSpec {
        n_clusters: 5,
        points_per_cluster: 100,
        d_x: 20,
        d_y: 15,
        corr_ratio,
        ..SyntheticSpec::default()
    })
    .unwrap();
    split_dataset(&ds, 0.8, 0).unwrap()
}

fn eigensolver_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_res, mut worst_orth, mut worst_val, mut worst_vec) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for t in 0..200 {
        let n = 2 + t % 15;
        let g = gaussian(&mut rng, n + 2, n);
        let a = g.transpose() * g;
        let (vals, vecs) = symmetric_eigen(&a).map_err(|e| e.to_string())?;
        let (ovals, ovecs) = jacobi_eigen(&rows_of(&a));
        let norm = ovals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for k in 0..n {
            let v = vecs.column(k);
            worst_res = worst_res.max((&a * v - v * vals[k]).norm() / norm);
            worst_val = worst_val.max((vals[k] - ovals[k]).abs() / norm);
            let gap = [k.checked_sub(1), (k + 1 < n).then_some(k + 1)]
                .into_iter()
                .flatten()
                .map(|j| (ovals[j] - ovals[k]).abs())
                .fold(f64::INFINITY, f64::min);
            if gap > 1e-3 * norm {
                let o = DVector::from_fn(n, |i, _| ovecs[i][k]);
                let dot = v.dot(&o).abs();
                worst_vec = worst_vec.max(1.0 - dot);
            }
        }
        worst_orth = worst_orth.max((vecs.transpose() * &vecs - DMatrix::identity(n, n)).amax());
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "200 PSD matrices: residual {worst_res:.1e}·‖A‖, orthonormality {worst_orth:.1e}, \
         eigenvalue gap to Jacobi {worst_val:.1e}·‖A‖, 1−|vᵀv_J| {worst_vec:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    );
    ensure(
        worst_res <= 1e-8
            && worst_orth <= 1e-8
            && worst_val <= 1e-8
            && worst_vec <= 1e-8
            && elapsed < Duration::from_secs(5),
        detail,
    )
}

fn laplacian_consistency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut eq, mut rows, mut psd, mut null) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for t in 0..50 {
        let n = 20 + rng.random_range(0..181);
        let m = 2 + t % 19;
        let d = 1 + rng.random_range(0..6);
        let data = FeatureMatrix::from_dmatrix(&gaussian(&mut rng, n, d)).unwrap();
        let anchors = kmeans_fit(&data, m, t as u64, 50).map_err(|e| e.to_string())?;
        let sigma = estimate_sigma(&data, &anchors).unwrap();
        let g = compute_z(&data, &anchors, sigma, None).map_err(|e| e.to_string())?;
        let w = approx_affinity(&g).unwrap();
        let degrees = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| w.row(i).sum()));
        let oracle = g.z.transpose() * (degrees - &w) * &g.z;
        let l = reduced_laplacian(&g).matrix;
        eq = eq.max((&l - oracle).amax());
        rows = rows.max(w.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max));
        let (ovals, _) = jacobi_eigen(&rows_of(&l));
        psd = psd.max(-ovals[0]);
        null = null.max((&l * DVector::from_element(m, 1.0)).amax());
    }
    let hand = AnchorGraph::from_z(nalgebra::dmatrix![1.0, 0.0; 0.5, 0.5], 1.0, None).unwrap();
    let hand_l = reduced_laplacian(&hand).matrix;
    let t = 1.0 / 12.0;
    let hand_err = (hand_l - nalgebra::dmatrix![t, -t; -t, t]).amax();
    let detail = format!(
        "50 graphs: ‖L̃ − Zᵀ(D−W̃)Z‖ {eq:.1e}, row sums {rows:.1e}, min eigenvalue {:.1e}, ‖L̃1‖ {null:.1e}; hand case {hand_err:.1e}",
        -psd
    );
    ensure(eq <= 1e-9 && rows <= 1e-9 && psd <= 1e-8 && null <= 1e-8 && hand_err <= 1e-12, detail)
}

fn objective_identity_and_minimality() -> Check {
    let (train_ds, _) = criterion5_split(0.6);
    let state = train_with_state(&train_ds, &criterion5_config()).map_err(|e| e.to_string())?;
    let b = state.model.stacked();
    let objective = state.system.objective(&b);
    let eig_sum: f64 = state.model.eigenvalues.iter().sum();

    let n_corr = train_ds.n_corr();
    let zx = state.graph_x.z.rows(0, n_corr);
    let zy = state.graph_y.z.rows(0, n_corr);
    let lx = reduced_laplacian(&state.graph_x).matrix;
    let ly = reduced_laplacian(&state.graph_y).matrix;
    let (bx, by) = (&state.model.b_x, &state.model.b_y);
    let direct = (zx * bx - zy * by).norm_squared()
        + 0.6 * ((bx.transpose() * lx * bx).trace() + (by.transpose() * ly * by).trace());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut best_competitor = f64::INFINITY;
    for _ in 0..50 {
        let q = gaussian(&mut rng, b.nrows(), b.ncols()).qr().q();
        best_competitor = best_competitor.min(state.system.objective(&q));
    }
    let detail = format!(
        "objective {objective:.10} vs eigen sum {eig_sum:.10} (Δ {:.1e}), direct form Δ {:.1e}, best of 50 competitors {best_competitor:.4}",
        (objective - eig_sum).abs(),
        (objective - direct).abs()
    );
    ensure(
        (objective - eig_sum).abs() <= 1e-8
            && (objective - direct).abs() <= 1e-7
            && best_competitor >= objective - 1e-8,
        detail,
    )
}

fn ap_map_oracle() -> Check {
    let a = average_precision(&[true, false, true]);
    let b = average_precision(&[true, true, true]);
    let c = average_precision(&[false, false, false]);
    // 20-item database of 4-bit codes, five classes, four queries
    let db_signs: Vec<Vec<i8>> = vec![
        vec![1, 1, 1, 1],
        vec![1, 1, 1, -1],
        vec![-1, -1, -1, -1],
        vec![1, 1, -1, -1],
        vec![-1, 1, 1, 1],
        vec![1, -1, 1, -1],
        vec![-1, -1, 1, 1],
        vec![1, 1, 1, 1],
        vec![-1, 1, -1, 1],
        vec![1, -1, -1, 1],
        vec![-1, -1, -1, 1],
        vec![1, 1, -1, 1],
        vec![-1, 1, 1, -1],
        vec![1, -1, 1, 1],
        vec![-1, -1, 1, -1],
        vec![1, 1, 1, -1],
        vec![-1, 1, -1, -1],
        vec![1, -1, -1, -1],
        vec![-1, -1, -1, -1],
        vec![1, 1, -1, 1],
    ];
    let db_labels: Vec<i64> = vec![0, 0, 1, 2, 3, 4, 1, 0, 2, 3, 1, 2, 3, 4, 4, 0, 2, 3, 1, 4];
    let q_signs: Vec<Vec<i8>> = vec![vec![1, 1, 1, 1], vec![-1, -1, -1, -1], vec![1, -1, 1, -1], vec![-1, 1, -1, 1]];
    let q_labels: Vec<i64> = vec![0, 1, 4, 2];
    let db = HashCodeSet::from_signs(&db_signs).unwrap();
    let q = HashCodeSet::from_signs(&q_signs).unwrap();
    let mut worst = 0.0f64;
    for r in [1, 5, 10, 20] {
        let (map, _) = map_from_codes(
            &q,
            &Labels::single(q_labels.clone()),
            &db,
            &Labels::single(db_labels.clone()),
            r,
            Relevance::LabelEquality,
        )
        .map_err(|e| e.to_string())?;
        worst = worst.max((map - reference_map(&q_signs, &q_labels, &db_signs, &db_labels, r)).abs());
    }
    let ref_ok = (reference_ap(&[true, false, true]) - 5.0 / 6.0).abs() <= 1e-12;
    let detail = format!("[1,0,1] → {a:.15}, [1,1,1] → {b}, [0,0,0] → {c}, 20-item MAP vs reference Δ {worst:.1e}");
    ensure(
        (a - 5.0 / 6.0).abs() <= 1e-12 && b == 1.0 && c == 0.0 && worst <= 1e-12 && ref_ok,
        detail,
    )
}

fn synthetic_end_to_end() -> Check {
    let start = Instant::now();
    let (train_ds, test) = criterion5_split(0.6);
    let model = train(&train_ds, &criterion5_config()).map_err(|e| e.to_string())?;
    let opts = EvalOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for direction in Direction::BOTH {
        let map = evaluate_split(&model, &train_ds, &test, direction, &opts).map_err(|e| e.to_string())?.map;
        let base = permutation_baseline_split(&model, &train_ds, &test, direction, &opts, 20).map_err(|e| e.to_string())?;
        ok &= map >= 0.60 && map >= 3.0 * base;
        parts.push(format!("{direction} MAP@50 {map:.4} (baseline {base:.4}, {:.1}×)", map / base));
    }
    let elapsed = start.elapsed();
    ensure(
        ok && elapsed <= Duration::from_secs(10),
        format!("{}; {:.2}s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

fn sweep_trend() -> Check {
    let start = Instant::now();
    let ds = generate_synthetic(&SyntheticSpec {
        corr_ratio: 1.0,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let ratios = parse_ratios("0.2:0.8:0.1").unwrap();
    let cfg = SweepConfig {
        train: criterion5_config(),
        ..SweepConfig::default()
    };
    let result = correspondence_sweep(&ds, &cfg, &ratios, 5).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for direction in Direction::BOTH {
        let means: Vec<f64> = ratios
            .iter()
            .map(|&r| result.mean(r, direction).unwrap_or(f64::NAN))
            .collect();
        let gain = means[means.len() - 1] - means[0];
        let worst_drop = means.windows(2).map(|w| w[0] - w[1]).fold(f64::MIN, f64::max);
        ok &= gain >= 0.03 && worst_drop <= 0.02;
        parts.push(format!(
            "{direction} [{}] gain {gain:+.3} worst step drop {worst_drop:.3}",
            means.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join(" ")
        ));
    }
    let elapsed = start.elapsed();
    ensure(
        ok && elapsed <= Duration::from_secs(180),
        format!("{}; {:.1}s", parts.join("; "), elapsed.as_secs_f64()),
    )
}

fn scaling() -> Check {
    let make = |per_cluster: usize| {
        generate_synthetic(&SyntheticSpec {
            points_per_cluster: per_cluster,
            corr_ratio: 1.0,
            seed: 9,
            ..SyntheticSpec::default()
        })
        .unwrap()
    };
    let small = make(400);
    let model = train(
        &small,
        &TrainConfig {
            m_x: 200,
            m_y: 200,
            ..TrainConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let time = |ds: &MultiModalDataset| {
        (0..3)
            .map(|_| {
                let start = Instant::now();
                let g = compute_z(&ds.x, &model.anchors_x, model.sigma_x, None).unwrap();
                let codes = encode(&model, &ds.x, Modality::X).unwrap();
                std::hint::black_box((g.z.nrows(), codes.len()));
                start.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let (t10, t20) = (time(&make(2000)), time(&make(4000)));
    let ratio = t20 / t10;
    ensure(
        ratio <= 2.5,
        format!("Z + encode, m=200: n=10000 {t10:.3}s, n=20000 {t20:.3}s, ratio {ratio:.2}"),
    )
}

fn determinism() -> Check {
    let run = || {
        let (train_ds, test) = criterion5_split(0.6);
        let cfg = TrainConfig {
            seed: 42,
            ..criterion5_config()
        };
        let model = train(&train_ds, &cfg).unwrap();
        let mut bytes = Vec::new();
        write_model(&model, &mut bytes).unwrap();
        let maps: Vec<u64> = Direction::BOTH
            .iter()
            .map(|&d| evaluate_split(&model, &train_ds, &test, d, &EvalOptions::default()).unwrap().map.to_bits())
            .collect();
        (bytes, maps)
    };
    let (a, b) = (run(), run());
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let paths = [dir.path().join("a.mdl"), dir.path().join("b.mdl")];
    for (p, bytes) in paths.iter().zip([&a.0, &b.0]) {
        std::fs::write(p, bytes).map_err(|e| e.to_string())?;
    }
    let files_equal = std::fs::read(&paths[0]).unwrap() == std::fs::read(&paths[1]).unwrap();
    ensure(
        a.0 == b.0 && files_equal && a.1 == b.1,
        format!("model files {} bytes, identical: {}; MAP bits identical: {}", a.0.len(), a.0 == b.0, a.1 == b.1),
    )
}

fn scale_invariance() -> Check {
    let (train_ds, test) = criterion5_split(0.6);
    let state = train_with_state(&train_ds, &criterion5_config()).map_err(|e| e.to_string())?;
    let model = &state.model;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let scales: Vec<f64> = (0..model.c()).map(|_| rng.random_range(0.01..100.0)).collect();
    let diag = DMatrix::from_diagonal(&DVector::from_vec(scales.clone()));
    let scaled = HashModel {
        b_x: &model.b_x * &diag,
        b_y: &model.b_y * &diag,
        thresholds_x: compute_thresholds(&state.graph_x, &(&model.b_x * &diag)).unwrap(),
        thresholds_y: compute_thresholds(&state.graph_y, &(&model.b_y * &diag)).unwrap(),
        ..model.clone()
    };
    let mut same = true;
    let mut total = 0;
    for ds in [&train_ds, &test] {
        for (data, modality) in [(&ds.x, Modality::X), (&ds.y, Modality::Y)] {
            let a = encode(model, data, modality).unwrap();
            let b = encode(&scaled, data, modality).unwrap();
            same &= a == b;
            total += a.len();
        }
    }
    ensure(
        same,
        format!("{total} codes under column scales in [0.01, 100): identical: {same}"),
    )
}

fn cca_baseline() -> Check {
    let (train_ds, test) = criterion5_split(0.6);
    let opts = EvalOptions::default();
    let paired: Vec<usize> = (0..train_ds.n_corr()).collect();
    let cca = train_cca(
        &train_ds.x.select_rows(&paired).unwrap(),
        &train_ds.y.select_rows(&paired).unwrap(),
        15,
        pccmh::cca::DEFAULT_REG,
    )
    .map_err(|e| e.to_string())?;
    let (full_train, full_test) = criterion5_split(1.0);
    let all: Vec<usize> = (0..full_train.n_corr()).collect();
    let cca_full = train_cca(
        &full_train.x.select_rows(&all).unwrap(),
        &full_train.y.select_rows(&all).unwrap(),
        15,
        pccmh::cca::DEFAULT_REG,
    )
    .map_err(|e| e.to_string())?;
    let model = train(&train_ds, &criterion5_config()).map_err(|e| e.to_string())?;

    let mut ok = true;
    let mut parts = Vec::new();
    for direction in Direction::BOTH {
        let map = evaluate_split(&cca, &train_ds, &test, direction, &opts).map_err(|e| e.to_string())?.map;
        let base = permutation_baseline_split(&cca, &train_ds, &test, direction, &opts, 20).map_err(|e| e.to_string())?;
        let full = evaluate_split(&cca_full, &full_train, &full_test, direction, &opts).map_err(|e| e.to_string())?.map;
        let ours = evaluate_split(&model, &train_ds, &test, direction, &opts).map_err(|e| e.to_string())?.map;
        ok &= (0.0..=1.0).contains(&map) && map >= 2.0 * base && ours >= full - 0.02;
        parts.push(format!(
            "{direction} CCA {map:.4} (baseline {base:.4}, {:.1}×), CCA full {full:.4}, PCCMH@60% {ours:.4}",
            map / base
        ));
    }
    ensure(ok, parts.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("1 eigensolver oracle", eigensolver_oracle),
        ("2 anchor-graph Laplacian consistency", laplacian_consistency),
        ("3 objective identity and minimality", objective_identity_and_minimality),
        ("4 AP/MAP oracle", ap_map_oracle),
        ("5 synthetic end-to-end MAP", synthetic_end_to_end),
        ("6 correspondence sweep trend", sweep_trend),
        ("7 linear scaling of Z and encoding", scaling),
        ("8 determinism", determinism),
        ("9 code scale invariance", scale_invariance),
        ("10 CCA baseline sanity", cca_baseline),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
