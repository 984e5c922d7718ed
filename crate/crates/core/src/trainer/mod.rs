//! Training: anchors, anchor graphs, the joint block system, and its
//! smallest eigenvectors as projection matrices.

mod block;
mod eigen;
mod model_file;

pub use block::{build_block_matrices, BlockSystem};
pub use eigen::{
    extract_model, fix_sign, is_trivial, solve_eigen, EigenSelection, Projection,
    CONSTANT_SPREAD, TRIVIAL_EIGENVALUE,
};
pub use model_file::{load_model, read_model, save_model, write_model, MODEL_MAGIC};

use crate::anchor_graph::{compute_z, estimate_sigma, AnchorGraph};
use crate::anchors::{kmeans_fit, AnchorSet};
use crate::datamodel::MultiModalDataset;
use crate::error::{Error, Result, Stage, StageExt};
use crate::seed::derive_seed;
use nalgebra::DMatrix;

/// Kernel bandwidth choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    /// Mean squared distance to the nearest anchor, per modality.
    Auto,
    Fixed { x: f64, y: f64 },
}

/// Where each bit's sign boundary sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdMode {
    /// Per-bit mean projection of the training rows.
    #[default]
    TrainingMean,
    /// Plain sign at zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub m_x: usize,
    pub m_y: usize,
    pub c: usize,
    pub lambda: f64,
    pub sigma: SigmaMode,
    pub s_nearest: Option<usize>,
    pub seed: u64,
    pub kmeans_iters: usize,
    pub thresholds: ThresholdMode,
    pub selection: EigenSelection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            m_x: 200,
            m_y: 200,
            c: 16,
            lambda: 0.6,
            sigma: SigmaMode::Auto,
            s_nearest: None,
            seed: 0,
            kmeans_iters: 100,
            thresholds: ThresholdMode::TrainingMean,
            selection: EigenSelection::Smallest,
        }
    }
}

impl TrainConfig {
    /// Lower the anchor counts to the available rows if needed.
    pub fn capped_to(&self, ds: &MultiModalDataset) -> TrainConfig {
        TrainConfig {
            m_x: self.m_x.min(ds.x.rows()),
            m_y: self.m_y.min(ds.y.rows()),
            ..self.clone()
        }
    }
}

/// Training settings recorded alongside a model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta {
    pub lambda: f64,
    pub seed: u64,
    pub n_corr: usize,
    pub corr_ratio: f64,
    pub thresholds: ThresholdMode,
    pub selection: EigenSelection,
}

/// A trained pair of hash functions sharing one Hamming space.
#[derive(Debug, Clone, PartialEq)]
pub struct HashModel {
    pub anchors_x: AnchorSet,
    pub anchors_y: AnchorSet,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub s_nearest: Option<usize>,
    /// `m_x × c`.
    pub b_x: DMatrix<f64>,
    /// `m_y × c`.
    pub b_y: DMatrix<f64>,
    pub thresholds_x: Vec<f64>,
    pub thresholds_y: Vec<f64>,
    /// Eigenvalue behind each bit.
    pub eigenvalues: Vec<f64>,
    pub meta: TrainMeta,
}

impl HashModel {
    pub fn c(&self) -> usize {
        self.b_x.ncols()
    }

    pub fn m_x(&self) -> usize {
        self.anchors_x.m()
    }

    pub fn m_y(&self) -> usize {
        self.anchors_y.m()
    }

    pub fn stacked(&self) -> DMatrix<f64> {
        Projection {
            b_x: self.b_x.clone(),
            b_y: self.b_y.clone(),
            eigenvalues: Vec::new(),
        }
        .stacked()
    }
}

/// Mean of each column of `Z·b` over the graph's rows.
pub fn compute_thresholds(g: &AnchorGraph, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if g.m() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: g.m(),
            found: b.nrows(),
            row: None,
        });
    }
    let proj = &g.z * b;
    Ok(proj.column_iter().map(|c| c.mean()).collect())
}

/// Everything `train` computes on the way to a model, for inspection and tests.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub graph_x: AnchorGraph,
    pub graph_y: AnchorGraph,
    pub system: BlockSystem,
    pub model: HashModel,
}

pub fn train(ds: &MultiModalDataset, cfg: &TrainConfig) -> Result<HashModel> {
    train_with_state(ds, cfg).map(|s| s.model)
}

pub fn train_with_state(ds: &MultiModalDataset, cfg: &TrainConfig) -> Result<TrainState> {
    if ds.n_corr() == 0 {
        return Err(Error::InvalidParameter(
            "training needs at least one corresponded pair".into(),
        ));
    }
    if cfg.c == 0 {
        return Err(Error::InvalidParameter("code length must be at least 1".into()));
    }

    let anchors_x = kmeans_fit(&ds.x, cfg.m_x, derive_seed(cfg.seed, 0), cfg.kmeans_iters)
        .stage(Stage::Anchors)?;
    let anchors_y = kmeans_fit(&ds.y, cfg.m_y, derive_seed(cfg.seed, 1), cfg.kmeans_iters)
        .stage(Stage::Anchors)?;

    let (sigma_x, sigma_y) = match cfg.sigma {
        SigmaMode::Auto => (
            estimate_sigma(&ds.x, &anchors_x).stage(Stage::AnchorGraph)?,
            estimate_sigma(&ds.y, &anchors_y).stage(Stage::AnchorGraph)?,
        ),
        SigmaMode::Fixed { x, y } => (x, y),
    };
    let graph_x = compute_z(&ds.x, &anchors_x, sigma_x, cfg.s_nearest).stage(Stage::AnchorGraph)?;
    let graph_y = compute_z(&ds.y, &anchors_y, sigma_y, cfg.s_nearest).stage(Stage::AnchorGraph)?;

    let system = build_block_matrices(&graph_x, &graph_y, ds.n_corr(), cfg.lambda)
        .stage(Stage::BlockSystem)?;
    let (evals, evecs) = solve_eigen(&system, system.dim()).stage(Stage::Eigen)?;
    let proj = extract_model(&evals, &evecs, cfg.c, system.m_x, cfg.selection)
        .stage(Stage::Extract)?;

    let (thresholds_x, thresholds_y) = match cfg.thresholds {
        ThresholdMode::TrainingMean => (
            compute_thresholds(&graph_x, &proj.b_x)?,
            compute_thresholds(&graph_y, &proj.b_y)?,
        ),
        ThresholdMode::Zero => (vec![0.0; cfg.c], vec![0.0; cfg.c]),
    };

    let model = HashModel {
        anchors_x,
        anchors_y,
        sigma_x,
        sigma_y,
        s_nearest: cfg.s_nearest,
        b_x: proj.b_x,
        b_y: proj.b_y,
        thresholds_x,
        thresholds_y,
        eigenvalues: proj.eigenvalues,
        meta: TrainMeta {
            lambda: cfg.lambda,
            seed: cfg.seed,
            n_corr: ds.n_corr(),
            corr_ratio: ds.corr_ratio(),
            thresholds: cfg.thresholds,
            selection: cfg.selection,
        },
    };
    Ok(TrainState {
        graph_x,
        graph_y,
        system,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{generate_synthetic, SyntheticSpec};
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_ds() -> MultiModalDataset {
        generate_synthetic(&SyntheticSpec {
            points_per_cluster: 30,
            ..SyntheticSpec::default()
        })
        .unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            m_x: 20,
            m_y: 20,
            c: 8,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn thresholds_hand_cases() {
        let g = AnchorGraph::from_z(dmatrix![1.0, 0.0; 0.0, 1.0], 1.0, None).unwrap();
        let sym = dmatrix![1.0; -1.0];
        assert!(compute_thresholds(&g, &sym).unwrap()[0].abs() < 1e-15);
        let constant = dmatrix![0.7; 0.7];
        assert!((compute_thresholds(&g, &constant).unwrap()[0] - 0.7).abs() < 1e-15);
        assert!(compute_thresholds(&g, &dmatrix![1.0]).is_err());
    }

    #[test]
    fn thresholds_match_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut z = DMatrix::from_fn(15, 4, |_, _| rng.random_range(0.0..1.0));
        for mut r in z.row_iter_mut() {
            let s = r.sum();
            r /= s;
        }
        let g = AnchorGraph::from_z(z, 1.0, None).unwrap();
        let b = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let got = compute_thresholds(&g, &b).unwrap();
        for k in 0..3 {
            let mut total = 0.0;
            for i in 0..15 {
                let mut p = 0.0;
                for j in 0..4 {
                    p += g.z[(i, j)] * b[(j, k)];
                }
                total += p;
            }
            assert!((got[k] - total / 15.0).abs() < 1e-14);
        }
    }

    #[test]
    fn trained_model_invariants() {
        let ds = small_ds();
        let state = train_with_state(&ds, &small_cfg()).unwrap();
        let m = &state.model;
        assert_eq!((m.b_x.shape(), m.b_y.shape()), ((20, 8), (20, 8)));
        let b = m.stacked();
        let gram = b.transpose() * &b;
        assert!((gram - DMatrix::identity(8, 8)).amax() < 1e-8);
        for k in 0..8 {
            assert!(m.b_x.column(k).amax() > 0.0);
            assert!(m.b_y.column(k).amax() > 0.0);
        }
        let obj = state.system.objective(&b);
        let sum: f64 = m.eigenvalues.iter().sum();
        assert!((obj - sum).abs() < 1e-8);
    }

    #[test]
    fn lambda_zero_ignores_laplacian() {
        let ds = small_ds();
        let cfg = TrainConfig { lambda: 0.0, ..small_cfg() };
        let state = train_with_state(&ds, &cfg).unwrap();
        let zeroed = BlockSystem {
            lap_block: DMatrix::zeros(40, 40),
            lambda: 0.6,
            ..state.system.clone()
        };
        assert_eq!(zeroed.system_matrix(), state.system.system_matrix());
        let (ev, evec) = solve_eigen(&zeroed, 40).unwrap();
        let p = extract_model(&ev, &evec, 8, 20, EigenSelection::Smallest).unwrap();
        assert_eq!(p.b_x, state.model.b_x);
        assert_eq!(p.b_y, state.model.b_y);
    }

    #[test]
    fn deterministic() {
        let ds = small_ds();
        assert_eq!(train(&ds, &small_cfg()).unwrap(), train(&ds, &small_cfg()).unwrap());
    }

    #[test]
    fn errors_are_stage_tagged() {
        let ds = small_ds();
        let too_many = TrainConfig { m_x: 10_000, ..small_cfg() };
        let err = train(&ds, &too_many).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: Stage::Anchors, .. }), "{err}");
        assert!(matches!(err.root(), Error::AnchorCountExceedsData { .. }));

        let tiny_sigma = TrainConfig {
            sigma: SigmaMode::Fixed { x: 1e-300, y: 1e-300 },
            ..small_cfg()
        };
        let err = train(&ds, &tiny_sigma).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: Stage::AnchorGraph, .. }));
        assert!(err.is_numerical());

        let no_pairs = ds.with_n_corr(0).unwrap();
        assert!(train(&no_pairs, &small_cfg()).is_err());
        let wide = TrainConfig { c: 60, ..small_cfg() };
        let err = train(&ds, &wide).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: Stage::Extract, .. }));
    }
}
