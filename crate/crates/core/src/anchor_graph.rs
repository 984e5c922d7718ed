//! Anchor-graph construction for one modality.
//!
//! Each row of `z` holds the Gaussian kernel between an item and every anchor,
//! optionally truncated to the `s` nearest anchors, then divided by its sum so
//! that rows are stochastic. The implied item affinity `Z Λ⁻¹ Zᵀ` is never
//! formed at training scale; the smoothness term only needs the `m × m`
//! reduced Laplacian `ZᵀZ − ZᵀZ Λ⁻¹ ZᵀZ`.

use crate::anchors::{nearest_sq_distances, sq_dist, AnchorSet};
use crate::datamodel::FeatureMatrix;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Largest item count for which [`approx_affinity`] will build the `n × n` matrix.
pub const AFFINITY_SIZE_GUARD: usize = 2000;

/// Lower bound returned by [`estimate_sigma`].
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorGraph {
    /// `n × m`, rows sum to one.
    pub z: DMatrix<f64>,
    /// Diagonal of `Λ = diag(Zᵀ1)`.
    pub col_sums: DVector<f64>,
    pub sigma: f64,
    pub s_nearest: Option<usize>,
}

impl AnchorGraph {
    /// Build a graph from an already row-normalized `z`.
    pub fn from_z(z: DMatrix<f64>, sigma: f64, s_nearest: Option<usize>) -> Result<Self> {
        let col_sums = DVector::from_iterator(z.ncols(), z.column_iter().map(|c| c.sum()));
        if let Some(j) = col_sums.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::OrphanAnchor { anchor: j });
        }
        Ok(AnchorGraph {
            z,
            col_sums,
            sigma,
            s_nearest,
        })
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn m(&self) -> usize {
        self.z.ncols()
    }
}

/// The `m × m` reduced graph Laplacian of an anchor graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedLaplacian {
    pub matrix: DMatrix<f64>,
}

/// Row-normalized kernel rows of `data` against `anchors`, without the
/// column-sum bookkeeping. This is the out-of-sample map used by the encoder.
pub fn kernel_rows(
    data: &FeatureMatrix,
    anchors: &AnchorSet,
    sigma: f64,
    s_nearest: Option<usize>,
) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if data.cols() != anchors.dim() {
        return Err(Error::DimensionMismatch {
            expected: anchors.dim(),
            found: data.cols(),
            row: None,
        });
    }
    let m = anchors.m();
    if let Some(s) = s_nearest {
        if s == 0 || s > m {
            return Err(Error::InvalidParameter(format!(
                "s_nearest must lie in 1..={m}, got {s}"
            )));
        }
    }
    let rows: Vec<Vec<f64>> = data
        .iter_rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .enumerate()
        .map(|(i, x)| kernel_row(x, anchors, sigma, s_nearest).ok_or(Error::ZeroRowSimilarity { row: i }))
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(data.rows(), m, &flat))
}

fn kernel_row(x: &[f64], anchors: &AnchorSet, sigma: f64, s_nearest: Option<usize>) -> Option<Vec<f64>> {
    let m = anchors.m();
    let dists: Vec<f64> = anchors.centers.iter_rows().map(|u| sq_dist(x, u)).collect();
    let mut row: Vec<f64> = dists.iter().map(|d| (-d / sigma).exp()).collect();
    if let Some(s) = s_nearest.filter(|&s| s < m) {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(a.cmp(&b)));
        for &j in &order[s..] {
            row[j] = 0.0;
        }
    }
    let total: f64 = row.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    row.iter_mut().for_each(|v| *v /= total);
    Some(row)
}

/// Anchor graph of the training data for one modality.
pub fn compute_z(
    data: &FeatureMatrix,
    anchors: &AnchorSet,
    sigma: f64,
    s_nearest: Option<usize>,
) -> Result<AnchorGraph> {
    let z = kernel_rows(data, anchors, sigma, s_nearest)?;
    AnchorGraph::from_z(z, sigma, s_nearest)
}

/// Mean squared distance from each item to its nearest anchor.
pub fn estimate_sigma(data: &FeatureMatrix, anchors: &AnchorSet) -> Result<f64> {
    let d = nearest_sq_distances(data, anchors)?;
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    Ok(mean.max(SIGMA_FLOOR))
}

/// Dense approximate affinity `Z Λ⁻¹ Zᵀ`; small graphs only.
pub fn approx_affinity(g: &AnchorGraph) -> Result<DMatrix<f64>> {
    let n = g.n();
    if n > AFFINITY_SIZE_GUARD {
        return Err(Error::SizeGuard {
            n,
            limit: AFFINITY_SIZE_GUARD,
        });
    }
    let scaled = scale_columns(&g.z, &g.col_sums);
    let w = scaled * g.z.transpose();
    Ok(symmetrize(w))
}

pub fn reduced_laplacian(g: &AnchorGraph) -> ReducedLaplacian {
    let gram = g.z.tr_mul(&g.z);
    let smoothed = scale_columns(&gram, &g.col_sums) * &gram;
    ReducedLaplacian {
        matrix: symmetrize(gram - smoothed),
    }
}

fn scale_columns(a: &DMatrix<f64>, divisors: &DVector<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for (mut col, d) in out.column_iter_mut().zip(divisors.iter()) {
        col /= *d;
    }
    out
}

pub(crate) fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    let t = a.transpose();
    (a + t) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fm(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn random_graph(seed: u64, n: usize, m: usize, d: usize) -> (FeatureMatrix, AnchorSet, AnchorGraph) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = FeatureMatrix::new(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let centers = FeatureMatrix::new(m, d, (0..m * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let anchors = AnchorSet::new(centers, 0.0);
        let sigma = estimate_sigma(&data, &anchors).unwrap();
        let g = compute_z(&data, &anchors, sigma, None).unwrap();
        (data, anchors, g)
    }

    /// Zᵀ (D − W̃) Z with the dense affinity.
    fn laplacian_oracle(g: &AnchorGraph) -> DMatrix<f64> {
        let w = approx_affinity(g).unwrap();
        let degrees = DVector::from_iterator(w.nrows(), w.row_iter().map(|r| r.sum()));
        let l = DMatrix::from_diagonal(&degrees) - w;
        g.z.transpose() * l * &g.z
    }

    #[test]
    fn equidistant_point_splits_evenly() {
        let anchors = AnchorSet::new(fm(&[&[-1.0, 0.0], &[1.0, 0.0]]), 0.0);
        let g = compute_z(&fm(&[&[0.0, 3.0]]), &anchors, 2.0, None).unwrap();
        assert!((g.z[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((g.z[(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kernel_hand_values() {
        // single anchor at the origin, x = (1, 0), sigma = 1: raw kernel e^-1
        let dists = [sq_dist(&[1.0, 0.0], &[0.0, 0.0])];
        assert!(((-dists[0] / 1.0f64).exp() - 0.367879).abs() < 1e-6);

        // u1 = x = (0,0), u2 = (3,4): raw [1, e^-25]
        let anchors = AnchorSet::new(fm(&[&[0.0, 0.0], &[3.0, 4.0]]), 0.0);
        let z = kernel_rows(&fm(&[&[0.0, 0.0]]), &anchors, 1.0, None).unwrap();
        let e25 = (-25.0f64).exp();
        assert!((z[(0, 0)] - 1.0 / (1.0 + e25)).abs() < 1e-15);
        assert!((z[(0, 1)] - 1.39e-11).abs() < 0.01e-11);
    }

    #[test]
    fn rejects_bad_sigma_and_underflow() {
        let anchors = AnchorSet::new(fm(&[&[0.0], &[1.0]]), 0.0);
        let data = fm(&[&[0.5], &[1e6]]);
        assert!(matches!(compute_z(&data, &anchors, 0.0, None), Err(Error::InvalidParameter(_))));
        assert!(matches!(compute_z(&data, &anchors, -1.0, None), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            compute_z(&data, &anchors, 1.0, None),
            Err(Error::ZeroRowSimilarity { row: 1 })
        ));
        assert!(compute_z(&data, &anchors, 1.0, Some(3)).is_err());
    }

    #[test]
    fn truncation_keeps_s_nearest() {
        let anchors = AnchorSet::new(fm(&[&[0.0], &[1.0], &[2.0], &[3.0]]), 0.0);
        let data = fm(&[&[0.1], &[2.9], &[1.5], &[1.4]]);
        let g = compute_z(&data, &anchors, 1.0, Some(2)).unwrap();
        assert_eq!(g.z.row(0).iter().filter(|&&v| v > 0.0).count(), 2);
        assert_eq!(g.z[(0, 2)], 0.0);
        assert_eq!(g.z[(1, 0)], 0.0);
        for r in g.z.row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orphan_anchor_is_rejected() {
        let anchors = AnchorSet::new(fm(&[&[0.0], &[1.0], &[50.0]]), 0.0);
        let data = fm(&[&[0.0], &[1.0]]);
        assert!(matches!(
            compute_z(&data, &anchors, 1.0, Some(1)),
            Err(Error::OrphanAnchor { anchor: 2 })
        ));
    }

    #[test]
    fn sigma_estimates() {
        let pts = fm(&[&[0.0, 0.0], &[2.0, 1.0]]);
        let anchors = AnchorSet::new(pts.clone(), 0.0);
        assert_eq!(estimate_sigma(&pts, &anchors).unwrap(), SIGMA_FLOOR);
        let data = fm(&[&[1.0, 0.0], &[2.0, 2.0]]);
        assert!((estimate_sigma(&data, &anchors).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sigma_matches_brute_force() {
        let (data, anchors, _) = random_graph(3, 50, 6, 3);
        let mut total = 0.0;
        for x in data.iter_rows() {
            let mut best = f64::INFINITY;
            for u in anchors.centers.iter_rows() {
                let d: f64 = x.iter().zip(u).map(|(a, b)| (a - b).powi(2)).sum();
                best = best.min(d);
            }
            total += best;
        }
        let got = estimate_sigma(&data, &anchors).unwrap();
        assert!((got - total / 50.0).abs() < 1e-14);
    }

    #[test]
    fn affinity_hand_cases() {
        let g = AnchorGraph::from_z(DMatrix::identity(3, 3), 1.0, None).unwrap();
        assert_eq!(approx_affinity(&g).unwrap(), DMatrix::identity(3, 3));

        let g = AnchorGraph::from_z(dmatrix![1.0, 0.0; 0.5, 0.5], 1.0, None).unwrap();
        let w = approx_affinity(&g).unwrap();
        let expect = dmatrix![2.0 / 3.0, 1.0 / 3.0; 1.0 / 3.0, 2.0 / 3.0];
        assert!((w - expect).abs().max() < 1e-15);
    }

    #[test]
    fn affinity_size_guard() {
        let z = DMatrix::from_element(AFFINITY_SIZE_GUARD + 1, 1, 1.0);
        let g = AnchorGraph::from_z(z, 1.0, None).unwrap();
        assert!(matches!(approx_affinity(&g), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn laplacian_hand_cases() {
        let g = AnchorGraph::from_z(dmatrix![1.0, 0.0; 0.5, 0.5], 1.0, None).unwrap();
        let l = reduced_laplacian(&g).matrix;
        let t = 1.0 / 12.0;
        assert!((l - dmatrix![t, -t; -t, t]).abs().max() < 1e-12);

        let g = AnchorGraph::from_z(DMatrix::identity(4, 4), 1.0, None).unwrap();
        assert!(reduced_laplacian(&g).matrix.abs().max() < 1e-15);
    }

    #[test]
    fn laplacian_matches_dense_oracle() {
        let (_, _, g) = random_graph(11, 30, 5, 2);
        let l = reduced_laplacian(&g).matrix;
        assert!((&l - laplacian_oracle(&g)).abs().max() < 1e-9);
    }

    #[test]
    fn graph_invariants_on_random_instance() {
        let (_, _, g) = random_graph(21, 60, 8, 3);
        for r in g.z.row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-9);
            assert!(r.iter().all(|&v| v >= 0.0));
        }
        let w = approx_affinity(&g).unwrap();
        for r in w.row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-9);
        }
        let l = reduced_laplacian(&g).matrix;
        assert!((&l - l.transpose()).abs().max() < 1e-10);
        let ones = DVector::from_element(g.m(), 1.0);
        assert!((&l * ones).abs().max() < 1e-8);
        let min_eig = SymmetricEigen::new(l.clone()).eigenvalues.min();
        assert!(min_eig >= -1e-8, "{min_eig}");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = DVector::from_iterator(g.m(), (0..g.m()).map(|_| rng.random_range(-1.0..1.0)));
            assert!(x.dot(&(&l * &x)) >= -1e-8);
        }
    }

    #[test]
    fn quadratic_form_is_smoothness_sum() {
        let (_, _, g) = random_graph(4, 120, 7, 3);
        let l = reduced_laplacian(&g).matrix;
        let w = approx_affinity(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = DVector::from_iterator(g.m(), (0..g.m()).map(|_| rng.random_range(-1.0..1.0)));
        let f = &g.z * &b;
        let mut direct = 0.0;
        for i in 0..g.n() {
            for j in 0..g.n() {
                direct += w[(i, j)] * (f[i] - f[j]).powi(2);
            }
        }
        let quad = b.dot(&(&l * &b));
        assert!((quad - 0.5 * direct).abs() < 1e-7, "{quad} vs {}", 0.5 * direct);
    }

    #[test]
    fn rotation_leaves_z_unchanged() {
        let (data, anchors, g) = random_graph(6, 40, 5, 2);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = |m: &FeatureMatrix| {
            FeatureMatrix::from_rows(
                &m.iter_rows().map(|r| vec![c * r[0] - s * r[1], s * r[0] + c * r[1]]).collect::<Vec<_>>(),
            )
            .unwrap()
        };
        let anchors_r = AnchorSet::new(rot(&anchors.centers), 0.0);
        let g_r = compute_z(&rot(&data), &anchors_r, g.sigma, None).unwrap();
        assert!((g_r.z - &g.z).abs().max() < 1e-9);
    }
}
