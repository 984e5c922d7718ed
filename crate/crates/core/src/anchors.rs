//! Anchor selection by k-means.
//!
//! Lloyd iterations from k-means++ seeds. The input rows are visited in a
//! canonical (lexicographic) order, so the fitted centers depend only on the
//! multiset of rows and the seed, not on how the caller ordered them.

use crate::datamodel::FeatureMatrix;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Landmarks for one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub centers: FeatureMatrix,
    /// Sum of squared distances from each training row to its nearest center.
    pub inertia: f64,
}

impl AnchorSet {
    pub fn new(centers: FeatureMatrix, inertia: f64) -> Self {
        AnchorSet { centers, inertia }
    }

    pub fn m(&self) -> usize {
        self.centers.rows()
    }

    pub fn dim(&self) -> usize {
        self.centers.cols()
    }
}

/// Fitted anchors together with the inertia recorded after every assignment.
#[derive(Debug, Clone)]
pub struct KMeansTrace {
    pub anchors: AnchorSet,
    pub inertia_history: Vec<f64>,
    pub assignments: Vec<usize>,
    pub converged: bool,
}

pub fn kmeans_fit(data: &FeatureMatrix, m: usize, seed: u64, max_iters: usize) -> Result<AnchorSet> {
    kmeans_fit_traced(data, m, seed, max_iters).map(|t| t.anchors)
}

pub fn kmeans_fit_traced(
    data: &FeatureMatrix,
    m: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KMeansTrace> {
    let n = data.rows();
    if m == 0 {
        return Err(Error::InvalidParameter("anchor count must be at least 1".into()));
    }
    if m > n {
        return Err(Error::AnchorCountExceedsData { m, n });
    }
    if max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
    }

    let order = canonical_order(data);
    let sorted = data.select_rows(&order)?;
    let d = data.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(&sorted, m, &mut rng);

    let (mut labels, mut dists) = nearest(&sorted, &centers, m);
    let mut history = vec![dists.iter().sum::<f64>()];
    let mut converged = false;
    for _ in 0..max_iters {
        update_centers(&sorted, &labels, &dists, &mut centers, m);
        let (new_labels, new_dists) = nearest(&sorted, &centers, m);
        history.push(new_dists.iter().sum());
        dists = new_dists;
        if new_labels == labels {
            converged = true;
            break;
        }
        labels = new_labels;
    }

    let mut assignments = vec![0; n];
    for (pos, &orig) in order.iter().enumerate() {
        assignments[orig] = labels[pos];
    }
    let inertia = *history.last().expect("history is never empty");
    Ok(KMeansTrace {
        anchors: AnchorSet::new(FeatureMatrix::new(m, d, centers)?, inertia),
        inertia_history: history,
        assignments,
        converged,
    })
}

/// Index of the nearest anchor for every row; ties go to the lowest index.
pub fn assign_nearest(data: &FeatureMatrix, anchors: &AnchorSet) -> Result<Vec<usize>> {
    check_dims(data, anchors)?;
    Ok(nearest(data, anchors.centers.data(), anchors.m()).0)
}

/// Squared distance from every row to its nearest anchor.
pub fn nearest_sq_distances(data: &FeatureMatrix, anchors: &AnchorSet) -> Result<Vec<f64>> {
    check_dims(data, anchors)?;
    Ok(nearest(data, anchors.centers.data(), anchors.m()).1)
}

fn check_dims(data: &FeatureMatrix, anchors: &AnchorSet) -> Result<()> {
    if data.cols() != anchors.dim() {
        return Err(Error::DimensionMismatch {
            expected: anchors.dim(),
            found: data.cols(),
            row: None,
        });
    }
    Ok(())
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(data: &FeatureMatrix, centers: &[f64], m: usize) -> (Vec<usize>, Vec<f64>) {
    let d = data.cols();
    data.iter_rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|row| {
            let mut best = (0usize, f64::INFINITY);
            for j in 0..m {
                let dist = sq_dist(row, &centers[j * d..(j + 1) * d]);
                if dist < best.1 {
                    best = (j, dist);
                }
            }
            best
        })
        .unzip()
}

fn canonical_order(data: &FeatureMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..data.rows()).collect();
    order.sort_by(|&a, &b| {
        data.row(a)
            .iter()
            .zip(data.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn plus_plus_init(data: &FeatureMatrix, m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = data.rows();
    let mut chosen = Vec::with_capacity(m);
    chosen.push(rng.random_range(0..n));
    let mut min_d: Vec<f64> = data
        .iter_rows()
        .map(|r| sq_dist(r, data.row(chosen[0])))
        .collect();
    while chosen.len() < m {
        let total: f64 = min_d.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in min_d.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the final sum
            pick.unwrap_or_else(|| min_d.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // every row coincides with a chosen center
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, r) in data.iter_rows().enumerate() {
            let dist = sq_dist(r, data.row(next));
            if dist < min_d[i] {
                min_d[i] = dist;
            }
        }
    }
    chosen.iter().flat_map(|&i| data.row(i).to_vec()).collect()
}

fn update_centers(
    data: &FeatureMatrix,
    labels: &[usize],
    dists: &[f64],
    centers: &mut [f64],
    m: usize,
) {
    let d = data.cols();
    let mut sums = vec![0.0; m * d];
    let mut counts = vec![0usize; m];
    for (row, &l) in data.iter_rows().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l * d..(l + 1) * d].iter_mut().zip(row) {
            *s += v;
        }
    }
    // Empty clusters take the rows farthest from their current centers.
    let mut donors: Vec<usize> = (0..data.rows()).collect();
    donors.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
    let mut donors = donors.into_iter();
    for j in 0..m {
        let target = &mut centers[j * d..(j + 1) * d];
        if counts[j] > 0 {
            for (c, s) in target.iter_mut().zip(&sums[j * d..(j + 1) * d]) {
                *c = s / counts[j] as f64;
            }
        } else if let Some(i) = donors.next() {
            target.copy_from_slice(data.row(i));
        }
    }
}
