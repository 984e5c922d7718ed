use super::{FeatureMatrix, Labels, MultiModalDataset};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Parameters of the clustered two-view generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_clusters: usize,
    pub points_per_cluster: usize,
    pub d_x: usize,
    pub d_y: usize,
    /// Standard deviation of both the latent jitter and the per-view observation noise.
    pub noise_std: f64,
    pub corr_ratio: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_clusters: 5,
            points_per_cluster: 100,
            d_x: 20,
            d_y: 15,
            noise_std: 0.42,
            corr_ratio: 0.6,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn n_items(&self) -> usize {
        self.n_clusters * self.points_per_cluster
    }

    pub fn n_corr(&self) -> usize {
        (self.corr_ratio * self.n_items() as f64).floor() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.points_per_cluster == 0 || self.d_x == 0 || self.d_y == 0
        {
            return Err(Error::InvalidParameter(
                "synthetic counts and dimensions must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.corr_ratio) {
            return Err(Error::InvalidParameter(format!(
                "corr_ratio must lie in [0, 1], got {}",
                self.corr_ratio
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_std must be finite and non-negative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }
}

/// Draw a two-view dataset from shared latent cluster centers.
///
/// The latent space has one dimension per cluster, with equidistant centers
/// on the scaled coordinate axes. Each view applies its own
/// fixed Gaussian linear map to a latent point and adds isotropic noise. Row
/// `i` of both views carries the same cluster label; only rows below
/// `n_corr` also share the latent point itself.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiModalDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let latent = spec.n_clusters;
    let n = spec.n_items();
    let n_corr = spec.n_corr();

    let gauss = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    // scaled basis vectors: pairwise distance sqrt(2 * latent), the mean for N(0, 1) centers
    let scale = (latent as f64).sqrt();
    let centers: Vec<Vec<f64>> = (0..spec.n_clusters)
        .map(|k| (0..latent).map(|j| if j == k { scale } else { 0.0 }).collect())
        .collect();
    let map_scale = 1.0 / (latent as f64).sqrt();
    let random_map = |rows: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| (0..latent).map(|_| gauss(rng) * map_scale).collect())
            .collect()
    };
    let map_x = random_map(spec.d_x, &mut rng);
    let map_y = random_map(spec.d_y, &mut rng);

    let mut labels: Vec<usize> = (0..n).map(|i| i / spec.points_per_cluster).collect();
    labels.shuffle(&mut rng);

    let noise = spec.noise_std;
    let latent_point = |label: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        centers[label]
            .iter()
            .map(|c| c + noise * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let observe = |map: &[Vec<f64>], z: &[f64], rng: &mut ChaCha8Rng, out: &mut Vec<f64>| {
        for row in map {
            let clean: f64 = row.iter().zip(z).map(|(a, b)| a * b).sum();
            out.push(clean + noise * rng.sample::<f64, _>(StandardNormal));
        }
    };

    let mut x = Vec::with_capacity(n * spec.d_x);
    let mut y = Vec::with_capacity(n * spec.d_y);
    for (i, &label) in labels.iter().enumerate() {
        if i < n_corr {
            let z = latent_point(label, &mut rng);
            observe(&map_x, &z, &mut rng, &mut x);
            observe(&map_y, &z, &mut rng, &mut y);
        } else {
            let zx = latent_point(label, &mut rng);
            let zy = latent_point(label, &mut rng);
            observe(&map_x, &zx, &mut rng, &mut x);
            observe(&map_y, &zy, &mut rng, &mut y);
        }
    }

    let labels = Labels::single(labels.iter().map(|&l| l as i64));
    MultiModalDataset::new(
        FeatureMatrix::new(n, spec.d_x, x)?,
        FeatureMatrix::new(n, spec.d_y, y)?,
        n_corr,
        Some(labels.clone()),
        Some(labels),
    )
}
