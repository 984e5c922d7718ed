use super::{FeatureMatrix, Labels, MultiModalDataset};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Randomly partition a dataset into train and test parts.
///
/// Corresponded pairs move as a unit and stay at the front of each part, so
/// both halves keep positional correspondence. Unpaired rows of each modality
/// are partitioned independently with the same fraction.
pub fn split_dataset(
    ds: &MultiModalDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(MultiModalDataset, MultiModalDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_corr = ds.n_corr();

    let (pairs_train, pairs_test) = partition(0..n_corr, train_fraction, &mut rng);
    let (x_train, x_test) = partition(n_corr..ds.x.rows(), train_fraction, &mut rng);
    let (y_train, y_test) = partition(n_corr..ds.y.rows(), train_fraction, &mut rng);

    let build = |pairs: &[usize], xs: &[usize], ys: &[usize]| -> Result<MultiModalDataset> {
        let xi: Vec<usize> = pairs.iter().chain(xs).copied().collect();
        let yi: Vec<usize> = pairs.iter().chain(ys).copied().collect();
        if xi.is_empty() || yi.is_empty() {
            return Err(Error::EmptySplit);
        }
        MultiModalDataset::new(
            ds.x.select_rows(&xi)?,
            ds.y.select_rows(&yi)?,
            pairs.len(),
            ds.labels_x.as_ref().map(|l| l.select(&xi)),
            ds.labels_y.as_ref().map(|l| l.select(&yi)),
        )
    };
    let train = build(&pairs_train, &x_train, &y_train)?;
    let test = build(&pairs_test, &x_test, &y_test)?;
    Ok((train, test))
}

fn partition(
    range: std::ops::Range<usize>,
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = range.collect();
    idx.shuffle(rng);
    let n_train = (fraction * idx.len() as f64).round() as usize;
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Dataset built from the given row orders, with the first `n_corr` rows paired.
pub(crate) fn reorder(
    ds: &MultiModalDataset,
    x_order: &[usize],
    y_order: &[usize],
    n_corr: usize,
) -> Result<MultiModalDataset> {
    let pick = |l: &Option<Labels>, idx: &[usize]| l.as_ref().map(|l| l.select(idx));
    MultiModalDataset::new(
        FeatureMatrix::select_rows(&ds.x, x_order)?,
        FeatureMatrix::select_rows(&ds.y, y_order)?,
        n_corr,
        pick(&ds.labels_x, x_order),
        pick(&ds.labels_y, y_order),
    )
}
