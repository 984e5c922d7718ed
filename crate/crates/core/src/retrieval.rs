//! Hamming ranking, average precision, and the correspondence-ratio sweep.
//!
//! Average precision over a top-`R` list divides by the number of relevant
//! items *in that list*, so a query whose list contains no relevant item
//! scores zero.

use crate::cca::train_cca;
use crate::datamodel::split::reorder;
use crate::datamodel::{split_dataset, FeatureMatrix, Labels, MultiModalDataset};
use crate::encoder::{popcount_xor, CodeRef, CrossModalHasher, HashCodeSet, Modality};
use crate::error::{Error, Result, Stage, StageExt};
use crate::seed::derive_seed;
use crate::trainer::{train, TrainConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

/// Header shared by evaluation and sweep CSV output.
pub const CSV_HEADER: &str = "ratio,direction,c,map_mean,map_std,seed";

/// Default list length.
pub const DEFAULT_R: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Query with modality x, retrieve from modality y.
    XToY,
    YToX,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::XToY, Direction::YToX];

    pub fn query_modality(self) -> Modality {
        match self {
            Direction::XToY => Modality::X,
            Direction::YToX => Modality::Y,
        }
    }

    pub fn db_modality(self) -> Modality {
        match self {
            Direction::XToY => Modality::Y,
            Direction::YToX => Modality::X,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::XToY => "x2y",
            Direction::YToX => "y2x",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x2y" => Ok(Direction::XToY),
            "y2x" => Ok(Direction::YToX),
            other => Err(Error::InvalidParameter(format!(
                "unknown direction {other:?} (expected x2y or y2x)"
            ))),
        }
    }
}

/// Ground-truth neighbor rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Relevance {
    /// Identical label sets; for single-label data, the same class.
    #[default]
    LabelEquality,
    /// At least one label in common.
    AnySharedLabel,
}

impl Relevance {
    pub fn relevant(self, a: &[i64], b: &[i64]) -> bool {
        match self {
            Relevance::LabelEquality => a == b,
            Relevance::AnySharedLabel => a.iter().any(|l| b.binary_search(l).is_ok()),
        }
    }
}

impl FromStr for Relevance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" | "label-equality" => Ok(Relevance::LabelEquality),
            "any" | "any-shared" => Ok(Relevance::AnySharedLabel),
            other => Err(Error::InvalidParameter(format!("unknown relevance {other:?}"))),
        }
    }
}

/// Top-`R` database items for one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResult {
    pub query_index: usize,
    /// `(item index, Hamming distance)`, ascending by distance then index.
    pub ranked: Vec<(usize, usize)>,
}

pub fn rank_by_hamming(
    query_index: usize,
    query: CodeRef<'_>,
    db: &HashCodeSet,
    r: usize,
) -> Result<QueryResult> {
    if db.is_empty() {
        return Err(Error::InvalidParameter("empty database".into()));
    }
    if r == 0 {
        return Err(Error::InvalidParameter("R must be at least 1".into()));
    }
    if query.c() != db.c() {
        return Err(Error::DimensionMismatch {
            expected: db.c(),
            found: query.c(),
            row: Some(query_index),
        });
    }
    // Bucket by distance; scanning items in order gives the index tie rule for free.
    let c = db.c();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); c + 1];
    for (i, code) in db.iter().enumerate() {
        buckets[popcount_xor(query.bytes(), code.bytes())].push(i);
    }
    let ranked = buckets
        .into_iter()
        .enumerate()
        .flat_map(|(d, items)| items.into_iter().map(move |i| (i, d)))
        .take(r)
        .collect();
    Ok(QueryResult {
        query_index,
        ranked,
    })
}

/// AP of a ranked relevance list, normalized by the hits inside the list.
pub fn average_precision(ranked_relevance: &[bool]) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, &rel) in ranked_relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// MAP and per-query AP of precomputed codes.
pub fn map_from_codes(
    queries: &HashCodeSet,
    query_labels: &Labels,
    db: &HashCodeSet,
    db_labels: &Labels,
    r: usize,
    relevance: Relevance,
) -> Result<(f64, Vec<f64>)> {
    if query_labels.len() != queries.len() || db_labels.len() != db.len() {
        return Err(Error::InvalidParameter(format!(
            "label counts ({}, {}) do not match code counts ({}, {})",
            query_labels.len(),
            db_labels.len(),
            queries.len(),
            db.len()
        )));
    }
    if queries.is_empty() {
        return Err(Error::InvalidParameter("no queries".into()));
    }
    let per_query: Vec<f64> = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let res = rank_by_hamming(q, queries.code(q), db, r)?;
            let rel: Vec<bool> = res
                .ranked
                .iter()
                .map(|&(i, _)| relevance.relevant(query_labels.get(q), db_labels.get(i)))
                .collect();
            Ok(average_precision(&rel))
        })
        .collect::<Result<_>>()?;
    let map = per_query.iter().sum::<f64>() / per_query.len() as f64;
    Ok((map, per_query))
}

/// Mean MAP over `trials` random permutations of the database labels.
pub fn permutation_baseline(
    queries: &HashCodeSet,
    query_labels: &Labels,
    db: &HashCodeSet,
    db_labels: &Labels,
    r: usize,
    relevance: Relevance,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..trials.max(1) {
        let mut perm: Vec<usize> = (0..db_labels.len()).collect();
        perm.shuffle(&mut rng);
        let shuffled = db_labels.select(&perm);
        total += map_from_codes(queries, query_labels, db, &shuffled, r, relevance)?.0;
    }
    Ok(total / trials.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub direction: Direction,
    pub code_length: usize,
    pub map: f64,
    pub per_query_ap: Vec<f64>,
    pub r: usize,
    pub corr_ratio: f64,
    pub seed: u64,
}

impl EvalReport {
    /// One row under [`CSV_HEADER`]; a single evaluation has zero spread.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.corr_ratio, self.direction, self.code_length, self.map, 0.0, self.seed
        )
    }
}

/// A labeled feature matrix used as query set or database.
#[derive(Debug, Clone, Copy)]
pub struct LabeledSet<'a> {
    pub features: &'a FeatureMatrix,
    pub labels: Option<&'a Labels>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub r: usize,
    pub relevance: Relevance,
    pub corr_ratio: f64,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            r: DEFAULT_R,
            relevance: Relevance::LabelEquality,
            corr_ratio: 1.0,
            seed: 0,
        }
    }
}

/// Hash queries and database with the direction's two functions and score MAP.
pub fn mean_average_precision(
    model: &impl CrossModalHasher,
    queries: LabeledSet<'_>,
    db: LabeledSet<'_>,
    direction: Direction,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let q_labels = queries
        .labels
        .ok_or_else(|| Error::MissingLabels("query set".into()))?;
    let db_labels = db
        .labels
        .ok_or_else(|| Error::MissingLabels("database".into()))?;
    let q_codes = model
        .encode_modality(queries.features, direction.query_modality())
        .stage(Stage::Encode)?;
    let db_codes = model
        .encode_modality(db.features, direction.db_modality())
        .stage(Stage::Encode)?;
    let (map, per_query_ap) = map_from_codes(&q_codes, q_labels, &db_codes, db_labels, opts.r, opts.relevance)?;
    Ok(EvalReport {
        direction,
        code_length: model.code_length(),
        map,
        per_query_ap,
        r: opts.r,
        corr_ratio: opts.corr_ratio,
        seed: opts.seed,
    })
}

fn side(ds: &MultiModalDataset, m: Modality) -> (&FeatureMatrix, Option<&Labels>) {
    match m {
        Modality::X => (&ds.x, ds.labels_x.as_ref()),
        Modality::Y => (&ds.y, ds.labels_y.as_ref()),
    }
}

/// Evaluate test-side queries against the training side in one direction.
pub fn evaluate_split(
    model: &impl CrossModalHasher,
    train: &MultiModalDataset,
    test: &MultiModalDataset,
    direction: Direction,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let (qf, ql) = side(test, direction.query_modality());
    let (df, dl) = side(train, direction.db_modality());
    mean_average_precision(
        model,
        LabeledSet { features: qf, labels: ql },
        LabeledSet { features: df, labels: dl },
        direction,
        opts,
    )
    .stage(Stage::Evaluate)
}

/// Permutation-baseline MAP for the same queries and database as [`evaluate_split`].
pub fn permutation_baseline_split(
    model: &impl CrossModalHasher,
    train: &MultiModalDataset,
    test: &MultiModalDataset,
    direction: Direction,
    opts: &EvalOptions,
    trials: usize,
) -> Result<f64> {
    let (qf, ql) = side(test, direction.query_modality());
    let (df, dl) = side(train, direction.db_modality());
    let ql = ql.ok_or_else(|| Error::MissingLabels("query set".into()))?;
    let dl = dl.ok_or_else(|| Error::MissingLabels("database".into()))?;
    let q = model.encode_modality(qf, direction.query_modality())?;
    let db = model.encode_modality(df, direction.db_modality())?;
    permutation_baseline(&q, ql, &db, dl, opts.r, opts.relevance, trials, opts.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Pccmh,
    Cca,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pccmh" => Ok(Method::Pccmh),
            "cca" => Ok(Method::Cca),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub train: TrainConfig,
    pub method: Method,
    /// Relative CCA regularization.
    pub cca_reg: f64,
    pub train_fraction: f64,
    pub r: usize,
    pub relevance: Relevance,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            train: TrainConfig::default(),
            method: Method::Pccmh,
            cca_reg: crate::cca::DEFAULT_REG,
            train_fraction: 0.8,
            r: DEFAULT_R,
            relevance: Relevance::LabelEquality,
            seed: 0,
        }
    }
}

/// Outcome of one (ratio, repeat) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub ratio: f64,
    pub repeat: usize,
    pub seed: u64,
    /// MAP per direction, or the error text.
    pub result: std::result::Result<[f64; 2], String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepRow {
    Aggregate {
        ratio: f64,
        direction: Direction,
        c: usize,
        map_mean: f64,
        map_std: f64,
        seed: u64,
    },
    Failed {
        ratio: f64,
        direction: Direction,
        c: usize,
        seed: u64,
    },
}

impl SweepRow {
    pub fn csv_row(&self) -> String {
        match self {
            SweepRow::Aggregate { ratio, direction, c, map_mean, map_std, seed } => {
                format!("{ratio},{direction},{c},{map_mean},{map_std},{seed}")
            }
            SweepRow::Failed { ratio, direction, c, seed } => {
                format!("{ratio},{direction},{c},error,error,{seed}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Mean MAP for a ratio and direction, if any repeat succeeded.
    pub fn mean(&self, ratio: f64, direction: Direction) -> Option<f64> {
        self.rows.iter().find_map(|row| match row {
            SweepRow::Aggregate { ratio: r, direction: d, map_mean, .. }
                if *r == ratio && *d == direction => Some(*map_mean),
            _ => None,
        })
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(w, "{}", row.csv_row())?;
        }
        Ok(())
    }
}

/// Train and evaluate one model per (ratio, repeat) and aggregate MAP.
///
/// `ds` is the pool of fully paired items. Each cell splits it into train and
/// test, keeps `ratio` of the training rows as corresponded pairs, and breaks
/// the pairing of the rest by shuffling their y rows. Repeat `k` uses the same
/// split and seeds at every ratio, so its paired sets are nested and the
/// ratios differ only in how many pairs are kept. Cells that fail are
/// reported individually and do not stop the sweep.
pub fn correspondence_sweep(
    ds: &MultiModalDataset,
    cfg: &SweepConfig,
    ratios: &[f64],
    repeats: usize,
) -> Result<SweepResult> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    if let Some(bad) = ratios.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "ratios must lie in (0, 1], got {bad}"
        )));
    }
    if ds.labels_x.is_none() || ds.labels_y.is_none() {
        return Err(Error::MissingLabels("sweep dataset".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..ratios.len())
        .flat_map(|i| (0..repeats).map(move |k| (i, k)))
        .collect();
    let cells: Vec<SweepCell> = jobs
        .into_par_iter()
        .map(|(i, k)| {
            let seed = derive_seed(cfg.seed, k as u64);
            SweepCell {
                ratio: ratios[i],
                repeat: k,
                seed,
                result: run_cell(ds, cfg, ratios[i], seed).map_err(|e| e.to_string()),
            }
        })
        .collect();

    let c = cfg.train.c;
    let mut rows = Vec::new();
    for &ratio in ratios {
        let in_ratio: Vec<&SweepCell> = cells.iter().filter(|cell| cell.ratio == ratio).collect();
        for (d, direction) in Direction::BOTH.into_iter().enumerate() {
            let maps: Vec<f64> = in_ratio
                .iter()
                .filter_map(|cell| cell.result.as_ref().ok().map(|m| m[d]))
                .collect();
            if !maps.is_empty() {
                let (map_mean, map_std) = mean_std(&maps);
                rows.push(SweepRow::Aggregate {
                    ratio,
                    direction,
                    c,
                    map_mean,
                    map_std,
                    seed: cfg.seed,
                });
            }
            for cell in in_ratio.iter().filter(|cell| cell.result.is_err()) {
                rows.push(SweepRow::Failed {
                    ratio,
                    direction,
                    c,
                    seed: cell.seed,
                });
            }
        }
    }
    Ok(SweepResult { cells, rows })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Training data with `ratio` of its rows kept as pairs and the rest unpaired.
pub fn with_partial_correspondence(
    train: &MultiModalDataset,
    ratio: f64,
    seed: u64,
) -> Result<MultiModalDataset> {
    let n_pairs = train.n_corr();
    let n_rows = train.x.rows().max(train.y.rows());
    let keep = ((ratio * n_rows as f64).round() as usize).min(n_pairs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<usize> = (0..n_pairs).collect();
    pairs.shuffle(&mut rng);
    let (kept, dropped) = pairs.split_at(keep);
    let mut x_order: Vec<usize> = kept.to_vec();
    let mut y_order: Vec<usize> = kept.to_vec();
    x_order.extend(dropped.iter().copied().chain(n_pairs..train.x.rows()));
    let mut y_rest: Vec<usize> = dropped.iter().copied().chain(n_pairs..train.y.rows()).collect();
    y_rest.shuffle(&mut rng);
    y_order.extend(y_rest);
    reorder(train, &x_order, &y_order, keep)
}

fn run_cell(ds: &MultiModalDataset, cfg: &SweepConfig, ratio: f64, seed: u64) -> Result<[f64; 2]> {
    let (train_full, test) = split_dataset(ds, cfg.train_fraction, derive_seed(seed, 0))?;
    let train_ds = with_partial_correspondence(&train_full, ratio, derive_seed(seed, 1))?;
    let opts = EvalOptions {
        r: cfg.r,
        relevance: cfg.relevance,
        corr_ratio: ratio,
        seed,
    };
    let mut out = [0.0; 2];
    match cfg.method {
        Method::Pccmh => {
            let tcfg = TrainConfig {
                seed: derive_seed(seed, 2),
                ..cfg.train.capped_to(&train_ds)
            };
            let model = train(&train_ds, &tcfg)?;
            for (d, direction) in Direction::BOTH.into_iter().enumerate() {
                out[d] = evaluate_split(&model, &train_ds, &test, direction, &opts)?.map;
            }
        }
        Method::Cca => {
            let idx: Vec<usize> = (0..train_ds.n_corr()).collect();
            let model = train_cca(
                &train_ds.x.select_rows(&idx)?,
                &train_ds.y.select_rows(&idx)?,
                cfg.train.c,
                cfg.cca_reg,
            )?;
            for (d, direction) in Direction::BOTH.into_iter().enumerate() {
                out[d] = evaluate_split(&model, &train_ds, &test, direction, &opts)?.map;
            }
        }
    }
    Ok(out)
}

/// Parse `start:stop:step` (inclusive) or a comma-separated list of ratios.
pub fn parse_ratios(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("bad ratio list {spec:?}"));
    if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // round to 12 decimals so 0.2 + 3*0.1 prints as 0.5
        Ok((0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect())
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    }
}
