use clap::{error::ErrorKind, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use pccmh::cca::{load_cca, save_cca, train_cca, CcaModel, CCA_MAGIC, DEFAULT_REG};
use pccmh::datamodel::{
    generate_synthetic, load_feature_matrix, load_labels, read_manifest, save_feature_matrix,
    save_labels, split_dataset, write_manifest, FeatureMatrix, MatrixFormat, MultiModalDataset,
    SyntheticSpec,
};
use pccmh::encoder::{load_codes, save_codes, CrossModalHasher, HashCodeSet, Modality};
use pccmh::retrieval::{
    correspondence_sweep, evaluate_split, parse_ratios, rank_by_hamming, with_partial_correspondence,
    Direction, EvalOptions, Method, Relevance, SweepConfig, CSV_HEADER,
};
use pccmh::seed::derive_seed;
use pccmh::trainer::{load_model, save_model, train, EigenSelection, HashModel, SigmaMode, ThresholdMode, TrainConfig};
use pccmh::{Error, Result};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "pccmh", version, about = "Cross-modal hashing from partially paired data")]
#[command(args_override_self = true)]
struct Cli {
    /// Worker threads (also PCCMH_THREADS); 0 uses all cores.
    #[arg(long, global = true, env = "PCCMH_THREADS", default_value_t = 0)]
    threads: usize,
    /// Flat key=value file supplying defaults for the subcommand's flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic clustered two-modality dataset.
    Gen(GenArgs),
    /// Train a PCCMH or CCA model.
    Train(TrainArgs),
    /// Hash one modality's feature matrix into a codes file.
    Encode(EncodeArgs),
    /// Rank a codes database for each query row.
    Query(QueryArgs),
    /// Cross-modal MAP of a model, as CSV on stdout.
    Eval(EvalArgs),
    /// MAP across correspondence ratios, as CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Binary,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => MatrixFormat::Csv,
            FormatArg::Binary => MatrixFormat::Binary,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Pccmh,
    Cca,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModalityArg {
    X,
    Y,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::X => Modality::X,
            ModalityArg::Y => Modality::Y,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionArg {
    Both,
    X2y,
    Y2x,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RelevanceArg {
    Equal,
    Any,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ThresholdArg {
    Mean,
    Zero,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SelectionArg {
    Smallest,
    Balanced,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 5)]
    clusters: usize,
    /// Points per cluster.
    #[arg(long, default_value_t = 100)]
    per: usize,
    #[arg(long, default_value_t = 20)]
    dx: usize,
    #[arg(long, default_value_t = 15)]
    dy: usize,
    #[arg(long, default_value_t = 0.42)]
    noise: f64,
    /// Fraction of rows that are corresponded pairs.
    #[arg(long, default_value_t = 0.6)]
    corr: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Dataset directory written by `gen` (reads its manifest).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Modality x features (CSV, or binary for .bin).
    #[arg(long, conflicts_with = "data")]
    x: Option<PathBuf>,
    /// Modality y features.
    #[arg(long, conflicts_with = "data")]
    y: Option<PathBuf>,
    /// Labels file, one id (or comma-separated ids) per row.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Leading rows that are corresponded pairs; defaults to all shared rows.
    #[arg(long)]
    n_corr: Option<usize>,
    /// Hold out rows for testing: fraction used for training.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Keep only this fraction of training rows as pairs.
    #[arg(long)]
    corr_ratio: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Pccmh)]
    method: MethodArg,
    #[arg(long, default_value_t = 200)]
    m_x: usize,
    #[arg(long, default_value_t = 200)]
    m_y: usize,
    /// Code length in bits.
    #[arg(long, default_value_t = 16)]
    c: usize,
    #[arg(long, default_value_t = 0.6)]
    lambda: f64,
    /// Kernel bandwidth: `auto` or `SX,SY`.
    #[arg(long, default_value = "auto")]
    sigma: String,
    /// Keep only the s nearest anchors per row.
    #[arg(long)]
    s_nearest: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    kmeans_iters: usize,
    #[arg(long, value_enum, default_value_t = ThresholdArg::Mean)]
    thresholds: ThresholdArg,
    #[arg(long, value_enum, default_value_t = SelectionArg::Smallest)]
    selection: SelectionArg,
    /// Relative ridge for CCA covariances.
    #[arg(long, default_value_t = DEFAULT_REG)]
    cca_reg: f64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Model output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Feature matrix to hash.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    modality: ModalityArg,
    /// Codes output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long)]
    model: PathBuf,
    /// Query feature matrix.
    #[arg(long)]
    queries: PathBuf,
    /// Modality of the query rows.
    #[arg(long, value_enum)]
    modality: ModalityArg,
    /// Database codes file from `encode`.
    #[arg(long)]
    db: PathBuf,
    /// Results per query.
    #[arg(long, default_value_t = 50)]
    r: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = DirectionArg::Both)]
    direction: DirectionArg,
    /// Ranked list length.
    #[arg(long, default_value_t = 50)]
    r: usize,
    #[arg(long, value_enum, default_value_t = RelevanceArg::Equal)]
    relevance: RelevanceArg,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// `start:stop:step` or a comma list.
    #[arg(long, default_value = "0.2:0.8:0.1")]
    ratios: String,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 50)]
    r: usize,
    #[arg(long, value_enum, default_value_t = RelevanceArg::Equal)]
    relevance: RelevanceArg,
    /// CSV output path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn relevance(r: RelevanceArg) -> Relevance {
    match r {
        RelevanceArg::Equal => Relevance::LabelEquality,
        RelevanceArg::Any => Relevance::AnySharedLabel,
    }
}

fn train_config(m: &ModelArgs) -> Result<TrainConfig> {
    let sigma = if m.sigma == "auto" {
        SigmaMode::Auto
    } else {
        let parts: Vec<f64> = m
            .sigma
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidParameter(format!("bad --sigma {:?}", m.sigma)))?;
        match parts[..] {
            [x, y] if x > 0.0 && y > 0.0 => SigmaMode::Fixed { x, y },
            [s] if s > 0.0 => SigmaMode::Fixed { x: s, y: s },
            _ => return Err(Error::InvalidParameter(format!("bad --sigma {:?}", m.sigma))),
        }
    };
    Ok(TrainConfig {
        m_x: m.m_x,
        m_y: m.m_y,
        c: m.c,
        lambda: m.lambda,
        sigma,
        s_nearest: m.s_nearest,
        seed: m.seed,
        kmeans_iters: m.kmeans_iters,
        thresholds: match m.thresholds {
            ThresholdArg::Mean => ThresholdMode::TrainingMean,
            ThresholdArg::Zero => ThresholdMode::Zero,
        },
        selection: match m.selection {
            SelectionArg::Smallest => EigenSelection::Smallest,
            SelectionArg::Balanced => EigenSelection::BalancedFrom2c,
        },
    })
}

fn load_dataset(d: &DataArgs) -> Result<MultiModalDataset> {
    let (x_path, y_path, mut labels_path, mut n_corr) = match (&d.data, &d.x, &d.y) {
        (Some(dir), _, _) => {
            let manifest = read_manifest(&dir.join("manifest.txt"))?;
            let get = |k: &str| {
                manifest
                    .get(k)
                    .cloned()
                    .ok_or_else(|| Error::MalformedHeader(format!("manifest missing {k:?}")))
            };
            let n_corr = get("n_corr")?
                .parse::<usize>()
                .map_err(|_| Error::MalformedHeader("manifest n_corr is not a count".into()))?;
            (
                dir.join(get("x")?),
                dir.join(get("y")?),
                manifest.get("labels").map(|l| dir.join(l)),
                Some(n_corr),
            )
        }
        (None, Some(x), Some(y)) => (x.clone(), y.clone(), None, None),
        _ => {
            return Err(Error::InvalidParameter(
                "give --data DIR or both --x and --y".into(),
            ))
        }
    };
    if d.labels.is_some() {
        labels_path = d.labels.clone();
    }
    if d.n_corr.is_some() {
        n_corr = d.n_corr;
    }
    let x = load_feature_matrix(&x_path, MatrixFormat::from_path(&x_path))?;
    let y = load_feature_matrix(&y_path, MatrixFormat::from_path(&y_path))?;
    let labels = labels_path.as_deref().map(load_labels).transpose()?;
    let n_corr = n_corr.unwrap_or(x.rows().min(y.rows()));
    MultiModalDataset::new(x, y, n_corr, labels.clone(), labels)
}

/// Training rows (pairs possibly thinned) and, with a hold-out, the test rows.
fn prepare(d: &DataArgs, seed: u64) -> Result<(MultiModalDataset, Option<MultiModalDataset>)> {
    let ds = load_dataset(d)?;
    let (train_ds, test) = match d.train_fraction {
        Some(f) => {
            let (a, b) = split_dataset(&ds, f, d.split_seed)?;
            (a, Some(b))
        }
        None => (ds, None),
    };
    let train_ds = match d.corr_ratio {
        Some(r) => with_partial_correspondence(&train_ds, r, derive_seed(seed, 1))?,
        None => train_ds,
    };
    Ok((train_ds, test))
}

enum AnyModel {
    Pccmh(HashModel),
    Cca(CcaModel),
}

impl AnyModel {
    fn load(path: &Path) -> Result<AnyModel> {
        let mut magic = [0u8; 7];
        std::fs::File::open(path)
            .and_then(|mut f| f.read_exact(&mut magic))
            .map_err(|e| Error::io(path, e))?;
        if &magic == CCA_MAGIC {
            load_cca(path).map(AnyModel::Cca)
        } else {
            load_model(path).map(AnyModel::Pccmh)
        }
    }

    fn hasher(&self) -> &dyn CrossModalHasher {
        match self {
            AnyModel::Pccmh(m) => m,
            AnyModel::Cca(m) => m,
        }
    }

    fn seed(&self) -> u64 {
        match self {
            AnyModel::Pccmh(m) => m.meta.seed,
            AnyModel::Cca(_) => 0,
        }
    }
}

impl CrossModalHasher for AnyModel {
    fn code_length(&self) -> usize {
        self.hasher().code_length()
    }

    fn encode_modality(&self, data: &FeatureMatrix, modality: Modality) -> Result<HashCodeSet> {
        self.hasher().encode_modality(data, modality)
    }
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n_clusters: a.clusters,
        points_per_cluster: a.per,
        d_x: a.dx,
        d_y: a.dy,
        noise_std: a.noise,
        corr_ratio: a.corr,
        seed: a.seed,
    };
    let ds = generate_synthetic(&spec)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let ext = match a.format {
        FormatArg::Csv => "csv",
        FormatArg::Binary => "bin",
    };
    let (x_name, y_name) = (format!("x.{ext}"), format!("y.{ext}"));
    save_feature_matrix(&ds.x, &a.out.join(&x_name), a.format.into())?;
    save_feature_matrix(&ds.y, &a.out.join(&y_name), a.format.into())?;
    save_labels(ds.labels_x.as_ref().expect("generator labels"), &a.out.join("labels.txt"))?;
    let entries: BTreeMap<String, String> = [
        ("x", x_name),
        ("y", y_name),
        ("labels", "labels.txt".to_string()),
        ("n_items", spec.n_items().to_string()),
        ("n_corr", ds.n_corr().to_string()),
        ("n_clusters", spec.n_clusters.to_string()),
        ("points_per_cluster", spec.points_per_cluster.to_string()),
        ("d_x", spec.d_x.to_string()),
        ("d_y", spec.d_y.to_string()),
        ("noise_std", spec.noise_std.to_string()),
        ("corr_ratio", spec.corr_ratio.to_string()),
        ("seed", spec.seed.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    write_manifest(&entries, &a.out.join("manifest.txt"))
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = train_config(&a.model)?;
    let (train_ds, _) = prepare(&a.data, cfg.seed)?;
    match a.model.method {
        MethodArg::Pccmh => {
            let model = train(&train_ds, &cfg.capped_to(&train_ds))?;
            save_model(&model, &a.out)?;
            eprintln!(
                "trained c={} m_x={} m_y={} on {} pairs of {} rows",
                model.c(),
                model.m_x(),
                model.m_y(),
                train_ds.n_corr(),
                train_ds.x.rows().max(train_ds.y.rows())
            );
        }
        MethodArg::Cca => {
            let idx: Vec<usize> = (0..train_ds.n_corr()).collect();
            let model = train_cca(
                &train_ds.x.select_rows(&idx)?,
                &train_ds.y.select_rows(&idx)?,
                cfg.c,
                a.model.cca_reg,
            )?;
            save_cca(&model, &a.out)?;
            eprintln!("trained CCA c={} on {} pairs", model.c(), train_ds.n_corr());
        }
    }
    Ok(())
}

fn cmd_encode(a: &EncodeArgs) -> Result<()> {
    let model = AnyModel::load(&a.model)?;
    let data = load_feature_matrix(&a.input, MatrixFormat::from_path(&a.input))?;
    let codes = model.encode_modality(&data, a.modality.into())?;
    save_codes(&codes, &a.out)
}

fn cmd_query(a: &QueryArgs) -> Result<()> {
    let model = AnyModel::load(&a.model)?;
    let queries = load_feature_matrix(&a.queries, MatrixFormat::from_path(&a.queries))?;
    let codes = model.encode_modality(&queries, a.modality.into())?;
    let db = load_codes(&a.db)?;
    let mut out = std::io::stdout().lock();
    let io = |e| Error::io("<stdout>", e);
    writeln!(out, "query,rank,item,distance").map_err(io)?;
    for q in 0..codes.len() {
        let res = rank_by_hamming(q, codes.code(q), &db, a.r)?;
        for (rank, (item, dist)) in res.ranked.iter().enumerate() {
            writeln!(out, "{q},{},{item},{dist}", rank + 1).map_err(io)?;
        }
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let model = AnyModel::load(&a.model)?;
    let (train_ds, test) = prepare(&a.data, model.seed())?;
    if train_ds.labels_x.is_none() {
        return Err(Error::MissingLabels("eval needs --labels or a dataset with labels".into()));
    }
    let directions: &[Direction] = match a.direction {
        DirectionArg::Both => &Direction::BOTH,
        DirectionArg::X2y => &[Direction::XToY],
        DirectionArg::Y2x => &[Direction::YToX],
    };
    let opts = EvalOptions {
        r: a.r,
        relevance: relevance(a.relevance),
        corr_ratio: match &model {
            AnyModel::Pccmh(m) => m.meta.corr_ratio,
            AnyModel::Cca(_) => train_ds.corr_ratio(),
        },
        seed: model.seed(),
    };
    let test = test.as_ref().unwrap_or(&train_ds);
    let mut out = std::io::stdout().lock();
    let io = |e| Error::io("<stdout>", e);
    writeln!(out, "{CSV_HEADER}").map_err(io)?;
    for &direction in directions {
        let report = evaluate_split(&model, &train_ds, test, direction, &opts)?;
        writeln!(out, "{}", report.csv_row()).map_err(io)?;
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let train = train_config(&a.model)?;
    let ds = load_dataset(&a.data)?;
    let cfg = SweepConfig {
        seed: train.seed,
        train,
        method: match a.model.method {
            MethodArg::Pccmh => Method::Pccmh,
            MethodArg::Cca => Method::Cca,
        },
        cca_reg: a.model.cca_reg,
        train_fraction: a.data.train_fraction.unwrap_or(0.8),
        r: a.r,
        relevance: relevance(a.relevance),
    };
    let result = correspondence_sweep(&ds, &cfg, &parse_ratios(&a.ratios)?, a.repeats)?;
    for cell in &result.cells {
        if let Err(msg) = &cell.result {
            eprintln!("ratio {} repeat {} failed: {msg}", cell.ratio, cell.repeat);
        }
    }
    match &a.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
            result.write_csv(&mut f).and_then(|_| f.flush()).map_err(|e| Error::io(path, e))
        }
        None => result
            .write_csv(&mut std::io::stdout().lock())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// `--config` entries turned into flags placed before the user's own, so the
/// user's flags win.
fn config_args(argv: &[String]) -> std::result::Result<Vec<String>, String> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if a == "--config" {
            path = argv.get(i + 1).cloned();
        }
    }
    let Some(path) = path else {
        return Ok(Vec::new());
    };
    let Some(sub) = argv.iter().skip(1).find(|a| !a.starts_with('-')) else {
        return Ok(Vec::new());
    };
    let cmd = Cli::command();
    let Some(sub_cmd) = cmd.find_subcommand(sub) else {
        return Ok(Vec::new());
    };
    let entries = read_manifest(Path::new(&path)).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (key, value) in entries {
        let flag = key.replace('_', "-");
        let arg = sub_cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(flag.as_str()))
            .ok_or_else(|| format!("config {path}: unknown key {key:?} for `{sub}`"))?;
        if arg.get_action().takes_values() {
            out.push(format!("--{flag}={value}"));
        } else if value == "true" {
            out.push(format!("--{flag}"));
        }
    }
    Ok(out)
}

fn exit_for(err: &Error) -> ExitCode {
    if err.root().is_numerical() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let injected = match config_args(&argv) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let mut full = argv.clone();
    if !injected.is_empty() {
        let sub_pos = argv
            .iter()
            .skip(1)
            .position(|a| !a.starts_with('-'))
            .map_or(1, |p| p + 2);
        full.splice(sub_pos..sub_pos, injected);
    }
    let cli = match Cli::command()
        .try_get_matches_from(&full)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Query(a) => cmd_query(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
