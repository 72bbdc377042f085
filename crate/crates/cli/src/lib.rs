//! Command-line front end over the `agghash` library.
//!
//! Every subcommand is a thin wrapper: load inputs, call the library, write
//! outputs. All computation happens before the first byte of output is
//! written, so a failing run leaves no partial artifacts. Results are
//! bit-identical to the equivalent library calls and independent of
//! `--threads`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use agghash::io::{
    load_codes, load_matrix, load_model, load_ragged, load_ranking, save_codes, save_matrix,
    save_model, save_ragged, save_ranking, ModelFile,
};
use agghash::{
    clustered_matrix, clustered_sets, euclidean_knn, gmp_batch, hamming_rank, itq_encode,
    itq_train_logged, label_ground_truth, mean_average_precision, one_hot, rba_encode, rba_train,
    sah_encode_batch, sah_train, sash_encode_batch, sash_train, Error, FeatureMatrix, ItqConfig,
    LabelMatrix, LocalFeatureSet, PackedCodes, RbaConfig, Result, SahConfig, SashConfig,
    DEFAULT_SEED,
};
use clap::{Args, Parser, Subcommand};

fn itq_defaults() -> ItqConfig {
    ItqConfig::new(1)
}
fn rba_defaults() -> RbaConfig {
    RbaConfig::new(1)
}
fn sah_defaults() -> SahConfig {
    SahConfig::new(1)
}
fn sash_defaults() -> SashConfig {
    SashConfig::new(1)
}

#[derive(Debug, Parser)]
#[command(
    name = "agghash",
    version,
    about = "Aggregate local features, learn binary hash codes, search and evaluate"
)]
pub struct Cli {
    /// Cap internal parallelism at this many threads (0 = all cores).
    /// Outputs do not depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a clustered synthetic dataset (matrix, or descriptor sets
    /// with --set-size), plus optional one-hot labels.
    GenSynthetic(GenSyntheticArgs),
    /// Aggregate each descriptor set into one vector by ridge equalization.
    Aggregate(AggregateArgs),
    /// Fit the rotation-based quantizer on a feature matrix.
    TrainItq(TrainItqArgs),
    /// Fit the binary autoencoder on a feature matrix.
    TrainRba(TrainRbaArgs),
    /// Jointly fit aggregation and the binary autoencoder on descriptor sets.
    TrainSah(TrainSahArgs),
    /// Jointly fit aggregation and a label-supervised encoder on descriptor sets.
    TrainSash(TrainSashArgs),
    /// Encode features (matrix or descriptor sets, per the model kind) into packed codes.
    Encode(EncodeArgs),
    /// Rank a code database against query codes by Hamming distance.
    Search(SearchArgs),
    /// Score a ranking with mean average precision against a ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    /// Feature dimension.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Number of samples (or descriptor sets).
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    /// Number of cluster centers; sample i belongs to cluster i mod classes.
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    /// Descriptors per set; when given the output is a descriptor set file
    /// instead of a matrix.
    #[arg(long)]
    pub set_size: Option<usize>,
    /// Noise scale around each cluster center.
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output dataset path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional path for the one-hot class labels (matrix file, classes x count).
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Descriptor set file.
    #[arg(long)]
    pub input: PathBuf,
    /// Aggregation ridge weight.
    #[arg(long, default_value_t = sah_defaults().gmp_mu)]
    pub mu: f64,
    /// Output matrix path, one aggregated column per set.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainItqArgs {
    /// Feature matrix file.
    #[arg(long)]
    pub input: PathBuf,
    /// Code length in bits.
    #[arg(long)]
    pub bits: usize,
    /// Rotation refinement iterations.
    #[arg(long, default_value_t = itq_defaults().iters)]
    pub iters: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output model path.
    #[arg(long)]
    pub model: PathBuf,
    /// Output training log path (one "iter<TAB>objective" line per iteration).
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainRbaArgs {
    /// Feature matrix file.
    #[arg(long)]
    pub input: PathBuf,
    /// Code length in bits.
    #[arg(long)]
    pub bits: usize,
    /// Outer iterations.
    #[arg(long, default_value_t = rba_defaults().t1)]
    pub iters: usize,
    /// Weight of the code-vs-encoder quadratic penalty.
    #[arg(long, default_value_t = rba_defaults().lambda)]
    pub lambda: f64,
    /// Ridge weight on both linear maps.
    #[arg(long, default_value_t = rba_defaults().beta)]
    pub beta: f64,
    /// Coordinate sweeps per code update.
    #[arg(long, default_value_t = rba_defaults().sweeps)]
    pub sweeps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainSahArgs {
    /// Descriptor set file.
    #[arg(long)]
    pub input: PathBuf,
    /// Code length in bits.
    #[arg(long)]
    pub bits: usize,
    /// Outer alternations between the hash fit and the aggregation updates.
    #[arg(long, default_value_t = sah_defaults().t)]
    pub rounds: usize,
    /// Autoencoder iterations per alternation.
    #[arg(long, default_value_t = sah_defaults().t1)]
    pub iters: usize,
    #[arg(long, default_value_t = sah_defaults().lambda)]
    pub lambda: f64,
    #[arg(long, default_value_t = sah_defaults().beta)]
    pub beta: f64,
    /// Weight of the aggregation terms against the autoencoder terms.
    #[arg(long, default_value_t = sah_defaults().gamma)]
    pub gamma: f64,
    /// Ridge inside the aggregation terms.
    #[arg(long, default_value_t = sah_defaults().mu)]
    pub mu: f64,
    /// Ridge for the initial plain aggregation.
    #[arg(long, default_value_t = sah_defaults().gmp_mu)]
    pub gmp_mu: f64,
    #[arg(long, default_value_t = sah_defaults().sweeps)]
    pub sweeps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainSashArgs {
    /// Descriptor set file.
    #[arg(long)]
    pub input: PathBuf,
    /// Label matrix file (classes x count, one-hot or multi-hot columns).
    #[arg(long)]
    pub labels: PathBuf,
    /// Code length in bits.
    #[arg(long)]
    pub bits: usize,
    /// Outer alternations.
    #[arg(long, default_value_t = sash_defaults().t)]
    pub rounds: usize,
    /// Encoder/decoder iterations per alternation.
    #[arg(long, default_value_t = sash_defaults().t1)]
    pub iters: usize,
    #[arg(long, default_value_t = sash_defaults().lambda)]
    pub lambda: f64,
    #[arg(long, default_value_t = sash_defaults().beta)]
    pub beta: f64,
    /// Weight of the aggregation terms against the label reconstruction.
    #[arg(long, default_value_t = sash_defaults().gamma)]
    pub gamma: f64,
    /// Ridge inside the aggregation terms.
    #[arg(long, default_value_t = sash_defaults().mu)]
    pub mu: f64,
    /// Ridge for plain aggregation (initialization and unseen images).
    #[arg(long, default_value_t = sash_defaults().gmp_mu)]
    pub gmp_mu: f64,
    /// Ridge of the plain-to-supervised aggregation mapping fit.
    #[arg(long, default_value_t = sash_defaults().alpha)]
    pub alpha: f64,
    #[arg(long, default_value_t = sash_defaults().sweeps)]
    pub sweeps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Trained model file of any kind.
    #[arg(long)]
    pub model: PathBuf,
    /// Feature matrix file for itq/rba models, descriptor set file for sah/sash.
    #[arg(long)]
    pub input: PathBuf,
    /// Output packed code path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Packed query codes.
    #[arg(long)]
    pub queries: PathBuf,
    /// Packed database codes.
    #[arg(long)]
    pub database: PathBuf,
    /// Output ranking path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ranking file produced by `search`.
    #[arg(long)]
    pub ranking: PathBuf,
    /// Query feature matrix (Euclidean ground-truth mode).
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Database feature matrix (Euclidean ground-truth mode).
    #[arg(long)]
    pub database: Option<PathBuf>,
    /// Neighbor count defining Euclidean ground truth.
    #[arg(long)]
    pub k_ground_truth: Option<usize>,
    /// Skip database item i for query i (when queries are the database).
    #[arg(long, default_value_t = false)]
    pub exclude_self: bool,
    /// Query label matrix (label ground-truth mode).
    #[arg(long)]
    pub query_labels: Option<PathBuf>,
    /// Database label matrix (label ground-truth mode).
    #[arg(long)]
    pub db_labels: Option<PathBuf>,
    /// Treat labels as multi-hot: relevant = shares at least one label.
    #[arg(long, default_value_t = false)]
    pub multi_label: bool,
    /// Evaluation cutoff; defaults to the full database.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Output report path (one "key<TAB>value" line per row).
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse `argv` and run one subcommand. Returns the process exit code:
/// 0 on success (including `--help`/`--version`), 2 on usage errors,
/// 1 on runtime failures (which are printed to stderr).
pub fn cli_run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let outcome = if cli.threads > 0 {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
        {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Error::InvalidConfig(format!(
                "cannot build a pool of {} threads: {e}",
                cli.threads
            ))),
        }
    } else {
        dispatch(cli.command)
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenSynthetic(a) => run_gen_synthetic(a),
        Command::Aggregate(a) => run_aggregate(a),
        Command::TrainItq(a) => run_train_itq(a),
        Command::TrainRba(a) => run_train_rba(a),
        Command::TrainSah(a) => run_train_sah(a),
        Command::TrainSash(a) => run_train_sash(a),
        Command::Encode(a) => run_encode(a),
        Command::Search(a) => run_search(a),
        Command::Eval(a) => run_eval(a),
    }
}

fn named<T>(r: Result<T>, path: &Path) -> Result<T> {
    r.map_err(|e| e.prefixed(&path.display().to_string()))
}

fn load_features(path: &Path) -> Result<FeatureMatrix> {
    let m = load_matrix(path)?;
    named(FeatureMatrix::new(m), path)
}

fn load_labels(path: &Path) -> Result<LabelMatrix> {
    let m = load_matrix(path)?;
    named(LabelMatrix::new(m), path)
}

fn load_sets(path: &Path) -> Result<(usize, Vec<LocalFeatureSet>)> {
    let sets = load_ragged(path)?;
    match sets.first() {
        Some(first) => Ok((first.d(), sets)),
        None => Err(Error::InvalidInput(format!(
            "{}: holds no descriptor sets",
            path.display()
        ))),
    }
}

/// One "iter<TAB>objective" line per training iteration, 1-indexed. Floats
/// are printed in shortest round-trip form, so logs are bit-reproducible.
fn write_log(path: &Path, log: &[f64]) -> Result<()> {
    let mut text = String::new();
    for (i, v) in log.iter().enumerate() {
        let _ = writeln!(text, "{}\t{}", i + 1, v);
    }
    named(fs::write(path, text).map_err(Error::from), path)
}

fn run_gen_synthetic(a: GenSyntheticArgs) -> Result<()> {
    match a.set_size {
        Some(n) => {
            let (sets, classes) = clustered_sets(a.dim, a.count, a.classes, n, a.noise, a.seed)?;
            let labels = one_hot(&classes, a.classes)?;
            save_ragged(&a.out, &sets)?;
            if let Some(lp) = &a.labels_out {
                save_matrix(lp, labels.data())?;
            }
        }
        None => {
            let (x, classes) = clustered_matrix(a.dim, a.count, a.classes, a.noise, a.seed)?;
            let labels = one_hot(&classes, a.classes)?;
            save_matrix(&a.out, x.data())?;
            if let Some(lp) = &a.labels_out {
                save_matrix(lp, labels.data())?;
            }
        }
    }
    Ok(())
}

fn run_aggregate(a: AggregateArgs) -> Result<()> {
    let (d, sets) = load_sets(&a.input)?;
    let phi = named(gmp_batch(d, &sets, a.mu), &a.input)?;
    save_matrix(&a.out, &phi)
}

fn run_train_itq(a: TrainItqArgs) -> Result<()> {
    let x = load_features(&a.input)?;
    let cfg = ItqConfig {
        l: a.bits,
        iters: a.iters,
        seed: a.seed,
    };
    let (model, _, log) = named(itq_train_logged(&x, &cfg), &a.input)?;
    save_model(&a.model, &ModelFile::Itq(model))?;
    write_log(&a.log, &log)
}

fn run_train_rba(a: TrainRbaArgs) -> Result<()> {
    let x = load_features(&a.input)?;
    let cfg = RbaConfig {
        l: a.bits,
        t1: a.iters,
        lambda: a.lambda,
        beta: a.beta,
        sweeps: a.sweeps,
        seed: a.seed,
    };
    let out = named(rba_train(&x, &cfg, None), &a.input)?;
    save_model(&a.model, &ModelFile::Rba(out.model))?;
    write_log(&a.log, &out.objective_log)
}

fn run_train_sah(a: TrainSahArgs) -> Result<()> {
    let (_, sets) = load_sets(&a.input)?;
    let cfg = SahConfig {
        l: a.bits,
        t: a.rounds,
        t1: a.iters,
        lambda: a.lambda,
        beta: a.beta,
        gamma: a.gamma,
        mu: a.mu,
        gmp_mu: a.gmp_mu,
        sweeps: a.sweeps,
        seed: a.seed,
    };
    let out = named(sah_train(&sets, &cfg), &a.input)?;
    save_model(&a.model, &ModelFile::Sah(out.model))?;
    write_log(&a.log, &out.objective_log)
}

fn run_train_sash(a: TrainSashArgs) -> Result<()> {
    let (_, sets) = load_sets(&a.input)?;
    let labels = load_labels(&a.labels)?;
    let cfg = SashConfig {
        l: a.bits,
        t: a.rounds,
        t1: a.iters,
        lambda: a.lambda,
        beta: a.beta,
        gamma: a.gamma,
        mu: a.mu,
        gmp_mu: a.gmp_mu,
        alpha: a.alpha,
        sweeps: a.sweeps,
        seed: a.seed,
    };
    let out = named(sash_train(&sets, &labels, &cfg), &a.input)?;
    save_model(&a.model, &ModelFile::Sash(out.model))?;
    write_log(&a.log, &out.objective_log)
}

fn run_encode(a: EncodeArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let codes = match &model {
        ModelFile::Itq(m) => {
            let x = load_features(&a.input)?;
            named(itq_encode(m, &x), &a.input)?
        }
        ModelFile::Rba(m) => {
            let x = load_features(&a.input)?;
            named(rba_encode(m, &x), &a.input)?
        }
        ModelFile::Sah(m) => {
            let (_, sets) = load_sets(&a.input)?;
            named(sah_encode_batch(m, &sets, &m.config), &a.input)?
        }
        ModelFile::Sash(m) => {
            let (_, sets) = load_sets(&a.input)?;
            named(sash_encode_batch(m, &sets, &m.config), &a.input)?
        }
    };
    save_codes(&a.out, &PackedCodes::pack(&codes))
}

fn run_search(a: SearchArgs) -> Result<()> {
    let queries = load_codes(&a.queries)?;
    let db = load_codes(&a.database)?;
    let ranking = hamming_rank(&queries, &db).map_err(|e| {
        e.prefixed(&format!(
            "{} vs {}",
            a.queries.display(),
            a.database.display()
        ))
    })?;
    save_ranking(&a.out, queries.l(), &ranking)
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let (bits, ranking) = load_ranking(&a.ranking)?;
    let knn_mode = a.queries.is_some() || a.database.is_some() || a.k_ground_truth.is_some();
    let label_mode = a.query_labels.is_some() || a.db_labels.is_some();
    if knn_mode == label_mode {
        return Err(Error::InvalidConfig(
            "choose one ground truth: --queries/--database/--k-ground-truth, \
             or --query-labels/--db-labels"
                .into(),
        ));
    }
    let gt = if knn_mode {
        let (q, db, k) = match (&a.queries, &a.database, a.k_ground_truth) {
            (Some(q), Some(db), Some(k)) => (q, db, k),
            _ => {
                return Err(Error::InvalidConfig(
                    "Euclidean ground truth needs --queries, --database and --k-ground-truth"
                        .into(),
                ))
            }
        };
        let qm = load_features(q)?;
        let dbm = load_features(db)?;
        euclidean_knn(&qm, &dbm, k, a.exclude_self)
            .map_err(|e| e.prefixed(&format!("{} vs {}", q.display(), db.display())))?
    } else {
        let (q, db) = match (&a.query_labels, &a.db_labels) {
            (Some(q), Some(db)) => (q, db),
            _ => {
                return Err(Error::InvalidConfig(
                    "label ground truth needs both --query-labels and --db-labels".into(),
                ))
            }
        };
        let ql = load_labels(q)?;
        let dbl = load_labels(db)?;
        label_ground_truth(&ql, &dbl, a.multi_label)
            .map_err(|e| e.prefixed(&format!("{} vs {}", q.display(), db.display())))?
    };
    let top_k = a.top_k.unwrap_or(ranking.db_size());
    let map = mean_average_precision(&ranking, &gt, top_k)
        .map_err(|e| e.prefixed(&a.ranking.display().to_string()))?;
    let mut report = String::new();
    let _ = writeln!(report, "metric\tmap");
    let _ = writeln!(report, "bits\t{bits}");
    let _ = writeln!(report, "top_k\t{top_k}");
    let _ = writeln!(report, "queries\t{}", ranking.len());
    let _ = writeln!(report, "database\t{}", ranking.db_size());
    let _ = writeln!(report, "value\t{map}");
    named(fs::write(&a.out, report).map_err(Error::from), &a.out)
}
