//! The `corrnet` command line.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::compare::{adjusted_rand_index, TestStatistic};
use crate::dbht::BubbleStats;
use crate::error::{Error, Result};
use crate::estimator::{
    correlation_to_distance, metacorrelation, read_correlation_csv, write_labeled_matrix,
    MatrixFormat,
};
use crate::filtergraph::{build_mst, build_pmfg, write_graph, GraphKind};
use crate::ingest::{
    compute_log_returns, generate_synthetic_panel, load_price_panel, load_sector_table,
    planted_sector_table, prices_from_returns, read_returns_panel, synthetic_dates,
    write_price_panel, write_returns_panel, write_sector_table, BlockModelSpec, IcbLevel,
    LoadReport, MissingPolicy, ReturnsPanel,
};
use crate::partition::{load_clustering, write_clustering_csv, Clustering};
use crate::pipeline::{
    analyze_window, clustering_similarity_matrix, full_period_clustering, icb_similarity_series,
    metacorrelation_matrix, persistence_series, run_rolling, track_clusterings, RollingConfig,
    TrackingRecord,
};

#[derive(Debug, Parser)]
#[command(
    name = "corrnet",
    version,
    about = "Correlation networks, DBHT clustering and market-structure persistence"
)]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "CORRNET_JOBS", global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic block-model panel with planted clusters.
    Synth(SynthArgs),
    /// Build the MST or PMFG of the full-panel correlation matrix.
    Filter(FilterArgs),
    /// DBHT clustering of the full panel.
    Cluster(ClusterArgs),
    /// Rolling-window study.
    Rolling(RollingArgs),
    /// Adjusted Rand index between two clusterings.
    Compare(CompareArgs),
    /// Track benchmark clusters through a series of clusterings.
    Track(TrackArgs),
    /// Metacorrelation between two correlation matrices.
    Metacorr(MetacorrArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Price file: one date column plus one column per ticker.
    #[arg(long, required_unless_present = "returns", conflicts_with = "returns")]
    pub prices: Option<PathBuf>,
    /// Log-returns file in the same layout, used as is.
    #[arg(long)]
    pub returns: Option<PathBuf>,
    #[arg(long, default_value = "date")]
    pub date_column: String,
    /// Handling of missing prices.
    #[arg(long, value_enum, default_value_t = MissingPolicy::Reject)]
    pub missing: MissingPolicy,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimatorArgs {
    /// Exponential weight decay in days (default: a third of the window).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Equal weights instead of exponential ones.
    #[arg(long)]
    pub uniform: bool,
    /// Skip market-mode removal.
    #[arg(long)]
    pub no_detrend: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 60)]
    pub assets: usize,
    #[arg(long, default_value_t = 6)]
    pub blocks: usize,
    #[arg(long, default_value_t = 2000)]
    pub days: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.7)]
    pub block_loading: f64,
    #[arg(long, default_value_t = 0.5)]
    pub market_loading: f64,
    #[arg(long, default_value_t = 0.5)]
    pub noise_sigma: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FilterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, value_enum, default_value_t = GraphKind::Pmfg)]
    pub kind: GraphKind,
    /// Format of the correlation matrix output.
    #[arg(long, value_enum, default_value_t = MatrixFormat::Csv)]
    pub format: MatrixFormat,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RollingArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Sector table (`ticker,industry,supersector,sector,subsector`).
    #[arg(long)]
    pub sectors: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub window_length: usize,
    #[arg(long, default_value_t = 30)]
    pub shift: usize,
    /// Significance level for cluster tracking.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Test the point mass P(X = k) instead of the tail P(X >= k).
    #[arg(long)]
    pub pmf_mode: bool,
    /// Benchmark clustering for tracking (default: the full-panel clustering).
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    /// Format of the similarity and metacorrelation matrices.
    #[arg(long, value_enum, default_value_t = MatrixFormat::Csv)]
    pub format: MatrixFormat,
    /// Also store each window's correlation matrix in binary form.
    #[arg(long)]
    pub save_correlations: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrackArgs {
    #[arg(long)]
    pub benchmark: PathBuf,
    /// A `clusterings` directory written by `rolling`.
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long)]
    pub sectors: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long)]
    pub pmf_mode: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MetacorrArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a C,
    resolved: &'a R,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    created: String,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Output directory that remembers what was written for the manifest.
struct RunDir {
    root: PathBuf,
    written: Vec<String>,
}

impl RunDir {
    fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(RunDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn finish<C: Serialize, R: Serialize>(
        self,
        command: &'static str,
        config: &C,
        resolved: &R,
        inputs: &[&Path],
    ) -> Result<()> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut names = self.written.clone();
        names.sort();
        let outputs = names
            .into_iter()
            .map(|name| {
                Ok(FileDigest {
                    sha256: sha256_file(&self.root.join(&name))?,
                    path: name,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            resolved,
            inputs,
            outputs,
            created: DateTime::<Utc>::from(SystemTime::now())
                .to_rfc3339_opts(SecondsFormat::Secs, true),
        };
        let path = self.root.join("run_manifest.json");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &manifest)?;
        Ok(())
    }
}

fn load_returns(input: &InputArgs) -> Result<(ReturnsPanel<f64>, LoadReport, PathBuf)> {
    match (&input.prices, &input.returns) {
        (Some(p), _) => {
            let (prices, report) = load_price_panel(p, &input.date_column, input.missing)?;
            Ok((compute_log_returns(&prices)?, report, p.clone()))
        }
        (None, Some(r)) => {
            let file = File::open(r).map_err(|e| Error::io(r, e))?;
            let panel = read_returns_panel(file, &input.date_column)?;
            Ok((panel, LoadReport::default(), r.clone()))
        }
        (None, None) => Err(Error::invalid("either --prices or --returns is required")),
    }
}

fn report_load(report: &LoadReport) {
    if !report.filled.is_empty() {
        eprintln!("forward-filled {} missing price(s)", report.filled.len());
    }
    if !report.dropped_tickers.is_empty() {
        eprintln!(
            "dropped tickers with gaps: {}",
            report.dropped_tickers.join(", ")
        );
    }
}

fn estimator_config(e: &EstimatorArgs, window_length: usize, shift: usize) -> RollingConfig {
    RollingConfig {
        window_length,
        shift,
        theta: e.theta,
        uniform: e.uniform,
        detrend: !e.no_detrend,
    }
}

fn resolved(cfg: &RollingConfig) -> RollingConfig {
    RollingConfig {
        theta: Some(cfg.resolved_theta()),
        ..cfg.clone()
    }
}

fn statistic(pmf_mode: bool) -> TestStatistic {
    if pmf_mode {
        TestStatistic::PointMass
    } else {
        TestStatistic::Tail
    }
}

fn write_window_matrix(
    dir: &mut RunDir,
    stem: &str,
    format: MatrixFormat,
    m: &Array2<f64>,
) -> Result<()> {
    let labels: Vec<String> = (0..m.nrows()).map(|k| k.to_string()).collect();
    dir.write(&format!("{stem}.{}", format.extension()), |w| {
        write_labeled_matrix(w, format, "window", &labels, m.view())
    })
}

fn write_series<W: Write>(
    w: W,
    header: [&str; 3],
    rows: impl Iterator<Item = (usize, NaiveDate, String)>,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header)?;
    for (k, date, v) in rows {
        csv.write_record([k.to_string(), date.to_string(), v])?;
    }
    csv.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

fn write_tracking<W: Write>(w: W, record: &TrackingRecord, dates: &[NaiveDate]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["window".to_string(), "end_date".into(), "S".into()];
    header.extend(record.industries.iter().cloned());
    csv.write_record(&header)?;
    for p in &record.points {
        let mut row = vec![
            p.window.to_string(),
            dates[p.window].to_string(),
            p.size.to_string(),
        ];
        row.extend(p.histogram.iter().map(usize::to_string));
        csv.write_record(&row)?;
    }
    csv.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct ClusterMeta<'a> {
    window_id: Option<usize>,
    n_assets: usize,
    n_clusters: usize,
    cluster_sizes: Vec<usize>,
    bubbles: &'a BubbleStats,
}

fn synth(args: &SynthArgs) -> Result<()> {
    let spec = BlockModelSpec {
        n_assets: args.assets,
        n_blocks: args.blocks,
        block_loading: args.block_loading,
        market_loading: args.market_loading,
        noise_sigma: args.noise_sigma,
        n_days: args.days,
        seed: args.seed,
    };
    let (returns, planted) = generate_synthetic_panel::<f64>(&spec)?;
    let base = synthetic_dates(1)[0];
    let prices = prices_from_returns(&returns, base, &vec![100.0; spec.n_assets])?;
    let sectors = planted_sector_table(&planted)?;
    let mut dir = RunDir::create(&args.out)?;
    dir.write("prices.csv", |w| write_price_panel(w, &prices))?;
    dir.write("returns.csv", |w| write_returns_panel(w, &returns))?;
    dir.write("planted.csv", |w| write_clustering_csv(w, &planted))?;
    dir.write("sectors.csv", |w| write_sector_table(w, &sectors))?;
    dir.finish("synth", args, &spec, &[])
}

fn filter(args: &FilterArgs) -> Result<()> {
    let (panel, report, source) = load_returns(&args.input)?;
    report_load(&report);
    let cfg = estimator_config(&args.estimator, panel.n_days(), 1);
    let analysis = analyze_window(&panel, &cfg, None)?;
    let d = correlation_to_distance(&analysis.correlation);
    let graph = match args.kind {
        GraphKind::Mst => build_mst(&d)?,
        GraphKind::Pmfg => build_pmfg(&d)?,
    };
    let mut dir = RunDir::create(&args.out)?;
    let c = &analysis.correlation;
    dir.write(&format!("correlation.{}", args.format.extension()), |w| {
        write_labeled_matrix(w, args.format, "ticker", c.tickers(), c.rho())
    })?;
    let mut meta = Vec::new();
    dir.write("edges.csv", |w| write_graph(w, &mut meta, &graph))?;
    dir.write("graph.json", |w| {
        w.write_all(&meta).map_err(|e| Error::io("graph.json", e))
    })?;
    dir.finish("filter", args, &resolved(&cfg), &[&source])
}

fn cluster(args: &ClusterArgs) -> Result<()> {
    let (panel, report, source) = load_returns(&args.input)?;
    report_load(&report);
    let cfg = estimator_config(&args.estimator, panel.n_days(), 1);
    let out = analyze_window(&panel, &cfg, None)?;
    let meta = ClusterMeta {
        window_id: None,
        n_assets: out.clustering.len(),
        n_clusters: out.clustering.n_clusters(),
        cluster_sizes: out.clustering.sizes(),
        bubbles: &out.stats,
    };
    let mut dir = RunDir::create(&args.out)?;
    dir.write("clusters.csv", |w| write_clustering_csv(w, &out.clustering))?;
    dir.write("clusters.json", |w| {
        Ok(serde_json::to_writer_pretty(w, &meta)?)
    })?;
    dir.finish("cluster", args, &resolved(&cfg), &[&source])
}

fn rolling(args: &RollingArgs) -> Result<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 1), got {}",
            args.alpha
        )));
    }
    let (panel, report, source) = load_returns(&args.input)?;
    report_load(&report);
    let sectors = args.sectors.as_deref().map(load_sector_table).transpose()?;
    let cfg = estimator_config(&args.estimator, args.window_length, args.shift);
    let rr = run_rolling(&panel, &cfg)?;
    let dates = &rr.end_dates;
    let mut dir = RunDir::create(&args.out)?;

    dir.write("n_clusters.csv", |w| {
        write_series(
            w,
            ["window", "end_date", "n_clusters"],
            rr.n_clusters_series
                .iter()
                .enumerate()
                .map(|(k, n)| (k, dates[k], n.to_string())),
        )
    })?;
    dir.write("bubble_stats.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record([
            "window",
            "end_date",
            "n_bubbles",
            "n_converging",
            "n_diverging",
            "n_passage",
            "largest_bubble",
        ])?;
        for (k, s) in rr.bubble_stats.iter().enumerate() {
            csv.write_record([
                k.to_string(),
                dates[k].to_string(),
                s.n_bubbles.to_string(),
                s.n_converging.to_string(),
                s.n_diverging.to_string(),
                s.n_passage.to_string(),
                s.largest_bubble.to_string(),
            ])?;
        }
        csv.flush().map_err(|e| Error::io("bubble_stats.csv", e))?;
        Ok(())
    })?;
    let persistence = if rr.len() >= 2 {
        persistence_series(&rr)?
    } else {
        Vec::new()
    };
    dir.write("persistence.csv", |w| {
        write_series(
            w,
            ["window", "end_date", "ari_previous"],
            persistence
                .iter()
                .map(|&(k, v)| (k, dates[k], v.to_string())),
        )
    })?;
    write_window_matrix(
        &mut dir,
        "similarity_s",
        args.format,
        &clustering_similarity_matrix(&rr)?,
    )?;
    write_window_matrix(
        &mut dir,
        "metacorr_z",
        args.format,
        &metacorrelation_matrix(&rr)?,
    )?;

    dir.write("clusterings/windows.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["window", "start_row", "end_row", "end_date", "file"])?;
        for (k, win) in rr.windows.iter().enumerate() {
            csv.write_record([
                k.to_string(),
                win.start.to_string(),
                win.end.to_string(),
                dates[k].to_string(),
                format!("window_{k:03}.csv"),
            ])?;
        }
        csv.flush().map_err(|e| Error::io("windows.csv", e))?;
        Ok(())
    })?;
    for (k, c) in rr.clusterings.iter().enumerate() {
        dir.write(&format!("clusterings/window_{k:03}.csv"), |w| {
            write_clustering_csv(w, c)
        })?;
    }
    if args.save_correlations {
        for (k, c) in rr.correlations.iter().enumerate() {
            dir.write(&format!("correlations/window_{k:03}.bin"), |w| {
                crate::estimator::write_binary_matrix(w, c)
            })?;
        }
    }

    let mut inputs: Vec<&Path> = vec![&source];
    if let Some(table) = &sectors {
        for level in IcbLevel::ALL {
            let series = icb_similarity_series(&rr, table, level)?;
            dir.write(&format!("icb_ari_{}.csv", level.name()), |w| {
                write_series(
                    w,
                    ["window", "end_date", "ari"],
                    series
                        .iter()
                        .enumerate()
                        .map(|(k, v)| (k, dates[k], v.to_string())),
                )
            })?;
        }
        let benchmark = match &args.benchmark {
            Some(p) => load_clustering(p)?,
            None => full_period_clustering(&panel, &cfg)?,
        };
        dir.write("benchmark.csv", |w| write_clustering_csv(w, &benchmark))?;
        let records = track_clusterings(
            &benchmark,
            &rr.clusterings,
            table,
            args.alpha,
            statistic(args.pmf_mode),
        )?;
        for r in &records {
            dir.write(&format!("tracking_{}.csv", r.benchmark_cluster), |w| {
                write_tracking(w, r, dates)
            })?;
        }
        inputs.extend(args.sectors.as_deref());
        inputs.extend(args.benchmark.as_deref());
    } else if args.benchmark.is_some() {
        return Err(Error::invalid("--benchmark needs --sectors for tracking"));
    }
    dir.finish("rolling", args, &resolved(&cfg), &inputs)
}

fn compare(args: &CompareArgs) -> Result<()> {
    let a = load_clustering(&args.a)?;
    let b = load_clustering(&args.b)?.reindexed(a.tickers())?;
    println!("{:?}", adjusted_rand_index(&a, &b)?);
    Ok(())
}

fn track(args: &TrackArgs) -> Result<()> {
    let index_path = args.series.join("windows.csv");
    let file = File::open(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut dates = Vec::new();
    let mut series = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let date = NaiveDate::parse_from_str(&rec[3], "%Y-%m-%d").map_err(|e| Error::Parse {
            location: index_path.display().to_string(),
            message: format!("bad date {:?}: {e}", &rec[3]),
        })?;
        let c = load_clustering(args.series.join(&rec[4]))?;
        let c = match series.first() {
            Some(first) => c.reindexed(Clustering::tickers(first))?,
            None => c,
        };
        dates.push(date);
        series.push(c);
    }
    let sectors = load_sector_table(&args.sectors)?;
    let benchmark = load_clustering(&args.benchmark)?;
    let records = track_clusterings(
        &benchmark,
        &series,
        &sectors,
        args.alpha,
        statistic(args.pmf_mode),
    )?;
    let mut dir = RunDir::create(&args.out)?;
    for r in &records {
        dir.write(&format!("tracking_{}.csv", r.benchmark_cluster), |w| {
            write_tracking(w, r, &dates)
        })?;
    }
    let resolved =
        serde_json::json!({ "statistic": statistic(args.pmf_mode), "windows": series.len() });
    dir.finish(
        "track",
        args,
        &resolved,
        &[&args.benchmark, &args.sectors, &index_path],
    )
}

fn metacorr(args: &MetacorrArgs) -> Result<()> {
    let open = |p: &Path| -> Result<crate::estimator::CorrelationMatrix<f64>> {
        let file = File::open(p).map_err(|e| Error::io(p, e))?;
        read_correlation_csv(file)
    };
    println!("{:?}", metacorrelation(&open(&args.a)?, &open(&args.b)?)?);
    Ok(())
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Filter(a) => filter(a),
        Command::Cluster(a) => cluster(a),
        Command::Rolling(a) => rolling(a),
        Command::Compare(a) => compare(a),
        Command::Track(a) => track(a),
        Command::Metacorr(a) => metacorr(a),
    }
}

/// Runs a parsed command on a pool of `jobs` workers (all cores when unset).
pub fn run(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::invalid("--jobs must be at least 1"));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| Error::invalid(e.to_string()))?;
    pool.install(|| dispatch(&cli.command))
}
