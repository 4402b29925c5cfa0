//! Command-line benchmark harness.
//!
//! Subcommands build an index, run the static/streaming/ensemble protocols,
//! or emit brute-force ground truth. Datasets come from fvecs/ivecs files or
//! from a built-in synthetic generator when `--base` is absent. Options can
//! also be supplied via `--config` as `key=value` lines; explicit flags win.

use clap::{Args, Parser, Subcommand};
use mycelium::bench::dataset::{load_fvecs, load_ground_truth, synthetic_dataset, write_ivecs, Dataset};
use mycelium::bench::metrics::ground_truth;
use mycelium::bench::protocol::{
    ensemble_table, run_ensemble, run_static, run_streaming, static_table, stream_table,
    EnsembleConfig, StaticBenchConfig, StreamConfig, StreamVariant,
};
use mycelium::bench::report::{ReportFormat, Table};
use mycelium::graph::{IndexConfig, MyceliumIndex};
use mycelium::storage::StorageConfig;
use mycelium::{Error, Result};
use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "mycelium", about = "Streaming ANN index benchmark harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index and print construction statistics.
    Build(CommonArgs),
    /// Recall/ef sweep on a fixed index.
    StaticBench(StaticArgs),
    /// Churn cycles: deletes plus replacement inserts, recall per cycle.
    StreamBench(StreamArgs),
    /// Two shuffled-build indexes, per-query overlap and merged recall.
    EnsembleBench(CommonArgs),
    /// Exact brute-force ground truth, written as ivecs.
    Gt(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Base vectors (fvecs). Synthetic data is generated when absent.
    #[arg(long)]
    base: Option<PathBuf>,
    /// Query vectors (fvecs).
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Ground-truth ids (ivecs); computed on the fly when absent.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// key=value option file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    ef: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Storage RAM budget, e.g. 256M or 1G.
    #[arg(long)]
    ram_limit: Option<String>,
    /// Quantize stored vectors to 8-bit codes (true/false).
    #[arg(long)]
    quantize: Option<bool>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: csv or markdown.
    #[arg(long)]
    format: Option<String>,
    /// Exit nonzero unless the report satisfies e.g. "recall>=0.9"
    /// (checked against the last row).
    #[arg(long, value_name = "EXPR")]
    assert: Vec<String>,
    /// Synthetic dataset size when --base is absent.
    #[arg(long)]
    n_base: Option<usize>,
    #[arg(long)]
    n_queries: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
}

#[derive(Args)]
struct StaticArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated ef sweep, e.g. 48,64,96.
    #[arg(long)]
    ef_list: Option<String>,
}

#[derive(Args)]
struct StreamArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    cycles: Option<usize>,
    /// Fraction of live nodes replaced per cycle.
    #[arg(long)]
    turnover: Option<f64>,
    /// full, no-refresh, pure-o1, ok-all, or tombstone.
    #[arg(long)]
    variant: Option<String>,
    /// Initial build size; the rest of the base feeds the stream.
    #[arg(long)]
    initial: Option<usize>,
    /// Queries issued per cycle (0 = the whole query set).
    #[arg(long)]
    queries_per_cycle: Option<usize>,
}

/// key=value lines; '#' starts a comment.
fn load_config(path: &PathBuf) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => {
                return Err(Error::InvalidArgument(format!(
                    "config line {}: expected key=value, got '{line}'",
                    i + 1
                )))
            }
        }
    }
    Ok(map)
}

fn resolve<T: FromStr>(
    flag: Option<T>,
    config: &HashMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match config.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("config {key}='{raw}' failed to parse"))),
        None => Ok(default),
    }
}

fn parse_size(s: &str) -> Result<usize> {
    let s = s.trim();
    let (num, mult) = match s.chars().last() {
        Some('K' | 'k') => (&s[..s.len() - 1], 1usize << 10),
        Some('M' | 'm') => (&s[..s.len() - 1], 1usize << 20),
        Some('G' | 'g') => (&s[..s.len() - 1], 1usize << 30),
        _ => (s, 1),
    };
    num.trim()
        .parse::<usize>()
        .map(|n| n * mult)
        .map_err(|_| Error::InvalidArgument(format!("bad size '{s}'")))
}

/// Resolved options shared by every subcommand.
struct Resolved {
    dataset: Dataset,
    k: usize,
    ef: usize,
    seed: u64,
    ram_limit: usize,
    quantize: bool,
    out: Option<PathBuf>,
    format: ReportFormat,
    asserts: Vec<String>,
    config: HashMap<String, String>,
}

fn resolve_common(args: &CommonArgs) -> Result<Resolved> {
    let config = match &args.config {
        Some(p) => load_config(p)?,
        None => HashMap::new(),
    };
    let seed = resolve(args.seed, &config, "seed", 42)?;
    let n_base = resolve(args.n_base, &config, "n_base", 10_000)?;
    let n_queries = resolve(args.n_queries, &config, "n_queries", 100)?;
    let dim = resolve(args.dim, &config, "dim", 32)?;
    let clusters = resolve(args.clusters, &config, "clusters", 16)?;

    let base_path = args.base.clone().or_else(|| config.get("base").map(PathBuf::from));
    let queries_path = args
        .queries
        .clone()
        .or_else(|| config.get("queries").map(PathBuf::from));
    let gt_path = args.gt.clone().or_else(|| config.get("gt").map(PathBuf::from));

    let dataset = match base_path {
        Some(bp) => {
            let base = load_fvecs(&bp)?;
            let queries = match queries_path {
                Some(qp) => load_fvecs(&qp)?,
                None => {
                    return Err(Error::InvalidArgument(
                        "--queries is required when --base is given".into(),
                    ))
                }
            };
            let ground_truth = match gt_path {
                Some(gp) => Some(load_ground_truth(&gp)?),
                None => None,
            };
            Dataset {
                base,
                queries,
                ground_truth,
            }
        }
        None => synthetic_dataset(n_base, n_queries, dim, clusters, seed),
    };

    let ram_default = StorageConfig::default().ram_limit_bytes;
    let ram_limit = match args
        .ram_limit
        .clone()
        .or_else(|| config.get("ram_limit").cloned())
    {
        Some(s) => parse_size(&s)?,
        None => ram_default,
    };
    let format = resolve(
        args.format.clone(),
        &config,
        "format",
        "csv".to_string(),
    )?
    .parse::<ReportFormat>()?;

    Ok(Resolved {
        dataset,
        k: resolve(args.k, &config, "k", 10)?,
        ef: resolve(args.ef, &config, "ef", 64)?,
        seed,
        ram_limit,
        quantize: resolve(args.quantize, &config, "quantize", true)?,
        out: args.out.clone().or_else(|| config.get("out").map(PathBuf::from)),
        format,
        asserts: args.assert.clone(),
        config,
    })
}

fn emit(table: &Table, r: &Resolved) -> Result<()> {
    let text = table.render(r.format);
    match &r.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Check "column OP value" (OP in >=, <=, >, <, ==) against the last row.
fn check_assert(table: &Table, expr: &str) -> Result<bool> {
    let ops = [">=", "<=", "==", ">", "<"];
    let (col, op, rhs) = ops
        .iter()
        .find_map(|op| {
            expr.split_once(op)
                .map(|(c, v)| (c.trim(), *op, v.trim()))
        })
        .ok_or_else(|| Error::InvalidArgument(format!("bad assert '{expr}'")))?;
    let ci = table
        .columns
        .iter()
        .position(|c| c == col)
        .ok_or_else(|| Error::InvalidArgument(format!("assert column '{col}' not in report")))?;
    let row = table
        .rows
        .last()
        .ok_or(Error::EmptyInput("report rows"))?;
    let lhs: f64 = row[ci]
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("non-numeric cell '{}'", row[ci])))?;
    let rhs: f64 = rhs
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad assert value '{rhs}'")))?;
    Ok(match op {
        ">=" => lhs >= rhs,
        "<=" => lhs <= rhs,
        ">" => lhs > rhs,
        "<" => lhs < rhs,
        _ => lhs == rhs,
    })
}

fn gate(table: &Table, r: &Resolved) -> Result<bool> {
    let mut ok = true;
    for expr in &r.asserts {
        let passed = check_assert(table, expr)?;
        eprintln!("assert {expr}: {}", if passed { "pass" } else { "FAIL" });
        ok &= passed;
    }
    Ok(ok)
}

fn cmd_build(args: &CommonArgs) -> Result<bool> {
    let r = resolve_common(args)?;
    let dim = r.dataset.base[0].len();
    let config = IndexConfig {
        storage: StorageConfig {
            quantize: r.quantize,
            ram_limit_bytes: r.ram_limit,
            ..Default::default()
        },
        seed: r.seed,
        ..Default::default()
    };
    let mut idx = MyceliumIndex::new(dim, config)?;
    if r.quantize {
        idx.fit_quantizer(r.dataset.base.iter().map(|v| v.as_slice()))?;
    }
    let start = std::time::Instant::now();
    for chunk in r.dataset.base.chunks(512) {
        idx.insert_batch(chunk)?;
    }
    let secs = start.elapsed().as_secs_f64();
    let (mean_degree, max_degree, _) = idx.degree_stats();
    let mut t = Table::new(&["nodes", "dim", "mean_degree", "max_degree", "ram_bytes"]);
    t.push_row(vec![
        idx.len().to_string(),
        dim.to_string(),
        format!("{mean_degree:.6}"),
        max_degree.to_string(),
        idx.ram_usage().to_string(),
    ]);
    eprintln!("built {} nodes in {secs:.2}s", idx.len());
    emit(&t, &r)?;
    gate(&t, &r)
}

fn cmd_static(args: &StaticArgs) -> Result<bool> {
    let r = resolve_common(&args.common)?;
    let ef_list_raw = args
        .ef_list
        .clone()
        .or_else(|| r.config.get("ef_list").cloned());
    let ef_list = match ef_list_raw {
        Some(s) => s
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad ef '{x}'")))
            })
            .collect::<Result<Vec<_>>>()?,
        None => vec![48, 64, 96, 128, 192, 256],
    };
    let cfg = StaticBenchConfig {
        k: r.k,
        ef_list,
        seed: r.seed,
        quantize: r.quantize,
        ram_limit: r.ram_limit,
    };
    let rows = run_static(&r.dataset, &cfg)?;
    for row in &rows {
        eprintln!(
            "ef={} recall={:.4} mean_query={:.1}us",
            row.ef, row.recall, row.mean_query_us
        );
    }
    let t = static_table(&rows);
    emit(&t, &r)?;
    gate(&t, &r)
}

fn cmd_stream(args: &StreamArgs) -> Result<bool> {
    let r = resolve_common(&args.common)?;
    let variant = args
        .variant
        .clone()
        .or_else(|| r.config.get("variant").cloned())
        .unwrap_or_else(|| "full".into())
        .parse::<StreamVariant>()?;
    let cfg = StreamConfig {
        initial: resolve(args.initial, &r.config, "initial", 0)?,
        cycles: resolve(args.cycles, &r.config, "cycles", 20)?,
        turnover: resolve(args.turnover, &r.config, "turnover", 0.05)?,
        k: r.k,
        ef: r.ef,
        queries_per_cycle: resolve(args.queries_per_cycle, &r.config, "queries_per_cycle", 0)?,
        refresh_every: resolve(None, &r.config, "refresh_every", 10)?,
        variant,
        seed: r.seed,
        quantize: r.quantize,
        ram_limit: r.ram_limit,
    };
    let reports = run_streaming(&r.dataset, &cfg)?;
    for rep in &reports {
        eprintln!(
            "cycle {}: recall={:.4} degree={:.1} dead={:.3} hub_frac={:.2} wall={:.0}ms",
            rep.cycle,
            rep.recall,
            rep.mean_degree,
            rep.dead_fraction,
            rep.hub_delete_fraction,
            rep.wall_ms
        );
    }
    let t = stream_table(&reports);
    emit(&t, &r)?;
    gate(&t, &r)
}

fn cmd_ensemble(args: &CommonArgs) -> Result<bool> {
    let r = resolve_common(args)?;
    let cfg = EnsembleConfig {
        k: r.k,
        ef: r.ef,
        seed: r.seed,
        quantize: r.quantize,
    };
    let report = run_ensemble(&r.dataset, &cfg)?;
    let t = ensemble_table(&report);
    emit(&t, &r)?;
    gate(&t, &r)
}

fn cmd_gt(args: &CommonArgs) -> Result<bool> {
    let r = resolve_common(args)?;
    let gt = ground_truth(&r.dataset.base, &r.dataset.queries, r.k);
    match &r.out {
        Some(path) => write_ivecs(path, &gt)?,
        None => {
            for row in &gt {
                let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                println!("{}", cells.join(","));
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Build(a) => cmd_build(a),
        Command::StaticBench(a) => cmd_static(a),
        Command::StreamBench(a) => cmd_stream(a),
        Command::EnsembleBench(a) => cmd_ensemble(a),
        Command::Gt(a) => cmd_gt(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
