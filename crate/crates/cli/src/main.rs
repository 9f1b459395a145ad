use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use smoke_core::bench::micro::{bench_micro, MicroKind, MicroParams};
use smoke_core::bench::tpch::bench_tpch;
use smoke_core::bench::xfilter::bench_crossfilter;
use smoke_core::bench::{BenchReport, Timing};
use smoke_core::fd::{profile, Approach, Fd};
use smoke_core::lineage::Rid;
use smoke_core::lineage_query::{ExecOptions, Session};
use smoke_core::operators::CaptureMode;
use smoke_core::relstore::{gen_flights, load_csv_inferred, Catalog};
use smoke_core::tpch::{self, Query};
use smoke_core::xfilter::Strategy;

#[derive(Parser)]
#[command(name = "smoke", version, about = "Lineage-capturing query engine")]
struct Cli {
    /// Seed for generated data.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Measured runs per configuration.
    #[arg(long, global = true, default_value_t = 5)]
    runs: usize,
    /// Unmeasured runs before measuring.
    #[arg(long, global = true, default_value_t = 1)]
    warmups: usize,
    /// Write `<out>.json` and `<out>.csv` instead of printing JSON.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and emit a report.
    #[command(subcommand)]
    Bench(Bench),
    /// Data profiling.
    #[command(subcommand)]
    Profile(Profile),
    /// Generate TPC-H tables as `.tbl` files.
    Tpchgen {
        #[arg(long, default_value_t = 0.01)]
        sf: f64,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run one SQL query and print its result.
    Query(QueryArgs),
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Subcommand)]
enum Bench {
    Micro(MicroArgs),
    Tpch(TpchArgs),
    Xfilter(XfilterArgs),
}

#[derive(Args)]
struct MicroArgs {
    #[arg(long, default_value = "groupby", value_parser = parse_kind)]
    kind: MicroKind,
    #[arg(long, default_value = "1e6", value_parser = parse_count)]
    n: usize,
    #[arg(long, default_value = "1000", value_parser = parse_count)]
    groups: usize,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Left table rows for `mn`.
    #[arg(long, default_value = "1000", value_parser = parse_count)]
    left_n: usize,
    /// Left table groups for `mn`.
    #[arg(long, default_value = "10", value_parser = parse_count)]
    left_groups: usize,
    /// Fraction of rows kept by `select`.
    #[arg(long, default_value_t = 0.5)]
    selectivity: f64,
    #[arg(long, default_value = "none,inject,defer,callback", value_parser = parse_modes)]
    modes: List<CaptureMode>,
    /// Also run Inject with exact cardinalities from a prior pass.
    #[arg(long)]
    stats_cardinalities: bool,
}

#[derive(Args)]
struct TpchArgs {
    #[arg(long, default_value = "all", value_parser = parse_queries)]
    query: List<Query>,
    /// Directory of `.tbl` files; generated in memory when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    sf: f64,
    #[arg(long, default_value = "none,inject,defer", value_parser = parse_modes)]
    modes: List<CaptureMode>,
}

#[derive(Args)]
struct XfilterArgs {
    #[arg(long, default_value = "lazy,bt,btft", value_parser = parse_strategies)]
    strategy: List<Strategy>,
    #[arg(long, default_value = "1e6", value_parser = parse_count)]
    rows: usize,
}

#[derive(Subcommand)]
enum Profile {
    /// Find functional dependency violations in a CSV table.
    Fd {
        #[arg(long)]
        table: PathBuf,
        /// `lhs1,lhs2->rhs`; repeatable.
        #[arg(long = "fd", required = true)]
        fds: Vec<Fd>,
        #[arg(long, default_value = "ug")]
        approach: Approach,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        /// Print the violating keys and rids as JSON.
        #[arg(long)]
        graph: bool,
    },
}

#[derive(Args)]
struct QueryArgs {
    sql: String,
    /// `name=path.csv`; repeatable.
    #[arg(long = "table")]
    tables: Vec<String>,
    /// Directory of TPC-H `.tbl` files.
    #[arg(long)]
    tpch: Option<PathBuf>,
    /// Generate TPC-H at this scale factor.
    #[arg(long)]
    sf: Option<f64>,
    #[arg(long, default_value = "inject")]
    mode: CaptureMode,
    /// Print the backward lineage of this output row.
    #[arg(long)]
    trace: Option<Rid>,
    /// Print the physical plan instead of running.
    #[arg(long)]
    explain: bool,
}

fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e15 => Ok(x as usize),
        _ => Err(format!("{s:?} is not a row count")),
    }
}

fn parse_kind(s: &str) -> Result<MicroKind, String> {
    s.parse().map_err(|e: smoke_core::Error| e.to_string())
}

/// Comma-separated flag value, or `all`.
#[derive(Clone)]
struct List<T>(Vec<T>);

fn parse_list<T>(s: &str, all: &[T]) -> Result<List<T>, String>
where
    T: std::str::FromStr<Err = smoke_core::Error> + Copy,
{
    if s.eq_ignore_ascii_case("all") {
        return Ok(List(all.to_vec()));
    }
    let items = s.split(',').map(|p| p.trim().parse::<T>().map_err(|e| e.to_string()));
    items.collect::<Result<_, _>>().map(List)
}

fn parse_modes(s: &str) -> Result<List<CaptureMode>, String> {
    parse_list(s, &CaptureMode::ALL)
}

fn parse_queries(s: &str) -> Result<List<Query>, String> {
    parse_list(s, &Query::ALL)
}

fn parse_strategies(s: &str) -> Result<List<Strategy>, String> {
    parse_list(s, &Strategy::ALL)
}

fn emit(report: &BenchReport, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(stem) => {
            report.write(stem)?;
            for r in &report.runs {
                let over = r.relative_overhead.map_or(String::new(), |o| format!(" overhead {o:.3}"));
                println!("{} {} {:.3} ms{over}", r.name, r.mode, r.latency_ms);
            }
            eprintln!("wrote {}.json and {}.csv", stem.display(), stem.display());
        }
        None => println!("{}", report.to_json()),
    }
    Ok(())
}

fn tpch_catalog(data: Option<&PathBuf>, sf: f64) -> Result<Catalog> {
    Ok(match data {
        Some(dir) => tpch::load(dir)?,
        None => tpch::generate_catalog(sf)?,
    })
}

fn run_query(q: &QueryArgs) -> Result<()> {
    let mut catalog = if q.tpch.is_some() || q.sf.is_some() {
        tpch_catalog(q.tpch.as_ref(), q.sf.unwrap_or(0.01))?
    } else {
        Catalog::new()
    };
    for t in &q.tables {
        let (name, path) = t.split_once('=').with_context(|| format!("--table {t:?} is not name=path"))?;
        catalog.add(load_csv_inferred(path, ',')?.renamed(name));
    }
    let mut s = Session::new(catalog);
    let opts = ExecOptions::mode(q.mode);
    if q.explain {
        println!("{}", s.explain(&q.sql, &opts)?);
        return Ok(());
    }
    let r = s.execute_with(&q.sql, &opts)?;
    let rel = r.relation();
    let header: Vec<&str> = rel.schema().fields().iter().map(|f| f.name.as_str()).collect();
    println!("{}", header.join(","));
    for row in rel.rows() {
        println!("{}", row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    }
    eprintln!(
        "{} rows in {:.3} ms, {} base scans",
        r.row_count(),
        r.stats.total_ms,
        r.stats.base_scans
    );
    if let Some(o) = q.trace {
        for base in r.lineage_relations() {
            println!("{base}: {:?}", s.backward(&r.handle, &[o], &base)?);
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let timing = Timing {
        warmups: cli.warmups,
        runs: cli.runs.max(1),
    };
    match &cli.command {
        Command::Bench(Bench::Micro(a)) => {
            let params = MicroParams {
                n: a.n,
                groups: a.groups,
                theta: a.theta,
                left_n: a.left_n,
                left_groups: a.left_groups,
                selectivity: a.selectivity,
                stats_cardinalities: a.stats_cardinalities,
                seed: cli.seed,
            };
            emit(&bench_micro(a.kind, params, &a.modes.0, timing)?, &cli.out)
        }
        Command::Bench(Bench::Tpch(a)) => {
            let catalog = tpch_catalog(a.data.as_ref(), a.sf)?;
            emit(&bench_tpch(&catalog, &a.query.0, &a.modes.0, timing)?, &cli.out)
        }
        Command::Bench(Bench::Xfilter(a)) => {
            let flights = Arc::new(gen_flights(a.rows, cli.seed));
            let (runs, report) = bench_crossfilter(flights, &a.strategy.0)?;
            for r in &runs {
                eprintln!(
                    "{}: capture {:.1} ms, median {:.3} ms, cumulative {:.1} ms over {} brushes",
                    r.strategy,
                    r.capture_ms,
                    r.median_ms(),
                    r.cumulative_ms(),
                    r.interactions.len()
                );
            }
            emit(&report, &cli.out)
        }
        Command::Profile(Profile::Fd {
            table,
            fds,
            approach,
            delimiter,
            graph,
        }) => {
            let t = Arc::new(load_csv_inferred(table, *delimiter)?);
            let (g, report) = profile(t, fds, *approach)?;
            for fd in fds {
                eprintln!("{fd}: {} violating values", g.violations(fd).len());
            }
            if *graph {
                println!("{}", serde_json::to_string_pretty(&g)?);
            }
            emit(&report, &cli.out)
        }
        Command::Tpchgen { sf, data } => {
            if *sf <= 0.0 {
                bail!("--sf must be positive");
            }
            std::fs::create_dir_all(data)?;
            tpch::generate(*sf, data)?;
            eprintln!("wrote {} tables to {}", tpch::TABLES.len(), data.display());
            Ok(())
        }
        Command::Query(q) => run_query(q),
        Command::Serve { host, port } => {
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on {host}:{port}");
            rt.block_on(smoke_server::serve(host, *port))?;
            Ok(())
        }
    }
}
