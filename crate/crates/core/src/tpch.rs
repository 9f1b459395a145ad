//! TPC-H tables, the benchmark queries and a lineage replay check.

use std::fmt::Display;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde_json::Value as Json;

use tpchgen::generators::{CustomerGenerator, LineItemGenerator, NationGenerator, OrderGenerator};

use crate::error::{Error, Result};
use crate::lineage::Rid;
use crate::lineage_query::{ExecOptions, Session};
use crate::operators::CaptureMode;
use crate::workload::{Direction, ExtraGroupBy, ParamPredicate, Template, WorkloadSpec};
use crate::relstore::{load_tbl, Catalog, DataType, KeyMetadata, Relation, Schema, Value};

pub const TABLES: [&str; 4] = ["nation", "customer", "orders", "lineitem"];

pub fn schema(table: &str) -> Result<Schema> {
    use DataType::{Date, Float64 as F, Int64 as I, Text as T};
    let cols: &[(&str, DataType)] = match table {
        "nation" => &[("n_nationkey", I), ("n_name", T), ("n_regionkey", I), ("n_comment", T)],
        "customer" => &[
            ("c_custkey", I),
            ("c_name", T),
            ("c_address", T),
            ("c_nationkey", I),
            ("c_phone", T),
            ("c_acctbal", F),
            ("c_mktsegment", T),
            ("c_comment", T),
        ],
        "orders" => &[
            ("o_orderkey", I),
            ("o_custkey", I),
            ("o_orderstatus", T),
            ("o_totalprice", F),
            ("o_orderdate", Date),
            ("o_orderpriority", T),
            ("o_clerk", T),
            ("o_shippriority", I),
            ("o_comment", T),
        ],
        "lineitem" => &[
            ("l_orderkey", I),
            ("l_partkey", I),
            ("l_suppkey", I),
            ("l_linenumber", I),
            ("l_quantity", F),
            ("l_extendedprice", F),
            ("l_discount", F),
            ("l_tax", F),
            ("l_returnflag", T),
            ("l_linestatus", T),
            ("l_shipdate", Date),
            ("l_commitdate", Date),
            ("l_receiptdate", Date),
            ("l_shipinstruct", T),
            ("l_shipmode", T),
            ("l_comment", T),
        ],
        other => return Err(Error::UnknownRelation(other.to_string())),
    };
    Schema::of(cols)
}

pub fn keys() -> KeyMetadata {
    KeyMetadata::from_json(
        r#"{"primary_keys": {
            "nation": ["n_nationkey"],
            "customer": ["c_custkey"],
            "orders": ["o_orderkey"],
            "lineitem": ["l_orderkey", "l_linenumber"]}}"#,
    )
    .expect("static key metadata")
}

fn write_tbl<T: Display>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<table>.tbl` for every table in [`TABLES`].
pub fn generate(sf: f64, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_tbl(&dir.join("nation.tbl"), NationGenerator::new(sf, 1, 1).iter())?;
    write_tbl(&dir.join("customer.tbl"), CustomerGenerator::new(sf, 1, 1).iter())?;
    write_tbl(&dir.join("orders.tbl"), OrderGenerator::new(sf, 1, 1).iter())?;
    write_tbl(&dir.join("lineitem.tbl"), LineItemGenerator::new(sf, 1, 1).iter())?;
    Ok(())
}

/// Reads the tables of [`TABLES`] from `dir`.
pub fn load(dir: &Path) -> Result<Catalog> {
    let mut c = Catalog::new().with_keys(keys());
    for t in TABLES {
        let path = dir.join(format!("{t}.tbl"));
        if !path.exists() {
            return Err(Error::Invalid(format!("missing table file {}", path.display())));
        }
        c.add(load_tbl(&path, &schema(t)?)?);
    }
    Ok(c)
}

/// Generates into a fresh temporary directory and loads the result.
pub fn generate_catalog(sf: f64) -> Result<Catalog> {
    let dir = std::env::temp_dir().join(format!("smoke-tpch-{}-{sf}", std::process::id()));
    generate(sf, &dir)?;
    let c = load(&dir);
    let _ = std::fs::remove_dir_all(&dir);
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Query {
    Q1,
    Q3,
    Q10,
    Q12,
}

impl FromStr for Query {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q1" => Ok(Query::Q1),
            "q3" => Ok(Query::Q3),
            "q10" => Ok(Query::Q10),
            "q12" => Ok(Query::Q12),
            other => Err(Error::Invalid(format!("unknown TPC-H query {other}"))),
        }
    }
}

pub const Q1: &str = "SELECT l_returnflag, l_linestatus, \
    sum(l_quantity) AS sum_qty, \
    sum(l_extendedprice) AS sum_base_price, \
    sum(l_extendedprice * (1 - l_discount)) AS sum_disc_price, \
    sum(l_extendedprice * (1 - l_discount) * (1 + l_tax)) AS sum_charge, \
    avg(l_quantity) AS avg_qty, \
    avg(l_extendedprice) AS avg_price, \
    avg(l_discount) AS avg_disc, \
    count(*) AS count_order \
    FROM lineitem \
    WHERE l_shipdate < '1998-12-01' \
    GROUP BY l_returnflag, l_linestatus";

pub const Q3: &str = "SELECT l_orderkey, sum(l_extendedprice * (1 - l_discount)) AS revenue, \
    o_orderdate, o_shippriority \
    FROM customer, orders, lineitem \
    WHERE c_mktsegment = 'BUILDING' AND c_custkey = o_custkey AND l_orderkey = o_orderkey \
    AND o_orderdate < date '1995-03-15' AND l_shipdate > date '1995-03-15' \
    GROUP BY l_orderkey, o_orderdate, o_shippriority";

pub const Q10: &str = "SELECT c_custkey, c_name, sum(l_extendedprice * (1 - l_discount)) AS revenue, \
    c_acctbal, n_name, c_address, c_phone, c_comment \
    FROM customer, orders, lineitem, nation \
    WHERE c_custkey = o_custkey AND l_orderkey = o_orderkey \
    AND o_orderdate >= date '1993-10-01' AND o_orderdate < date '1994-01-01' \
    AND l_returnflag = 'R' AND c_nationkey = n_nationkey \
    GROUP BY c_custkey, c_name, c_acctbal, c_phone, n_name, c_address, c_comment";

pub const Q12: &str = "SELECT l_shipmode, \
    sum(CASE WHEN o_orderpriority = '1-URGENT' OR o_orderpriority = '2-HIGH' THEN 1 ELSE 0 END) AS high_line_count, \
    sum(CASE WHEN o_orderpriority <> '1-URGENT' AND o_orderpriority <> '2-HIGH' THEN 1 ELSE 0 END) AS low_line_count \
    FROM orders, lineitem \
    WHERE o_orderkey = l_orderkey AND l_shipmode IN ('MAIL', 'SHIP') \
    AND l_commitdate < l_receiptdate AND l_shipdate < l_commitdate \
    AND l_receiptdate >= date '1994-01-01' AND l_receiptdate < date '1995-01-01' \
    GROUP BY l_shipmode";

impl Query {
    pub const ALL: [Query; 4] = [Query::Q1, Query::Q3, Query::Q10, Query::Q12];

    pub fn sql(self) -> &'static str {
        match self {
            Query::Q1 => Q1,
            Query::Q3 => Q3,
            Query::Q10 => Q10,
            Query::Q12 => Q12,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Query::Q1 => "q1",
            Query::Q3 => "q3",
            Query::Q10 => "q10",
            Query::Q12 => "q12",
        }
    }

    /// Base tables in FROM order.
    pub fn tables(self) -> &'static [&'static str] {
        match self {
            Query::Q1 => &["lineitem"],
            Query::Q3 => &["customer", "orders", "lineitem"],
            Query::Q10 => &["customer", "orders", "lineitem", "nation"],
            Query::Q12 => &["orders", "lineitem"],
        }
    }

    /// The query with every base table replaced by the backward lineage of
    /// output row `out` of `handle`.
    pub fn replay_sql(self, handle: &str, out: Rid) -> String {
        let sql = self.sql();
        let from = sql.find(" FROM ").expect("queries have FROM") + 6;
        let end = sql.find(" WHERE ").expect("queries have WHERE");
        let traced: Vec<String> = self
            .tables()
            .iter()
            .map(|t| format!("backward({handle}, [{out}], {t}) {t}"))
            .collect();
        format!("{}{}{}", &sql[..from], traced.join(", "), &sql[end..])
    }
}

/// Whether two aggregate values agree: exactly, or within `rel` relative
/// error for floats.
pub fn close(a: &Value, b: &Value, rel: f64) -> bool {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => x == y || (x - y).abs() <= rel * x.abs().max(y.abs()),
        _ => a == b,
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReplayOutcome {
    pub rows: usize,
    /// Output rows whose replay disagreed, with a description.
    pub mismatches: Vec<(Rid, String)>,
}

/// Runs `q` with capture, then for every output row re-runs the query over
/// that row's backward lineage (unfused plan) and compares the single
/// resulting row.
pub fn replay_check(catalog: Catalog, q: Query, rel: f64) -> Result<ReplayOutcome> {
    let mut s = Session::new(catalog);
    let base = s.execute_with(q.sql(), &ExecOptions::mode(CaptureMode::Inject).with_handle("base"))?;
    let out: &Relation = base.relation();
    let mut outcome = ReplayOutcome {
        rows: out.row_count(),
        ..ReplayOutcome::default()
    };
    let replay_opts = ExecOptions::mode(CaptureMode::None).naive(true).with_handle("replay");
    for o in 0..out.row_count() as Rid {
        let r = s.execute_with(&q.replay_sql("base", o), &replay_opts)?;
        let got = r.relation();
        let want = out.row(o);
        let ok = got.row_count() == 1 && got.row(0).iter().zip(&want).all(|(a, b)| close(a, b, rel));
        if !ok {
            let got: Vec<Vec<Value>> = got.rows().collect();
            outcome.mismatches.push((o, format!("expected {want:?}, replay gave {got:?}")));
        }
    }
    Ok(outcome)
}

pub const SHIPMODES: [&str; 7] = ["AIR", "FOB", "MAIL", "RAIL", "REG AIR", "SHIP", "TRUCK"];
pub const SHIPINSTRUCTS: [&str; 4] = ["COLLECT COD", "DELIVER IN PERSON", "NONE", "TAKE BACK RETURN"];

const Q1_AGGS: &str = "sum(l_quantity) AS sum_qty, sum(l_extendedprice) AS sum_base_price, \
    sum(l_extendedprice * (1 - l_discount)) AS sum_disc_price, \
    sum(l_extendedprice * (1 - l_discount) * (1 + l_tax)) AS sum_charge, \
    avg(l_quantity) AS avg_qty, avg(l_extendedprice) AS avg_price, avg(l_discount) AS avg_disc, \
    count(*) AS count_order";

const YEAR: &str = "extract(year from l_shipdate)";
const MONTH: &str = "extract(month from l_shipdate)";

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Drill-down variants of Q1 over lineage, with their scan-based rewrites.
pub mod drill {
    use super::*;

    /// Q1_a: year and month breakdown of output `o` of the Q1 result `q1`.
    pub fn q1a(q1: &str, o: Rid) -> String {
        format!("SELECT {YEAR}, {MONTH}, {Q1_AGGS} FROM backward({q1}, [{o}], lineitem) GROUP BY {YEAR}, {MONTH}")
    }

    /// Q1_a as a filtered scan for the Q1 group (`returnflag`, `linestatus`).
    pub fn q1a_lazy(returnflag: &str, linestatus: &str) -> String {
        format!(
            "SELECT {YEAR}, {MONTH}, {Q1_AGGS} FROM lineitem \
             WHERE l_shipdate < '1998-12-01' AND l_linestatus = {} AND l_returnflag = {} \
             GROUP BY {YEAR}, {MONTH}",
            quote(linestatus),
            quote(returnflag)
        )
    }

    /// Q1_b: Q1_a restricted to one shipping mode and instruction.
    pub fn q1b(q1: &str, o: Rid, shipmode: &str, shipinstruct: &str) -> String {
        format!(
            "SELECT {YEAR}, {MONTH}, {Q1_AGGS} FROM backward({q1}, [{o}], lineitem) \
             WHERE l_shipinstruct = {} AND l_shipmode = {} GROUP BY {YEAR}, {MONTH}",
            quote(shipinstruct),
            quote(shipmode)
        )
    }

    pub fn q1b_lazy(returnflag: &str, linestatus: &str, shipmode: &str, shipinstruct: &str) -> String {
        format!(
            "SELECT {YEAR}, {MONTH}, {Q1_AGGS} FROM lineitem \
             WHERE l_shipdate < '1998-12-01' AND l_shipinstruct = {} AND l_shipmode = {} \
             AND l_linestatus = {} AND l_returnflag = {} GROUP BY {YEAR}, {MONTH}",
            quote(shipinstruct),
            quote(shipmode),
            quote(linestatus),
            quote(returnflag)
        )
    }

    /// Q1_c: output `o` of the Q1_b result `q1b` further split by tax rate.
    pub fn q1c(q1b: &str, o: Rid) -> String {
        format!(
            "SELECT {YEAR}, {MONTH}, l_tax, {Q1_AGGS} FROM backward({q1b}, [{o}], lineitem) \
             GROUP BY {YEAR}, {MONTH}, l_tax"
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn q1c_lazy(
        returnflag: &str,
        linestatus: &str,
        shipmode: &str,
        shipinstruct: &str,
        year: i64,
        month: i64,
    ) -> String {
        format!(
            "SELECT {YEAR}, {MONTH}, l_tax, {Q1_AGGS} FROM lineitem \
             WHERE l_shipdate < '1998-12-01' AND l_shipinstruct = {} AND l_shipmode = {} \
             AND l_linestatus = {} AND l_returnflag = {} AND {YEAR} = {year} AND {MONTH} = {month} \
             GROUP BY {YEAR}, {MONTH}, l_tax",
            quote(shipinstruct),
            quote(shipmode),
            quote(linestatus),
            quote(returnflag)
        )
    }

    /// Workload partitioning Q1's backward lineage by mode and instruction.
    pub fn skipping_workload() -> WorkloadSpec {
        let mut t = Template::new(Direction::Backward, "lineitem");
        t.param_predicates = vec![
            ParamPredicate {
                attr: "l_shipmode".into(),
                domain: SHIPMODES.iter().map(|s| Json::from(*s)).collect(),
            },
            ParamPredicate {
                attr: "l_shipinstruct".into(),
                domain: SHIPINSTRUCTS.iter().map(|s| Json::from(*s)).collect(),
            },
        ];
        WorkloadSpec { templates: vec![t] }
    }

    /// Workload precomputing the Q1 aggregates per year, month and tax rate.
    pub fn pushdown_workload() -> WorkloadSpec {
        let mut t = Template::new(Direction::Backward, "lineitem");
        t.extra_groupby = Some(ExtraGroupBy {
            attrs: vec![YEAR.into(), MONTH.into(), "l_tax".into()],
            aggs: Q1_AGGS
                .split(", ")
                .map(|a| a.rsplit_once(" AS ").map_or(a, |(e, _)| e).trim().to_string())
                .collect(),
        });
        WorkloadSpec { templates: vec![t] }
    }
}

/// Rows of `r` ordered by their leading `keys` columns, for multiset comparison.
pub fn sorted_rows(r: &Relation, keys: usize) -> Vec<Vec<Value>> {
    let mut v: Vec<Vec<Value>> = r.rows().collect();
    v.sort_by(|a, b| {
        a[..keys]
            .iter()
            .zip(&b[..keys])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    v
}

/// Whether `a` and `b` hold the same groups with aggregates within `rel`.
pub fn same_groups(a: &Relation, b: &Relation, keys: usize, rel: f64) -> bool {
    let (x, y) = (sorted_rows(a, keys), sorted_rows(b, keys));
    x.len() == y.len()
        && x.iter()
            .zip(&y)
            .all(|(p, q)| p.len() == q.len() && p.iter().zip(q).all(|(u, v)| close(u, v, rel)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_text_swaps_tables() {
        let s = Query::Q12.replay_sql("h", 3);
        assert!(s.contains("FROM backward(h, [3], orders) orders, backward(h, [3], lineitem) lineitem WHERE"));
    }

    #[test]
    fn float_tolerance() {
        assert!(close(&Value::Float(1.0), &Value::Float(1.0 + 1e-12), 1e-9));
        assert!(!close(&Value::Float(1.0), &Value::Float(1.001), 1e-9));
        assert!(!close(&Value::Int(1), &Value::Int(2), 1e-9));
    }
}
