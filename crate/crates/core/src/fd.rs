//! Functional dependency violations and the tuples behind them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Serialize, Serializer};

use crate::bench::{ms, BenchReport, BenchRun, Sample};
use crate::error::{Error, Result};
use crate::lineage::Rid;
use crate::lineage_query::{ExecOptions, Session};
use crate::operators::CaptureMode;
use crate::relstore::{Catalog, Relation, Value};

/// `lhs -> rhs`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fd {
    pub lhs: Vec<String>,
    pub rhs: String,
}

impl Fd {
    pub fn new(lhs: &[&str], rhs: &str) -> Fd {
        Fd {
            lhs: lhs.iter().map(|s| s.to_string()).collect(),
            rhs: rhs.to_string(),
        }
    }
}

impl fmt::Display for Fd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.lhs.join(","), self.rhs)
    }
}

impl FromStr for Fd {
    type Err = Error;

    /// Parses `a,b->c`.
    fn from_str(s: &str) -> Result<Fd> {
        let (l, r) = s
            .split_once("->")
            .ok_or_else(|| Error::Invalid(format!("functional dependency {s:?} lacks '->'")))?;
        let lhs: Vec<String> = l.split(',').map(|a| a.trim().to_string()).filter(|a| !a.is_empty()).collect();
        let rhs = r.trim().to_string();
        if lhs.is_empty() || rhs.is_empty() {
            return Err(Error::Invalid(format!("functional dependency {s:?} has an empty side")));
        }
        Ok(Fd { lhs, rhs })
    }
}

impl Serialize for Fd {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    /// One grouped query with a distinct-count filter.
    Cd,
    /// Distinct queries per attribute, composed through lineage.
    Ug,
}

impl Approach {
    pub fn name(self) -> &'static str {
        match self {
            Approach::Cd => "cd",
            Approach::Ug => "ug",
        }
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cd" => Ok(Approach::Cd),
            "ug" => Ok(Approach::Ug),
            other => Err(Error::Invalid(format!("unknown approach {other}"))),
        }
    }
}

/// FD -> violating lhs values -> sorted rids carrying them.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FdViolationGraph {
    pub edges: BTreeMap<Fd, BTreeMap<String, Vec<Rid>>>,
    #[serde(skip)]
    keys: BTreeMap<Fd, BTreeMap<String, Vec<Value>>>,
}

impl FdViolationGraph {
    fn insert(&mut self, fd: &Fd, key: Vec<Value>, mut rids: Vec<Rid>) {
        rids.sort_unstable();
        rids.dedup();
        let label = label(&key);
        self.keys.entry(fd.clone()).or_default().insert(label.clone(), key);
        self.edges.entry(fd.clone()).or_default().insert(label, rids);
    }

    /// Violating lhs values of `fd`.
    pub fn violations(&self, fd: &Fd) -> Vec<&[Value]> {
        self.keys
            .get(fd)
            .map_or_else(Vec::new, |m| m.values().map(|v| v.as_slice()).collect())
    }

    pub fn rids(&self, fd: &Fd, key: &[Value]) -> Option<&[Rid]> {
        self.edges.get(fd)?.get(&label(key)).map(|v| v.as_slice())
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().flat_map(|m| m.values()).map(Vec::len).sum()
    }
}

fn label(key: &[Value]) -> String {
    key.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn check_attrs(t: &Relation, fd: &Fd) -> Result<()> {
    for a in fd.lhs.iter().chain([&fd.rhs]) {
        if t.schema().index_of(a).is_none() {
            return Err(Error::Bind(format!("{} has no attribute {a}", t.name())));
        }
    }
    Ok(())
}

fn cd(s: &mut Session, t: &str, fd: &Fd, g: &mut FdViolationGraph) -> Result<()> {
    let lhs = fd.lhs.join(", ");
    let sql = format!("SELECT {lhs} FROM {t} GROUP BY {lhs} HAVING count(DISTINCT {}) > 1", fd.rhs);
    let r = s.execute_with(&sql, &ExecOptions::mode(CaptureMode::Inject).with_handle("fd_cd"))?;
    let bw = r.backward_map(t)?;
    for o in 0..r.row_count() as Rid {
        g.insert(fd, r.relation().row(o), bw.targets(o));
    }
    Ok(())
}

fn ug(s: &mut Session, t: &str, fd: &Fd, g: &mut FdViolationGraph) -> Result<()> {
    let opts = |h: &str| ExecOptions::mode(CaptureMode::Inject).with_handle(h);
    let qa = s.execute_with(&format!("SELECT DISTINCT {} FROM {t}", fd.lhs.join(", ")), &opts("fd_ug_a"))?;
    let qb = s.execute_with(&format!("SELECT DISTINCT {} FROM {t}", fd.rhs), &opts("fd_ug_b"))?;
    let bw = qa.backward_map(t)?;
    let fw = qb.forward_map(t)?;
    let mut seen: Vec<u32> = vec![u32::MAX; qb.row_count()];
    for a in 0..qa.row_count() as Rid {
        let rids = bw.targets(a);
        let mut distinct = 0usize;
        for &r in &rids {
            fw.for_each(r, |b| {
                if seen[b as usize] != a {
                    seen[b as usize] = a;
                    distinct += 1;
                }
            });
        }
        if distinct > 1 {
            g.insert(fd, qa.relation().row(a), rids);
        }
    }
    Ok(())
}

/// Violations of every FD over `table`, with timings per FD.
pub fn profile(table: Arc<Relation>, fds: &[Fd], approach: Approach) -> Result<(FdViolationGraph, BenchReport)> {
    for fd in fds {
        check_attrs(&table, fd)?;
    }
    let name = table.name().to_string();
    let mut catalog = Catalog::new();
    catalog.add_arc(table);
    let mut s = Session::new(catalog);
    let mut g = FdViolationGraph::default();
    let mut report = BenchReport::default();
    for fd in fds {
        let t = Instant::now();
        match approach {
            Approach::Cd => cd(&mut s, &name, fd, &mut g)?,
            Approach::Ug => ug(&mut s, &name, fd, &mut g)?,
        }
        let sample = Sample {
            exec_ms: ms(t),
            ..Sample::default()
        };
        let params = serde_json::json!({"fd": fd.to_string(), "violations": g.violations(fd).len()});
        report.push(BenchRun::from_samples("fd", params, approach.name(), &[sample]));
    }
    Ok((g, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relstore::{DataType, RelationBuilder, Schema};

    fn table(a: &[&str], b: &[i64]) -> Arc<Relation> {
        let schema = Schema::of(&[("a", DataType::Text), ("b", DataType::Int64)]).unwrap();
        let mut rb = RelationBuilder::new("t", schema);
        for (x, y) in a.iter().zip(b) {
            rb.push_row(vec![Value::text(x), Value::Int(*y)]).unwrap();
        }
        Arc::new(rb.finish().unwrap())
    }

    #[test]
    fn hand_checked_violation() {
        let t = table(&["x", "x", "y"], &[1, 2, 1]);
        let fd = Fd::new(&["a"], "b");
        for approach in [Approach::Cd, Approach::Ug] {
            let (g, report) = profile(t.clone(), &[fd.clone()], approach).unwrap();
            assert_eq!(g.violations(&fd), vec![&[Value::text("x")][..]]);
            assert_eq!(g.rids(&fd, &[Value::text("x")]).unwrap(), &[0, 1]);
            assert_eq!(report.runs.len(), 1);
        }
    }

    #[test]
    fn unique_lhs_has_no_violations() {
        let t = table(&["x", "y", "z"], &[1, 1, 2]);
        let fd = Fd::new(&["a"], "b");
        for approach in [Approach::Cd, Approach::Ug] {
            assert_eq!(profile(t.clone(), &[fd.clone()], approach).unwrap().0.edge_count(), 0);
        }
    }

    #[test]
    fn parse_and_reject() {
        let fd: Fd = "zip, city -> state".parse().unwrap();
        assert_eq!(fd, Fd::new(&["zip", "city"], "state"));
        assert_eq!(fd.to_string(), "zip,city->state");
        assert!("zip".parse::<Fd>().is_err());
        assert!(profile(table(&["x"], &[1]), &[Fd::new(&["q"], "b")], Approach::Cd).is_err());
    }
}
