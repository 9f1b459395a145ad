//! Linked count views over one table, refreshed when bins of one view are
//! brushed.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lineage::{LineageMap, Rid};
use crate::lineage_query::{ExecOptions, QueryResult, Session};
use crate::operators::CaptureMode;
use crate::relstore::{Catalog, Relation, Value};
use crate::workload::{Direction, ExtraGroupBy, Template, WorkloadSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// No capture; a shared selection scan re-groups the other views.
    Lazy,
    /// Backward indexes; an index scan re-groups the other views.
    Bt,
    /// Backward and forward indexes; forward rids address view bins directly.
    BtFt,
    /// Per-pair aggregate cubes filled while the views are computed.
    PartialCube,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Lazy, Strategy::Bt, Strategy::BtFt, Strategy::PartialCube];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Lazy => "lazy",
            Strategy::Bt => "bt",
            Strategy::BtFt => "bt_ft",
            Strategy::PartialCube => "partial_cube",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '+'], "_").as_str() {
            "lazy" => Ok(Strategy::Lazy),
            "bt" => Ok(Strategy::Bt),
            "btft" | "bt_ft" => Ok(Strategy::BtFt),
            "cube" | "partial_cube" | "partialcube" => Ok(Strategy::PartialCube),
            other => Err(Error::Invalid(format!("unknown crossfilter strategy {other}"))),
        }
    }
}

/// One `SELECT dim, count(*) ... GROUP BY dim` view.
#[derive(Clone, Debug)]
pub struct View {
    pub dim: String,
    pub handle: String,
    /// Bin keys in output order.
    pub keys: Vec<Value>,
    pub counts: Vec<i64>,
    col: usize,
    index: FxHashMap<Value, usize>,
}

impl View {
    pub fn bin_of(&self, key: &Value) -> Option<usize> {
        self.index.get(key).copied()
    }
}

pub struct Crossfilter {
    session: Session,
    base: Arc<Relation>,
    strategy: Strategy,
    views: Vec<View>,
    /// `cubes[x][y]`: result of view `x` carrying counts per bin of view `y`.
    cubes: Vec<Vec<Option<Arc<QueryResult>>>>,
    /// Time spent computing the views and capturing lineage.
    pub capture_ms: f64,
    /// Drop zero-count bins from brushed results.
    pub remove_empty: bool,
}

impl Crossfilter {
    pub fn new(base: Arc<Relation>, dims: &[&str], strategy: Strategy) -> Result<Crossfilter> {
        if dims.is_empty() {
            return Err(Error::Invalid("crossfilter needs at least one dimension".into()));
        }
        let mut catalog = Catalog::new();
        catalog.add_arc(base.clone());
        let mut session = Session::new(catalog);
        let name = base.name().to_string();
        let t = std::time::Instant::now();
        let mut views = Vec::with_capacity(dims.len());
        for (i, dim) in dims.iter().enumerate() {
            let col = base
                .schema()
                .index_of(dim)
                .ok_or_else(|| Error::Bind(format!("{name} has no attribute {dim}")))?;
            let opts = match strategy {
                Strategy::Lazy | Strategy::PartialCube => ExecOptions::mode(CaptureMode::None),
                Strategy::Bt => ExecOptions::mode(CaptureMode::Inject).with_workload(WorkloadSpec::backward(&name)),
                Strategy::BtFt => ExecOptions::mode(CaptureMode::Inject).with_workload(WorkloadSpec {
                    templates: vec![
                        Template::new(Direction::Backward, &name),
                        Template::new(Direction::Forward, &name),
                    ],
                }),
            };
            let handle = format!("view{i}");
            let r = session.execute_with(&view_sql(dim, &name), &opts.with_handle(handle.clone()))?;
            let keys: Vec<Value> = (0..r.row_count()).map(|o| r.relation().value(0, o as Rid)).collect();
            let counts = (0..r.row_count())
                .map(|o| match r.relation().value(1, o as Rid) {
                    Value::Int(c) => c,
                    other => unreachable!("count(*) produced {other:?}"),
                })
                .collect();
            let index = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
            views.push(View {
                dim: dim.to_string(),
                handle,
                keys,
                counts,
                col,
                index,
            });
        }
        let mut cubes = vec![vec![None; dims.len()]; dims.len()];
        if strategy == Strategy::PartialCube {
            for (x, row) in cubes.iter_mut().enumerate() {
                for (y, slot) in row.iter_mut().enumerate().filter(|(y, _)| *y != x) {
                    let mut t = Template::new(Direction::Backward, &name);
                    t.extra_groupby = Some(ExtraGroupBy {
                        attrs: vec![dims[y].to_string()],
                        aggs: vec!["count(*)".into()],
                    });
                    let opts = ExecOptions::mode(CaptureMode::Inject)
                        .with_workload(WorkloadSpec { templates: vec![t] })
                        .with_handle(format!("cube{x}_{y}"));
                    *slot = Some(session.execute_with(&view_sql(dims[x], &name), &opts)?);
                }
            }
        }
        let capture_ms = crate::bench::ms(t);
        Ok(Crossfilter {
            session,
            base,
            strategy,
            views,
            cubes,
            capture_ms,
            remove_empty: false,
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    /// Count vectors of every view after brushing `bins` of `view`, aligned
    /// with each view's bin order. The brushed view and an empty brush
    /// return the original counts.
    pub fn brush(&self, view: usize, bins: &[usize]) -> Result<Vec<Vec<i64>>> {
        let v = self
            .views
            .get(view)
            .ok_or_else(|| Error::Invalid(format!("unknown view {view}")))?;
        if let Some(&b) = bins.iter().find(|&&b| b >= v.keys.len()) {
            return Err(Error::Invalid(format!("view {view} has no bin {b}")));
        }
        if bins.is_empty() {
            return Ok(self.views.iter().map(|v| v.counts.clone()).collect());
        }
        let mut bins = bins.to_vec();
        bins.sort_unstable();
        bins.dedup();
        let bins = &bins[..];
        let mut out: Vec<Vec<i64>> = self.views.iter().map(|w| vec![0; w.keys.len()]).collect();
        match self.strategy {
            Strategy::Lazy => self.brush_lazy(view, bins, &mut out),
            Strategy::Bt => self.brush_bt(view, bins, &mut out)?,
            Strategy::BtFt => self.brush_btft(view, bins, &mut out)?,
            Strategy::PartialCube => self.brush_cube(view, bins, &mut out)?,
        }
        out[view] = v.counts.clone();
        if self.remove_empty {
            for c in &mut out {
                c.retain(|&n| n != 0);
            }
        }
        Ok(out)
    }

    /// Fresh hash tables per other view, counted from `rows`.
    fn regroup(&self, view: usize, rows: impl Iterator<Item = Rid>, out: &mut [Vec<i64>]) {
        let others: Vec<usize> = (0..self.views.len()).filter(|&z| z != view).collect();
        let mut tables: Vec<FxHashMap<Value, i64>> = vec![FxHashMap::default(); others.len()];
        for r in rows {
            for (t, &z) in tables.iter_mut().zip(&others) {
                *t.entry(self.base.value(self.views[z].col, r)).or_default() += 1;
            }
        }
        for (t, &z) in tables.into_iter().zip(&others) {
            let w = &self.views[z];
            for (k, c) in t {
                out[z][w.index[&k]] = c;
            }
        }
    }

    fn brush_lazy(&self, view: usize, bins: &[usize], out: &mut [Vec<i64>]) {
        let v = &self.views[view];
        let keys: FxHashSet<&Value> = bins.iter().map(|&b| &v.keys[b]).collect();
        let col = self.base.column(v.col);
        let n = self.base.row_count() as Rid;
        match (col.as_i64(), bins) {
            (Some(xs), [b]) => {
                let Value::Int(k) = v.keys[*b] else { unreachable!("integer column") };
                self.regroup(view, (0..n).filter(|&r| xs[r as usize] == k), out)
            }
            _ => self.regroup(view, (0..n).filter(|&r| keys.contains(&self.base.value(v.col, r))), out),
        }
    }

    fn brush_bt(&self, view: usize, bins: &[usize], out: &mut [Vec<i64>]) -> Result<()> {
        let bw = self.backward(view)?;
        let mut rids = Vec::new();
        for &b in bins {
            bw.for_each(b as Rid, |r| rids.push(r));
        }
        self.regroup(view, rids.into_iter(), out);
        Ok(())
    }

    fn brush_btft(&self, view: usize, bins: &[usize], out: &mut [Vec<i64>]) -> Result<()> {
        let bw = self.backward(view)?;
        let fws: Vec<(usize, &LineageMap)> = (0..self.views.len())
            .filter(|&z| z != view)
            .map(|z| Ok((z, self.forward(z)?)))
            .collect::<Result<_>>()?;
        let arrays: Option<Vec<(usize, &[Rid])>> = fws
            .iter()
            .map(|(z, m)| match m {
                LineageMap::Array(a) => Some((*z, a.as_slice())),
                _ => None,
            })
            .collect();
        match arrays {
            Some(arrays) => {
                for &b in bins {
                    bw.for_each(b as Rid, |r| {
                        for (z, fw) in &arrays {
                            out[*z][fw[r as usize] as usize] += 1;
                        }
                    });
                }
            }
            None => {
                for &b in bins {
                    bw.for_each(b as Rid, |r| {
                        for (z, fw) in &fws {
                            fw.for_each(r, |g| out[*z][g as usize] += 1);
                        }
                    });
                }
            }
        }
        Ok(())
    }

    fn brush_cube(&self, view: usize, bins: &[usize], out: &mut [Vec<i64>]) -> Result<()> {
        let outs: Vec<Rid> = bins.iter().map(|&b| b as Rid).collect();
        for (z, slot) in self.cubes[view].iter().enumerate() {
            let Some(r) = slot else { continue };
            let cube = r
                .output
                .lineage(self.base.name())
                .and_then(|l| l.cube.as_ref())
                .ok_or_else(|| Error::NoIndex {
                    handle: r.handle.clone(),
                    relation: self.base.name().to_string(),
                })?;
            let w = &self.views[z];
            for (key, states) in cube.merged(&outs) {
                if let Value::Int(c) = states[0].finish() {
                    out[z][w.index[&key[0]]] = c;
                }
            }
        }
        Ok(())
    }

    fn backward(&self, view: usize) -> Result<&LineageMap> {
        self.session.result(&self.views[view].handle)?.backward_map(self.base.name())
    }

    fn forward(&self, view: usize) -> Result<&LineageMap> {
        self.session.result(&self.views[view].handle)?.forward_map(self.base.name())
    }
}

fn view_sql(dim: &str, base: &str) -> String {
    format!("SELECT {dim}, count(*) FROM {base} GROUP BY {dim}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relstore::gen_flights;

    const DIMS: [&str; 4] = ["latlon_bin", "day_bin", "delay_bin", "carrier"];

    fn all(n: usize) -> Vec<Crossfilter> {
        let f = Arc::new(gen_flights(n, 11));
        Strategy::ALL
            .iter()
            .map(|&s| Crossfilter::new(f.clone(), &DIMS, s).unwrap())
            .collect()
    }

    #[test]
    fn strategies_agree_on_every_small_bin_set() {
        let xs = all(3_000);
        for view in 0..DIMS.len() {
            let nbins = xs[0].views()[view].keys.len();
            for b in (0..nbins).step_by(nbins / 20 + 1) {
                let bins = [b, (b * 7 + 3) % nbins];
                let want = xs[0].brush(view, &bins).unwrap();
                for x in &xs[1..] {
                    assert!(x.brush(view, &bins).unwrap() == want, "{} view {view} bins {bins:?}", x.strategy());
                }
                let brushed: i64 = {
                    let mut u = bins.to_vec();
                    u.dedup();
                    u.iter().map(|&b| xs[0].views()[view].counts[b]).sum()
                };
                for (z, c) in want.iter().enumerate().filter(|(z, _)| *z != view) {
                    assert_eq!(c.iter().sum::<i64>(), brushed, "conservation in view {z}");
                }
            }
        }
    }

    #[test]
    fn brushing_everything_restores_views() {
        for x in all(500) {
            let bins: Vec<usize> = (0..x.views()[3].keys.len()).collect();
            let got = x.brush(3, &bins).unwrap();
            let orig: Vec<Vec<i64>> = x.views().iter().map(|v| v.counts.clone()).collect();
            assert_eq!(got, orig, "{}", x.strategy());
            assert_eq!(x.brush(0, &[]).unwrap(), orig);
        }
    }

    #[test]
    fn zero_bins_are_kept_unless_removed() {
        let f = Arc::new(gen_flights(2_000, 3));
        let mut x = Crossfilter::new(f, &DIMS, Strategy::BtFt).unwrap();
        let got = x.brush(2, &[0]).unwrap();
        assert_eq!(got[0].len(), x.views()[0].keys.len());
        assert!(got[0].contains(&0));
        x.remove_empty = true;
        assert!(!x.brush(2, &[0]).unwrap()[0].contains(&0));
    }

    #[test]
    fn bad_requests_are_rejected() {
        let f = Arc::new(gen_flights(100, 3));
        assert!(Crossfilter::new(f.clone(), &["nope"], Strategy::Lazy).is_err());
        let x = Crossfilter::new(f, &DIMS, Strategy::Bt).unwrap();
        assert!(x.brush(9, &[0]).is_err());
        assert!(x.brush(2, &[999]).is_err());
    }
}
