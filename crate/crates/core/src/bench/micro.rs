//! Single-operator capture microbenchmarks over zipf tables.

use std::str::FromStr;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::Serialize;

use super::{measure, BenchReport, BenchRun, Sample, Timing};
use crate::error::{Error, Result};
use crate::expr::{BinOp, Expr};
use crate::operators::{
    hashjoin, run_groupby, select, CaptureMode, CaptureSpec, GroupSpec, JoinOptions, OperatorOutput,
    Pipeline, TargetOptions,
};
use crate::planner::bind_aggregate;
use crate::relstore::{gen_gids, gen_zipf, gen_zipf_named, Relation, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MicroKind {
    GroupBy,
    PkFk,
    Mn,
    Select,
}

impl FromStr for MicroKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "groupby" => Ok(MicroKind::GroupBy),
            "pkfk" => Ok(MicroKind::PkFk),
            "mn" => Ok(MicroKind::Mn),
            "select" => Ok(MicroKind::Select),
            other => Err(Error::Invalid(format!("unknown microbenchmark {other}"))),
        }
    }
}

impl MicroKind {
    pub fn name(self) -> &'static str {
        match self {
            MicroKind::GroupBy => "groupby",
            MicroKind::PkFk => "pkfk",
            MicroKind::Mn => "mn",
            MicroKind::Select => "select",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MicroParams {
    /// Rows of the zipf table (the right table for `mn`).
    pub n: usize,
    pub groups: usize,
    pub theta: f64,
    /// Rows and groups of the left table for `mn`.
    pub left_n: usize,
    pub left_groups: usize,
    /// Fraction of rows kept by `select`.
    pub selectivity: f64,
    /// Also run capture with exact cardinalities from a prior pass.
    pub stats_cardinalities: bool,
    pub seed: u64,
}

impl Default for MicroParams {
    fn default() -> Self {
        MicroParams {
            n: 1_000_000,
            groups: 1000,
            theta: 1.0,
            left_n: 1000,
            left_groups: 10,
            selectivity: 0.5,
            stats_cardinalities: false,
            seed: 42,
        }
    }
}

/// A capture mode, optionally with exact cardinalities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Variant {
    pub mode: CaptureMode,
    pub exact: bool,
}

impl Variant {
    pub fn label(self) -> String {
        if self.exact {
            format!("{}+stats", self.mode)
        } else {
            self.mode.to_string()
        }
    }
}

/// Tables and operator for one microbenchmark configuration.
pub struct Micro {
    pub kind: MicroKind,
    pub params: MicroParams,
    left: Option<Arc<Relation>>,
    right: Arc<Relation>,
    spec: Option<GroupSpec>,
    pred: Option<Expr>,
}

impl Micro {
    pub fn new(kind: MicroKind, params: MicroParams) -> Result<Micro> {
        let p = &params;
        let zipf = |name: &str, n, g, seed| Arc::new(gen_zipf_named(name, n, g, p.theta, seed));
        let (left, right) = match kind {
            MicroKind::GroupBy | MicroKind::Select => (None, Arc::new(gen_zipf(p.n, p.groups, p.theta, p.seed))),
            MicroKind::PkFk => (
                Some(Arc::new(gen_gids(p.groups))),
                Arc::new(gen_zipf(p.n, p.groups, p.theta, p.seed)),
            ),
            MicroKind::Mn => (
                Some(zipf("zipf1", p.left_n, p.left_groups, p.seed)),
                zipf("zipf2", p.n, p.groups, p.seed + 1),
            ),
        };
        let spec = (kind == MicroKind::GroupBy)
            .then(|| -> Result<GroupSpec> {
                let z = right.schema().index_of("z").expect("zipf has z");
                let aggs = ["count(*)", "sum(v)", "sum(v*v)", "sum(sqrt(v))", "min(v)", "max(v)"]
                    .iter()
                    .map(|a| bind_aggregate(a, &right))
                    .collect::<Result<Vec<_>>>()?;
                Ok(GroupSpec {
                    keys: vec![("z".into(), Expr::col(0, z, "z"))],
                    aggs,
                })
            })
            .transpose()?;
        let pred = (kind == MicroKind::Select).then(|| {
            let v = right.schema().index_of("v").expect("zipf has v");
            Expr::binary(BinOp::Lt, Expr::col(0, v, "v"), Expr::lit(Value::Float(100.0 * p.selectivity)))
        });
        Ok(Micro {
            kind,
            params,
            left,
            right,
            spec,
            pred,
        })
    }

    /// Capture spec for `v`; exact variants carry cardinalities from a
    /// lineage-free pass.
    pub fn capture(&self, v: Variant) -> Result<CaptureSpec> {
        if !v.exact {
            return Ok(CaptureSpec::new(v.mode));
        }
        let mut rels: IndexMap<String, TargetOptions> = IndexMap::new();
        match self.kind {
            MicroKind::GroupBy => {
                let out = self.run(&CaptureSpec::none())?;
                let counts = int_column(&out.relation, 1)?;
                rels.insert(
                    self.right.name().into(),
                    TargetOptions {
                        backward_hints: Some(Arc::new(counts)),
                        ..TargetOptions::default()
                    },
                );
            }
            MicroKind::PkFk | MicroKind::Mn => {
                let left = self.left.as_ref().expect("joins have a left table");
                let lz = left.schema().index_of(if self.kind == MicroKind::PkFk { "id" } else { "z" });
                let lz = lz.expect("join key");
                let rz = self.right.schema().index_of("z").expect("zipf has z");
                let mut per_key: rustc_hash::FxHashMap<Value, usize> = Default::default();
                for r in 0..self.right.row_count() as u32 {
                    *per_key.entry(self.right.value(rz, r)).or_default() += 1;
                }
                let fw: Vec<usize> = (0..left.row_count() as u32)
                    .map(|r| per_key.get(&left.value(lz, r)).copied().unwrap_or(0))
                    .collect();
                rels.insert(
                    left.name().into(),
                    TargetOptions {
                        forward_hints: Some(Arc::new(fw)),
                        ..TargetOptions::default()
                    },
                );
                rels.insert(self.right.name().into(), TargetOptions::default());
            }
            MicroKind::Select => {
                let out = self.run(&CaptureSpec::none())?;
                let s = out.relation.row_count() as f64 / self.right.row_count().max(1) as f64;
                let mut opts = TargetOptions::default();
                opts.est_selectivity = Some(s);
                rels.insert(self.right.name().into(), opts);
            }
        }
        Ok(CaptureSpec::only(v.mode, rels))
    }

    pub fn run(&self, capture: &CaptureSpec) -> Result<OperatorOutput> {
        let scan = |r: &Arc<Relation>| OperatorOutput::scan(r.clone());
        match self.kind {
            MicroKind::GroupBy => {
                let p = Arc::new(Pipeline::scan(Arc::new(vec![scan(&self.right)]), 0));
                run_groupby(p, self.spec.as_ref().expect("groupby spec"), "groupby", capture, &[true])
            }
            MicroKind::PkFk => {
                let (l, r) = (self.left.as_ref().expect("left"), &self.right);
                let rz = r.schema().index_of("z").expect("zipf has z");
                hashjoin(&scan(l), &scan(r), &[0], &[rz], JoinOptions { pkfk: true }, capture)
            }
            MicroKind::Mn => {
                let (l, r) = (self.left.as_ref().expect("left"), &self.right);
                let lz = l.schema().index_of("z").expect("zipf has z");
                let rz = r.schema().index_of("z").expect("zipf has z");
                hashjoin(&scan(l), &scan(r), &[lz], &[rz], JoinOptions { pkfk: false }, capture)
            }
            MicroKind::Select => {
                let est = match &capture.scope {
                    crate::operators::CaptureScope::Only(m) => m.values().find_map(|o| o.est_selectivity),
                    _ => None,
                };
                select(&scan(&self.right), self.pred.as_ref().expect("predicate"), capture, est)
            }
        }
    }

    pub fn sample(&self, capture: &CaptureSpec) -> Result<Sample> {
        Sample::of(|| self.run(capture))
    }
}

fn int_column(rel: &Relation, c: usize) -> Result<Vec<usize>> {
    rel.column(c)
        .as_i64()
        .map(|v| v.iter().map(|&x| x as usize).collect())
        .ok_or_else(|| Error::Type(format!("column {c} of {} is not an integer", rel.name())))
}

/// Runs `kind` once per variant; `none` is always included for overheads.
pub fn bench_micro(kind: MicroKind, params: MicroParams, modes: &[CaptureMode], timing: Timing) -> Result<BenchReport> {
    let m = Micro::new(kind, params.clone())?;
    let mut variants: Vec<Variant> = vec![Variant {
        mode: CaptureMode::None,
        exact: false,
    }];
    for &mode in modes.iter().filter(|m| **m != CaptureMode::None) {
        variants.push(Variant { mode, exact: false });
        if params.stats_cardinalities && mode == CaptureMode::Inject {
            variants.push(Variant { mode, exact: true });
        }
    }
    let json = serde_json::to_value(&params)?;
    let mut report = BenchReport::default();
    for v in variants {
        let capture = m.capture(v)?;
        let samples = measure(timing, || m.sample(&capture))?;
        report.push(BenchRun::from_samples(kind.name(), json.clone(), &v.label(), &samples));
    }
    report.compute_overheads();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: MicroKind) -> Micro {
        Micro::new(
            kind,
            MicroParams {
                n: 20_000,
                groups: 100,
                ..MicroParams::default()
            },
        )
        .unwrap()
    }

    fn exact(m: &Micro) -> Sample {
        let c = m.capture(Variant {
            mode: CaptureMode::Inject,
            exact: true,
        })
        .unwrap();
        m.sample(&c).unwrap()
    }

    #[test]
    fn exact_cardinalities_avoid_growth() {
        for kind in [MicroKind::GroupBy, MicroKind::PkFk, MicroKind::Select] {
            let m = small(kind);
            assert_eq!(exact(&m).growth_events, 0, "{kind:?}");
            let plain = m.sample(&CaptureSpec::new(CaptureMode::Inject)).unwrap();
            assert!(plain.growth_events > 0, "{kind:?}");
        }
    }

    #[test]
    fn deferred_join_fills_left_forward_without_growth() {
        let m = small(MicroKind::Mn);
        let d = m.sample(&CaptureSpec::new(CaptureMode::Defer)).unwrap();
        assert_eq!(d.growth_detail["zipf1.forward"], 0);
        let i = m.sample(&CaptureSpec::new(CaptureMode::Inject)).unwrap();
        assert!(i.growth_detail["zipf1.forward"] > 0);
        assert_eq!(d.index_bytes > 0, i.index_bytes > 0);
    }

    #[test]
    fn report_has_every_variant() {
        let r = bench_micro(
            MicroKind::GroupBy,
            MicroParams {
                n: 5_000,
                groups: 10,
                stats_cardinalities: true,
                ..MicroParams::default()
            },
            &CaptureMode::ALL,
            Timing { warmups: 0, runs: 2 },
        )
        .unwrap();
        let modes: Vec<&str> = r.runs.iter().map(|r| r.mode.as_str()).collect();
        assert_eq!(modes, ["none", "inject", "inject+stats", "defer", "callback"]);
        assert!(r.runs.iter().all(|r| r.relative_overhead.is_some()));
    }
}
