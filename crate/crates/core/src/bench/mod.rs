//! Experiment drivers and machine-readable reports.

pub mod micro;
pub mod tpch;
pub mod xfilter;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::Result;
use crate::operators::OperatorOutput;

/// Warm-up and measured repetitions per configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Timing {
    pub warmups: usize,
    pub runs: usize,
}

impl Default for Timing {
    fn default() -> Self {
        Timing { warmups: 3, runs: 15 }
    }
}

/// One measured repetition.
#[derive(Clone, Debug, Default)]
pub struct Sample {
    pub exec_ms: f64,
    pub finalize_ms: f64,
    pub growth_events: u64,
    pub index_bytes: usize,
    /// Growth events per `relation.direction`.
    pub growth_detail: BTreeMap<String, u64>,
}

impl Sample {
    /// Times `f`, then resolves and inspects the lineage it produced.
    pub fn of(f: impl FnOnce() -> Result<OperatorOutput>) -> Result<Sample> {
        let t = Instant::now();
        let out = f()?;
        Ok(Sample::after(&out, ms(t)))
    }

    /// Finalizes `out`, produced in `exec_ms`, and inspects its lineage.
    pub fn after(out: &OperatorOutput, exec_ms: f64) -> Sample {
        let t = Instant::now();
        out.finalize();
        let finalize_ms = ms(t);
        let mut s = Sample {
            exec_ms,
            finalize_ms,
            ..Sample::default()
        };
        if let Some(b) = &out.bundle {
            s.growth_events = b.growth_events();
            s.index_bytes = b.index_bytes();
            for (name, l) in &b.data().relations {
                if let Some(m) = &l.backward {
                    s.growth_detail.insert(format!("{name}.backward"), m.growth_events());
                }
                if let Some(m) = &l.forward {
                    s.growth_detail.insert(format!("{name}.forward"), m.growth_events());
                }
            }
        }
        s
    }

    pub fn total_ms(&self) -> f64 {
        self.exec_ms + self.finalize_ms
    }
}

pub(crate) fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn measure(timing: Timing, mut f: impl FnMut() -> Result<Sample>) -> Result<Vec<Sample>> {
    for _ in 0..timing.warmups {
        f()?;
    }
    (0..timing.runs.max(1)).map(|_| f()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub name: String,
    pub params: Json,
    pub mode: String,
    /// Mean of execution plus deferred finalization.
    pub latency_ms: f64,
    pub exec_ms: f64,
    pub finalize_ms: f64,
    /// `latency_ms / latency_ms(none) - 1` for the same name and params.
    pub relative_overhead: Option<f64>,
    pub growth_events: u64,
    pub index_bytes: usize,
    #[serde(default)]
    pub growth_detail: BTreeMap<String, u64>,
    #[serde(default)]
    pub samples_ms: Vec<f64>,
}

impl BenchRun {
    pub fn from_samples(name: &str, params: Json, mode: &str, samples: &[Sample]) -> BenchRun {
        let n = samples.len().max(1) as f64;
        let mean = |f: &dyn Fn(&Sample) -> f64| samples.iter().map(f).sum::<f64>() / n;
        let last = samples.last().cloned().unwrap_or_default();
        BenchRun {
            name: name.to_string(),
            params,
            mode: mode.to_string(),
            latency_ms: mean(&|s| s.total_ms()),
            exec_ms: mean(&|s| s.exec_ms),
            finalize_ms: mean(&|s| s.finalize_ms),
            relative_overhead: None,
            growth_events: last.growth_events,
            index_bytes: last.index_bytes,
            growth_detail: last.growth_detail,
            samples_ms: samples.iter().map(Sample::total_ms).collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub runs: Vec<BenchRun>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    name: &'a str,
    params: String,
    mode: &'a str,
    latency_ms: f64,
    exec_ms: f64,
    finalize_ms: f64,
    relative_overhead: Option<f64>,
    growth_events: u64,
    index_bytes: usize,
}

impl BenchReport {
    pub fn push(&mut self, run: BenchRun) {
        self.runs.push(run);
    }

    pub fn extend(&mut self, other: BenchReport) {
        self.runs.extend(other.runs);
    }

    pub fn find(&self, name: &str, mode: &str) -> Option<&BenchRun> {
        self.runs.iter().find(|r| r.name == name && r.mode == mode)
    }

    /// Fills `relative_overhead` against the `none` run sharing name and params.
    pub fn compute_overheads(&mut self) {
        let base: Vec<(String, Json, f64)> = self
            .runs
            .iter()
            .filter(|r| r.mode == "none")
            .map(|r| (r.name.clone(), r.params.clone(), r.latency_ms))
            .collect();
        for r in &mut self.runs {
            r.relative_overhead = base
                .iter()
                .find(|(n, p, _)| *n == r.name && *p == r.params)
                .map(|(_, _, b)| r.latency_ms / b - 1.0);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.runs {
            w.serialize(CsvRow {
                name: &r.name,
                params: r.params.to_string(),
                mode: &r.mode,
                latency_ms: r.latency_ms,
                exec_ms: r.exec_ms,
                finalize_ms: r.finalize_ms,
                relative_overhead: r.relative_overhead,
                growth_events: r.growth_events,
                index_bytes: r.index_bytes,
            })
            .map_err(|e| crate::Error::Invalid(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `<stem>.json` and `<stem>.csv`.
    pub fn write(&self, stem: &Path) -> Result<()> {
        std::fs::write(stem.with_extension("json"), self.to_json())?;
        std::fs::write(stem.with_extension("csv"), self.to_csv()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(mode: &str, ms: f64) -> BenchRun {
        BenchRun::from_samples(
            "q",
            serde_json::json!({"n": 1}),
            mode,
            &[Sample {
                exec_ms: ms,
                ..Sample::default()
            }],
        )
    }

    #[test]
    fn overhead_is_relative_to_none() {
        let mut r = BenchReport::default();
        r.push(run("none", 10.0));
        r.push(run("inject", 15.0));
        r.compute_overheads();
        assert_eq!(r.runs[0].relative_overhead, Some(0.0));
        assert!((r.runs[1].relative_overhead.unwrap() - 0.5).abs() < 1e-12);
        let back: BenchReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let csv = r.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn mean_includes_finalize() {
        let s = [
            Sample {
                exec_ms: 2.0,
                finalize_ms: 1.0,
                ..Sample::default()
            },
            Sample {
                exec_ms: 4.0,
                finalize_ms: 1.0,
                ..Sample::default()
            },
        ];
        let r = BenchRun::from_samples("q", Json::Null, "defer", &s);
        assert_eq!(r.latency_ms, 4.0);
        assert_eq!(r.exec_ms, 3.0);
    }
}
