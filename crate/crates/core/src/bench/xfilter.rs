//! Crossfilter interaction latencies over synthetic flights.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use super::{ms, BenchReport, BenchRun, Sample};
use crate::error::Result;
use crate::relstore::Relation;
use crate::xfilter::{Crossfilter, Strategy};

pub const FLIGHT_DIMS: [&str; 4] = ["latlon_bin", "day_bin", "delay_bin", "carrier"];

/// Latency of one single-bin brush.
#[derive(Clone, Debug, Serialize)]
pub struct Interaction {
    pub view: usize,
    pub bin: usize,
    pub ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossfilterRun {
    pub strategy: Strategy,
    pub rows: usize,
    pub capture_ms: f64,
    pub interactions: Vec<Interaction>,
}

impl CrossfilterRun {
    pub fn median_ms(&self) -> f64 {
        let mut v: Vec<f64> = self.interactions.iter().map(|i| i.ms).collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    /// View construction plus every interaction.
    pub fn cumulative_ms(&self) -> f64 {
        self.capture_ms + self.interactions.iter().map(|i| i.ms).sum::<f64>()
    }

    pub fn to_bench_run(&self) -> BenchRun {
        let samples: Vec<Sample> = self
            .interactions
            .iter()
            .map(|i| Sample {
                exec_ms: i.ms,
                ..Sample::default()
            })
            .collect();
        let params = json!({
            "rows": self.rows,
            "capture_ms": self.capture_ms,
            "median_ms": self.median_ms(),
            "cumulative_ms": self.cumulative_ms(),
        });
        BenchRun::from_samples("xfilter", params, self.strategy.name(), &samples)
    }
}

/// Brushes every bin of every view once, calling `check` with each result.
pub fn run_crossfilter(
    x: &Crossfilter,
    mut check: impl FnMut(usize, usize, &[Vec<i64>]),
) -> Result<Vec<Interaction>> {
    let mut out = Vec::new();
    for (v, view) in x.views().iter().enumerate() {
        for b in 0..view.keys.len() {
            let t = Instant::now();
            let counts = x.brush(v, &[b])?;
            let elapsed = ms(t);
            check(v, b, &counts);
            out.push(Interaction { view: v, bin: b, ms: elapsed });
        }
    }
    Ok(out)
}

pub fn bench_crossfilter(flights: Arc<Relation>, strategies: &[Strategy]) -> Result<(Vec<CrossfilterRun>, BenchReport)> {
    let mut runs = Vec::new();
    let mut report = BenchReport::default();
    for &s in strategies {
        let x = Crossfilter::new(flights.clone(), &FLIGHT_DIMS, s)?;
        let run = CrossfilterRun {
            strategy: s,
            rows: flights.row_count(),
            capture_ms: x.capture_ms,
            interactions: run_crossfilter(&x, |_, _, _| {})?,
        };
        report.push(run.to_bench_run());
        runs.push(run);
    }
    Ok((runs, report))
}
