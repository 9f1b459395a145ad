//! TPC-H query capture overheads.

use std::time::Instant;

use serde_json::json;

use super::{measure, ms, BenchReport, BenchRun, Sample, Timing};
use crate::error::Result;
use crate::lineage_query::{ExecOptions, Session};
use crate::operators::CaptureMode;
use crate::relstore::Catalog;
use crate::tpch::Query;

/// Runs each query under every mode; `none` is always included.
pub fn bench_tpch(catalog: &Catalog, queries: &[Query], modes: &[CaptureMode], timing: Timing) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    let mut modes: Vec<CaptureMode> = modes.iter().copied().filter(|m| *m != CaptureMode::None).collect();
    modes.insert(0, CaptureMode::None);
    let mut s = Session::new(catalog.clone());
    let rows = catalog.get("lineitem").map_or(0, |r| r.row_count());
    for &q in queries {
        for &mode in &modes {
            let opts = ExecOptions::mode(mode).with_handle("bench");
            let samples = measure(timing, || {
                let t = Instant::now();
                let r = s.execute_with(q.sql(), &opts)?;
                let exec_ms = ms(t);
                let sample = Sample::after(&r.output, exec_ms);
                s.drop_result("bench");
                Ok(sample)
            })?;
            let params = json!({"query": q.name(), "lineitem_rows": rows});
            report.push(BenchRun::from_samples(q.name(), params, &mode.to_string(), &samples));
        }
    }
    report.compute_overheads();
    Ok(report)
}
