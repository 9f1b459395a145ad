//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use smoke_core::lineage_query::{ExecOptions, QueryResult, Session};
use smoke_core::operators::CaptureMode;
use smoke_core::relstore::{gen_zipf, Catalog};

pub const SEED: u64 = 42;

/// A session over `zipf(n, g, θ=1)` with `SELECT z, count(*), sum(v)` captured.
pub fn grouped_zipf(n: usize, g: usize) -> (Session, Arc<QueryResult>) {
    let mut c = Catalog::new();
    c.add(gen_zipf(n, g, 1.0, SEED));
    let mut s = Session::new(c);
    let r = s
        .execute_with(
            "SELECT z, count(*), sum(v) FROM zipf GROUP BY z",
            &ExecOptions::mode(CaptureMode::Inject).with_handle("base"),
        )
        .expect("grouped zipf query");
    (s, r)
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_has_every_group() {
        let (_, r) = super::grouped_zipf(10_000, 20);
        assert_eq!(r.row_count(), 20);
    }
}
