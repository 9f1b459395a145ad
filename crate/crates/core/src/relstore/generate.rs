//! Seeded synthetic data generators.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;

use super::relation::{Column, Relation};
use super::schema::{DataType, Schema};

pub const LATLON_BINS: i64 = 65_536;
pub const DAY_BINS: i64 = 7_762;
pub const DELAY_BINS: i64 = 8;
pub const CARRIERS: i64 = 29;
/// Number of lat/lon cells that receive any rows.
pub const LATLON_HOT: usize = 8_100;

pub fn zipf_schema() -> Schema {
    Schema::of(&[
        ("id", DataType::Int64),
        ("z", DataType::Int64),
        ("v", DataType::Float64),
    ])
    .expect("static schema")
}

/// `zipf(id, z, v)` with `z` in `[1, g]`, `P(z = k) ∝ k^-theta`, `v ~ U[0, 100)`.
pub fn gen_zipf(n: usize, g: usize, theta: f64, seed: u64) -> Relation {
    gen_zipf_named("zipf", n, g, theta, seed)
}

pub fn gen_zipf_named(name: &str, n: usize, g: usize, theta: f64, seed: u64) -> Relation {
    assert!(g >= 1, "gen_zipf needs at least one group");
    assert!(theta >= 0.0, "gen_zipf needs a non-negative skew");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Zipf::new(g as f64, theta).expect("valid zipf parameters");
    let mut id = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        id.push(i as i64);
        let k = (dist.sample(&mut rng) as i64).clamp(1, g as i64);
        z.push(k);
        v.push(rng.random_range(0.0..100.0));
    }
    Relation::new(
        name,
        zipf_schema(),
        vec![Column::Int64(id), Column::Int64(z), Column::Float64(v)],
    )
    .expect("generated columns match schema")
}

/// `gids(id)` holding `1..=g`, the primary-key side of the pk-fk microbenchmark.
pub fn gen_gids(g: usize) -> Relation {
    let schema = Schema::of(&[("id", DataType::Int64)]).expect("static schema");
    Relation::new("gids", schema, vec![Column::Int64((1..=g as i64).collect())])
        .expect("generated columns match schema")
}

pub fn flights_schema() -> Schema {
    Schema::of(&[
        ("latlon_bin", DataType::Int64),
        ("day_bin", DataType::Int64),
        ("delay_bin", DataType::Int64),
        ("carrier", DataType::Int64),
    ])
    .expect("static schema")
}

/// Synthetic flights table with four binned dimensions.
///
/// Only `LATLON_HOT` of the lat/lon cells are populated, with a mild skew so
/// that nearly all of them are hit at 10^5 rows and above.
pub fn gen_flights(n: usize, seed: u64) -> Relation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hot: Vec<i64> = rand::seq::index::sample(&mut rng, LATLON_BINS as usize, LATLON_HOT)
        .into_iter()
        .map(|i| i as i64)
        .collect();
    let cell = Zipf::new(LATLON_HOT as f64, 0.5).expect("valid zipf parameters");
    let carrier = Zipf::new(CARRIERS as f64, 1.0).expect("valid zipf parameters");
    let delay = WeightedIndex::new([40u32, 25, 12, 8, 6, 4, 3, 2]).expect("positive weights");

    let mut latlon = Vec::with_capacity(n);
    let mut day = Vec::with_capacity(n);
    let mut delay_bin = Vec::with_capacity(n);
    let mut carrier_bin = Vec::with_capacity(n);
    for _ in 0..n {
        let k = (cell.sample(&mut rng) as usize).clamp(1, LATLON_HOT);
        latlon.push(hot[k - 1]);
        day.push(rng.random_range(0..DAY_BINS));
        delay_bin.push(delay.sample(&mut rng) as i64);
        carrier_bin.push((carrier.sample(&mut rng) as i64).clamp(1, CARRIERS) - 1);
    }
    Relation::new(
        "flights",
        flights_schema(),
        vec![
            Column::Int64(latlon),
            Column::Int64(day),
            Column::Int64(delay_bin),
            Column::Int64(carrier_bin),
        ],
    )
    .expect("generated columns match schema")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    #[test]
    fn empty_relations_keep_schema() {
        let z = gen_zipf(0, 10, 1.0, 1);
        assert_eq!(z.row_count(), 0);
        assert_eq!(z.schema().len(), 3);
        assert_eq!(gen_flights(0, 1).row_count(), 0);
    }

    #[test]
    fn zipf_is_deterministic_and_in_range() {
        let a = gen_zipf(1000, 50, 1.2, 7);
        let b = gen_zipf(1000, 50, 1.2, 7);
        assert_eq!(a, b);
        let z = a.column(1).as_i64().unwrap();
        assert!(z.iter().all(|&k| (1..=50).contains(&k)));
        let v = a.column(2).as_f64().unwrap();
        assert!(v.iter().all(|&x| (0.0..100.0).contains(&x)));
        assert_ne!(a, gen_zipf(1000, 50, 1.2, 8));
    }

    #[test]
    fn uniform_zipf_frequencies() {
        let n = 1_000_000;
        let r = gen_zipf(n, 10, 0.0, 42);
        let mut counts: HashMap<i64, usize> = HashMap::new();
        for &k in r.column(1).as_i64().unwrap() {
            *counts.entry(k).or_default() += 1;
        }
        assert_eq!(counts.len(), 10);
        let expect = n as f64 / 10.0;
        for (&k, &c) in &counts {
            let dev = (c as f64 - expect).abs() / expect;
            assert!(dev < 0.01, "z={k} count {c} deviates {dev:.4}");
        }
    }

    #[test]
    fn skewed_zipf_follows_power_law() {
        let n = 200_000;
        let r = gen_zipf(n, 100, 1.0, 3);
        let mut counts = vec![0usize; 101];
        for &k in r.column(1).as_i64().unwrap() {
            counts[k as usize] += 1;
        }
        let h: f64 = (1..=100).map(|k| 1.0 / k as f64).sum();
        for k in [1usize, 2, 5, 10] {
            let expect = n as f64 / (k as f64 * h);
            let dev = (counts[k] as f64 - expect).abs() / expect;
            assert!(dev < 0.05, "k={k} observed {} expected {expect:.0}", counts[k]);
        }
    }

    #[test]
    fn flights_domains() {
        let r = gen_flights(100_000, 9);
        let bounds = [LATLON_BINS, DAY_BINS, DELAY_BINS, CARRIERS];
        for (c, &hi) in bounds.iter().enumerate() {
            let col = r.column(c).as_i64().unwrap();
            assert!(col.iter().all(|&x| (0..hi).contains(&x)));
        }
        assert_eq!(r, gen_flights(100_000, 9));
    }

    #[test]
    fn flights_latlon_sparsity_full() {
        let r = gen_flights(1_000_000, 1);
        let distinct: HashSet<i64> = r.column(0).as_i64().unwrap().iter().copied().collect();
        assert!((7500..=8700).contains(&distinct.len()), "{}", distinct.len());
    }
}
