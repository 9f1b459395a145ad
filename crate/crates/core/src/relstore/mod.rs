//! Relations, rid addressing, ingestion and synthetic data.

mod catalog;
mod generate;
mod load;
mod relation;
mod schema;
mod value;

pub use catalog::{Catalog, KeyMetadata};
pub use generate::{
    flights_schema, gen_flights, gen_gids, gen_zipf, gen_zipf_named, zipf_schema, CARRIERS,
    DAY_BINS, DELAY_BINS, LATLON_BINS, LATLON_HOT,
};
pub use load::{load_csv, load_csv_inferred, load_tbl, load_with, read_delimited, CsvOptions};
pub use relation::{Column, Relation, RelationBuilder, MAX_ROWS};
pub use schema::{DataType, Field, Schema};
pub use value::{date_day, date_month, date_year, format_date, parse_date, Value};
