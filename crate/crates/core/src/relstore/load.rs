use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use super::relation::{Column, Relation, MAX_ROWS};
use super::schema::{DataType, Schema};
use super::value::parse_date;
use crate::error::{Error, Result};

/// Options for delimited text ingestion.
#[derive(Clone, Copy, Debug)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: true,
        }
    }
}

/// Loads a delimited file with a header line. A trailing delimiter at the end
/// of each line is accepted, as in TPC-H `.tbl` files.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema, delimiter: char) -> Result<Relation> {
    let opts = CsvOptions {
        delimiter: delimiter as u8,
        has_header: true,
    };
    load_with(path, schema, opts)
}

/// Loads a headed delimited file, typing each column as the narrowest of
/// integer, float and text that fits every cell.
pub fn load_csv_inferred(path: impl AsRef<Path>, delimiter: char) -> Result<Relation> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .has_headers(true)
        .from_path(path)
        .map_err(|e| load_err(&source, 0, 0, e.to_string()))?;
    let header = reader.headers().map_err(|e| load_err(&source, 1, 0, e.to_string()))?.clone();
    let mut types = vec![DataType::Int64; header.len()];
    for rec in reader.records() {
        let rec = rec.map_err(|e| load_err(&source, e.position().map_or(0, |p| p.line()), 0, e.to_string()))?;
        for (t, cell) in types.iter_mut().zip(rec.iter()) {
            if *t == DataType::Int64 && cell.parse::<i64>().is_err() {
                *t = DataType::Float64;
            }
            if *t == DataType::Float64 && cell.parse::<f64>().is_err() {
                *t = DataType::Text;
            }
        }
    }
    let fields: Vec<(&str, DataType)> = header.iter().zip(types).collect();
    load_csv(path, &Schema::of(&fields)?, delimiter)
}

/// Loads a header-less TPC-H `.tbl` file.
pub fn load_tbl(path: impl AsRef<Path>, schema: &Schema) -> Result<Relation> {
    let opts = CsvOptions {
        delimiter: b'|',
        has_header: false,
    };
    load_with(path, schema, opts)
}

pub fn load_with(path: impl AsRef<Path>, schema: &Schema, opts: CsvOptions) -> Result<Relation> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "relation".into());
    let file = File::open(path)?;
    read_delimited(file, &path.display().to_string(), name, schema, opts)
}

/// Parses delimited text from any reader. `source` is used in error messages.
pub fn read_delimited<R: Read>(
    input: R,
    source: &str,
    name: String,
    schema: &Schema,
    opts: CsvOptions,
) -> Result<Relation> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut columns: Vec<Column> = schema.fields().iter().map(|f| Column::empty(f.dtype)).collect();
    let ncols = schema.len();
    let mut record = csv::StringRecord::new();
    let mut first = true;
    let mut rows = 0usize;
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            load_err(source, line, 0, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if first && opts.has_header {
            first = false;
            continue;
        }
        first = false;
        let mut n = record.len();
        if n == ncols + 1 && record.get(ncols) == Some("") {
            n = ncols;
        }
        if n != ncols {
            return Err(load_err(
                source,
                line,
                n.min(ncols) + 1,
                format!("expected {ncols} fields, found {n}"),
            ));
        }
        for (i, (field, col)) in schema.fields().iter().zip(columns.iter_mut()).enumerate() {
            let cell = &record[i];
            parse_cell(cell, field.dtype, col).map_err(|msg| load_err(source, line, i + 1, msg))?;
        }
        rows += 1;
        if rows > MAX_ROWS {
            return Err(Error::TooManyRows(rows));
        }
    }
    Relation::new(name, schema.clone(), columns)
}

fn load_err(source: &str, line: u64, column: usize, message: String) -> Error {
    Error::Load {
        path: source.to_string(),
        line,
        column,
        message,
    }
}

fn parse_cell(cell: &str, dtype: DataType, col: &mut Column) -> std::result::Result<(), String> {
    if cell.is_empty() && dtype != DataType::Text {
        return Err("empty cell (NULL values are not supported)".into());
    }
    match (dtype, col) {
        (DataType::Int64, Column::Int64(v)) => v.push(
            cell.parse::<i64>()
                .map_err(|_| format!("{cell:?} is not an int64"))?,
        ),
        (DataType::Float64, Column::Float64(v)) => v.push(
            cell.parse::<f64>()
                .map_err(|_| format!("{cell:?} is not a float64"))?,
        ),
        (DataType::Date, Column::Date(v)) => {
            v.push(parse_date(cell).ok_or_else(|| format!("{cell:?} is not a YYYY-MM-DD date"))?)
        }
        (DataType::Bool, Column::Bool(v)) => v.push(match cell {
            "true" => true,
            "false" => false,
            _ => return Err(format!("{cell:?} is not a bool")),
        }),
        (DataType::Text, Column::Text(v)) => v.push(Arc::from(cell)),
        _ => unreachable!("column built from schema"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relstore::Value;

    fn read(text: &str, schema: &Schema, opts: CsvOptions) -> Result<Relation> {
        read_delimited(text.as_bytes(), "mem", "t".into(), schema, opts)
    }

    #[test]
    fn inferred_types() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("people.csv");
        std::fs::write(&p, "zip,score,city\n02139,1.5,Cambridge\n10001,2,NYC\nx1,3,Boston\n").unwrap();
        let r = load_csv_inferred(&p, ',').unwrap();
        assert_eq!(r.name(), "people");
        let types: Vec<DataType> = r.schema().fields().iter().map(|f| f.dtype).collect();
        assert_eq!(types, [DataType::Text, DataType::Float64, DataType::Text]);
        assert_eq!(r.value(0, 0), Value::text("02139"));
    }

    #[test]
    fn three_lines() {
        let s = Schema::of(&[("a", DataType::Int64), ("b", DataType::Text)]).unwrap();
        let r = read("a,b\n1,a\n2,b\n3,c\n", &s, CsvOptions::default()).unwrap();
        assert_eq!(r.row_count(), 3);
        assert_eq!(r.row(1), vec![Value::Int(2), Value::text("b")]);
    }

    #[test]
    fn header_only() {
        let s = Schema::of(&[("a", DataType::Int64)]).unwrap();
        let r = read("a\n", &s, CsvOptions::default()).unwrap();
        assert_eq!(r.row_count(), 0);
    }

    #[test]
    fn errors_carry_position() {
        let s = Schema::of(&[("a", DataType::Int64), ("b", DataType::Float64)]).unwrap();
        let err = read("a,b\n1,2.0\n2,x\n", &s, CsvOptions::default()).unwrap_err();
        match err {
            Error::Load { line, column, .. } => assert_eq!((line, column), (3, 2)),
            other => panic!("unexpected {other}"),
        }
        let err = read("a,b\n1.5,2.0\n", &s, CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Load { line: 2, column: 1, .. }));
    }

    #[test]
    fn empty_numeric_cell_is_rejected() {
        let s = Schema::of(&[("a", DataType::Int64), ("b", DataType::Int64)]).unwrap();
        assert!(read("a,b\n1,\n", &s, CsvOptions::default()).is_err());
    }

    #[test]
    fn tbl_trailing_separator() {
        let s = Schema::of(&[("k", DataType::Int64), ("d", DataType::Date)]).unwrap();
        let opts = CsvOptions {
            delimiter: b'|',
            has_header: false,
        };
        let r = read("1|1970-01-03|\n2|1971-01-01|\n", &s, opts).unwrap();
        assert_eq!(r.row_count(), 2);
        assert_eq!(r.value(1, 0), Value::Date(2));
        assert_eq!(r.value(1, 1), Value::Date(365));
    }
}
