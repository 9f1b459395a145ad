use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use chrono::{Datelike, NaiveDate};

use super::schema::DataType;

/// A single cell value.
#[derive(Clone, Debug)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(Arc<str>),
    Date(i64),
    Bool(bool),
}

impl Value {
    pub fn dtype(&self) -> DataType {
        match self {
            Value::Int(_) => DataType::Int64,
            Value::Float(_) => DataType::Float64,
            Value::Text(_) => DataType::Text,
            Value::Date(_) => DataType::Date,
            Value::Bool(_) => DataType::Bool,
        }
    }

    pub fn text(s: &str) -> Value {
        Value::Text(Arc::from(s))
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) | Value::Date(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) | Value::Date(i) => Some(*i),
            Value::Bool(b) => Some(*b as i64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> bool {
        matches!(self, Value::Bool(true))
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Ordering used by comparisons and MIN/MAX. Int and Float compare numerically.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        use Value::*;
        match (self, other) {
            (Int(a), Int(b)) | (Date(a), Date(b)) => a.cmp(b),
            (Float(a), Float(b)) => a.total_cmp(b),
            (Int(a), Float(b)) => (*a as f64).total_cmp(b),
            (Float(a), Int(b)) => a.total_cmp(&(*b as f64)),
            (Text(a), Text(b)) => a.cmp(b),
            (Bool(a), Bool(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Bool(_) => 0,
            Value::Int(_) | Value::Float(_) => 1,
            Value::Date(_) => 2,
            Value::Text(_) => 3,
        }
    }

    fn float_bits(f: f64) -> u64 {
        if f == 0.0 {
            0
        } else if f.is_nan() {
            f64::NAN.to_bits()
        } else {
            f.to_bits()
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        use Value::*;
        match (self, other) {
            (Int(a), Int(b)) | (Date(a), Date(b)) => a == b,
            (Float(a), Float(b)) => Value::float_bits(*a) == Value::float_bits(*b),
            (Text(a), Text(b)) => a == b,
            (Bool(a), Bool(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Int(i) => {
                state.write_u8(0);
                state.write_i64(*i);
            }
            Value::Float(f) => {
                state.write_u8(1);
                state.write_u64(Value::float_bits(*f));
            }
            Value::Text(s) => {
                state.write_u8(2);
                s.hash(state);
            }
            Value::Date(d) => {
                state.write_u8(3);
                state.write_i64(*d);
            }
            Value::Bool(b) => {
                state.write_u8(4);
                state.write_u8(*b as u8);
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
            Value::Date(d) => f.write_str(&format_date(*d)),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

const EPOCH_CE_DAYS: i64 = 719_163;

/// Parses `YYYY-MM-DD` into days since 1970-01-01.
pub fn parse_date(s: &str) -> Option<i64> {
    let d = NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()?;
    Some(d.num_days_from_ce() as i64 - EPOCH_CE_DAYS)
}

fn to_naive(days: i64) -> Option<NaiveDate> {
    NaiveDate::from_num_days_from_ce_opt(i32::try_from(days + EPOCH_CE_DAYS).ok()?)
}

pub fn format_date(days: i64) -> String {
    match to_naive(days) {
        Some(d) => d.format("%Y-%m-%d").to_string(),
        None => format!("day{days}"),
    }
}

pub fn date_year(days: i64) -> i64 {
    to_naive(days).map(|d| d.year() as i64).unwrap_or(1970)
}

pub fn date_month(days: i64) -> i64 {
    to_naive(days).map(|d| d.month() as i64).unwrap_or(1)
}

pub fn date_day(days: i64) -> i64 {
    to_naive(days).map(|d| d.day() as i64).unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dates_round_trip() {
        assert_eq!(parse_date("1970-01-01"), Some(0));
        assert_eq!(parse_date("1970-01-02"), Some(1));
        assert_eq!(parse_date("1969-12-31"), Some(-1));
        let d = parse_date("1998-12-01").unwrap();
        assert_eq!(format_date(d), "1998-12-01");
        assert_eq!(date_year(d), 1998);
        assert_eq!(date_month(d), 12);
        assert_eq!(parse_date("1998-13-01"), None);
    }

    #[test]
    fn float_keys_normalize_zero() {
        assert_eq!(Value::Float(0.0), Value::Float(-0.0));
        assert_ne!(Value::Int(1), Value::Float(1.0));
        assert_eq!(Value::Int(1).total_cmp(&Value::Float(1.5)), Ordering::Less);
    }
}
