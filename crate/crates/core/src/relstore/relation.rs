use std::sync::Arc;

use super::schema::{DataType, Schema};
use super::value::Value;
use crate::error::{Error, Result};
use crate::lineage::Rid;

/// Largest row count addressable by a 32-bit rid (the all-ones pattern is reserved).
pub const MAX_ROWS: usize = u32::MAX as usize;

/// Dense value array for one column.
#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Int64(Vec<i64>),
    Float64(Vec<f64>),
    Text(Vec<Arc<str>>),
    Date(Vec<i64>),
    Bool(Vec<bool>),
}

impl Column {
    pub fn empty(dtype: DataType) -> Column {
        Column::with_capacity(dtype, 0)
    }

    pub fn with_capacity(dtype: DataType, n: usize) -> Column {
        match dtype {
            DataType::Int64 => Column::Int64(Vec::with_capacity(n)),
            DataType::Float64 => Column::Float64(Vec::with_capacity(n)),
            DataType::Text => Column::Text(Vec::with_capacity(n)),
            DataType::Date => Column::Date(Vec::with_capacity(n)),
            DataType::Bool => Column::Bool(Vec::with_capacity(n)),
        }
    }

    pub fn dtype(&self) -> DataType {
        match self {
            Column::Int64(_) => DataType::Int64,
            Column::Float64(_) => DataType::Float64,
            Column::Text(_) => DataType::Text,
            Column::Date(_) => DataType::Date,
            Column::Bool(_) => DataType::Bool,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Int64(v) | Column::Date(v) => v.len(),
            Column::Float64(v) => v.len(),
            Column::Text(v) => v.len(),
            Column::Bool(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, r: usize) -> Value {
        match self {
            Column::Int64(v) => Value::Int(v[r]),
            Column::Float64(v) => Value::Float(v[r]),
            Column::Text(v) => Value::Text(v[r].clone()),
            Column::Date(v) => Value::Date(v[r]),
            Column::Bool(v) => Value::Bool(v[r]),
        }
    }

    /// Appends a value of the column's type.
    pub fn push(&mut self, v: Value) -> Result<()> {
        match (self, v) {
            (Column::Int64(c), Value::Int(x)) => c.push(x),
            (Column::Float64(c), Value::Float(x)) => c.push(x),
            (Column::Text(c), Value::Text(x)) => c.push(x),
            (Column::Date(c), Value::Date(x)) => c.push(x),
            (Column::Bool(c), Value::Bool(x)) => c.push(x),
            (c, v) => {
                return Err(Error::Type(format!(
                    "cannot store {} in a {} column",
                    v.dtype(),
                    c.dtype()
                )))
            }
        }
        Ok(())
    }

    /// Gathers the given rows into a new column.
    pub fn take(&self, rids: &[Rid]) -> Column {
        match self {
            Column::Int64(v) => Column::Int64(rids.iter().map(|&r| v[r as usize]).collect()),
            Column::Float64(v) => Column::Float64(rids.iter().map(|&r| v[r as usize]).collect()),
            Column::Text(v) => Column::Text(rids.iter().map(|&r| v[r as usize].clone()).collect()),
            Column::Date(v) => Column::Date(rids.iter().map(|&r| v[r as usize]).collect()),
            Column::Bool(v) => Column::Bool(rids.iter().map(|&r| v[r as usize]).collect()),
        }
    }

    pub fn as_i64(&self) -> Option<&[i64]> {
        match self {
            Column::Int64(v) | Column::Date(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match self {
            Column::Float64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&[Arc<str>]> {
        match self {
            Column::Text(v) => Some(v),
            _ => None,
        }
    }

    fn byte_size(&self) -> usize {
        match self {
            Column::Int64(v) | Column::Date(v) => v.len() * 8,
            Column::Float64(v) => v.len() * 8,
            Column::Text(v) => v.iter().map(|s| s.len() + 16).sum(),
            Column::Bool(v) => v.len(),
        }
    }
}

/// Immutable, rid-addressable table.
#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    name: String,
    schema: Schema,
    columns: Vec<Column>,
    row_count: usize,
}

impl Relation {
    pub fn new(name: impl Into<String>, schema: Schema, columns: Vec<Column>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::Schema(format!(
                "{} columns for a {}-column schema",
                columns.len(),
                schema.len()
            )));
        }
        let row_count = columns.first().map(Column::len).unwrap_or(0);
        for (c, f) in columns.iter().zip(schema.fields()) {
            if c.len() != row_count {
                return Err(Error::Schema(format!(
                    "column {} has {} rows, expected {row_count}",
                    f.name,
                    c.len()
                )));
            }
            if c.dtype() != f.dtype {
                return Err(Error::Schema(format!(
                    "column {} holds {} values but is declared {}",
                    f.name,
                    c.dtype(),
                    f.dtype
                )));
            }
        }
        if row_count > MAX_ROWS {
            return Err(Error::TooManyRows(row_count));
        }
        Ok(Relation {
            name: name.into(),
            schema,
            columns,
            row_count,
        })
    }

    pub fn empty(name: impl Into<String>, schema: Schema) -> Self {
        let columns = schema.fields().iter().map(|f| Column::empty(f.dtype)).collect();
        Relation {
            name: name.into(),
            schema,
            columns,
            row_count: 0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn is_empty(&self) -> bool {
        self.row_count == 0
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &Column {
        &self.columns[i]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&Column> {
        self.schema.index_of(name).map(|i| &self.columns[i])
    }

    #[inline]
    pub fn value(&self, col: usize, rid: Rid) -> Value {
        self.columns[col].get(rid as usize)
    }

    pub fn row(&self, rid: Rid) -> Vec<Value> {
        self.columns.iter().map(|c| c.get(rid as usize)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<Value>> + '_ {
        (0..self.row_count as Rid).map(move |r| self.row(r))
    }

    /// New relation holding the given rows, in the given order.
    pub fn take(&self, rids: &[Rid]) -> Relation {
        Relation {
            name: self.name.clone(),
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.take(rids)).collect(),
            row_count: rids.len(),
        }
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Relation {
        self.name = name.into();
        self
    }

    pub fn byte_size(&self) -> usize {
        self.columns.iter().map(Column::byte_size).sum()
    }

    pub fn into_arc(self) -> Arc<Relation> {
        Arc::new(self)
    }
}

/// Row-at-a-time construction with type checks.
#[derive(Debug)]
pub struct RelationBuilder {
    name: String,
    schema: Schema,
    columns: Vec<Column>,
}

impl RelationBuilder {
    pub fn new(name: impl Into<String>, schema: Schema) -> Self {
        RelationBuilder::with_capacity(name, schema, 0)
    }

    pub fn with_capacity(name: impl Into<String>, schema: Schema, n: usize) -> Self {
        let columns = schema
            .fields()
            .iter()
            .map(|f| Column::with_capacity(f.dtype, n))
            .collect();
        RelationBuilder {
            name: name.into(),
            schema,
            columns,
        }
    }

    pub fn push_row(&mut self, row: Vec<Value>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Schema(format!(
                "row has {} values, schema has {}",
                row.len(),
                self.columns.len()
            )));
        }
        for (c, v) in self.columns.iter_mut().zip(row) {
            c.push(v)?;
        }
        Ok(())
    }

    pub fn column_mut(&mut self, i: usize) -> &mut Column {
        &mut self.columns[i]
    }

    pub fn len(&self) -> usize {
        self.columns.first().map(Column::len).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn finish(self) -> Result<Relation> {
        Relation::new(self.name, self.schema, self.columns)
    }
}
