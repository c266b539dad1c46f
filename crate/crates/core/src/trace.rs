//! Iterate traces and their CSV serialisation.

use std::io::{self, Write};

use serde::Serialize;

use crate::linalg::Vector;

/// A row type that can be written as one CSV line.
pub trait CsvRecord {
    /// Header line, without trailing newline.
    fn header() -> &'static str;
    fn fields(&self) -> Vec<String>;
}

/// Why a run stopped before its requested length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truncation {
    /// Index of the step that failed.
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TraceMeta {
    pub algorithm: String,
    pub schedule: String,
    pub problem: serde_json::Value,
    pub wall_time_secs: f64,
}

/// Iterates `x_0..x_K` plus one diagnostics row per step.
#[derive(Debug, Clone)]
pub struct IterateTrace<R> {
    pub iterates: Vec<Vector>,
    pub steps: Vec<R>,
    pub meta: TraceMeta,
    pub truncation: Option<Truncation>,
}

impl<R> IterateTrace<R> {
    pub fn new(x0: Vector, meta: TraceMeta) -> Self {
        Self {
            iterates: vec![x0],
            steps: Vec::new(),
            meta,
            truncation: None,
        }
    }

    pub fn push(&mut self, x: Vector, row: R) {
        self.iterates.push(x);
        self.steps.push(row);
    }

    pub fn last(&self) -> &Vector {
        self.iterates.last().expect("trace always holds x_0")
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_truncated(&self) -> bool {
        self.truncation.is_some()
    }
}

impl<R: CsvRecord> IterateTrace<R> {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", R::header())?;
        for row in &self.steps {
            writeln!(out, "{}", row.fields().join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// Shortest round-trip representation; `None` becomes an empty field.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
