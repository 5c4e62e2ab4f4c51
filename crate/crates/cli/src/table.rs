//! Convergence tables as CSV.
//!
//! One file per field. Each row is one mesh width; each degree contributes
//! an `error_k{k}` and a `rate_k{k}` column. Numbers are written with 17
//! significant digits so they read back bit for bit. A rate cell is empty
//! on the coarsest row, and every cell is empty where a degree has no run.
//! A `_display` companion file repeats the table at five significant
//! digits.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};

use wormhole_core::study::StudyResult;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldTable {
    pub field: String,
    pub degrees: Vec<usize>,
    pub rows: Vec<TableRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub cells: usize,
    pub h: f64,
    /// `(error, rate)` per entry of `degrees`.
    pub values: Vec<(Option<f64>, Option<f64>)>,
}

impl FieldTable {
    /// Table for `field` from a study; `None` if no run produced it.
    pub fn from_study(study: &StudyResult, field: &str) -> Option<FieldTable> {
        let mut degrees: Vec<usize> = Vec::new();
        let mut widths: Vec<(usize, f64)> = Vec::new();
        for r in &study.rows {
            if r.errors.get(field).is_none() {
                continue;
            }
            if !degrees.contains(&r.k) {
                degrees.push(r.k);
            }
            if !widths.iter().any(|w| w.0 == r.cells) {
                widths.push((r.cells, r.h));
            }
        }
        if degrees.is_empty() {
            return None;
        }
        let rows = widths
            .into_iter()
            .map(|(cells, h)| TableRow {
                cells,
                h,
                values: degrees
                    .iter()
                    .map(|&k| {
                        study
                            .rows
                            .iter()
                            .find(|r| r.k == k && r.cells == cells)
                            .map_or((None, None), |r| (r.errors.get(field), r.rates.get(field)))
                    })
                    .collect(),
            })
            .collect();
        Some(FieldTable {
            field: field.to_string(),
            degrees,
            rows,
        })
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["cells".to_string(), "h".to_string()];
        for k in &self.degrees {
            h.push(format!("error_k{k}"));
            h.push(format!("rate_k{k}"));
        }
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        for row in &self.rows {
            let mut rec = vec![row.cells.to_string(), full(Some(row.h))];
            for &(e, r) in &row.values {
                rec.push(full(e));
                rec.push(full(r));
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Same layout rounded to five significant digits, for reading by eye.
    pub fn write_display_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        let sig5 = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.4e}"));
        for row in &self.rows {
            let mut rec = vec![row.cells.to_string(), sig5(Some(row.h))];
            for &(e, r) in &row.values {
                rec.push(sig5(e));
                rec.push(r.map_or(String::new(), |v| format!("{v:.4}")));
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(field: &str, r: R) -> Result<FieldTable> {
        let mut input = csv::Reader::from_reader(r);
        let header: Vec<String> = input.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 || header[0] != "cells" || header[1] != "h" || header.len() % 2 != 0 {
            bail!("unexpected header {header:?}");
        }
        let mut degrees = Vec::new();
        for pair in header[2..].chunks(2) {
            let k = pair[0]
                .strip_prefix("error_k")
                .and_then(|s| s.parse().ok())
                .with_context(|| format!("bad column {}", pair[0]))?;
            if pair[1] != format!("rate_k{k}") {
                bail!("bad column {}", pair[1]);
            }
            degrees.push(k);
        }
        let mut rows = Vec::new();
        for rec in input.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<Option<f64>> {
                let s = rec.get(i).unwrap_or("");
                if s.is_empty() {
                    Ok(None)
                } else {
                    Ok(Some(
                        s.parse().with_context(|| format!("bad number {s:?}"))?,
                    ))
                }
            };
            let values = (0..degrees.len())
                .map(|j| Ok((num(2 + 2 * j)?, num(3 + 2 * j)?)))
                .collect::<Result<Vec<_>>>()?;
            rows.push(TableRow {
                cells: rec.get(0).unwrap_or("").parse().context("bad cell count")?,
                h: num(1)?.context("missing h")?,
                values,
            });
        }
        Ok(FieldTable {
            field: field.to_string(),
            degrees,
            rows,
        })
    }

    /// Aligned text at five significant digits.
    pub fn display(&self) -> String {
        let mut s = format!("{}\n{:>6} {:>11}", self.field, "cells", "h");
        for k in &self.degrees {
            s += &format!(" {:>11} {:>7}", format!("err k={k}"), "rate");
        }
        s.push('\n');
        for row in &self.rows {
            s += &format!("{:>6} {:>11.4e}", row.cells, row.h);
            for &(e, r) in &row.values {
                let e = e.map_or(String::from("-"), |v| format!("{v:.4e}"));
                let r = r.map_or(String::from("-"), |v| format!("{v:.4}"));
                s += &format!(" {e:>11} {r:>7}");
            }
            s.push('\n');
        }
        s
    }
}

fn full(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:.16e}"))
}
