use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ResultRow;
use crate::ao::SchemeSpec;
use crate::error::{Error, Result};

pub const RESULT_HEADER: &str =
    "scheme,snr_db,n_elements,realization,sum_rate,common_rate,iterations,converged,wall_time_s";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub scheme: SchemeSpec,
    pub iteration: usize,
    pub sum_rate: f64,
}

fn write_records<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_rows_to<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    if rows.is_empty() {
        let mut w = w;
        writeln!(w, "{RESULT_HEADER}")?;
        return Ok(());
    }
    write_records(w, rows)
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_rows_to(File::create(path)?, rows)
}

pub fn read_rows_from<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut input = csv::Reader::from_reader(r);
    let header = input.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != RESULT_HEADER {
        return Err(Error::Config(format!("unexpected CSV header '{header}'")));
    }
    input
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    read_rows_from(File::open(path)?)
}

pub fn write_trace<W: Write>(w: W, rows: &[TraceRow]) -> Result<()> {
    write_records(w, rows)
}
