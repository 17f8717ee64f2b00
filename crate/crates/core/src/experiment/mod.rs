//! Monte Carlo harness: sweeps schemes over SNR and RIS size grids, writes
//! one CSV row per cell, and aggregates results with bootstrap intervals.

mod config;
mod output;
mod summary;

pub use config::{power_from_snr_db, ExperimentConfig, Tolerances};
pub use output::{read_rows, read_rows_from, write_rows, write_rows_to, write_trace, TraceRow, RESULT_HEADER};
pub use summary::{summarize, write_summary, GainPair, SummaryRow, BOOTSTRAP_RESAMPLES};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ao::{alternating_optimize, AoInit, AoResult, SchemeSpec};
use crate::channel::draw_realization;
use crate::error::{Error, Result};

/// Offset separating the reactance initialization stream from channel draws.
const REACTANCE_SEED_OFFSET: u64 = 0x5eed_0f7e_ac70;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: SchemeSpec,
    pub snr_db: f64,
    pub n_elements: usize,
    pub realization: usize,
    pub sum_rate: f64,
    pub common_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
}

impl ResultRow {
    fn key(&self) -> (SchemeSpec, f64, usize, usize) {
        (self.scheme, self.snr_db, self.n_elements, self.realization)
    }
}

/// Sorts rows by scheme, SNR, N and realization.
pub fn sort_canonical(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        let (sa, pa, na, ra) = a.key();
        let (sb, pb, nb, rb) = b.key();
        sa.cmp(&sb)
            .then(pa.total_cmp(&pb))
            .then(na.cmp(&nb))
            .then(ra.cmp(&rb))
    });
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    scheme: SchemeSpec,
    snr_db: f64,
    n_elements: usize,
    realization: usize,
}

fn run_cell(cfg: &ExperimentConfig, cell: Cell) -> Result<(AoResult, f64)> {
    let start = Instant::now();
    let scenario = cfg.scenario.with_elements(cell.n_elements);
    let real = draw_realization(&scenario, cfg.seed, cell.realization as u64)?;
    let opts = cfg.ao_options(cfg.seed.wrapping_add(REACTANCE_SEED_OFFSET));
    let out = alternating_optimize(
        &real,
        cell.scheme,
        power_from_snr_db(cell.snr_db),
        scenario.noise_power,
        &opts,
        &AoInit::default(),
    )?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn row_for(cfg: &ExperimentConfig, cell: Cell) -> ResultRow {
    let mut row = ResultRow {
        scheme: cell.scheme,
        snr_db: cell.snr_db,
        n_elements: cell.n_elements,
        realization: cell.realization,
        sum_rate: 0.0,
        common_rate: 0.0,
        iterations: 0,
        converged: false,
        wall_time_s: 0.0,
    };
    match run_cell(cfg, cell) {
        Ok((out, secs)) => {
            row.sum_rate = out.sum_rate();
            row.common_rate = out.report.common_rate;
            row.iterations = out.iterations;
            row.converged = out.converged;
            if cfg.record_wall_time {
                row.wall_time_s = secs;
            }
            if out.line_search_failures > 0 {
                log::warn!(
                    "{} snr={} N={} r={}: {} reactance line searches failed",
                    cell.scheme,
                    cell.snr_db,
                    cell.n_elements,
                    cell.realization,
                    out.line_search_failures
                );
            }
        }
        Err(e) => log::error!(
            "{} snr={} N={} r={} failed: {e}",
            cell.scheme,
            cell.snr_db,
            cell.n_elements,
            cell.realization
        ),
    }
    row
}

/// Runs every cell of the sweep. Within a (SNR, N, realization) cell all
/// schemes see the same channel draw. Failed cells are reported with
/// `converged = false` and zero rates instead of aborting the sweep.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut cells = Vec::with_capacity(cfg.cell_count());
    for &scheme in &cfg.schemes {
        for &snr_db in &cfg.snr_db {
            for &n_elements in &cfg.elements {
                for realization in 0..cfg.realizations {
                    cells.push(Cell {
                        scheme,
                        snr_db,
                        n_elements,
                        realization,
                    });
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<ResultRow> = pool.install(|| cells.par_iter().map(|&c| row_for(cfg, c)).collect());
    sort_canonical(&mut rows);
    Ok(rows)
}

/// Runs every configured scheme on one realization and returns the outer
/// iteration traces, for convergence plots.
pub fn trace(cfg: &ExperimentConfig, realization: usize) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        let cell = Cell {
            scheme,
            snr_db: cfg.snr_db[0],
            n_elements: cfg.elements[0],
            realization,
        };
        let (out, _) = run_cell(cfg, cell)?;
        rows.extend(out.trace.iter().enumerate().map(|(iteration, &sum_rate)| TraceRow {
            scheme,
            iteration,
            sum_rate,
        }));
    }
    Ok(rows)
}
