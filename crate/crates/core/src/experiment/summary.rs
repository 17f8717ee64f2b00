use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::ResultRow;
use crate::ao::SchemeSpec;
use crate::error::{Error, Result};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_SEED: u64 = 0xb007;

/// Relative gain (A - B) / B of `scheme` over `baseline`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GainPair {
    pub scheme: SchemeSpec,
    pub baseline: SchemeSpec,
}

impl GainPair {
    pub const fn new(scheme: SchemeSpec, baseline: SchemeSpec) -> Self {
        Self { scheme, baseline }
    }

    /// Architecture comparisons for RSMA plus RSMA over SDMA per architecture.
    pub fn defaults() -> Vec<GainPair> {
        vec![
            GainPair::new(SchemeSpec::FULLY_RSMA, SchemeSpec::SINGLE_RSMA),
            GainPair::new(SchemeSpec::FULLY_RSMA, SchemeSpec::NONE_RSMA),
            GainPair::new(SchemeSpec::SINGLE_RSMA, SchemeSpec::NONE_RSMA),
            GainPair::new(SchemeSpec::FULLY_RSMA, SchemeSpec::FULLY_SDMA),
            GainPair::new(SchemeSpec::SINGLE_RSMA, SchemeSpec::SINGLE_SDMA),
            GainPair::new(SchemeSpec::NONE_RSMA, SchemeSpec::NONE_SDMA),
        ]
    }
}

/// One aggregate line. Rows without a baseline hold the mean sum-rate of a
/// scheme; rows with a baseline hold the relative gain over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: SchemeSpec,
    pub baseline: Option<SchemeSpec>,
    pub snr_db: f64,
    pub n_elements: usize,
    pub count: usize,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Snr(f64);

impl Eq for Snr {}

impl PartialOrd for Snr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Snr {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

type CellKey = (Snr, usize);
type Samples = BTreeMap<usize, f64>;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap over resampled realization indices.
fn bootstrap<F: Fn(&[usize]) -> f64>(n: usize, stat: F, rng: &mut ChaCha20Rng) -> (f64, f64) {
    let mut idx = vec![0; n];
    let mut draws: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            idx.iter_mut().for_each(|i| *i = rng.random_range(0..n));
            stat(&idx)
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    (quantile(&draws, 0.025), quantile(&draws, 0.975))
}

fn relative_gain(a: &[f64], b: &[f64]) -> f64 {
    let mb = mean(b);
    (mean(a) - mb) / mb
}

/// Means per (scheme, SNR, N) with bootstrap 95% intervals, followed by
/// paired relative gains for every pair whose schemes both occur.
pub fn summarize(rows: &[ResultRow], pairs: &[GainPair]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::Config("nothing to summarize".into()));
    }
    let mut cells: BTreeMap<SchemeSpec, BTreeMap<CellKey, Samples>> = BTreeMap::new();
    for row in rows {
        let samples = cells
            .entry(row.scheme)
            .or_default()
            .entry((Snr(row.snr_db), row.n_elements))
            .or_default();
        if samples.insert(row.realization, row.sum_rate).is_some() {
            return Err(Error::Pairing(format!(
                "duplicate row for {} snr={} N={} realization {}",
                row.scheme, row.snr_db, row.n_elements, row.realization
            )));
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut out = Vec::new();
    for (&scheme, by_cell) in &cells {
        for (&(snr, n), samples) in by_cell {
            let xs: Vec<f64> = samples.values().copied().collect();
            let (ci_low, ci_high) = bootstrap(xs.len(), |i| i.iter().map(|&j| xs[j]).sum::<f64>() / i.len() as f64, &mut rng);
            out.push(SummaryRow {
                scheme,
                baseline: None,
                snr_db: snr.0,
                n_elements: n,
                count: xs.len(),
                value: mean(&xs),
                ci_low,
                ci_high,
            });
        }
    }

    for pair in pairs {
        let (Some(a), Some(b)) = (cells.get(&pair.scheme), cells.get(&pair.baseline)) else {
            continue;
        };
        for (key, sa) in a {
            let sb = b.get(key).ok_or_else(|| {
                Error::Pairing(format!(
                    "{} has results at snr={} N={} but {} does not",
                    pair.scheme, key.0 .0, key.1, pair.baseline
                ))
            })?;
            if !sa.keys().eq(sb.keys()) {
                return Err(Error::Pairing(format!(
                    "{} and {} cover different realizations at snr={} N={}",
                    pair.scheme, pair.baseline, key.0 .0, key.1
                )));
            }
            let xa: Vec<f64> = sa.values().copied().collect();
            let xb: Vec<f64> = sb.values().copied().collect();
            let (ci_low, ci_high) = bootstrap(
                xa.len(),
                |i| {
                    let ra: Vec<f64> = i.iter().map(|&j| xa[j]).collect();
                    let rb: Vec<f64> = i.iter().map(|&j| xb[j]).collect();
                    relative_gain(&ra, &rb)
                },
                &mut rng,
            );
            out.push(SummaryRow {
                scheme: pair.scheme,
                baseline: Some(pair.baseline),
                snr_db: key.0 .0,
                n_elements: key.1,
                count: xa.len(),
                value: relative_gain(&xa, &xb),
                ci_low,
                ci_high,
            });
        }
        if b.keys().any(|k| !a.contains_key(k)) {
            return Err(Error::Pairing(format!(
                "{} has cells without matching {} results",
                pair.baseline, pair.scheme
            )));
        }
    }
    Ok(out)
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: SchemeSpec, realization: usize, sum_rate: f64) -> ResultRow {
        ResultRow {
            scheme,
            snr_db: 30.0,
            n_elements: 32,
            realization,
            sum_rate,
            common_rate: 0.0,
            iterations: 1,
            converged: true,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn ten_percent_gain() {
        let rows = vec![
            row(SchemeSpec::FULLY_RSMA, 0, 10.0),
            row(SchemeSpec::FULLY_RSMA, 1, 12.0),
            row(SchemeSpec::SINGLE_RSMA, 0, 9.0),
            row(SchemeSpec::SINGLE_RSMA, 1, 11.0),
        ];
        let pairs = [GainPair::new(SchemeSpec::FULLY_RSMA, SchemeSpec::SINGLE_RSMA)];
        let out = summarize(&rows, &pairs).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].value, 11.0);
        assert_eq!(out[1].value, 10.0);
        assert!((out[2].value - 0.1).abs() < 1e-15);
        assert!(out[0].ci_low >= 10.0 && out[0].ci_high <= 12.0);
    }

    #[test]
    fn single_realization_collapses_interval() {
        let out = summarize(&[row(SchemeSpec::NONE_SDMA, 3, 4.25)], &GainPair::defaults()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].value, out[0].ci_low, out[0].ci_high), (4.25, 4.25, 4.25));
    }

    #[test]
    fn mismatched_pairing() {
        let rows = vec![row(SchemeSpec::FULLY_RSMA, 0, 10.0), row(SchemeSpec::SINGLE_RSMA, 1, 9.0)];
        let pairs = [GainPair::new(SchemeSpec::FULLY_RSMA, SchemeSpec::SINGLE_RSMA)];
        assert!(matches!(summarize(&rows, &pairs), Err(Error::Pairing(_))));
        let dup = vec![row(SchemeSpec::FULLY_RSMA, 0, 10.0), row(SchemeSpec::FULLY_RSMA, 0, 9.0)];
        assert!(matches!(summarize(&dup, &pairs), Err(Error::Pairing(_))));
    }

    #[test]
    fn empty_input() {
        assert!(summarize(&[], &[]).is_err());
    }
}
