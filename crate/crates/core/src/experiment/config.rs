use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::ao::{AoOptions, SchemeSpec};
use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::ris::DEFAULT_Z0;
use crate::wmmse::WmmseOptions;

/// Transmit power for a given SNR in dB. The noise power is kept separate
/// in the scenario, so this is just the dB to linear conversion.
pub fn power_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Outer alternating-optimization tolerance; WMMSE uses a tenth of it.
    pub outer: f64,
    pub max_outer_iterations: usize,
    pub max_wmmse_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            outer: 1e-3,
            max_outer_iterations: 200,
            max_wmmse_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub schemes: Vec<SchemeSpec>,
    pub snr_db: Vec<f64>,
    pub elements: Vec<usize>,
    pub realizations: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub tolerances: Tolerances,
    /// Random WMMSE restarts on the first outer iteration (1 = none).
    pub restarts: usize,
    pub z0: f64,
    /// Worker threads; 0 picks the number of cores.
    pub jobs: usize,
    /// When false the wall_time_s column is written as 0 so that repeated
    /// runs produce byte-identical files.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            schemes: SchemeSpec::ALL.to_vec(),
            snr_db: (0..=6).map(|i| 5.0 * i as f64).collect(),
            elements: vec![32],
            realizations: 100,
            seed: 0,
            out: PathBuf::from("results.csv"),
            tolerances: Tolerances::default(),
            restarts: 1,
            z0: DEFAULT_Z0,
            jobs: 0,
            record_wall_time: false,
        }
    }
}

impl serde::Serialize for SchemeSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SchemeSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self.schemes.is_empty() || self.snr_db.is_empty() || self.elements.is_empty() {
            return Err(Error::Config("schemes, snr_db and elements must be non-empty".into()));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("snr_db values must be finite".into()));
        }
        if !(self.tolerances.outer > 0.0) {
            return Err(Error::Config("tolerances.outer must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(self.z0 > 0.0) {
            return Err(Error::Config("z0 must be positive".into()));
        }
        for &n in &self.elements {
            for s in &self.schemes {
                self.scenario.with_elements(n).validate(s.architecture)?;
            }
        }
        Ok(())
    }

    pub fn ao_options(&self, reactance_seed: u64) -> AoOptions {
        AoOptions {
            tolerance: self.tolerances.outer,
            max_iterations: self.tolerances.max_outer_iterations,
            z0: self.z0,
            wmmse: WmmseOptions {
                max_iterations: self.tolerances.max_wmmse_iterations,
                restarts: self.restarts,
                seed: reactance_seed,
                ..WmmseOptions::default()
            },
            reactance_seed,
            ..AoOptions::default()
        }
    }

    /// Number of rows a run produces.
    pub fn cell_count(&self) -> usize {
        self.schemes.len() * self.snr_db.len() * self.elements.len() * self.realizations
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_4200_rows() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.cell_count(), 4200);
    }

    #[test]
    fn parses_nested_sections() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            schemes = ["fully-rsma", "none-sdma"]
            snr_db = [20.0]
            elements = [8, 16]
            realizations = 3
            seed = 9
            [scenario]
            antennas = 2
            users = 3
            [tolerances]
            outer = 1e-4
            "#,
        )
        .unwrap();
        assert_eq!(cfg.schemes, vec![SchemeSpec::FULLY_RSMA, SchemeSpec::NONE_SDMA]);
        assert_eq!(cfg.scenario.antennas, 2);
        assert_eq!(cfg.scenario.users, 3);
        assert_eq!(cfg.scenario.elements, 32);
        assert_eq!(cfg.tolerances.outer, 1e-4);
        assert_eq!(cfg.tolerances.max_outer_iterations, 200);
        assert_eq!(cfg.cell_count(), 12);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml("realizations = 0").is_err());
        assert!(ExperimentConfig::from_toml("snr_db = []").is_err());
        assert!(ExperimentConfig::from_toml("schemes = [\"fully-mimo\"]").is_err());
        assert!(ExperimentConfig::from_toml("unknown = 1").is_err());
    }

    #[test]
    fn snr_mapping() {
        assert_eq!(power_from_snr_db(0.0), 1.0);
        assert!((power_from_snr_db(20.0) - 100.0).abs() < 1e-12);
    }
}
