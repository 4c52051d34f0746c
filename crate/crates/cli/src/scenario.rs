//! Scenario files.
//!
//! ```json
//! {
//!   "params": { "alpha": 3.5, "theta": 4.0, "kappa": 1.0, "snr_ref": 10.0, "beta": 0.7 },
//!   "costs": { "c_hd": 0.3, "c_fd": 0.42 },
//!   "sweeps": {
//!     "c_hd": { "start": 0.05, "stop": 0.70, "step": 0.01 },
//!     "pi_tfd": { "start": 0.0, "stop": 1.0, "step": 0.05 },
//!     "iota": { "cells": 20 }
//!   }
//! }
//! ```
//!
//! `params` may be replaced by `"constants": { "phi", "iota_c", "iota_f", "beta" }`.

use std::fs;
use std::path::Path;

use fdnash::game::CostPolicy;
use fdnash::model::{derive_constants, DerivedConstants, NetworkParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Inclusive arithmetic range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let s = Sweep { start, stop, step };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.start, self.stop, self.step].iter().all(|v| v.is_finite()) {
            return Err(CliError::Config("sweep bounds must be finite".into()));
        }
        if self.step <= 0.0 {
            return Err(CliError::Config(format!(
                "sweep step must be positive, got {}",
                self.step
            )));
        }
        if self.stop < self.start {
            return Err(CliError::Config(format!(
                "sweep stop {} lies below start {}",
                self.stop, self.start
            )));
        }
        if (self.stop - self.start) / self.step > 1e7 {
            return Err(CliError::Config("sweep has more than 10^7 points".into()));
        }
        Ok(())
    }

    /// Points `start + k step`, computed by multiplication so they do not
    /// drift, with `stop` included when it is reached up to rounding.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| (self.start + k as f64 * self.step).min(self.stop))
            .collect()
    }
}

/// Midpoint grid over the ordered interference pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IotaGrid {
    /// Cells per axis on `(0, 1)`.
    pub cells: usize,
}

impl IotaGrid {
    /// Cell midpoints `(iota_c, iota_f)` with `iota_c < iota_f`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.cells;
        let mid = |k: usize| (k as f64 + 0.5) / n as f64;
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                out.push((mid(i), mid(j)));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweeps {
    pub c_hd: Option<Sweep>,
    pub pi_tfd: Option<Sweep>,
    pub iota: Option<IotaGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<NetworkParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<DerivedConstants>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<CostPolicy>,
    #[serde(default)]
    pub sweeps: Sweeps,
}

/// A loaded and checked scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub constants: DerivedConstants,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        let constants = match (&file.params, &file.constants) {
            (Some(p), None) => derive_constants(p).map_err(|e| CliError::Config(format!("params: {e}")))?,
            (None, Some(c)) => *c,
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "scenario: give either `params` or `constants`, not both".into(),
                ))
            }
            (None, None) => return Err(CliError::Config("scenario: missing `params` or `constants`".into())),
        };
        for (name, s) in [("c_hd", &file.sweeps.c_hd), ("pi_tfd", &file.sweeps.pi_tfd)] {
            if let Some(s) = s {
                s.validate()
                    .map_err(|e| CliError::Config(format!("sweeps.{name}: {}", e.message())))?;
            }
        }
        if let Some(g) = file.sweeps.iota {
            if g.cells < 2 {
                return Err(CliError::Config("sweeps.iota.cells must be at least 2".into()));
            }
        }
        Ok(Scenario { file, constants })
    }

    pub fn params(&self) -> Option<&NetworkParams> {
        self.file.params.as_ref()
    }

    pub fn costs(&self) -> Option<CostPolicy> {
        self.file.costs
    }
}
