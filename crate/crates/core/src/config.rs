//! Run configuration: a flat `key = value` TOML file plus command-line
//! overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chemistry::PsrParams;
use crate::error::{Error, Result};
use crate::fokker_planck::MAX_GRID_QUBITS;
use crate::history_state::MAX_HISTORY_QUBITS;
use crate::moment_meas::{DEFAULT_EXACT_MAX_QUBITS, MAX_COUNT_QUBITS};
use crate::qlsa::HhlConfig;
use crate::qsim::MAX_QUBITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Classical,
    Ideal,
    Hhl,
}

impl SolverMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverMode::Classical => "classical",
            SolverMode::Ideal => "ideal",
            SolverMode::Hhl => "hhl",
        }
    }
}

impl std::str::FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(SolverMode::Classical),
            "ideal" => Ok(SolverMode::Ideal),
            "hhl" => Ok(SolverMode::Hhl),
            other => Err(Error::Config(format!(
                "unknown solver `{other}` (expected classical, ideal or hhl)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rate_prefactor: f64,
    pub phi_a: f64,
    pub phi_i: f64,
    pub mixing_rate: f64,

    pub n_t_qubits: usize,
    pub n_phi_qubits: usize,
    pub dt: f64,
    /// Must equal `dt * (2^n_t_qubits - 1)` when given.
    pub horizon: Option<f64>,

    pub beta_a: f64,
    pub beta_b: f64,

    pub solver: SolverMode,
    pub clock_qubits: usize,
    pub hhl_t0: Option<f64>,
    pub hhl_c: Option<f64>,

    pub measure: bool,
    pub orders: Vec<usize>,
    /// Ancilla shots per measurement; 0 reads exact expectations.
    pub shots: u64,

    pub gate_count_n_max: usize,
    pub compiled_count_n_max: usize,

    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let psr = PsrParams::default();
        Self {
            rate_prefactor: psr.rate_prefactor,
            phi_a: psr.phi_a,
            phi_i: psr.phi_i,
            mixing_rate: psr.mixing_rate,
            n_t_qubits: 4,
            n_phi_qubits: 5,
            dt: 0.15,
            horizon: None,
            beta_a: 8.0,
            beta_b: 8.0,
            solver: SolverMode::Ideal,
            clock_qubits: 8,
            hhl_t0: None,
            hhl_c: None,
            measure: true,
            orders: vec![2, 4, 6],
            shots: 0,
            gate_count_n_max: 20,
            compiled_count_n_max: 8,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn psr(&self) -> PsrParams {
        PsrParams {
            rate_prefactor: self.rate_prefactor,
            phi_a: self.phi_a,
            phi_i: self.phi_i,
            mixing_rate: self.mixing_rate,
        }
    }

    pub fn hhl(&self) -> HhlConfig {
        HhlConfig {
            clock_qubits: self.clock_qubits,
            t0: self.hhl_t0,
            c: self.hhl_c,
            shots: self.shots,
            seed: self.seed,
        }
    }

    pub fn n_blocks(&self) -> usize {
        1 << self.n_t_qubits
    }

    pub fn n_steps(&self) -> usize {
        self.n_blocks() - 1
    }

    pub fn derived_horizon(&self) -> f64 {
        self.dt * self.n_steps() as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.psr().validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if let Some(h) = self.horizon {
            let expected = self.derived_horizon();
            if (h - expected).abs() > 1e-9 * expected.abs().max(1.0) {
                return bad(format!(
                    "horizon = {h} does not equal dt * (2^n_t_qubits - 1) = {expected}"
                ));
            }
        }
        if !(1..=MAX_GRID_QUBITS).contains(&self.n_phi_qubits) {
            return bad(format!("n_phi_qubits must lie in 1..={MAX_GRID_QUBITS}"));
        }
        if self.n_t_qubits + self.n_phi_qubits > MAX_HISTORY_QUBITS {
            return bad(format!(
                "n_t_qubits + n_phi_qubits must not exceed {MAX_HISTORY_QUBITS}"
            ));
        }
        for (name, v) in [("beta_a", self.beta_a), ("beta_b", self.beta_b)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if self.measure {
            if self.n_phi_qubits > DEFAULT_EXACT_MAX_QUBITS {
                return bad(format!(
                    "measurement needs n_phi_qubits <= {DEFAULT_EXACT_MAX_QUBITS} for the exact program"
                ));
            }
            let cells = 1usize << self.n_phi_qubits;
            if let Some(&m) = self.orders.iter().find(|&&m| m >= cells) {
                return bad(format!("order {m} needs more than {cells} cells"));
            }
            if self.n_t_qubits + self.n_phi_qubits + 1 > MAX_QUBITS {
                return bad("measurement circuit exceeds the simulator width".into());
            }
        }
        if self.solver == SolverMode::Hhl {
            self.hhl().validate()?;
            let total = self.n_t_qubits + self.n_phi_qubits + self.clock_qubits + 2;
            if total > MAX_QUBITS {
                return Err(Error::QubitBudget {
                    required: total,
                    limit: MAX_QUBITS,
                });
            }
        }
        if !(1..=MAX_COUNT_QUBITS).contains(&self.gate_count_n_max) {
            return bad(format!(
                "gate_count_n_max must lie in 1..={MAX_COUNT_QUBITS}"
            ));
        }
        if self.compiled_count_n_max > 10 {
            return bad("compiled_count_n_max must not exceed 10".into());
        }
        Ok(())
    }

    /// Parse a config file, apply `key=value` overrides, and validate.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            table.insert(key.trim().to_string(), parse_value(value.trim()));
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Interpret an override as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
