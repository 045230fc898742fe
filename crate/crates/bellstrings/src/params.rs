//! Experiment parameters consumed by the prediction formulas and generators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The quantum-mechanical maximum of the CHSH parameter, `2√2`.
pub const S_MAX: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Detector-branch indices into efficiency arrays: `A+, A-, B+, B-`.
pub const BRANCHES: [&str; 4] = ["A+", "A-", "B+", "B-"];

/// Full parameter set of a (real or simulated) run.
///
/// Angles are stored in radians; the CLI converts from degrees. Construct
/// with struct syntax over [`ExperimentParams::default`] and call
/// [`validated`](Self::validated) before use, which range-checks every field
/// and caches the entanglement deficit `ε = 1 − s_real/2√2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    /// Polarizer angle at station A, radians.
    pub alpha: f64,
    /// Polarizer angle at station B, radians.
    pub beta: f64,
    /// Detection efficiency per branch, `[A+, A-, B+, B-]`, each in `[0, 1]`.
    pub eta: [f64; 4],
    /// Measured CHSH parameter, in `[0, 2√2]`.
    pub s_real: f64,
    /// Dark-count rate per detector, 1/s.
    pub r_dark: f64,
    /// True coincidence rate, 1/s.
    pub r_coinc: f64,
    /// Coincidence time window, s.
    pub t_w: f64,
    /// Number of coincidences in the series.
    pub m: u64,
    #[serde(skip)]
    epsilon: f64,
}

impl Default for ExperimentParams {
    /// Typical numbers for silicon avalanche photodiodes and a good source.
    fn default() -> Self {
        ExperimentParams {
            alpha: 0.0,
            beta: 0.0,
            eta: [1.0; 4],
            s_real: S_MAX,
            r_dark: 100.0,
            r_coinc: 5.0e4,
            t_w: 10.0e-9,
            m: 1_000_000,
            epsilon: 0.0,
        }
    }
}

impl ExperimentParams {
    /// Range-check all fields and cache `ε`. Rejects out-of-range values
    /// before any simulation runs.
    pub fn validated(mut self) -> Result<Self> {
        if !self.alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be finite"));
        }
        if !self.beta.is_finite() {
            return Err(Error::invalid("beta", "must be finite"));
        }
        for (i, &e) in self.eta.iter().enumerate() {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::invalid(
                    "eta",
                    format!("branch {} is {e}, must be in [0, 1]", BRANCHES[i]),
                ));
            }
        }
        if !(0.0..=S_MAX).contains(&self.s_real) {
            return Err(Error::invalid(
                "s_real",
                format!("{} not in [0, 2*sqrt(2)]", self.s_real),
            ));
        }
        if !(self.r_dark >= 0.0 && self.r_dark.is_finite()) {
            return Err(Error::invalid("r_dark", "must be finite and >= 0"));
        }
        if !(self.r_coinc > 0.0 && self.r_coinc.is_finite()) {
            return Err(Error::invalid("r_coinc", "must be finite and > 0"));
        }
        if !(self.t_w > 0.0 && self.t_w.is_finite()) {
            return Err(Error::invalid("t_w", "must be finite and > 0"));
        }
        self.epsilon = 1.0 - self.s_real / S_MAX;
        Ok(self)
    }

    /// Entanglement deficit `ε = 1 − s_real/2√2`, cached by [`validated`](Self::validated).
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Uniform efficiency across all four branches.
    pub fn with_uniform_eta(mut self, eta: f64) -> Self {
        self.eta = [eta; 4];
        self
    }

    pub fn with_angles(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn with_s_real(mut self, s_real: f64) -> Self {
        self.s_real = s_real;
        self
    }

    pub fn with_noise(mut self, r_dark: f64, r_coinc: f64, t_w: f64) -> Self {
        self.r_dark = r_dark;
        self.r_coinc = r_coinc;
        self.t_w = t_w;
        self
    }

    pub fn with_m(mut self, m: u64) -> Self {
        self.m = m;
        self
    }
}
