//! The feasibility window: the φ interval inside which deterministic
//! structure, if present, would actually be detectable for a given setup.
//!
//! The lower limit comes from the entanglement and dark-count bounds (the
//! larger wins), multiplied by a safety factor that operationalizes their
//! "much greater than" character. The upper limit is the efficiency-driven
//! `φ_high`, either supplied directly or looked up in a precomputed table
//! shipped with the crate and regenerable with `estimate_phi_high`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ExperimentParams;
use crate::predict::{angle_from_phi, phi_lower_entanglement, phi_lower_noise};

/// Which physical effect sets the lower φ limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitingMechanism {
    Entanglement,
    DarkCounts,
}

/// A computed feasibility window. Angles are reported only where the
/// corresponding φ is a probability (≤ 1).
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityWindow {
    /// Lower limit after the safety factor.
    pub phi_low: f64,
    /// Raw entanglement bound `ε/2`.
    pub phi_low_entanglement: f64,
    /// Raw dark-count bound `½·r_dark²·t_w/r_coinc`.
    pub phi_low_noise: f64,
    pub limiting_low: LimitingMechanism,
    pub safety_factor: f64,
    /// Upper limit, when one is known for this `(η, m)`.
    pub phi_high: Option<f64>,
    pub exists: bool,
    pub angle_low_rad: Option<f64>,
    pub angle_low_deg: Option<f64>,
    pub angle_high_rad: Option<f64>,
    pub angle_high_deg: Option<f64>,
}

fn angle_pair(phi: f64) -> (Option<f64>, Option<f64>) {
    match angle_from_phi(phi) {
        Ok(rad) => (Some(rad), Some(rad.to_degrees())),
        Err(_) => (None, None),
    }
}

/// Combine the lower bounds with a resolved `phi_high`.
///
/// The absence of a window is a result, not an error: it means the
/// hypothesized slow decay of determinism cannot be observed with this
/// setup.
pub fn compute_window(
    params: &ExperimentParams,
    safety_factor: f64,
    phi_high: Option<f64>,
) -> Result<FeasibilityWindow> {
    if !(safety_factor >= 1.0 && safety_factor.is_finite()) {
        return Err(Error::invalid("safety_factor", "must be finite and >= 1"));
    }
    let ent = phi_lower_entanglement(params.s_real);
    let noise = phi_lower_noise(params.r_dark, params.r_coinc, params.t_w)?;
    let (raw, limiting_low) = if noise > ent {
        (noise, LimitingMechanism::DarkCounts)
    } else {
        (ent, LimitingMechanism::Entanglement)
    };
    let phi_low = safety_factor * raw;
    let exists = phi_high.is_some_and(|high| phi_low < high);
    let (angle_low_rad, angle_low_deg) = angle_pair(phi_low);
    let (angle_high_rad, angle_high_deg) = phi_high.map_or((None, None), angle_pair);
    Ok(FeasibilityWindow {
        phi_low,
        phi_low_entanglement: ent,
        phi_low_noise: noise,
        limiting_low,
        safety_factor,
        phi_high,
        exists,
        angle_low_rad,
        angle_low_deg,
        angle_high_rad,
        angle_high_deg,
    })
}

/// One measured `(η, m) → φ_high` point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiHighEntry {
    pub eta: f64,
    pub m: u64,
    /// `None` records that no φ in range reached the required power.
    pub phi_high: Option<f64>,
    /// Provenance of the estimate.
    pub reps: u32,
    pub power: f64,
    pub significance: f64,
    pub seed: u64,
}

/// Precomputed `φ_high` measurements, regenerable via the φ_high estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiHighTable {
    pub entries: Vec<PhiHighEntry>,
}

static DEFAULT_TABLE: OnceLock<PhiHighTable> = OnceLock::new();

impl PhiHighTable {
    pub fn from_json_str(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| Error::parse(0, format!("bad phi_high table JSON: {e}")))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// The table bundled with the crate.
    pub fn bundled() -> &'static PhiHighTable {
        DEFAULT_TABLE.get_or_init(|| {
            Self::from_json_str(include_str!("../data/phi_high_table.json"))
                .expect("bundled phi_high table parses")
        })
    }

    /// Entry nearest to `(eta, m)` in `(η, log₁₀ m)` distance; exact matches
    /// win with distance zero. `None` on an empty table.
    pub fn lookup(&self, eta: f64, m: u64) -> Option<&PhiHighEntry> {
        let log_m = (m as f64).log10();
        self.entries.iter().min_by(|a, b| {
            let d = |e: &PhiHighEntry| {
                let de = (e.eta - eta) / 0.1;
                let dm = (e.m as f64).log10() - log_m;
                de * de + dm * dm
            };
            d(a).partial_cmp(&d(b)).expect("finite distances")
        })
    }
}
