//! Closed-form predictions: coincidence probabilities, the expected
//! string-length distribution of an i.i.d. series, and the noise and
//! entanglement lower bounds on the odd-outcome probability.
//!
//! All functions are pure and generic over the scalar type.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::Real;

/// Probabilities of the four coincidence outcomes for the `|Φ+⟩` state.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoincidenceProbabilities<R> {
    pub p_pp: R,
    pub p_mm: R,
    pub p_pm: R,
    pub p_mp: R,
}

impl<R: Real> CoincidenceProbabilities<R> {
    pub fn sum(&self) -> R {
        self.p_pp + self.p_mm + self.p_pm + self.p_mp
    }

    /// Probability of an odd outcome, `p_pm + p_mp`.
    pub fn odd(&self) -> R {
        self.p_pm + self.p_mp
    }

    pub fn even(&self) -> R {
        self.p_pp + self.p_mm
    }
}

/// Outcome probabilities at polarizer angles `alpha`, `beta`:
/// `P++ = P-- = cos²(α−β)/2`, `P+- = P-+ = sin²(α−β)/2`.
pub fn coincidence_probabilities<R: Real>(alpha: R, beta: R) -> CoincidenceProbabilities<R> {
    let half = R::from_f64_c(0.5);
    // both parities derive from the same sin² so that odd_probability
    // equals p_pm + p_mp bit-exactly
    let s2 = phi_from_angle(alpha - beta);
    let c2 = R::one() - s2;
    CoincidenceProbabilities {
        p_pp: half * c2,
        p_mm: half * c2,
        p_pm: half * s2,
        p_mp: half * s2,
    }
}

/// Probability of an odd outcome, `φ = sin²(α−β)`.
pub fn odd_probability<R: Real>(alpha: R, beta: R) -> R {
    phi_from_angle(alpha - beta)
}

/// `φ = sin²(δ)` for an angle difference `δ`.
pub fn phi_from_angle<R: Real>(delta: R) -> R {
    let s = delta.sin();
    s * s
}

/// Inverse of [`phi_from_angle`] on the principal branch: `δ = arcsin(√φ)`.
pub fn angle_from_phi<R: Real>(phi: R) -> Result<R> {
    if !(phi >= R::zero() && phi <= R::one()) {
        return Err(Error::invalid("phi", format!("{phi} not in [0, 1]")));
    }
    Ok(phi.sqrt().asin())
}

/// Expected number of strings of length `k` in an i.i.d. series:
/// `n(k) = m·φ²·(1−φ)^k`. Counts are expectations, not integers.
#[derive(Debug, Clone, Serialize)]
pub struct ExpectedStrings<R> {
    m: u64,
    phi: R,
    counts: Vec<R>,
}

impl<R: Real> ExpectedStrings<R> {
    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn phi(&self) -> R {
        self.phi
    }

    /// Expected count at length `k`, evaluated even beyond the stored range.
    pub fn count(&self, k: u64) -> R {
        n_k(self.m, self.phi, k)
    }

    /// Stored counts for `k = 0..len`.
    pub fn counts(&self) -> &[R] {
        &self.counts
    }

    /// Largest stored `k`.
    pub fn k_hi(&self) -> u64 {
        self.counts.len() as u64 - 1
    }
}

fn n_k<R: Real>(m: u64, phi: R, k: u64) -> R {
    let m = R::from_f64_c(m as f64);
    m * phi * phi * (R::one() - phi).powi(k as i32)
}

fn check_phi_open_interval<R: Real>(phi: R) -> Result<()> {
    if !(phi > R::zero() && phi < R::one()) {
        return Err(Error::invalid(
            "phi",
            format!("{phi} is outside (0, 1): the series is deterministic and has no string distribution"),
        ));
    }
    Ok(())
}

/// Tabulate `n(k)` for `k = 0..=k_hi`.
pub fn expected_strings<R: Real>(m: u64, phi: R, k_hi: u64) -> Result<ExpectedStrings<R>> {
    if m < 1 {
        return Err(Error::invalid("m", "must be >= 1"));
    }
    check_phi_open_interval(phi)?;
    let base = R::from_f64_c(m as f64) * phi * phi;
    let q = R::one() - phi;
    let mut counts = Vec::with_capacity(k_hi as usize + 1);
    let mut c = base;
    for _ in 0..=k_hi {
        counts.push(c);
        c = c * q;
    }
    Ok(ExpectedStrings { m, phi, counts })
}

/// Default tabulation range `[0, ceil(3·k_max)]`, wide enough to show the tail.
pub fn default_k_hi<R: Real>(m: u64, phi: R) -> Result<u64> {
    let km = k_max(m, phi)?;
    Ok((km * R::from_f64_c(3.0)).ceil().to_f64_c() as u64)
}

/// Expected total number of strings, `N_strings ≈ m·φ`.
pub fn expected_total_strings<R: Real>(m: u64, phi: R) -> Result<R> {
    if !(phi >= R::zero() && phi <= R::one()) {
        return Err(Error::invalid("phi", format!("{phi} not in [0, 1]")));
    }
    Ok(R::from_f64_c(m as f64) * phi)
}

/// Largest meaningful string length, the real solution of `n(k_max) = 1`:
/// `k_max = −ln(m·φ²)/ln(1−φ)`.
///
/// Requires `m·φ² > 1`, i.e. at least one length-0 string is expected.
pub fn k_max<R: Real>(m: u64, phi: R) -> Result<R> {
    check_phi_open_interval(phi)?;
    let m_r = R::from_f64_c(m as f64);
    let mp2 = m_r * phi * phi;
    if mp2 <= R::one() {
        return Err(Error::invalid(
            "m",
            format!("m*phi^2 = {mp2} <= 1: no string is expected even once"),
        ));
    }
    Ok(-mp2.ln() / (R::one() - phi).ln())
}

/// CHSH parameter from sinusoid visibility:
/// `S_real = 2√2·(N_max−N_min)/(N_max+N_min)`.
pub fn s_from_visibility<R: Real>(n_max: R, n_min: R) -> Result<R> {
    if n_min < R::zero() || n_max < n_min {
        return Err(Error::invalid("n_max", "need n_max >= n_min >= 0"));
    }
    let total = n_max + n_min;
    if total <= R::zero() {
        return Err(Error::invalid("n_max", "n_max + n_min must be > 0"));
    }
    Ok(R::from_f64_c(crate::params::S_MAX) * (n_max - n_min) / total)
}

/// Lower bound on φ from imperfect entanglement: `½·ε` with
/// `ε = 1 − s_real/2√2`. The "much greater than" safety factor is applied
/// by the window calculator, not here.
pub fn phi_lower_entanglement<R: Real>(s_real: R) -> R {
    let half = R::from_f64_c(0.5);
    half * (R::one() - s_real / R::from_f64_c(crate::params::S_MAX))
}

/// Lower bound on φ from dark-count accidentals:
/// `½·r_dark²·t_w / r_coinc`. Raw bound, same convention as
/// [`phi_lower_entanglement`].
pub fn phi_lower_noise<R: Real>(r_dark: R, r_coinc: R, t_w: R) -> Result<R> {
    if r_dark < R::zero() {
        return Err(Error::invalid("r_dark", "must be >= 0"));
    }
    if r_coinc <= R::zero() {
        return Err(Error::invalid("r_coinc", "must be > 0"));
    }
    if t_w <= R::zero() {
        return Err(Error::invalid("t_w", "must be > 0"));
    }
    Ok(R::from_f64_c(0.5) * r_dark * r_dark * t_w / r_coinc)
}
