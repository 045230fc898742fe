//! Series-level imperfection models: dark-count accidental coincidences and
//! imperfect entanglement. Detector efficiency is not here — it acts at
//! detection level inside the generators, because thinning after the fact
//! would not reshape the hidden-variable string distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcome::{Outcome, Parity};
use crate::series::CoincidenceSeries;

/// Parameters of the two series-level noise models.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Dark-count rate per detector, 1/s.
    pub r_dark: f64,
    /// Coincidence window, s.
    pub t_w: f64,
    /// True coincidence rate, 1/s.
    pub r_coinc: f64,
    /// Entanglement deficit `ε = 1 − s_real/2√2`.
    pub epsilon: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_dark >= 0.0 && self.r_dark.is_finite()) {
            return Err(Error::invalid("r_dark", "must be finite and >= 0"));
        }
        if !(self.t_w >= 0.0 && self.t_w.is_finite()) {
            return Err(Error::invalid("t_w", "must be finite and >= 0"));
        }
        if !(self.r_coinc > 0.0 && self.r_coinc.is_finite()) {
            return Err(Error::invalid("r_coinc", "must be finite and > 0"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon", format!("{} not in [0, 1]", self.epsilon)));
        }
        Ok(())
    }

    /// Expected accidental coincidences per recorded coincidence,
    /// `r_dark²·t_w / r_coinc`.
    pub fn accidentals_per_coincidence(&self) -> f64 {
        self.r_dark * self.r_dark * self.t_w / self.r_coinc
    }
}

/// Insert dark-count accidental coincidences at uniformly random positions.
///
/// The insertion count is Poisson with mean
/// `len · r_dark²·t_w / r_coinc`; each inserted outcome is uniform over the
/// four gate pairs, so half of the accidentals are odd. The relative order
/// of the original outcomes is preserved, and a zero dark rate returns the
/// series unchanged, byte-exact.
pub fn inject_dark_coincidences(
    series: &CoincidenceSeries,
    noise: &NoiseParams,
    seed: u64,
) -> Result<CoincidenceSeries> {
    noise.validate()?;
    let lambda = series.len() as f64 * noise.accidentals_per_coincidence();
    if lambda == 0.0 {
        return Ok(series.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = Poisson::new(lambda)
        .map_err(|e| Error::invalid("r_dark", format!("bad accidental mean {lambda}: {e}")))?;
    let n = poisson.sample(&mut rng) as u64;

    // gap index g means "insert before original outcome g"; g = len appends
    let len = series.len();
    let mut insertions: Vec<(u64, Outcome)> = (0..n)
        .map(|_| {
            let gap = rng.random_range(0..=len);
            let outcome = Outcome::ALL[rng.random_range(0..4usize)];
            (gap, outcome)
        })
        .collect();
    insertions.sort_by_key(|(gap, _)| *gap);

    let mut outcomes = Vec::with_capacity((len + n) as usize);
    let mut ins = insertions.into_iter().peekable();
    for (i, &o) in series.outcomes().iter().enumerate() {
        while ins.peek().is_some_and(|(gap, _)| *gap == i as u64) {
            outcomes.push(ins.next().unwrap().1);
        }
        outcomes.push(o);
    }
    outcomes.extend(ins.map(|(_, o)| o));

    let mut meta = series.meta().clone();
    meta.params.insert("dark_inserted".to_owned(), n.into());
    meta.params.insert("r_dark".to_owned(), noise.r_dark.into());
    meta.params.insert("noise_t_w".to_owned(), noise.t_w.into());
    meta.params.insert("r_coinc".to_owned(), noise.r_coinc.into());
    Ok(CoincidenceSeries::new(meta, outcomes))
}

/// Model imperfect entanglement: every even outcome independently turns
/// into a random odd outcome with probability `ε/2`, adding `≈ m·ε/2` odd
/// events to a mostly even series. Odd outcomes are never touched, and
/// `ε = 0` returns the series unchanged, byte-exact.
pub fn apply_entanglement_imperfection(
    series: &CoincidenceSeries,
    epsilon: f64,
    seed: u64,
) -> Result<CoincidenceSeries> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid("epsilon", format!("{epsilon} not in [0, 1]")));
    }
    if epsilon == 0.0 {
        return Ok(series.clone());
    }
    let flip_p = epsilon / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcomes = series
        .outcomes()
        .iter()
        .map(|&o| {
            if o.parity() == Parity::Even && rng.random::<f64>() < flip_p {
                if rng.random::<bool>() {
                    Outcome::PM
                } else {
                    Outcome::MP
                }
            } else {
                o
            }
        })
        .collect();
    let mut meta = series.meta().clone();
    meta.params.insert("epsilon".to_owned(), epsilon.into());
    Ok(CoincidenceSeries::new(meta, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{GeneratorTag, SeriesMeta};
    use crate::simulate::generate_iid;

    fn all_even(m: u64) -> CoincidenceSeries {
        CoincidenceSeries::new(
            SeriesMeta::new(GeneratorTag::Iid, None),
            vec![Outcome::PP; m as usize],
        )
    }

    fn noise(r_dark: f64, t_w: f64, r_coinc: f64) -> NoiseParams {
        NoiseParams {
            r_dark,
            t_w,
            r_coinc,
            epsilon: 0.0,
        }
    }

    #[test]
    fn zero_dark_rate_is_byte_exact_identity() {
        let s = generate_iid(1_000, 0.1, 3).unwrap();
        let out = inject_dark_coincidences(&s, &noise(0.0, 1e-8, 5e4), 9).unwrap();
        assert_eq!(out, s);
        assert_eq!(out.to_text(), s.to_text());
    }

    #[test]
    fn typical_detector_numbers_insert_almost_nothing() {
        // expected accidentals = 1e6 · 1e-9 = 1e-3
        let s = all_even(1_000_000);
        let out = inject_dark_coincidences(&s, &noise(100.0, 10e-9, 5e4), 1).unwrap();
        assert!(out.len() - s.len() <= 1);
    }

    #[test]
    fn tuned_insertion_rate_splits_half_odd() {
        // r_dark²·t_w/r_coinc = 0.01 → ~1e4 insertions into 1e6 slots
        let s = all_even(1_000_000);
        let out = inject_dark_coincidences(&s, &noise(1000.0, 1e-4, 1e4), 42).unwrap();
        let inserted = out.len() - s.len();
        let sigma_n = 1.0e4f64.sqrt();
        assert!((inserted as f64 - 1.0e4).abs() < 4.0 * sigma_n, "inserted = {inserted}");
        // all odd outcomes come from insertions; expect half of them
        let odd = out.odd_count() as f64;
        let sigma_odd = (inserted as f64 * 0.25).sqrt();
        assert!(
            (odd - inserted as f64 / 2.0).abs() < 3.0 * sigma_odd,
            "odd = {odd} of {inserted}"
        );
    }

    #[test]
    fn insertion_preserves_original_order() {
        let s = generate_iid(2_000, 0.3, 5).unwrap();
        let out = inject_dark_coincidences(&s, &noise(1000.0, 1e-4, 1e4), 6).unwrap();
        assert!(out.len() >= s.len());
        // the original outcomes must appear as a subsequence
        let mut it = out.outcomes().iter();
        for &orig in s.outcomes() {
            assert!(it.any(|&o| o == orig), "original order broken");
        }
    }

    #[test]
    fn zero_epsilon_is_byte_exact_identity() {
        let s = generate_iid(1_000, 0.1, 3).unwrap();
        let out = apply_entanglement_imperfection(&s, 0.0, 4).unwrap();
        assert_eq!(out.to_text(), s.to_text());
    }

    #[test]
    fn epsilon_flips_expected_count_on_all_even_series() {
        // ε from S_real = 2.66: expected odd ≈ m·ε/2 ≈ 29 774
        let eps = 1.0 - 2.66 / crate::params::S_MAX;
        let s = all_even(1_000_000);
        let out = apply_entanglement_imperfection(&s, eps, 7).unwrap();
        let odd = out.odd_count() as f64;
        let mean = 1.0e6 * eps / 2.0;
        let sigma = (1.0e6 * (eps / 2.0) * (1.0 - eps / 2.0)).sqrt();
        assert!((odd - mean).abs() < 3.0 * sigma, "odd = {odd}, mean = {mean}");
        assert_eq!(out.len(), s.len());
    }

    #[test]
    fn epsilon_never_converts_odd_to_even() {
        let s = generate_iid(50_000, 0.5, 11).unwrap();
        let out = apply_entanglement_imperfection(&s, 0.3, 12).unwrap();
        for (a, b) in s.outcomes().iter().zip(out.outcomes()) {
            if a.parity() == Parity::Odd {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn composition_law_on_iid_series() {
        // total odd fraction ≈ φ + (1−φ)·ε/2
        let phi = 0.048;
        let eps = 1.0 - 2.66 / crate::params::S_MAX;
        let s = generate_iid(1_000_000, phi, 13).unwrap();
        let out = apply_entanglement_imperfection(&s, eps, 14).unwrap();
        let expected = phi + (1.0 - phi) * eps / 2.0;
        let sigma = (expected * (1.0 - expected) / 1.0e6).sqrt();
        assert!(
            (out.odd_fraction() - expected).abs() < 4.0 * sigma,
            "odd fraction {} vs {expected}",
            out.odd_fraction()
        );
    }

    #[test]
    fn rejects_bad_epsilon() {
        let s = all_even(10);
        assert!(apply_entanglement_imperfection(&s, -0.1, 1).is_err());
        assert!(apply_entanglement_imperfection(&s, 1.1, 1).is_err());
    }
}
