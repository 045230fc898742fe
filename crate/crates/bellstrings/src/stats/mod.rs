//! Distinguishability statistics: goodness of fit of an extracted string
//! distribution against the i.i.d. prediction `n(k)`, odd-probability
//! estimation, and the efficiency-driven upper limit `φ_high`.

mod chi2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::predict::angle_from_phi;
use crate::series::CoincidenceSeries;
use crate::simulate::wqm::{wqm_generate, WqmConfig};
use crate::strings::{Convention, StringsDistribution};

/// Minimum expected count per chi-square bin; smaller tail bins get pooled.
const MIN_EXPECTED: f64 = 5.0;

/// Test verdict at the configured significance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Distinguishable,
    Indistinguishable,
}

/// Result of a goodness-of-fit comparison.
#[derive(Debug, Clone, Serialize)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of bins after tail pooling.
    pub pooled_bins: usize,
    pub significance: f64,
    pub verdict: Verdict,
}

impl GofResult {
    pub fn is_distinguishable(&self) -> bool {
        self.verdict == Verdict::Distinguishable
    }
}

fn check_significance(significance: f64) -> Result<()> {
    if !(significance > 0.0 && significance < 0.5) {
        return Err(Error::invalid(
            "significance",
            format!("{significance} not in (0, 0.5)"),
        ));
    }
    Ok(())
}

/// Pool the geometric expectation `n(k) = m·φ²·(1−φ)^k` and the observed
/// counts into bins with expected count ≥ `MIN_EXPECTED` each. Bins run over
/// consecutive `k`; the final bin absorbs the whole geometric tail.
fn pooled_bins(
    dist: &StringsDistribution,
    m: u64,
    phi: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m_f = m as f64;
    let q = 1.0 - phi;
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    let mut k: u64 = 0;
    let mut e_k = m_f * phi * phi; // n(0)
    loop {
        // tail mass from k to infinity: n(k)/φ = m·φ·(1−φ)^k
        let tail = e_k / phi;
        if tail < MIN_EXPECTED {
            break;
        }
        acc_exp += e_k;
        acc_obs += dist.count(k) as f64;
        if acc_exp >= MIN_EXPECTED {
            expected.push(acc_exp);
            observed.push(acc_obs);
            acc_exp = 0.0;
            acc_obs = 0.0;
        }
        k += 1;
        e_k *= q;
    }
    // everything past the walk, observed and expected alike
    let tail_exp = m_f * phi * q.powi(k as i32) + acc_exp;
    let tail_obs: f64 = dist
        .counts()
        .range(k..)
        .map(|(_, c)| *c as f64)
        .sum::<f64>()
        + acc_obs;
    if tail_exp >= MIN_EXPECTED || expected.is_empty() {
        expected.push(tail_exp);
        observed.push(tail_obs);
    } else if let (Some(e), Some(o)) = (expected.last_mut(), observed.last_mut()) {
        *e += tail_exp;
        *o += tail_obs;
    }
    Ok((observed, expected))
}

/// Pearson chi-square of an extracted distribution against `n(k)` with φ
/// supplied from the known angles; `dof = bins − 1`.
pub fn gof_against_nk(
    dist: &StringsDistribution,
    m: u64,
    phi: f64,
    significance: f64,
) -> Result<GofResult> {
    gof_nk_inner(dist, m, phi, significance, 1)
}

/// Variant for data whose angles are imperfectly known: φ is estimated from
/// the distribution itself (`N_strings/m`) and one more degree of freedom is
/// spent, `dof = bins − 2`.
pub fn gof_against_nk_fitted(
    dist: &StringsDistribution,
    m: u64,
    significance: f64,
) -> Result<GofResult> {
    let phi = dist.n_strings() as f64 / m as f64;
    gof_nk_inner(dist, m, phi, significance, 2)
}

fn gof_nk_inner(
    dist: &StringsDistribution,
    m: u64,
    phi: f64,
    significance: f64,
    spent_dof: usize,
) -> Result<GofResult> {
    check_significance(significance)?;
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::invalid("phi", format!("{phi} not in (0, 1)")));
    }
    if m < 1 {
        return Err(Error::invalid("m", "must be >= 1"));
    }
    if dist.n_strings() == 0 {
        return Err(Error::InsufficientData("distribution has no strings".into()));
    }
    let (observed, expected) = pooled_bins(dist, m, phi)?;
    if observed.len() < spent_dof + 1 {
        return Err(Error::InsufficientData(format!(
            "only {} bins after pooling",
            observed.len()
        )));
    }
    let statistic = chi2::chi_square_stat(&observed, &expected);
    let dof = observed.len() - spent_dof;
    let p_value = chi2::chi_square_pvalue(statistic, dof);
    Ok(GofResult {
        statistic,
        dof,
        p_value,
        pooled_bins: observed.len(),
        significance,
        verdict: if p_value < significance {
            Verdict::Distinguishable
        } else {
            Verdict::Indistinguishable
        },
    })
}

/// Two-sample chi-square: are two extracted distributions draws from the
/// same underlying string distribution? Bins are pooled so that the smaller
/// sample's expected count stays ≥ `MIN_EXPECTED`; `dof = bins − 1`.
pub fn gof_two_sample(
    first: &StringsDistribution,
    second: &StringsDistribution,
    significance: f64,
) -> Result<GofResult> {
    check_significance(significance)?;
    let n1 = first.n_strings() as f64;
    let n2 = second.n_strings() as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::InsufficientData("a distribution has no strings".into()));
    }
    let w1 = n1 / (n1 + n2);
    let w2 = n2 / (n1 + n2);
    let k_end = first
        .max_length()
        .unwrap_or(0)
        .max(second.max_length().unwrap_or(0));

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc1 = 0.0;
    let mut acc2 = 0.0;
    for k in 0..=k_end {
        acc1 += first.count(k) as f64;
        acc2 += second.count(k) as f64;
        let combined = acc1 + acc2;
        if combined * w1 >= MIN_EXPECTED && combined * w2 >= MIN_EXPECTED {
            bins.push((acc1, acc2));
            acc1 = 0.0;
            acc2 = 0.0;
        }
    }
    if acc1 + acc2 > 0.0 {
        if let Some(last) = bins.last_mut() {
            last.0 += acc1;
            last.1 += acc2;
        } else {
            bins.push((acc1, acc2));
        }
    }
    if bins.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} bins after pooling",
            bins.len()
        )));
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(o1, o2)| {
            let total = o1 + o2;
            let e1 = total * w1;
            let e2 = total * w2;
            (o1 - e1).powi(2) / e1 + (o2 - e2).powi(2) / e2
        })
        .sum();
    let dof = bins.len() - 1;
    let p_value = chi2::chi_square_pvalue(statistic, dof);
    Ok(GofResult {
        statistic,
        dof,
        p_value,
        pooled_bins: bins.len(),
        significance,
        verdict: if p_value < significance {
            Verdict::Distinguishable
        } else {
            Verdict::Indistinguishable
        },
    })
}

/// Binomial estimate of the odd-outcome probability.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhiEstimate {
    pub phi_hat: f64,
    pub std_err: f64,
}

/// `φ̂ = odd count / m` with its binomial standard error. Requires at least
/// 100 outcomes.
pub fn estimate_phi_from_series(series: &CoincidenceSeries) -> Result<PhiEstimate> {
    let m = series.len();
    if m < 100 {
        return Err(Error::InsufficientData(format!(
            "series has {m} outcomes, need >= 100"
        )));
    }
    let phi_hat = series.odd_fraction();
    let std_err = (phi_hat * (1.0 - phi_hat) / m as f64).sqrt();
    Ok(PhiEstimate { phi_hat, std_err })
}

/// Options for the `φ_high` power search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhiHighOptions {
    pub significance: f64,
    /// Required fraction of distinguishable runs.
    pub power: f64,
    /// Seeded simulations per probed φ.
    pub reps: u32,
    /// Absolute bisection resolution in φ.
    pub resolution: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

impl Default for PhiHighOptions {
    fn default() -> Self {
        PhiHighOptions {
            significance: 0.01,
            power: 0.9,
            reps: 50,
            resolution: 0.005,
            phi_min: 1e-3,
            phi_max: 0.5,
        }
    }
}

impl PhiHighOptions {
    fn validate(&self) -> Result<()> {
        check_significance(self.significance)?;
        if !(self.power > 0.5 && self.power < 1.0) {
            return Err(Error::invalid("power", format!("{} not in (0.5, 1)", self.power)));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps", "must be >= 1"));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::invalid("resolution", "must be > 0"));
        }
        if !(self.phi_min > 0.0 && self.phi_min < self.phi_max && self.phi_max <= 0.5) {
            return Err(Error::invalid("phi_min", "need 0 < phi_min < phi_max <= 0.5"));
        }
        Ok(())
    }
}

/// Fraction of `reps` seeded generator runs at `(φ, η)` whose extracted
/// distribution is rejected against `n(k)`. Runs that end with too little
/// data to test count as not distinguishable.
pub fn reject_fraction(
    phi: f64,
    eta: f64,
    m: u64,
    config: &WqmConfig,
    significance: f64,
    reps: u32,
    seed: u64,
) -> Result<f64> {
    let beta = angle_from_phi(phi)?;
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let run_seeds: Vec<u64> = (0..reps).map(|_| seeder.random()).collect();
    let rejections = run_seeds
        .into_par_iter()
        .map(|run_seed| -> Result<u32> {
            let series = wqm_generate(m, 0.0, beta, config, [eta; 4], run_seed)?;
            let dist = crate::strings::extract_strings(&series, Convention::Auto)?;
            match gof_against_nk(&dist, m, phi, significance) {
                Ok(r) => Ok(r.is_distinguishable() as u32),
                Err(Error::InsufficientData(_)) => Ok(0),
                Err(e) => Err(e),
            }
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(f64::from(rejections) / f64::from(reps))
}

/// Largest φ at which determinism would still be detected: bisection over
/// `[phi_min, phi_max]` for the highest φ whose rejection fraction meets
/// `power`. Assumes the fraction is non-increasing in φ, which holds on
/// average but not per-seed; the returned bound carries that Monte-Carlo
/// fuzz. `None` means no φ in range reaches the requested power.
pub fn estimate_phi_high(
    eta: f64,
    m: u64,
    config: &WqmConfig,
    opts: &PhiHighOptions,
    seed: u64,
) -> Result<Option<f64>> {
    opts.validate()?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid("eta", format!("{eta} not in (0, 1]")));
    }
    let powered = |phi: f64, probe: u64| -> Result<bool> {
        let f = reject_fraction(
            phi,
            eta,
            m,
            config,
            opts.significance,
            opts.reps,
            seed.wrapping_add(probe),
        )?;
        Ok(f >= opts.power)
    };
    if !powered(opts.phi_min, 0)? {
        return Ok(None);
    }
    if powered(opts.phi_max, 1)? {
        return Ok(Some(opts.phi_max));
    }
    let mut lo = opts.phi_min;
    let mut hi = opts.phi_max;
    let mut probe = 2;
    while hi - lo > opts.resolution {
        let mid = 0.5 * (lo + hi);
        if powered(mid, probe)? {
            lo = mid;
        } else {
            hi = mid;
        }
        probe += 1;
    }
    Ok(Some(lo))
}

/// Rejection fraction over a φ grid, for CSV export and plots.
pub fn reject_fraction_sweep(
    phis: &[f64],
    eta: f64,
    m: u64,
    config: &WqmConfig,
    significance: f64,
    reps: u32,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    phis.iter()
        .enumerate()
        .map(|(i, &phi)| {
            let f = reject_fraction(
                phi,
                eta,
                m,
                config,
                significance,
                reps,
                seed.wrapping_add(i as u64),
            )?;
            Ok((phi, f))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::generate_iid;
    use crate::strings::extract_strings;

    #[test]
    fn iid_data_is_accepted_against_its_own_law() {
        let s = generate_iid(200_000, 0.1, 314).unwrap();
        let d = extract_strings(&s, Convention::Auto).unwrap();
        let r = gof_against_nk(&d, 200_000, 0.1, 0.01).unwrap();
        assert_eq!(r.verdict, Verdict::Indistinguishable);
        assert!(r.pooled_bins > 10);
        assert_eq!(r.dof, r.pooled_bins - 1);
    }

    #[test]
    fn wrong_phi_is_rejected() {
        let s = generate_iid(200_000, 0.10, 314).unwrap();
        let d = extract_strings(&s, Convention::Auto).unwrap();
        let r = gof_against_nk(&d, 200_000, 0.13, 0.01).unwrap();
        assert_eq!(r.verdict, Verdict::Distinguishable);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn fitted_variant_spends_one_more_dof() {
        let s = generate_iid(100_000, 0.2, 9).unwrap();
        let d = extract_strings(&s, Convention::Auto).unwrap();
        let supplied = gof_against_nk(&d, 100_000, 0.2, 0.01).unwrap();
        let fitted = gof_against_nk_fitted(&d, 100_000, 0.01).unwrap();
        assert_eq!(fitted.dof, fitted.pooled_bins - 2);
        assert_eq!(fitted.verdict, Verdict::Indistinguishable);
        assert_eq!(supplied.pooled_bins, fitted.pooled_bins);
    }

    #[test]
    fn too_little_data_is_an_error() {
        let s = generate_iid(200, 0.05, 1).unwrap();
        let d = extract_strings(&s, Convention::Auto).unwrap();
        // m·φ ≈ 10 strings: barely one or two bins
        match gof_against_nk(&d, 200, 0.05, 0.01) {
            Err(Error::InsufficientData(_)) => {}
            other => panic!("expected insufficient data, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_significance_and_phi() {
        let s = generate_iid(10_000, 0.1, 2).unwrap();
        let d = extract_strings(&s, Convention::Auto).unwrap();
        assert!(gof_against_nk(&d, 10_000, 0.1, 0.6).is_err());
        assert!(gof_against_nk(&d, 10_000, 0.0, 0.01).is_err());
        assert!(gof_against_nk(&d, 10_000, 1.0, 0.01).is_err());
    }

    #[test]
    fn two_sample_accepts_same_law_and_rejects_different() {
        let a = extract_strings(&generate_iid(300_000, 0.1, 5).unwrap(), Convention::Auto).unwrap();
        let b = extract_strings(&generate_iid(300_000, 0.1, 6).unwrap(), Convention::Auto).unwrap();
        let same = gof_two_sample(&a, &b, 0.01).unwrap();
        assert_eq!(same.verdict, Verdict::Indistinguishable);

        let c = extract_strings(&generate_iid(300_000, 0.13, 7).unwrap(), Convention::Auto).unwrap();
        let diff = gof_two_sample(&a, &c, 0.01).unwrap();
        assert_eq!(diff.verdict, Verdict::Distinguishable);
    }

    #[test]
    fn phi_estimate_matches_generator() {
        let s = generate_iid(1_000_000, 0.048, 21).unwrap();
        let e = estimate_phi_from_series(&s).unwrap();
        assert!((e.phi_hat - 0.048).abs() < 3.0 * e.std_err);
        assert!((e.std_err - (0.048f64 * 0.952 / 1e6).sqrt()).abs() < 1e-5);

        let all_even = generate_iid(1_000, 0.0, 1).unwrap();
        assert_eq!(estimate_phi_from_series(&all_even).unwrap().phi_hat, 0.0);

        let tiny = generate_iid(50, 0.1, 1).unwrap();
        assert!(estimate_phi_from_series(&tiny).is_err());
    }

    #[test]
    fn phi_high_options_validate() {
        let mut o = PhiHighOptions::default();
        assert!(o.validate().is_ok());
        o.power = 0.4;
        assert!(o.validate().is_err());
    }
}
