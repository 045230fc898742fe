//! Pearson chi-square machinery shared by the goodness-of-fit tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// `Σ (O−E)²/E` over bins.
pub(crate) fn chi_square_stat(observed: &[f64], expected: &[f64]) -> f64 {
    debug_assert_eq!(observed.len(), expected.len());
    observed
        .iter()
        .zip(expected)
        .map(|(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum()
}

/// Upper-tail probability of the chi-square distribution.
pub(crate) fn chi_square_pvalue(statistic: f64, dof: usize) -> f64 {
    let dist = ChiSquared::new(dof as f64).expect("dof >= 1");
    dist.sf(statistic)
}
