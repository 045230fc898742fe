//! Independent, identically distributed generator: the indeterministic
//! reference model behind the geometric string-length prediction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::outcome::Outcome;
use crate::series::{CoincidenceSeries, GeneratorTag, SeriesMeta};

/// Generate `m` outcomes, each independently odd with probability `phi`.
/// Odd outcomes split 50/50 between `+-`/`-+`, even between `++`/`--`.
/// The same seed always yields the same series.
pub fn generate_iid(m: u64, phi: f64, seed: u64) -> Result<CoincidenceSeries> {
    if m < 1 {
        return Err(Error::invalid("m", "must be >= 1"));
    }
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::invalid("phi", format!("{phi} not in [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::with_capacity(m as usize);
    for _ in 0..m {
        let odd = rng.random::<f64>() < phi;
        let flip = rng.random::<bool>();
        outcomes.push(match (odd, flip) {
            (false, false) => Outcome::PP,
            (false, true) => Outcome::MM,
            (true, false) => Outcome::PM,
            (true, true) => Outcome::MP,
        });
    }
    let meta = SeriesMeta::new(GeneratorTag::Iid, Some(seed))
        .with_param("phi", phi)
        .with_param("m", m);
    Ok(CoincidenceSeries::new(meta, outcomes))
}

/// Thin a series by per-branch detection efficiency: each outcome survives
/// only if both of its detections survive their branch draw.
///
/// This is a comparison utility; the hidden-variable generator applies
/// efficiency inside the detection loop instead.
pub fn thin_detections(
    series: &CoincidenceSeries,
    eta: [f64; 4],
    seed: u64,
) -> Result<CoincidenceSeries> {
    for (i, &e) in eta.iter().enumerate() {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::invalid(
                "eta",
                format!("branch {} is {e}, must be in [0, 1]", crate::params::BRANCHES[i]),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::with_capacity(series.outcomes().len());
    for &o in series.outcomes() {
        let ea = eta[branch_index(Station::A, o.gate_a)];
        let eb = eta[branch_index(Station::B, o.gate_b)];
        let keep_a = rng.random::<f64>() < ea;
        let keep_b = rng.random::<f64>() < eb;
        if keep_a && keep_b {
            kept.push(o);
        }
    }
    let mut meta = series.meta().clone();
    meta.params.insert(
        "thinned_eta".to_owned(),
        serde_json::to_value(eta).expect("eta serializes"),
    );
    Ok(CoincidenceSeries::new(meta, kept))
}

use super::wqm::{branch_index, Station};
