//! WQM: a deterministic, nonlocal hidden-variable generator.
//!
//! Both photons of a pair carry the same randomly varying transverse unit
//! vector `V`. At a station, each polarizer gate owns a memory that
//! accumulates `|V·axis|^p` per time step; the first memory to climb past
//! the threshold `u` fires its detector and `u` is subtracted. Detection is
//! therefore deterministic given `V(t)` and the memory state — only `V`
//! carries randomness.
//!
//! Per pair, the *source* station accumulates first, with `V` advancing
//! every step. When it fires, `V` at the partner station snaps to the axis
//! of the fired gate (the nonlocal step) and stays there while the partner
//! accumulates until one of its own memories fires. Detector efficiency is
//! applied per detection; a coincidence is recorded only if both detections
//! survive. Stations swap the source role after every pair, recorded or
//! not, and memories persist across pairs.
//!
//! Within a step the accumulated projection grows linearly, so a crossing
//! is resolved at its exact in-step fraction: the fired memory lands on the
//! threshold and resets to zero, and the other memory receives its own
//! increment up to that fraction. This keeps every memory inside `[0, u)`
//! for any threshold and makes the equal-angle case produce even outcomes
//! only, with no overshoot artifacts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::outcome::{Gate, Outcome};
use crate::predict::phi_from_angle;
use crate::series::{CoincidenceSeries, GeneratorTag, SeriesMeta};

/// Measurement station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Station {
    A,
    B,
}

impl Station {
    pub fn other(self) -> Station {
        match self {
            Station::A => Station::B,
            Station::B => Station::A,
        }
    }

    fn idx(self) -> usize {
        match self {
            Station::A => 0,
            Station::B => 1,
        }
    }
}

/// Efficiency-array index of a detector branch, in `A+, A-, B+, B-` order.
pub(crate) fn branch_index(station: Station, gate: Gate) -> usize {
    station.idx() * 2 + (gate == Gate::Minus) as usize
}

/// Stochastic process driving the hidden vector's angle between steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VProcess {
    /// Fresh uniform angle in `[0, 2π)` every step.
    RedrawUniform,
    /// Gaussian angular increment with the given standard deviation (radians).
    RandomWalk { step: f64 },
}

/// Initial memory charge at engine construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryInit {
    Zero,
    /// Uniform in `[0, u)`; avoids lockstep between the four memories.
    UniformRandom,
}

/// Engine configuration. The defaults are the calibrated reference
/// configuration: `wqm_calibrate` is the arbiter for any change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WqmConfig {
    /// Detection threshold `u`.
    pub threshold_u: f64,
    /// Exponent `p` in the per-step gate increment `|V·axis|^p`.
    pub projection_exponent: f64,
    pub v_process: VProcess,
    pub memory_init: MemoryInit,
    /// The nonlocal collapse step. `false` selects the semi-classical
    /// variant, which is not implemented; generation rejects it.
    pub nonlocal: bool,
    /// Per-pair step budget before giving up with a non-convergence error.
    pub max_steps_per_pair: u64,
}

impl Default for WqmConfig {
    fn default() -> Self {
        WqmConfig {
            threshold_u: 1.0,
            projection_exponent: 2.0,
            v_process: VProcess::RedrawUniform,
            memory_init: MemoryInit::UniformRandom,
            nonlocal: true,
            max_steps_per_pair: 1_000_000,
        }
    }
}

impl WqmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_u > 0.0 && self.threshold_u.is_finite()) {
            return Err(Error::invalid("threshold_u", "must be finite and > 0"));
        }
        if !(self.projection_exponent > 0.0 && self.projection_exponent.is_finite()) {
            return Err(Error::invalid("projection_exponent", "must be finite and > 0"));
        }
        if let VProcess::RandomWalk { step } = self.v_process {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::invalid("v_process", "random walk step must be finite and > 0"));
            }
        }
        if self.max_steps_per_pair == 0 {
            return Err(Error::invalid("max_steps_per_pair", "must be >= 1"));
        }
        Ok(())
    }
}

/// Both firings of one pair, before and after efficiency selection.
#[derive(Debug, Clone, Copy)]
pub struct PairRecord {
    pub gate_a: Gate,
    pub gate_b: Gate,
    pub detected_a: bool,
    pub detected_b: bool,
}

impl PairRecord {
    pub fn recorded(&self) -> bool {
        self.detected_a && self.detected_b
    }

    pub fn outcome(&self) -> Outcome {
        Outcome::new(self.gate_a, self.gate_b)
    }
}

/// The hidden-variable state machine, generic over the accumulator scalar.
pub struct Engine<R: Real> {
    u: R,
    exponent: R,
    p_is_two: bool,
    v_process: VProcess,
    max_steps: u64,
    angles: [R; 2],
    eta: [f64; 4],
    v: R,
    mems: [[R; 2]; 2],
    source: Station,
    rng: ChaCha8Rng,
    pairs_done: u64,
}

impl<R: Real> Engine<R> {
    pub fn new(
        alpha: f64,
        beta: f64,
        eta: [f64; 4],
        config: &WqmConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(Error::invalid("alpha", "angles must be finite"));
        }
        for (i, &e) in eta.iter().enumerate() {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::invalid(
                    "eta",
                    format!("branch {} is {e}, must be in (0, 1]", crate::params::BRANCHES[i]),
                ));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = R::from_f64_c(config.threshold_u);
        let mut mems = [[R::zero(); 2]; 2];
        if config.memory_init == MemoryInit::UniformRandom {
            for station in &mut mems {
                for mem in station.iter_mut() {
                    *mem = R::from_f64_c(rng.random::<f64>()) * u;
                }
            }
        }
        let v = R::from_f64_c(rng.random::<f64>() * std::f64::consts::TAU);
        Ok(Engine {
            u,
            exponent: R::from_f64_c(config.projection_exponent),
            p_is_two: config.projection_exponent == 2.0,
            v_process: config.v_process,
            max_steps: config.max_steps_per_pair,
            angles: [R::from_f64_c(alpha), R::from_f64_c(beta)],
            eta,
            v,
            mems,
            source: Station::A,
            rng,
            pairs_done: 0,
        })
    }

    pub fn source_station(&self) -> Station {
        self.source
    }

    pub fn memories(&self) -> [[R; 2]; 2] {
        self.mems
    }

    pub fn threshold(&self) -> R {
        self.u
    }

    pub fn v_angle(&self) -> R {
        self.v
    }

    pub fn pairs_done(&self) -> u64 {
        self.pairs_done
    }

    fn advance_v(&mut self) {
        match self.v_process {
            VProcess::RedrawUniform => {
                self.v = R::from_f64_c(self.rng.random::<f64>() * std::f64::consts::TAU);
            }
            VProcess::RandomWalk { step } => {
                let z: f64 = self.rng.sample(StandardNormal);
                let v = self.v.to_f64_c() + step * z;
                self.v = R::from_f64_c(v.rem_euclid(std::f64::consts::TAU));
            }
        }
    }

    /// Per-step increments of the `+` and `-` gate memories at a polarizer.
    fn projections(&self, polarizer: R) -> (R, R) {
        let d = self.v - polarizer;
        if self.p_is_two {
            let c = d.cos();
            let c2 = c * c;
            (c2, R::one() - c2)
        } else {
            (
                d.cos().abs().powf(self.exponent),
                d.sin().abs().powf(self.exponent),
            )
        }
    }

    /// In-step fraction at which a memory crosses the threshold, if it does.
    fn cross_fraction(&self, mem: R, inc: R) -> Option<R> {
        if inc <= R::zero() {
            None
        } else if mem >= self.u {
            Some(R::zero())
        } else if mem + inc > self.u {
            Some((self.u - mem) / inc)
        } else {
            None
        }
    }

    /// Resolve a firing given both gates' crossing fractions; the loser
    /// accumulates up to the winner's crossing instant.
    fn fire(&mut self, station: Station, t_plus: Option<R>, t_minus: Option<R>, inc_plus: R, inc_minus: R) -> Gate {
        let plus_wins = match (t_plus, t_minus) {
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(tp), Some(tm)) => {
                if tp < tm {
                    true
                } else if tm < tp {
                    false
                } else {
                    // simultaneous crossing; break the tie fairly
                    self.rng.random::<bool>()
                }
            }
            (None, None) => unreachable!("fire() requires a crossing"),
        };
        let s = station.idx();
        if plus_wins {
            let t = t_plus.expect("winner crossed");
            self.mems[s][1] = self.mems[s][1] + inc_minus * t;
            self.mems[s][0] = R::zero();
            Gate::Plus
        } else {
            let t = t_minus.expect("winner crossed");
            self.mems[s][0] = self.mems[s][0] + inc_plus * t;
            self.mems[s][1] = R::zero();
            Gate::Minus
        }
    }

    /// Accumulate at `station` with `V` advancing every step until a gate fires.
    fn race_varying(&mut self, station: Station) -> Result<Gate> {
        let polarizer = self.angles[station.idx()];
        let s = station.idx();
        let mut steps: u64 = 0;
        loop {
            self.advance_v();
            let (inc_p, inc_m) = self.projections(polarizer);
            let t_plus = self.cross_fraction(self.mems[s][0], inc_p);
            let t_minus = self.cross_fraction(self.mems[s][1], inc_m);
            if t_plus.is_some() || t_minus.is_some() {
                return Ok(self.fire(station, t_plus, t_minus, inc_p, inc_m));
            }
            self.mems[s][0] = self.mems[s][0] + inc_p;
            self.mems[s][1] = self.mems[s][1] + inc_m;
            steps += 1;
            if steps >= self.max_steps {
                return Err(Error::NonConvergence {
                    pair_index: self.pairs_done,
                    budget: self.max_steps,
                });
            }
        }
    }

    /// Accumulate at `station` with `V` pinned; increments are constant, so
    /// the crossing times follow in closed form.
    fn race_pinned(&mut self, station: Station) -> Result<Gate> {
        let polarizer = self.angles[station.idx()];
        let s = station.idx();
        let (inc_p, inc_m) = self.projections(polarizer);
        let t_plus = time_to_threshold(self.mems[s][0], inc_p, self.u);
        let t_minus = time_to_threshold(self.mems[s][1], inc_m, self.u);
        let t_win = t_plus.min(t_minus);
        if !(t_win <= R::from_f64_c(self.max_steps as f64)) {
            return Err(Error::NonConvergence {
                pair_index: self.pairs_done,
                budget: self.max_steps,
            });
        }
        Ok(self.fire(
            station,
            (t_plus <= t_win).then_some(t_plus),
            (t_minus <= t_win).then_some(t_minus),
            inc_p,
            inc_m,
        ))
    }

    fn survives(&mut self, station: Station, gate: Gate) -> bool {
        let e = self.eta[branch_index(station, gate)];
        if e >= 1.0 {
            true
        } else {
            self.rng.random::<f64>() < e
        }
    }

    /// Run one full pair: source race, nonlocal collapse, partner race,
    /// efficiency selection, role switch.
    pub fn next_pair(&mut self) -> Result<PairRecord> {
        let source = self.source;
        let partner = source.other();

        let fired_source = self.race_varying(source)?;
        // nonlocal step: the partner's V snaps to the fired gate's axis
        let axis = self.angles[source.idx()]
            + match fired_source {
                Gate::Plus => R::zero(),
                Gate::Minus => R::from_f64_c(std::f64::consts::FRAC_PI_2),
            };
        self.v = axis;
        let fired_partner = self.race_pinned(partner)?;

        let detected_source = self.survives(source, fired_source);
        let detected_partner = self.survives(partner, fired_partner);

        self.source = partner;
        self.pairs_done += 1;

        let (gate_a, gate_b, detected_a, detected_b) = match source {
            Station::A => (fired_source, fired_partner, detected_source, detected_partner),
            Station::B => (fired_partner, fired_source, detected_partner, detected_source),
        };
        Ok(PairRecord {
            gate_a,
            gate_b,
            detected_a,
            detected_b,
        })
    }
}

fn time_to_threshold<R: Real>(mem: R, inc: R, u: R) -> R {
    if inc <= R::zero() {
        R::infinity()
    } else if mem >= u {
        R::zero()
    } else {
        (u - mem) / inc
    }
}

/// Generate a series of `m` recorded coincidences.
///
/// Pairs whose detections are dropped by the efficiency draw still evolve
/// the hidden state and still toggle the source role; they are simply not
/// recorded.
pub fn wqm_generate(
    m: u64,
    alpha: f64,
    beta: f64,
    config: &WqmConfig,
    eta: [f64; 4],
    seed: u64,
) -> Result<CoincidenceSeries> {
    if m < 1 {
        return Err(Error::invalid("m", "must be >= 1"));
    }
    if !config.nonlocal {
        return Err(Error::invalid(
            "nonlocal",
            "the semi-classical variant (nonlocal = false) is not implemented",
        ));
    }
    let mut engine = Engine::<f64>::new(alpha, beta, eta, config, seed)?;
    let mut outcomes = Vec::with_capacity(m as usize);
    while outcomes.len() < m as usize {
        let pair = engine.next_pair()?;
        if pair.recorded() {
            outcomes.push(pair.outcome());
        }
    }
    let meta = SeriesMeta::new(GeneratorTag::Wqm, Some(seed))
        .with_param("alpha", alpha)
        .with_param("beta", beta)
        .with_param("phi", phi_from_angle(alpha - beta))
        .with_param("eta", serde_json::to_value(eta).expect("eta serializes"))
        .with_param("m", m)
        .with_param(
            "config",
            serde_json::to_value(config).expect("config serializes"),
        );
    Ok(CoincidenceSeries::new(meta, outcomes))
}

/// One angle of a calibration run.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationRow {
    /// Angle difference `|α−β|`, radians.
    pub angle: f64,
    pub expected_phi: f64,
    pub observed_phi: f64,
    /// Binomial standard deviation of the observed fraction.
    pub sigma: f64,
    pub z_score: f64,
    pub pass: bool,
}

/// Observed odd fractions against `sin²(α−β)` over an angle grid.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub m_per_angle: u64,
    pub rows: Vec<CalibrationRow>,
    pub all_pass: bool,
}

/// The angle grid used to accept an engine configuration:
/// 0°, 5.7°, 18.4°, 30°, 45°, 90°.
pub fn default_calibration_grid() -> Vec<f64> {
    [0.0f64, 5.7, 18.4, 30.0, 45.0, 90.0]
        .iter()
        .map(|d| d.to_radians())
        .collect()
}

/// Run the generator at perfect efficiency over an angle grid and compare
/// each observed odd fraction with the prediction at 3σ. Any configuration
/// must pass this gate before it is trusted for production runs.
pub fn wqm_calibrate(
    config: &WqmConfig,
    angle_grid: &[f64],
    m_per_angle: u64,
    seed: u64,
) -> Result<CalibrationReport> {
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(angle_grid.len());
    for &angle in angle_grid {
        let run_seed = seeder.random::<u64>();
        let series = wqm_generate(m_per_angle, 0.0, angle, config, [1.0; 4], run_seed)?;
        let expected = phi_from_angle(angle);
        let observed = series.odd_fraction();
        let sigma = (expected * (1.0 - expected) / m_per_angle as f64).sqrt();
        let z_score = if sigma > 0.0 {
            (observed - expected) / sigma
        } else if observed == expected {
            0.0
        } else {
            f64::INFINITY
        };
        rows.push(CalibrationRow {
            angle,
            expected_phi: expected,
            observed_phi: observed,
            sigma,
            z_score,
            pass: z_score.abs() <= 3.0,
        });
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(CalibrationReport {
        m_per_angle,
        rows,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::Parity;

    #[test]
    fn equal_angles_give_even_outcomes_only() {
        let s = wqm_generate(20_000, 0.7, 0.7, &WqmConfig::default(), [1.0; 4], 11).unwrap();
        assert_eq!(s.odd_count(), 0);
    }

    #[test]
    fn orthogonal_angles_give_odd_outcomes_only() {
        let s = wqm_generate(
            20_000,
            0.0,
            std::f64::consts::FRAC_PI_2,
            &WqmConfig::default(),
            [1.0; 4],
            12,
        )
        .unwrap();
        assert_eq!(s.odd_count(), 20_000);
    }

    #[test]
    fn same_seed_same_series() {
        let cfg = WqmConfig::default();
        let a = wqm_generate(5_000, 0.0, 0.3, &cfg, [0.8; 4], 5).unwrap();
        let b = wqm_generate(5_000, 0.0, 0.3, &cfg, [0.8; 4], 5).unwrap();
        assert_eq!(a, b);
        let c = wqm_generate(5_000, 0.0, 0.3, &cfg, [0.8; 4], 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn memories_stay_inside_threshold_band() {
        for u in [0.5, 1.0, 5.0] {
            let cfg = WqmConfig {
                threshold_u: u,
                ..Default::default()
            };
            let mut engine = Engine::<f64>::new(0.0, 0.4, [1.0; 4], &cfg, 99).unwrap();
            for _ in 0..5_000 {
                engine.next_pair().unwrap();
                for station in engine.memories() {
                    for mem in station {
                        assert!(
                            (0.0..u).contains(&mem),
                            "memory {mem} escaped [0, {u}) band"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn source_role_alternates_even_for_discarded_pairs() {
        let cfg = WqmConfig::default();
        let mut engine = Engine::<f64>::new(0.0, 0.2, [0.3; 4], &cfg, 3).unwrap();
        let mut expect = engine.source_station();
        for _ in 0..2_000 {
            assert_eq!(engine.source_station(), expect);
            engine.next_pair().unwrap();
            expect = expect.other();
        }
    }

    #[test]
    fn efficiency_discards_pairs_but_generation_reaches_m() {
        let cfg = WqmConfig::default();
        let mut engine = Engine::<f64>::new(0.0, 0.3, [0.5; 4], &cfg, 17).unwrap();
        let mut recorded = 0u64;
        let mut total = 0u64;
        while recorded < 2_000 {
            let pair = engine.next_pair().unwrap();
            total += 1;
            if pair.recorded() {
                recorded += 1;
            }
        }
        // survival probability is 0.25; allow a generous band
        assert!(total > 4 * recorded / 2 && total < 16 * recorded);
    }

    #[test]
    fn nonlocal_false_is_rejected() {
        let cfg = WqmConfig {
            nonlocal: false,
            ..Default::default()
        };
        assert!(wqm_generate(10, 0.0, 0.1, &cfg, [1.0; 4], 1).is_err());
    }

    #[test]
    fn eta_zero_is_rejected() {
        assert!(wqm_generate(10, 0.0, 0.1, &WqmConfig::default(), [0.0; 4], 1).is_err());
    }

    #[test]
    fn step_budget_reports_nonconvergence() {
        // an extreme exponent underflows every increment to zero
        let cfg = WqmConfig {
            projection_exponent: 4000.0,
            max_steps_per_pair: 64,
            memory_init: MemoryInit::Zero,
            ..Default::default()
        };
        let err = wqm_generate(10, 0.0, std::f64::consts::FRAC_PI_4, &cfg, [1.0; 4], 1)
            .unwrap_err();
        assert!(matches!(err, Error::NonConvergence { budget: 64, .. }));
    }

    #[test]
    fn outcomes_mix_parities_at_intermediate_angle() {
        let s = wqm_generate(
            20_000,
            0.0,
            std::f64::consts::FRAC_PI_4,
            &WqmConfig::default(),
            [1.0; 4],
            21,
        )
        .unwrap();
        let odd = s.odd_fraction();
        assert!(odd > 0.3 && odd < 0.7, "odd fraction {odd} far from 1/2");
        let evens = s
            .parities()
            .filter(|p| *p == Parity::Even)
            .count();
        assert!(evens > 0);
    }

    #[test]
    #[ignore = "dev probe: prints the calibration table"]
    fn calibration_probe() {
        for (label, cfg) in [
            ("default (redraw, p=2, u=1)", WqmConfig::default()),
            (
                "random walk 0.3",
                WqmConfig {
                    v_process: VProcess::RandomWalk { step: 0.3 },
                    ..Default::default()
                },
            ),
            (
                "exponent 1",
                WqmConfig {
                    projection_exponent: 1.0,
                    ..Default::default()
                },
            ),
        ] {
            let report = wqm_calibrate(&cfg, &default_calibration_grid(), 1_000_000, 20_250_810)
                .unwrap();
            println!("== {label} ==");
            for r in &report.rows {
                println!(
                    "  angle {:>5.1}°  expected {:.6}  observed {:.6}  z = {:+.2}  {}",
                    r.angle.to_degrees(),
                    r.expected_phi,
                    r.observed_phi,
                    r.z_score,
                    if r.pass { "pass" } else { "FAIL" }
                );
            }
        }
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = WqmConfig {
            v_process: VProcess::RandomWalk { step: 0.2 },
            ..Default::default()
        };
        let json = serde_json::to_string(&cfg).unwrap();
        let back: WqmConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
