//! Ingestion of time-tagged detection records: parsing, coincidence
//! pairing within a time window, and visibility measurement.
//!
//! The time-tag format is plain UTF-8 text, one event per line as
//! `timestamp_ps<TAB>channel` with channels `A+`, `A-`, `B+`, `B-`, plus
//! optional `# key=value` header lines. Timestamps are picoseconds from the
//! run start and must be non-decreasing.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::outcome::{Gate, Outcome};
use crate::params::S_MAX;
use crate::predict::s_from_visibility;
use crate::series::{CoincidenceSeries, GeneratorTag, SeriesMeta};
use crate::simulate::Station;

/// Detector channel of a time-tagged event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Channel {
    APlus,
    AMinus,
    BPlus,
    BMinus,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::APlus, Channel::AMinus, Channel::BPlus, Channel::BMinus];

    pub fn station(self) -> Station {
        match self {
            Channel::APlus | Channel::AMinus => Station::A,
            Channel::BPlus | Channel::BMinus => Station::B,
        }
    }

    pub fn gate(self) -> Gate {
        match self {
            Channel::APlus | Channel::BPlus => Gate::Plus,
            Channel::AMinus | Channel::BMinus => Gate::Minus,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Channel::APlus => "A+",
            Channel::AMinus => "A-",
            Channel::BPlus => "B+",
            Channel::BMinus => "B-",
        }
    }

    fn from_token(token: &str) -> Option<Channel> {
        match token {
            "A+" => Some(Channel::APlus),
            "A-" => Some(Channel::AMinus),
            "B+" => Some(Channel::BPlus),
            "B-" => Some(Channel::BMinus),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Channel::APlus => 0,
            Channel::AMinus => 1,
            Channel::BPlus => 2,
            Channel::BMinus => 3,
        }
    }
}

/// One detection: picoseconds since run start, plus its channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DetectionEvent {
    pub t_ps: u64,
    pub channel: Channel,
}

/// A parsed time-tag file: header metadata plus time-ordered events.
#[derive(Debug, Clone, Default)]
pub struct TimeTags {
    pub header: BTreeMap<String, String>,
    events: Vec<DetectionEvent>,
}

impl TimeTags {
    /// Events in file order (non-decreasing time).
    pub fn events(&self) -> &[DetectionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn channel_counts(&self) -> [u64; 4] {
        let mut counts = [0u64; 4];
        for e in &self.events {
            counts[e.channel.index()] += 1;
        }
        counts
    }

    /// Full span of the record in picoseconds.
    pub fn duration_ps(&self) -> u64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.t_ps - a.t_ps,
            _ => 0,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in &self.header {
            writeln!(w, "# {k}={v}")?;
        }
        for e in &self.events {
            writeln!(w, "{}\t{}", e.t_ps, e.channel.token())?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("time tags are UTF-8")
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }
}

/// Streaming parse of the time-tag format; malformed lines and timestamp
/// order violations are reported with their line number.
pub fn parse_timetags<R: BufRead>(r: R) -> Result<TimeTags> {
    let mut tags = TimeTags::default();
    let mut last_t: Option<u64> = None;
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                tags.header.insert(k.trim().to_owned(), v.trim().to_owned());
            }
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let (t_str, ch_str, extra) = (fields.next(), fields.next(), fields.next());
        let (t_str, ch_str) = match (t_str, ch_str, extra) {
            (Some(t), Some(c), None) => (t, c),
            _ => {
                return Err(Error::parse(
                    line_no,
                    format!("expected `timestamp_ps<TAB>channel`, got {trimmed:?}"),
                ))
            }
        };
        let t_ps: u64 = t_str
            .parse()
            .map_err(|e| Error::parse(line_no, format!("bad timestamp {t_str:?}: {e}")))?;
        let channel = Channel::from_token(ch_str)
            .ok_or_else(|| Error::parse(line_no, format!("unknown channel token {ch_str:?}")))?;
        if last_t.is_some_and(|prev| t_ps < prev) {
            return Err(Error::parse(
                line_no,
                format!("timestamp {t_ps} is out of order"),
            ));
        }
        last_t = Some(t_ps);
        tags.events.push(DetectionEvent { t_ps, channel });
    }
    Ok(tags)
}

/// Parse a time-tag file from disk.
pub fn parse_timetags_file(path: impl AsRef<std::path::Path>) -> Result<TimeTags> {
    let file = std::fs::File::open(path)?;
    parse_timetags(std::io::BufReader::new(file))
}

/// Rates measured while pairing.
#[derive(Debug, Clone, Serialize)]
pub struct RatesReport {
    pub n_pairs: u64,
    pub duration_s: f64,
    /// Paired-coincidence rate, 1/s.
    pub r_coinc: f64,
    /// Raw event counts per channel, `A+, A-, B+, B-`.
    pub singles_counts: [u64; 4],
    /// Singles rates per channel, 1/s.
    pub singles_rates: [f64; 4],
    pub unmatched_a: u64,
    pub unmatched_b: u64,
    /// Expected rate of odd accidental coincidences `½·r_dark²·t_w`,
    /// present when a dark-rate calibration was supplied.
    pub accidental_odd_rate: Option<f64>,
}

/// Pair A-side and B-side events within `|Δt| ≤ t_w`.
///
/// Events are processed in time order; each A event takes the nearest
/// still-unmatched B event inside its window (ties go to the earlier one),
/// and every event is used at most once. The procedure is deterministic.
pub fn pair_coincidences(
    tags: &TimeTags,
    t_w_ps: u64,
    dark_rate: Option<f64>,
) -> Result<(CoincidenceSeries, RatesReport)> {
    if t_w_ps == 0 {
        return Err(Error::invalid("t_w", "must be > 0 ps"));
    }
    let a_events: Vec<(u64, Gate)> = tags
        .events
        .iter()
        .filter(|e| e.channel.station() == Station::A)
        .map(|e| (e.t_ps, e.channel.gate()))
        .collect();
    let b_events: Vec<(u64, Gate)> = tags
        .events
        .iter()
        .filter(|e| e.channel.station() == Station::B)
        .map(|e| (e.t_ps, e.channel.gate()))
        .collect();

    let mut outcomes = Vec::new();
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut next_b = 0usize;
    for &(t_a, gate_a) in &a_events {
        while next_b < b_events.len() && b_events[next_b].0 <= t_a.saturating_add(t_w_ps) {
            window.push_back(next_b);
            next_b += 1;
        }
        while window
            .front()
            .is_some_and(|&j| b_events[j].0 + t_w_ps < t_a)
        {
            window.pop_front();
        }
        if window.is_empty() {
            continue;
        }
        // nearest in time: the window is sorted, so only the last B at or
        // before t_a and the first B after it compete; equidistant picks
        // the earlier
        let split = window.partition_point(|&j| b_events[j].0 <= t_a);
        let before = split.checked_sub(1).map(|i| window[i]);
        let after = window.get(split).copied();
        let chosen_pos = match (before, after) {
            (Some(jb), Some(ja)) => {
                let d_before = t_a - b_events[jb].0;
                let d_after = b_events[ja].0 - t_a;
                if d_before <= d_after {
                    split - 1
                } else {
                    split
                }
            }
            (Some(_), None) => split - 1,
            (None, Some(_)) => split,
            (None, None) => unreachable!("window is non-empty"),
        };
        let j = window.remove(chosen_pos).expect("valid window index");
        outcomes.push(Outcome::new(gate_a, b_events[j].1));
    }

    let n_pairs = outcomes.len() as u64;
    let duration_s = tags.duration_ps() as f64 * 1e-12;
    let t_w_s = t_w_ps as f64 * 1e-12;
    let rate = |count: u64| if duration_s > 0.0 { count as f64 / duration_s } else { 0.0 };
    let singles_counts = tags.channel_counts();
    let report = RatesReport {
        n_pairs,
        duration_s,
        r_coinc: rate(n_pairs),
        singles_counts,
        singles_rates: singles_counts.map(rate),
        unmatched_a: a_events.len() as u64 - n_pairs,
        unmatched_b: b_events.len() as u64 - n_pairs,
        accidental_odd_rate: dark_rate.map(|rd| 0.5 * rd * rd * t_w_s),
    };
    let meta = SeriesMeta::new(GeneratorTag::Ingested, None)
        .with_param("t_w_ps", t_w_ps)
        .with_param("n_pairs", n_pairs);
    Ok((CoincidenceSeries::new(meta, outcomes), report))
}

/// Visibility measurement from coincidence counts at extreme settings.
#[derive(Debug, Clone, Serialize)]
pub struct VisibilityReport {
    pub s_real: f64,
    /// Poisson-propagated one-sigma uncertainty on `s_real`.
    pub std_err: f64,
    pub n_max_total: u64,
    pub n_min_total: u64,
}

/// Apply the visibility relation to summed maximum-setting and
/// minimum-setting counts, with Poisson error propagation.
pub fn visibility_report(n_max: &[u64], n_min: &[u64]) -> Result<VisibilityReport> {
    if n_max.is_empty() || n_min.is_empty() {
        return Err(Error::invalid(
            "n_max",
            "need at least one max-setting and one min-setting count",
        ));
    }
    let n_max_total: u64 = n_max.iter().sum();
    let n_min_total: u64 = n_min.iter().sum();
    let s_real = s_from_visibility(n_max_total as f64, n_min_total as f64)?;
    let (nmax, nmin) = (n_max_total as f64, n_min_total as f64);
    let total = nmax + nmin;
    let d_max = S_MAX * 2.0 * nmin / (total * total);
    let d_min = -S_MAX * 2.0 * nmax / (total * total);
    let std_err = (d_max * d_max * nmax + d_min * d_min * nmin).sqrt();
    Ok(VisibilityReport {
        s_real,
        std_err,
        n_max_total,
        n_min_total,
    })
}

/// Synthesize time-tag streams that reproduce a known series when paired.
///
/// Pairs are separated by `min_gap_ps` plus an exponential spacing with the
/// given mean; the two detections of a pair each get an independent uniform
/// jitter in `[0, jitter_ps]`. Pairing with window `t_w ≥ jitter_ps` and
/// `min_gap_ps > t_w + jitter_ps` recovers the series exactly.
pub fn synthesize_timetags(
    series: &CoincidenceSeries,
    min_gap_ps: u64,
    mean_extra_gap_ps: u64,
    jitter_ps: u64,
    seed: u64,
) -> TimeTags {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::with_capacity(series.outcomes().len() * 2);
    let mut t = jitter_ps + 1;
    for o in series.outcomes() {
        let t_a = t + rng.random_range(0..=jitter_ps);
        let t_b = t + rng.random_range(0..=jitter_ps);
        let ch_a = match o.gate_a {
            Gate::Plus => Channel::APlus,
            Gate::Minus => Channel::AMinus,
        };
        let ch_b = match o.gate_b {
            Gate::Plus => Channel::BPlus,
            Gate::Minus => Channel::BMinus,
        };
        let (first, second) = if t_a <= t_b {
            ((t_a, ch_a), (t_b, ch_b))
        } else {
            ((t_b, ch_b), (t_a, ch_a))
        };
        events.push(DetectionEvent { t_ps: first.0, channel: first.1 });
        events.push(DetectionEvent { t_ps: second.0, channel: second.1 });
        let extra = -(1.0 - rng.random::<f64>()).ln() * mean_extra_gap_ps as f64;
        t += min_gap_ps + extra as u64;
    }
    let mut header = BTreeMap::new();
    header.insert("source".to_owned(), "synthesized".to_owned());
    header.insert("pairs".to_owned(), series.outcomes().len().to_string());
    TimeTags { header, events }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag_text(lines: &[&str]) -> String {
        lines.join("\n")
    }

    #[test]
    fn empty_file_parses_to_empty_streams() {
        let tags = parse_timetags("".as_bytes()).unwrap();
        assert!(tags.is_empty());
        let (series, report) = pair_coincidences(&tags, 2_000, None).unwrap();
        assert!(series.is_empty());
        assert_eq!(report.n_pairs, 0);
        assert_eq!(report.r_coinc, 0.0);
    }

    #[test]
    fn header_and_events_parse() {
        let text = tag_text(&[
            "# run=demo",
            "# t_w=2ns",
            "1000\tA+",
            "1500\tB-",
            "9000\tA-",
        ]);
        let tags = parse_timetags(text.as_bytes()).unwrap();
        assert_eq!(tags.header["run"], "demo");
        assert_eq!(tags.len(), 3);
        assert_eq!(tags.channel_counts(), [1, 1, 0, 1]);
        assert_eq!(tags.duration_ps(), 8_000);
    }

    #[test]
    fn out_of_order_timestamp_reports_line() {
        let text = tag_text(&["1000\tA+", "900\tB+"]);
        match parse_timetags(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_channel_reports_line() {
        let text = tag_text(&["1000\tA+", "1100\tC+"]);
        match parse_timetags(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn pairs_within_half_window() {
        let text = tag_text(&["1000\tA+", "2000\tB+"]);
        let tags = parse_timetags(text.as_bytes()).unwrap();
        let (series, _) = pair_coincidences(&tags, 2_000, None).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series.outcomes()[0], Outcome::PP);
    }

    #[test]
    fn no_pair_past_the_window() {
        let text = tag_text(&["1000\tA+", "5001\tB+"]);
        let tags = parse_timetags(text.as_bytes()).unwrap();
        let (series, report) = pair_coincidences(&tags, 2_000, None).unwrap();
        assert!(series.is_empty());
        assert_eq!(report.unmatched_a, 1);
        assert_eq!(report.unmatched_b, 1);
    }

    #[test]
    fn boundary_delta_exactly_t_w_pairs() {
        let text = tag_text(&["1000\tA-", "3000\tB-"]);
        let tags = parse_timetags(text.as_bytes()).unwrap();
        let (series, _) = pair_coincidences(&tags, 2_000, None).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series.outcomes()[0], Outcome::MM);
    }

    #[test]
    fn nearest_b_wins_with_tie_to_earlier() {
        // two B candidates straddle the A event; the later is nearer
        let text = tag_text(&["500\tB+", "1000\tA+", "1200\tB-"]);
        let tags = parse_timetags(text.as_bytes()).unwrap();
        let (series, report) = pair_coincidences(&tags, 1_000, None).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series.outcomes()[0], Outcome::PM);
        assert_eq!(report.unmatched_b, 1);

        // exact tie: earlier B wins
        let text = tag_text(&["800\tB+", "1000\tA+", "1200\tB-"]);
        let tags = parse_timetags(text.as_bytes()).unwrap();
        let (series, _) = pair_coincidences(&tags, 1_000, None).unwrap();
        assert_eq!(series.outcomes()[0], Outcome::PP);
    }

    #[test]
    fn each_event_used_at_most_once() {
        // one B inside the windows of two A events: first A takes it
        let text = tag_text(&["1000\tA+", "1100\tB-", "1200\tA-"]);
        let tags = parse_timetags(text.as_bytes()).unwrap();
        let (series, report) = pair_coincidences(&tags, 500, None).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series.outcomes()[0], Outcome::PM);
        assert_eq!(report.unmatched_a, 1);
        assert!(series.len() <= 1.min(2));
    }

    #[test]
    fn synthesized_streams_round_trip_exactly() {
        let series = crate::simulate::generate_iid(2_000, 0.3, 77).unwrap();
        let t_w = 2_000u64; // 2 ns
        let tags = synthesize_timetags(&series, 3 * t_w, 20_000, t_w / 4, 5);
        let (recovered, report) = pair_coincidences(&tags, t_w, None).unwrap();
        assert_eq!(recovered.outcomes(), series.outcomes());
        assert_eq!(report.unmatched_a, 0);
        assert_eq!(report.unmatched_b, 0);
    }

    #[test]
    fn visibility_matches_reference_cases() {
        let r = visibility_report(&[1000], &[0]).unwrap();
        assert_eq!(r.s_real, S_MAX);
        let r = visibility_report(&[500, 500], &[500, 500]).unwrap();
        assert_eq!(r.s_real, 0.0);
        assert!(r.std_err > 0.0);
        assert!(visibility_report(&[0], &[0]).is_err());
        assert!(visibility_report(&[], &[1]).is_err());
    }

    #[test]
    fn visibility_reproduces_published_run() {
        // ratio 0.0297 → S_real ≈ 2.665
        let r = visibility_report(&[100_000], &[2_970]).unwrap();
        approx::assert_relative_eq!(r.s_real, 2.665264483967397, max_relative = 1e-12);
        assert!(r.std_err < 0.01);
    }

    #[test]
    fn accidental_rate_reported_when_dark_rate_given() {
        let text = tag_text(&["1000\tA+", "2000\tB+"]);
        let tags = parse_timetags(text.as_bytes()).unwrap();
        let (_, report) = pair_coincidences(&tags, 2_000, Some(100.0)).unwrap();
        let expected = 0.5 * 100.0f64.powi(2) * 2_000.0e-12;
        approx::assert_relative_eq!(
            report.accidental_odd_rate.unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn timetag_text_round_trip() {
        let series = crate::simulate::generate_iid(100, 0.4, 3).unwrap();
        let tags = synthesize_timetags(&series, 10_000, 5_000, 500, 9);
        let text = tags.to_text();
        let parsed = parse_timetags(text.as_bytes()).unwrap();
        assert_eq!(parsed.events(), tags.events());
        assert_eq!(parsed.header, tags.header);
    }
}
