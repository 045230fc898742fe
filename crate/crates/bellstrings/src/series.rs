//! The coincidence series: an ordered, immutable sequence of outcomes.
//!
//! Serialization is line-oriented text: a short header with a JSON meta
//! block, then one outcome per line as `A+ B-` tokens. The writer emits a
//! canonical form so that write → read → write round-trips bit-exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcome::{Outcome, Parity};

const MAGIC_LINE: &str = "# bellstrings coincidence series v1";
const META_PREFIX: &str = "# meta: ";

/// Which generator produced a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorTag {
    Wqm,
    Iid,
    Ingested,
}

/// Provenance carried alongside the outcomes.
///
/// `params` is a free-form snapshot of whatever the generator consumed
/// (angles, φ, efficiencies, engine config). A sorted map keeps the
/// serialized header byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub generator: GeneratorTag,
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl SeriesMeta {
    pub fn new(generator: GeneratorTag, seed: Option<u64>) -> Self {
        SeriesMeta {
            generator,
            seed,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_owned(), value.into());
        self
    }
}

/// Ordered sequence of coincidence outcomes; immutable after creation.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceSeries {
    meta: SeriesMeta,
    outcomes: Vec<Outcome>,
}

impl CoincidenceSeries {
    pub fn new(meta: SeriesMeta, outcomes: Vec<Outcome>) -> Self {
        CoincidenceSeries { meta, outcomes }
    }

    pub fn meta(&self) -> &SeriesMeta {
        &self.meta
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn len(&self) -> u64 {
        self.outcomes.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn odd_count(&self) -> u64 {
        self.outcomes.iter().filter(|o| o.is_odd()).count() as u64
    }

    /// Fraction of odd outcomes; 0 for an empty series.
    pub fn odd_fraction(&self) -> f64 {
        if self.outcomes.is_empty() {
            0.0
        } else {
            self.odd_count() as f64 / self.outcomes.len() as f64
        }
    }

    pub fn parities(&self) -> impl Iterator<Item = Parity> + '_ {
        self.outcomes.iter().map(|o| o.parity())
    }

    /// Write the canonical text form.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let meta_json = serde_json::to_string(&self.meta).expect("meta serializes");
        writeln!(w, "{MAGIC_LINE}")?;
        writeln!(w, "{META_PREFIX}{meta_json}")?;
        let mut line = String::with_capacity(8);
        for o in &self.outcomes {
            line.clear();
            o.write_line(&mut line);
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Parse the text form produced by [`write_to`](Self::write_to).
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut meta: Option<SeriesMeta> = None;
        let mut outcomes = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if let Some(json) = line.strip_prefix(META_PREFIX) {
                meta = Some(serde_json::from_str(json).map_err(|e| {
                    Error::parse(line_no, format!("bad meta JSON: {e}"))
                })?);
            } else if line.starts_with('#') || line.trim().is_empty() {
                continue;
            } else {
                outcomes.push(Outcome::parse_line(&line, line_no)?);
            }
        }
        let meta = meta.ok_or_else(|| Error::parse(0, "missing `# meta:` header".to_owned()))?;
        Ok(CoincidenceSeries { meta, outcomes })
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::with_capacity(self.outcomes.len() * 6 + 256);
        self.write_to(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("series text is UTF-8")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_from(text.as_bytes())
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::Gate;

    fn sample() -> CoincidenceSeries {
        let meta = SeriesMeta::new(GeneratorTag::Iid, Some(7))
            .with_param("phi", 0.25)
            .with_param("m", 4);
        CoincidenceSeries::new(
            meta,
            vec![Outcome::PP, Outcome::PM, Outcome::MM, Outcome::MP],
        )
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        let text = s.to_text();
        let parsed = CoincidenceSeries::from_text(&text).unwrap();
        assert_eq!(parsed, s);
        assert_eq!(parsed.to_text(), text);
    }

    #[test]
    fn counts_odd_outcomes() {
        let s = sample();
        assert_eq!(s.len(), 4);
        assert_eq!(s.odd_count(), 2);
        assert_eq!(s.odd_fraction(), 0.5);
    }

    #[test]
    fn missing_meta_is_an_error() {
        assert!(CoincidenceSeries::from_text("A+ B+\n").is_err());
    }

    #[test]
    fn bad_outcome_line_reports_line_number() {
        let text = format!(
            "{MAGIC_LINE}\n{META_PREFIX}{}\nA+ B+\nA+ Bx\n",
            serde_json::to_string(&SeriesMeta::new(GeneratorTag::Iid, None)).unwrap()
        );
        match CoincidenceSeries::from_text(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_series_round_trips() {
        let s = CoincidenceSeries::new(SeriesMeta::new(GeneratorTag::Ingested, None), vec![]);
        let parsed = CoincidenceSeries::from_text(&s.to_text()).unwrap();
        assert!(parsed.is_empty());
        assert_eq!(parsed.odd_fraction(), 0.0);
    }

    #[test]
    fn gate_tokens_match_format() {
        let s = CoincidenceSeries::new(
            SeriesMeta::new(GeneratorTag::Wqm, Some(1)),
            vec![Outcome::new(Gate::Plus, Gate::Minus)],
        );
        assert!(s.to_text().ends_with("A+ B-\n"));
    }
}
