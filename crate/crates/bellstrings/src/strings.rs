//! Empirical string-length distribution of a coincidence series.
//!
//! A *string* is a maximal run of same-parity outcomes terminated by one
//! outcome of the other parity; the terminator is what makes it countable,
//! so the trailing unterminated run is reported separately rather than
//! binned. With the `EvenRuns` convention there is exactly one string per
//! odd outcome, including length-0 strings between adjacent odd outcomes.
//! Past 45° the roles of the parities swap; `Auto` picks the minority
//! parity as the interrupter.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcome::Parity;
use crate::series::CoincidenceSeries;

/// Run-parity selection for extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `EvenRuns` when the odd fraction is ≤ ½, `OddRuns` otherwise.
    #[default]
    Auto,
    EvenRuns,
    OddRuns,
}

/// The resolved convention recorded on a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunParity {
    EvenRuns,
    OddRuns,
}

impl RunParity {
    /// Parity of the run elements.
    pub fn run_parity(self) -> Parity {
        match self {
            RunParity::EvenRuns => Parity::Even,
            RunParity::OddRuns => Parity::Odd,
        }
    }

    pub fn flipped(self) -> RunParity {
        match self {
            RunParity::EvenRuns => RunParity::OddRuns,
            RunParity::OddRuns => RunParity::EvenRuns,
        }
    }
}

/// Histogram of string lengths `k → count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StringsDistribution {
    counts: BTreeMap<u64, u64>,
    convention: RunParity,
    total_elements: u64,
    trailing_run: u64,
}

impl StringsDistribution {
    pub fn new(
        counts: BTreeMap<u64, u64>,
        convention: RunParity,
        total_elements: u64,
        trailing_run: u64,
    ) -> Self {
        StringsDistribution {
            counts,
            convention,
            total_elements,
            trailing_run,
        }
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn count(&self, k: u64) -> u64 {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    /// Total number of strings; equals the number of interrupter outcomes.
    pub fn n_strings(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Longest observed string, `None` when there are no strings.
    pub fn max_length(&self) -> Option<u64> {
        self.counts.keys().next_back().copied()
    }

    /// Total run elements inside counted strings, `Σ k·count(k)`.
    pub fn run_elements(&self) -> u64 {
        self.counts.iter().map(|(k, c)| k * c).sum()
    }

    pub fn convention(&self) -> RunParity {
        self.convention
    }

    /// Length of the series the distribution was extracted from.
    pub fn total_elements(&self) -> u64 {
        self.total_elements
    }

    /// Length of the unterminated run after the last interrupter. For an
    /// interrupter-free series this is the whole series.
    pub fn trailing_run(&self) -> u64 {
        self.trailing_run
    }

    /// Write as CSV with a JSON meta header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = serde_json::json!({
            "convention": self.convention,
            "total_elements": self.total_elements,
            "trailing_run": self.trailing_run,
        });
        writeln!(w, "# meta: {meta}")?;
        writeln!(w, "k,count")?;
        for (k, c) in &self.counts {
            writeln!(w, "{k},{c}")?;
        }
        Ok(())
    }

    /// Parse the CSV form produced by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct CsvMeta {
            convention: RunParity,
            total_elements: u64,
            trailing_run: u64,
        }
        let mut meta: Option<CsvMeta> = None;
        let mut counts = BTreeMap::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if let Some(json) = line.strip_prefix("# meta: ") {
                meta = Some(
                    serde_json::from_str(json)
                        .map_err(|e| Error::parse(line_no, format!("bad meta JSON: {e}")))?,
                );
            } else if line.starts_with('#') || line.trim().is_empty() || line == "k,count" {
                continue;
            } else {
                let (k, c) = line
                    .split_once(',')
                    .ok_or_else(|| Error::parse(line_no, format!("expected `k,count`: {line:?}")))?;
                let k: u64 = k
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(line_no, format!("bad k: {e}")))?;
                let c: u64 = c
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(line_no, format!("bad count: {e}")))?;
                if c > 0 {
                    counts.insert(k, c);
                }
            }
        }
        let meta = meta.ok_or_else(|| Error::parse(0, "missing `# meta:` header".to_owned()))?;
        Ok(StringsDistribution {
            counts,
            convention: meta.convention,
            total_elements: meta.total_elements,
            trailing_run: meta.trailing_run,
        })
    }

    pub fn to_csv_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

/// Extract the string-length histogram from a series in one pass.
pub fn extract_strings(
    series: &CoincidenceSeries,
    convention: Convention,
) -> Result<StringsDistribution> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let resolved = match convention {
        Convention::EvenRuns => RunParity::EvenRuns,
        Convention::OddRuns => RunParity::OddRuns,
        // strict majority of odd outcomes switches the definition; a tie keeps even runs
        Convention::Auto => {
            if 2 * series.odd_count() > series.len() {
                RunParity::OddRuns
            } else {
                RunParity::EvenRuns
            }
        }
    };
    let run_parity = resolved.run_parity();
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut run_len: u64 = 0;
    for parity in series.parities() {
        if parity == run_parity {
            run_len += 1;
        } else {
            *counts.entry(run_len).or_insert(0) += 1;
            run_len = 0;
        }
    }
    Ok(StringsDistribution {
        counts,
        convention: resolved,
        total_elements: series.len(),
        trailing_run: run_len,
    })
}
