//! Coincidence outcomes and their parity.
//!
//! A coincidence pairs one detection at station A with one at station B.
//! Each detection exits either the transmitted (`+`) or reflected (`-`)
//! polarizer port; the pair is *even* when both ports carry the same sign.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polarizer output port a photon was detected in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Plus,
    Minus,
}

impl Gate {
    pub fn symbol(self) -> char {
        match self {
            Gate::Plus => '+',
            Gate::Minus => '-',
        }
    }

    fn from_symbol(c: char) -> Option<Gate> {
        match c {
            '+' => Some(Gate::Plus),
            '-' => Some(Gate::Minus),
            _ => None,
        }
    }
}

/// Parity of a coincidence: `Even` for `++`/`--`, `Odd` for `+-`/`-+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flipped(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Parity of a gate pair: even iff both gates are equal.
pub fn parity_of(gate_a: Gate, gate_b: Gate) -> Parity {
    if gate_a == gate_b {
        Parity::Even
    } else {
        Parity::Odd
    }
}

/// One recorded coincidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Outcome {
    pub gate_a: Gate,
    pub gate_b: Gate,
}

impl Outcome {
    pub const PP: Outcome = Outcome {
        gate_a: Gate::Plus,
        gate_b: Gate::Plus,
    };
    pub const MM: Outcome = Outcome {
        gate_a: Gate::Minus,
        gate_b: Gate::Minus,
    };
    pub const PM: Outcome = Outcome {
        gate_a: Gate::Plus,
        gate_b: Gate::Minus,
    };
    pub const MP: Outcome = Outcome {
        gate_a: Gate::Minus,
        gate_b: Gate::Plus,
    };

    /// All four outcomes, in `++, --, +-, -+` order.
    pub const ALL: [Outcome; 4] = [Outcome::PP, Outcome::MM, Outcome::PM, Outcome::MP];

    pub fn new(gate_a: Gate, gate_b: Gate) -> Outcome {
        Outcome { gate_a, gate_b }
    }

    pub fn parity(self) -> Parity {
        parity_of(self.gate_a, self.gate_b)
    }

    pub fn is_odd(self) -> bool {
        self.parity() == Parity::Odd
    }

    /// Serialized line form, e.g. `A+ B-`.
    pub fn write_line(self, out: &mut String) {
        out.push('A');
        out.push(self.gate_a.symbol());
        out.push(' ');
        out.push('B');
        out.push(self.gate_b.symbol());
    }

    /// Parse a line of the form `A+ B-`. `line_no` is used for error reporting.
    pub fn parse_line(line: &str, line_no: usize) -> Result<Outcome> {
        let mut tokens = line.split_whitespace();
        let a = tokens.next();
        let b = tokens.next();
        let extra = tokens.next();
        match (a, b, extra) {
            (Some(a), Some(b), None) => {
                let gate_a = parse_token(a, 'A', line_no)?;
                let gate_b = parse_token(b, 'B', line_no)?;
                Ok(Outcome::new(gate_a, gate_b))
            }
            _ => Err(Error::parse(
                line_no,
                format!("expected two tokens like `A+ B-`, got {line:?}"),
            )),
        }
    }
}

fn parse_token(token: &str, station: char, line_no: usize) -> Result<Gate> {
    let mut chars = token.chars();
    match (chars.next(), chars.next().and_then(Gate::from_symbol), chars.next()) {
        (Some(s), Some(gate), None) if s == station => Ok(gate),
        _ => Err(Error::parse(
            line_no,
            format!("expected `{station}+` or `{station}-`, got {token:?}"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_table() {
        assert_eq!(parity_of(Gate::Plus, Gate::Plus), Parity::Even);
        assert_eq!(parity_of(Gate::Minus, Gate::Minus), Parity::Even);
        assert_eq!(parity_of(Gate::Plus, Gate::Minus), Parity::Odd);
        assert_eq!(parity_of(Gate::Minus, Gate::Plus), Parity::Odd);
    }

    #[test]
    fn line_round_trip() {
        for (i, o) in Outcome::ALL.iter().enumerate() {
            let mut s = String::new();
            o.write_line(&mut s);
            assert_eq!(Outcome::parse_line(&s, i).unwrap(), *o);
        }
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Outcome::parse_line("A+ C-", 1).is_err());
        assert!(Outcome::parse_line("A+", 2).is_err());
        assert!(Outcome::parse_line("A+ B- extra", 3).is_err());
        assert!(Outcome::parse_line("B+ A-", 4).is_err());
        assert!(Outcome::parse_line("A* B-", 5).is_err());
    }
}
