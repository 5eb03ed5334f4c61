//! Choice strings as printed in the session tables.
//!
//! HL and CvU strings list safe symbols, a slash, then risky symbols
//! (`SSSSSS / RRRR`, `CCCCC / UUUUU`). Bins strings mark the chosen decision
//! with `/1/` among zeros (`0000000/1/00` is decision 8).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::menu::DesignKind;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChoiceError {
    #[error("empty choice string")]
    Empty,
    #[error("unexpected symbol {symbol:?} at position {position}")]
    Symbol { position: usize, symbol: char },
    #[error("safe symbol at position {position} after a risky choice or the separator")]
    SafeAfterRisky { position: usize },
    #[error("more than one separator, second at position {position}")]
    Separator { position: usize },
    #[error("missing `/1/` decision marker")]
    MissingMarker,
    #[error("duplicated decision marker at position {position}")]
    DuplicateMarker { position: usize },
    #[error("response {0} outside the valid range")]
    Range(usize),
}

/// Result of parsing one string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedChoice {
    /// Safe count (HL, CvU) or decision number (Bins).
    pub response: u8,
    /// Number of choice symbols seen; 10 in a well-formed string.
    pub symbol_total: usize,
}

impl ParsedChoice {
    /// Advisory note when the string does not carry ten choices.
    pub fn anomaly(&self) -> Option<String> {
        (self.symbol_total != 10).then(|| format!("{} choice symbols instead of 10", self.symbol_total))
    }
}

fn symbols(kind: DesignKind) -> (char, char) {
    match kind {
        DesignKind::Hl => ('S', 'R'),
        DesignKind::Cvu => ('C', 'U'),
        DesignKind::Bins => ('0', '1'),
    }
}

/// Parses a choice string. Whitespace is ignored and letters are matched
/// case-insensitively. The leading safe count is the response; the total
/// length is only reported.
pub fn parse_choice_string(s: &str, kind: DesignKind) -> Result<ParsedChoice, ChoiceError> {
    if s.trim().is_empty() {
        return Err(ChoiceError::Empty);
    }
    match kind {
        DesignKind::Hl | DesignKind::Cvu => parse_switch(s, kind),
        DesignKind::Bins => parse_bins(s),
    }
}

fn parse_switch(s: &str, kind: DesignKind) -> Result<ParsedChoice, ChoiceError> {
    let (safe, risky) = symbols(kind);
    let mut n_safe = 0usize;
    let mut n_risky = 0usize;
    let mut past_switch = false;
    let mut slash_seen = false;
    for (position, ch) in s.chars().enumerate() {
        if ch.is_whitespace() {
            continue;
        }
        let up = ch.to_ascii_uppercase();
        if up == safe {
            if past_switch {
                return Err(ChoiceError::SafeAfterRisky { position });
            }
            n_safe += 1;
        } else if up == risky {
            past_switch = true;
            n_risky += 1;
        } else if ch == '/' {
            if slash_seen {
                return Err(ChoiceError::Separator { position });
            }
            slash_seen = true;
            past_switch = true;
        } else {
            return Err(ChoiceError::Symbol { position, symbol: ch });
        }
    }
    if n_safe > 10 {
        return Err(ChoiceError::Range(n_safe));
    }
    Ok(ParsedChoice { response: n_safe as u8, symbol_total: n_safe + n_risky })
}

fn parse_bins(s: &str) -> Result<ParsedChoice, ChoiceError> {
    let compact: Vec<(usize, char)> = s.chars().enumerate().filter(|(_, c)| !c.is_whitespace()).collect();
    let mut before = 0usize;
    let mut after = 0usize;
    let mut marker: Option<usize> = None;
    let mut i = 0;
    while i < compact.len() {
        let (position, ch) = compact[i];
        match ch {
            '0' => {
                if marker.is_some() {
                    after += 1;
                } else {
                    before += 1;
                }
                i += 1;
            }
            '/' => {
                let is_marker =
                    matches!(compact.get(i + 1), Some((_, '1'))) && matches!(compact.get(i + 2), Some((_, '/')));
                if !is_marker {
                    return Err(match compact.get(i + 1) {
                        Some(&(p, c)) if c != '1' => ChoiceError::Symbol { position: p, symbol: c },
                        _ => ChoiceError::MissingMarker,
                    });
                }
                if marker.is_some() {
                    return Err(ChoiceError::DuplicateMarker { position });
                }
                marker = Some(position);
                i += 3;
            }
            '1' => {
                return Err(if marker.is_some() {
                    ChoiceError::DuplicateMarker { position }
                } else {
                    ChoiceError::MissingMarker
                })
            }
            c => return Err(ChoiceError::Symbol { position, symbol: c }),
        }
    }
    if marker.is_none() {
        return Err(ChoiceError::MissingMarker);
    }
    let decision = before + 1;
    if decision > 10 {
        return Err(ChoiceError::Range(decision));
    }
    Ok(ParsedChoice { response: decision as u8, symbol_total: before + after + 1 })
}

/// Canonical ten-symbol string for a response.
pub fn render_choice_string(kind: DesignKind, response: u8) -> Result<String, ChoiceError> {
    let n = response as usize;
    let (safe, risky) = symbols(kind);
    match kind {
        DesignKind::Hl | DesignKind::Cvu => {
            if n > 10 {
                return Err(ChoiceError::Range(n));
            }
            let s: String = std::iter::repeat_n(safe, n).collect();
            let r: String = std::iter::repeat_n(risky, 10 - n).collect();
            Ok(match (n, 10 - n) {
                (0, _) => format!("/ {r}"),
                (_, 0) => format!("{s} /"),
                _ => format!("{s} / {r}"),
            })
        }
        DesignKind::Bins => {
            if !(1..=10).contains(&n) {
                return Err(ChoiceError::Range(n));
            }
            Ok(format!("{}/1/{}", "0".repeat(n - 1), "0".repeat(10 - n)))
        }
    }
}

/// True when a sequence of row choices switches at most once, from safe to
/// risky.
pub fn is_single_switch(choices: &[crate::menu::Choice]) -> bool {
    use crate::menu::Choice;
    let first_b = choices.iter().position(|&c| c == Choice::B).unwrap_or(choices.len());
    choices[first_b..].iter().all(|&c| c == Choice::B)
}
