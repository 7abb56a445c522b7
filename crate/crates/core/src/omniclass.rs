//! Omniclass classification codes.
//!
//! A code looks like `13-55 11 00 Office Spaces`: a two-digit table number,
//! a dash, one to four two-digit level groups separated by spaces, then a
//! free-text title. Only tables 13 (spaces) and 23 (products) are accepted.
//! Trailing `00` groups are kept as written; titles are stored verbatim and
//! are not checked against the published tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::graph::Discipline;

pub const MAX_LEVELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OmniclassTable {
    /// Table 13: spaces by function.
    Spaces,
    /// Table 23: products.
    Products,
}

impl OmniclassTable {
    pub const fn number(self) -> u8 {
        match self {
            Self::Spaces => 13,
            Self::Products => 23,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            13 => Some(Self::Spaces),
            23 => Some(Self::Products),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OmniclassError {
    #[error("empty classification code")]
    Empty,
    #[error("malformed classification code {code:?}: {reason}")]
    Malformed { code: String, reason: &'static str },
    #[error("code {code:?} is from table {found}, expected table {expected}")]
    WrongTable { code: String, found: u8, expected: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OmniclassCode {
    table: OmniclassTable,
    levels: Vec<u8>,
    title: String,
}

fn is_group(token: &str) -> bool {
    token.len() == 2 && token.bytes().all(|b| b.is_ascii_digit())
}

fn malformed(code: &str, reason: &'static str) -> OmniclassError {
    OmniclassError::Malformed { code: code.to_string(), reason }
}

impl OmniclassCode {
    pub fn new(table: OmniclassTable, levels: Vec<u8>, title: impl Into<String>) -> Option<Self> {
        let title = normalize(&title.into());
        let valid = (1..=MAX_LEVELS).contains(&levels.len())
            && levels.iter().all(|&g| g < 100)
            && !title.split(' ').next().is_some_and(|t| t.bytes().all(|b| b.is_ascii_digit()) && !t.is_empty());
        valid.then_some(Self { table, levels, title })
    }

    pub fn parse(text: &str) -> Result<Self, OmniclassError> {
        let normalized = normalize(text);
        if normalized.is_empty() {
            return Err(OmniclassError::Empty);
        }
        let (table_part, rest) = normalized
            .split_once('-')
            .ok_or_else(|| malformed(text, "missing '-' after table number"))?;
        if !is_group(table_part) {
            return Err(malformed(text, "table number must be two digits"));
        }
        let table = OmniclassTable::from_number(table_part.parse().unwrap())
            .ok_or_else(|| malformed(text, "table must be 13 or 23"))?;

        let mut tokens = rest.split(' ').peekable();
        let mut levels = Vec::with_capacity(MAX_LEVELS);
        while levels.len() < MAX_LEVELS {
            let Some(&token) = tokens.peek() else { break };
            if is_group(token) {
                levels.push(token.parse().unwrap());
                tokens.next();
            } else if token.starts_with(|c: char| c.is_ascii_digit()) {
                return Err(malformed(text, "level groups must be exactly two digits"));
            } else {
                break;
            }
        }
        if levels.is_empty() {
            return Err(malformed(text, "at least one level group is required"));
        }
        let title = tokens.collect::<Vec<_>>().join(" ");
        if title.split(' ').next().is_some_and(|t| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit())) {
            return Err(malformed(text, "more than four level groups"));
        }
        Ok(Self { table, levels, title })
    }

    /// Parses and requires the given table.
    pub fn parse_in(text: &str, table: OmniclassTable) -> Result<Self, OmniclassError> {
        let code = Self::parse(text)?;
        if code.table != table {
            return Err(OmniclassError::WrongTable {
                code: text.to_string(),
                found: code.table.number(),
                expected: table.number(),
            });
        }
        Ok(code)
    }

    pub fn table(&self) -> OmniclassTable {
        self.table
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    /// Numeric part only, e.g. `23-33 13 00`.
    pub fn number(&self) -> String {
        let mut out = format!("{:02}", self.table.number());
        for (i, g) in self.levels.iter().enumerate() {
            out.push(if i == 0 { '-' } else { ' ' });
            out.push_str(&format!("{g:02}"));
        }
        out
    }

    /// True when `prefix` (levels only, e.g. `[33, 13]`) leads this code's levels.
    pub fn has_level_prefix(&self, prefix: &[u8]) -> bool {
        self.levels.starts_with(prefix)
    }

    /// Default discipline for a Table-23 system code, if the code falls
    /// under one of the platform's known system groups.
    pub fn system_discipline(&self) -> Option<Discipline> {
        if self.table != OmniclassTable::Products {
            return None;
        }
        SYSTEM_DISCIPLINES
            .iter()
            .find(|(prefix, _)| self.levels.starts_with(prefix))
            .map(|&(_, d)| d)
    }
}

/// Level prefixes of Table-23 system codes and the discipline they imply.
const SYSTEM_DISCIPLINES: &[(&[u8], Discipline)] = &[
    (&[4, 50], Discipline::Electrical),
    (&[21], Discipline::Conveying),
    (&[33], Discipline::Mechanical),
    (&[35], Discipline::Electrical),
    (&[37], Discipline::Plumbing),
    (&[39], Discipline::Communication),
    (&[41], Discipline::Conveying),
];

/// Trims and collapses internal whitespace runs to single spaces.
pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl fmt::Display for OmniclassCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.number())?;
        if !self.title.is_empty() {
            write!(f, " {}", self.title)?;
        }
        Ok(())
    }
}

impl FromStr for OmniclassCode {
    type Err = OmniclassError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for OmniclassCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OmniclassCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}
