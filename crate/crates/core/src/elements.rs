//! Element symbols and the shipped radii tables.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ELEMENTS_CSV: &str = include_str!("../data/elements.csv");
const COVALENT_CSV: &str = include_str!("../data/covalent_radii.csv");
const VDW_CSV: &str = include_str!("../data/vdw_radii.csv");

fn symbols() -> &'static [String] {
    static SYMBOLS: OnceLock<Vec<String>> = OnceLock::new();
    SYMBOLS.get_or_init(|| {
        ELEMENTS_CSV
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| l.split(',').nth(1).expect("elements.csv row").trim().to_string())
            .collect()
    })
}

/// Chemical symbol for atomic number `z` (1-based).
pub fn symbol(z: u8) -> &'static str {
    symbols()
        .get((z as usize).wrapping_sub(1))
        .map(String::as_str)
        .unwrap_or("?")
}

/// Parses an element symbol, tolerating CIF decorations such as charges
/// (`O2-`) and label suffixes (`C12A`) by taking the leading letters.
pub fn atomic_number(text: &str) -> Result<u8> {
    let letters: String = text
        .trim()
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    let lookup = |s: &str| {
        symbols()
            .iter()
            .position(|sym| sym.eq_ignore_ascii_case(s))
            .map(|i| (i + 1) as u8)
    };
    if letters.len() >= 2 {
        if let Some(z) = lookup(&letters[..2]) {
            return Ok(z);
        }
    }
    if !letters.is_empty() {
        if let Some(z) = lookup(&letters[..1]) {
            return Ok(z);
        }
    }
    Err(Error::UnknownElement(text.trim().to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RadiiKind {
    #[default]
    VanDerWaals,
    Covalent,
}

/// Per-element radii (A) with a versioned source tag.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiiTable {
    pub source: String,
    radii: Vec<Option<f64>>,
}

impl RadiiTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut source = String::from("unnamed");
        let mut version = String::from("0");
        let mut radii = vec![None; 119];
        for line in text.lines() {
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                if let Some(v) = meta.trim().strip_prefix("table:") {
                    source = v.trim().to_string();
                } else if let Some(v) = meta.trim().strip_prefix("version:") {
                    version = v.trim().to_string();
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || Error::InvalidParameter(format!("bad radii row '{line}'"));
            if cols.len() != 3 {
                return Err(bad());
            }
            let z: usize = cols[0].trim().parse().map_err(|_| bad())?;
            let r: f64 = cols[2].trim().parse().map_err(|_| bad())?;
            if z == 0 || z > 118 || r <= 0.0 {
                return Err(bad());
            }
            radii[z] = Some(r);
        }
        Ok(RadiiTable {
            source: format!("{source}@v{version}"),
            radii,
        })
    }

    pub fn covalent() -> &'static RadiiTable {
        static TABLE: OnceLock<RadiiTable> = OnceLock::new();
        TABLE.get_or_init(|| RadiiTable::parse(COVALENT_CSV).expect("shipped covalent table"))
    }

    pub fn van_der_waals() -> &'static RadiiTable {
        static TABLE: OnceLock<RadiiTable> = OnceLock::new();
        TABLE.get_or_init(|| RadiiTable::parse(VDW_CSV).expect("shipped vdw table"))
    }

    pub fn shipped(kind: RadiiKind) -> &'static RadiiTable {
        match kind {
            RadiiKind::VanDerWaals => Self::van_der_waals(),
            RadiiKind::Covalent => Self::covalent(),
        }
    }

    pub fn get(&self, z: u8) -> Option<f64> {
        self.radii.get(z as usize).copied().flatten()
    }

    pub fn radius(&self, z: u8) -> Result<f64> {
        self.get(z)
            .ok_or_else(|| Error::MissingRadius(symbol(z).to_string(), self.source.clone()))
    }

    /// Highest atomic number with a contiguous entry from H.
    pub fn coverage(&self) -> u8 {
        (1..=118u8).take_while(|&z| self.get(z).is_some()).last().unwrap_or(0)
    }
}
