//! Versioned channel data: polarizabilities, zero-field defects, C3
//! coefficients, angular factors and Rydberg lifetimes for one Förster
//! resonance, loaded from JSON.
//!
//! Frequencies in the file are ordinary-frequency MHz; everything handed out
//! by this module is converted to angular units (rad/us). The C3 column is
//! flagged by `units.c3_angular`: when true, `C3 / R^3` is already an angular
//! frequency in rad/us.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::angular::RydbergLevel;
use crate::error::{Error, Result};
use crate::TWO_PI;

/// Catalog shipped with the crate.
pub const BUILTIN_CATALOG_JSON: &str = include_str!("../data/cs_90s_96s.json");

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CatalogUnits {
    pub defect: String,
    pub polarizability: String,
    pub c3: String,
    pub c3_angular: bool,
    pub lifetime: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialPairEntry {
    pub a: String,
    pub two_m_a: i32,
    pub b: String,
    pub two_m_b: i32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolarizabilityEntry {
    pub level: String,
    pub abs_two_m: u32,
    /// MHz / (V/cm)^2
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PairDefectEntry {
    pub row: u32,
    pub a: String,
    pub b: String,
    pub alpha: String,
    pub beta: String,
    /// MHz
    pub delta0: f64,
    /// MHz um^3
    pub c3: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub id: u32,
    pub defect_row: u32,
    pub two_m_alpha: i32,
    pub two_m_beta: i32,
    pub q: f64,
    pub q_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LifetimeEntry {
    /// `nL` label without fine structure, e.g. `90P`.
    pub state: String,
    /// us
    pub tau: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CatalogFile {
    pub schema_version: u32,
    pub name: String,
    pub species: String,
    pub units: CatalogUnits,
    pub initial_pair: InitialPairEntry,
    pub polarizabilities: Vec<PolarizabilityEntry>,
    pub pair_defects: Vec<PairDefectEntry>,
    pub channels: Vec<ChannelEntry>,
    pub lifetimes: Vec<LifetimeEntry>,
}

/// Parsed catalog together with the SHA-256 of its source bytes.
#[derive(Debug, Clone)]
pub struct ChannelData {
    pub file: CatalogFile,
    pub sha256: String,
}

pub(crate) fn parse_level(label: &str) -> Result<RydbergLevel> {
    RydbergLevel::parse(label).ok_or_else(|| Error::Catalog(format!("bad level label {label:?}")))
}

impl ChannelData {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: CatalogFile = serde_json::from_str(text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Catalog(format!(
                "schema version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let data = Self {
            file,
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        };
        data.validate()?;
        Ok(data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_CATALOG_JSON).expect("builtin catalog is valid")
    }

    fn validate(&self) -> Result<()> {
        let f = &self.file;
        parse_level(&f.initial_pair.a)?;
        parse_level(&f.initial_pair.b)?;
        for p in &f.polarizabilities {
            let level = parse_level(&p.level)?;
            if !p.alpha.is_finite() || p.abs_two_m > level.two_j || p.abs_two_m % 2 == 0 {
                return Err(Error::Catalog(format!("bad polarizability entry {p:?}")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for p in &f.polarizabilities {
            if !seen.insert((p.level.clone(), p.abs_two_m)) {
                return Err(Error::Catalog(format!("duplicate polarizability {}", p.level)));
            }
        }
        for d in &f.pair_defects {
            for l in [&d.a, &d.b, &d.alpha, &d.beta] {
                parse_level(l)?;
            }
        }
        for ch in &f.channels {
            if self.defect_row(ch.defect_row).is_none() {
                return Err(Error::Catalog(format!(
                    "channel {} refers to missing defect row {}",
                    ch.id, ch.defect_row
                )));
            }
        }
        for l in &f.lifetimes {
            if !(l.tau > 0.0) {
                return Err(Error::Catalog(format!("non-positive lifetime for {}", l.state)));
            }
        }
        Ok(())
    }

    pub fn defect_row(&self, row: u32) -> Option<&PairDefectEntry> {
        self.file.pair_defects.iter().find(|d| d.row == row)
    }

    /// Polarizabilities converted to rad/us per (V/cm)^2.
    pub fn polarizabilities(&self) -> Result<crate::stark::PolarizabilityTable> {
        let entries = self
            .file
            .polarizabilities
            .iter()
            .map(|p| {
                Ok(crate::stark::Polarizability {
                    level: parse_level(&p.level)?,
                    abs_two_m: p.abs_two_m,
                    alpha: TWO_PI * p.alpha,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(crate::stark::PolarizabilityTable::new(entries))
    }

    /// Decay rate (1/us) of a level, keyed by `n` and `l` only.
    pub fn decay_rate(&self, level: &RydbergLevel) -> Option<f64> {
        let key = format!("{}{}", level.n, b"SPDFG"[level.l as usize] as char);
        self.file
            .lifetimes
            .iter()
            .find(|l| l.state == key)
            .map(|l| 1.0 / l.tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_parses() {
        let data = ChannelData::builtin();
        assert_eq!(data.file.polarizabilities.len(), 8);
        assert_eq!(data.file.pair_defects.len(), 7);
        assert_eq!(data.file.channels.len(), 9);
        assert_eq!(data.sha256.len(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BUILTIN_CATALOG_JSON.replacen("\"species\"", "\"colour\": 1, \"species\"", 1);
        assert!(ChannelData::from_json(&text).is_err());
    }

    #[test]
    fn lifetimes_ignore_fine_structure() {
        let data = ChannelData::builtin();
        let p1 = RydbergLevel::parse("90P1/2").unwrap();
        let p3 = RydbergLevel::parse("90P3/2").unwrap();
        assert_eq!(data.decay_rate(&p1), Some(1.0 / 361.0));
        assert_eq!(data.decay_rate(&p3), data.decay_rate(&p1));
        assert_eq!(data.decay_rate(&RydbergLevel::parse("88S1/2").unwrap()), None);
    }

    #[test]
    fn duplicate_polarizability_rejected() {
        let text = BUILTIN_CATALOG_JSON.replacen(
            "{ \"level\": \"96S1/2\", \"abs_two_m\": 1, \"alpha\": 5529 }",
            "{ \"level\": \"90S1/2\", \"abs_two_m\": 1, \"alpha\": 5529 }",
            1,
        );
        assert!(matches!(ChannelData::from_json(&text), Err(Error::Catalog(_))));
    }
}
