//! The outer-Solar-System data file: schema, checksum verification, and
//! conversion into the core problem setup.
//!
//! The file stores AU / day / solar-mass values. Its `checksum` field is the
//! SHA-256 of a canonical rendering of the parsed numbers, so corruption of
//! any digit is caught at load time no matter how the JSON is formatted.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sqq_core::problems::{SolarBody, SolarSystemData};

/// Copy of the versioned data file bundled into the binary; used whenever no
/// explicit path is given.
pub const EMBEDDED_SOLAR_DATA: &str = include_str!("../../../data/outer_solar_system.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolarBodyFile {
    pub name: String,
    pub mass: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolarFile {
    pub name: String,
    pub version: u32,
    pub source: String,
    pub units: String,
    pub grav_const: f64,
    pub reference_period_days: f64,
    pub bodies: Vec<SolarBodyFile>,
    pub checksum: String,
}

#[derive(Debug)]
pub enum SolarLoadError {
    Io(std::io::Error),
    Parse(serde_json::Error),
    Checksum { expected: String, computed: String },
}

impl std::fmt::Display for SolarLoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolarLoadError::Io(e) => write!(f, "cannot read solar-system data file: {e}"),
            SolarLoadError::Parse(e) => write!(f, "cannot parse solar-system data file: {e}"),
            SolarLoadError::Checksum { expected, computed } => write!(
                f,
                "solar-system data file failed its checksum \
                 (file says {expected}, content hashes to {computed}); \
                 the file is corrupt or was edited without updating the checksum"
            ),
        }
    }
}

impl std::error::Error for SolarLoadError {}

/// Canonical rendering hashed by the checksum: every number at full
/// precision, fixed field order, independent of JSON formatting.
pub fn canonical_content(file: &SolarFile) -> String {
    let mut s = String::new();
    let _ = write!(s, "grav_const={:.17e}|", file.grav_const);
    let _ = write!(s, "reference_period_days={:.17e}|", file.reference_period_days);
    for b in &file.bodies {
        let _ = write!(s, "{}|{:.17e}", b.name, b.mass);
        for v in b.position.iter().chain(b.velocity.iter()) {
            let _ = write!(s, "|{v:.17e}");
        }
        s.push(';');
    }
    s
}

pub fn checksum_of(file: &SolarFile) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_content(file).as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

fn verify(file: SolarFile) -> Result<SolarFile, SolarLoadError> {
    let computed = checksum_of(&file);
    if computed != file.checksum {
        return Err(SolarLoadError::Checksum {
            expected: file.checksum.clone(),
            computed,
        });
    }
    Ok(file)
}

pub fn parse_solar_file(text: &str) -> Result<SolarFile, SolarLoadError> {
    let file: SolarFile = serde_json::from_str(text).map_err(SolarLoadError::Parse)?;
    verify(file)
}

pub fn load_solar_file(path: &Path) -> Result<SolarFile, SolarLoadError> {
    let text = std::fs::read_to_string(path).map_err(SolarLoadError::Io)?;
    parse_solar_file(&text)
}

/// The bundled data set, checksum-verified.
pub fn embedded_solar_file() -> Result<SolarFile, SolarLoadError> {
    parse_solar_file(EMBEDDED_SOLAR_DATA)
}

pub fn to_core_data(file: &SolarFile) -> SolarSystemData {
    SolarSystemData {
        grav_const: file.grav_const,
        bodies: file
            .bodies
            .iter()
            .map(|b| SolarBody {
                name: b.name.clone(),
                mass: b.mass,
                position: b.position,
                velocity: b.velocity,
            })
            .collect(),
        reference_period_days: file.reference_period_days,
    }
}
