//! JSON form of a measure:
//! `{"atoms":[{"x":..,"w":..},..], "density":{"lo":..,"hi":..,"values":[..]}}`,
//! either field optional.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Atom, Density, Measure};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MeasureFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Atom>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityFile {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

impl MeasureFile {
    pub fn into_finite(self) -> Result<Measure> {
        let density = match self.density {
            Some(d) => Some(Density::new(d.lo, d.hi, d.values)?),
            None => None,
        };
        Measure::finite(self.atoms.unwrap_or_default(), density)
    }

    pub fn into_probability(self) -> Result<Measure> {
        self.into_finite()?.normalized()
    }
}

impl From<&Measure> for MeasureFile {
    fn from(m: &Measure) -> Self {
        MeasureFile {
            atoms: (!m.atoms().is_empty()).then(|| m.atoms().to_vec()),
            density: m.density().map(|d| DensityFile {
                lo: d.lo(),
                hi: d.hi(),
                values: d.values().to_vec(),
            }),
        }
    }
}

impl Serialize for Measure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureFile::from(self).serialize(s)
    }
}

/// Deserializes as a finite measure, masses exactly as written.
impl<'de> Deserialize<'de> for Measure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MeasureFile::deserialize(d)?
            .into_finite()
            .map_err(serde::de::Error::custom)
    }
}

fn read_file(path: &Path) -> Result<MeasureFile> {
    let file =
        File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Reads a measure file and normalizes it to a probability measure.
pub fn read_probability(path: &Path) -> Result<Measure> {
    read_file(path)?.into_probability()
}

/// Reads a measure file as a finite measure (masses as written).
pub fn read_finite(path: &Path) -> Result<Measure> {
    read_file(path)?.into_finite()
}

pub fn write_json(m: &Measure, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, m)?;
    w.write_all(b"\n")?;
    Ok(())
}
