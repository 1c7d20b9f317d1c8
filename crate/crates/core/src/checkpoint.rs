//! Binary trajectory checkpoints.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{Exterior, ExteriorData, Grid, SpaceTimeField};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"FLCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub grid: Grid,
    pub t0: f64,
    pub dt: f64,
    pub sigma: f64,
    pub slices: Vec<Vec<f64>>,
    /// Analytic exterior closure as JSON, when the field had one. The preset
    /// enums are internally tagged, which the binary codec cannot decode.
    pub exterior: Option<String>,
}

impl Checkpoint {
    pub fn from_field(field: &SpaceTimeField, sigma: f64, exterior: Option<&Exterior>) -> Result<Self> {
        let exterior = exterior.map(serde_json::to_string).transpose()?;
        Ok(Self {
            version: CHECKPOINT_VERSION,
            grid: field.grid,
            t0: field.t0,
            dt: field.dt,
            sigma,
            slices: field.slices.clone(),
            exterior,
        })
    }

    pub fn exterior(&self) -> Result<Option<Exterior>> {
        Ok(self.exterior.as_deref().map(serde_json::from_str).transpose()?)
    }

    /// Rebuilds the field; without a stored closure the exterior is zero.
    pub fn to_field(&self) -> Result<SpaceTimeField> {
        let ext: Arc<dyn ExteriorData> = Arc::new(self.exterior()?.unwrap_or(Exterior::Zero));
        SpaceTimeField::new(self.grid, self.t0, self.dt, self.slices.clone(), ext)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&CHECKPOINT_MAGIC)?;
        bincode::serialize_into(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(LabError::Serde("not a checkpoint file".into()));
        }
        let ck: Checkpoint = bincode::deserialize_from(r)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(LabError::Serde(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{SpaceProfile, TimeProfile};

    #[test]
    fn round_trip() {
        let ext = Exterior::separable(TimeProfile::Exp { rate: 1.0 }, SpaceProfile::Outside);
        let f = SpaceTimeField::from_fn(
            Grid::new(0.1, 2.0).unwrap(),
            -1.0,
            0.25,
            5,
            Arc::new(ext.clone()),
            |x, t| x * t,
        )
        .unwrap();
        let ck = Checkpoint::from_field(&f, 1.5, Some(&ext)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.ck");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.exterior().unwrap(), Some(ext));
        let g = back.to_field().unwrap();
        assert_eq!(g.slices, f.slices);
        assert_eq!(g.at(15, 4), f.at(15, 4));
    }

    #[test]
    fn rejects_foreign_bytes() {
        assert!(Checkpoint::read_from(&b"nope and more"[..]).is_err());
        let mut buf = Vec::new();
        let mut ck = Checkpoint {
            version: 99,
            grid: Grid::new(0.25, 2.0).unwrap(),
            t0: 0.0,
            dt: 1.0,
            sigma: 1.5,
            slices: vec![vec![0.0]],
            exterior: None,
        };
        ck.write_to(&mut buf).unwrap();
        assert!(Checkpoint::read_from(&buf[..]).is_err());
        ck.version = CHECKPOINT_VERSION;
        buf.clear();
        ck.write_to(&mut buf).unwrap();
        assert!(Checkpoint::read_from(&buf[..]).is_ok());
    }
}
