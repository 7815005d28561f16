//! Binary field snapshots and the JSON index of a trajectory.
//!
//! Layout (all little-endian): magic `QLWV`, `u32` version, `u32` byte-order
//! tag `0x01020304`, `f64` half width, `u64` cells per axis, `f64` time, then
//! `phi` and `pi` as `n^3` `f64` each in grid order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::FieldState;
use crate::error::{Error, Result};
use crate::foliation::GridSpec;

const MAGIC: &[u8; 4] = b"QLWV";
const VERSION: u32 = 1;
const ORDER_TAG: u32 = 0x0102_0304;

pub fn write_checkpoint(path: &Path, grid: &GridSpec, state: &FieldState) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&ORDER_TAG.to_le_bytes())?;
    w.write_all(&grid.half_width.to_le_bytes())?;
    w.write_all(&(grid.n_per_axis as u64).to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    for f in [&state.phi, &state.pi] {
        for v in f.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(GridSpec, FieldState)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("{}: bad magic", path.display())));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != ORDER_TAG {
        return Err(Error::Checkpoint("byte-order tag mismatch".into()));
    }
    r.read_exact(&mut b8)?;
    let half_width = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let t = f64::from_le_bytes(b8);
    let grid = GridSpec::new(half_width, n)?;
    let mut read_field = || -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; grid.len() * 8];
        r.read_exact(&mut bytes)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let phi = read_field()?;
    let pi = read_field()?;
    Ok((grid, FieldState { t, phi, pi }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub t: f64,
    pub step: usize,
    pub file: PathBuf,
}

/// Index of the checkpoints written by one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryIndex {
    pub grid: Option<GridSpec>,
    pub dt: f64,
    pub snapshots: Vec<SnapshotRecord>,
}

impl TrajectoryIndex {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
