//! Report emission: CSV raw records and JSON aggregates, written
//! atomically (temp file + rename). Identical configs and seeds reproduce
//! identical bytes; timestamps never enter these files.

use super::{CurvesReport, HessianScanReport, SweepReport};
use crate::error::{Error, Result};
use crate::harness::BoundSuiteReport;
use std::fmt::Write as _;
use std::path::Path;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn fnum(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:e}")
    }
}

impl SweepReport {
    /// `m,seed,direction,max_residual_jet,max_residual_surrogate`
    pub fn csv(&self) -> Result<String> {
        if self.records.is_empty() {
            return Err(Error::InvalidConfig(
                "refusing to emit an empty sweep".into(),
            ));
        }
        let mut out = String::from("m,seed,direction,max_residual_jet,max_residual_surrogate\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.m,
                r.seed,
                r.direction,
                fnum(r.max_residual_jet),
                fnum(r.max_residual_surrogate)
            )
            .unwrap();
        }
        Ok(out)
    }

    pub fn json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let csv = self.csv()?;
        let json = self.json()?;
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("sweep.csv"), csv.as_bytes())?;
        write_atomic(&dir.join("sweep.json"), json.as_bytes())?;
        Ok(())
    }
}

impl CurvesReport {
    /// `curve_id,t,value,activation,support`
    pub fn csv(&self) -> Result<String> {
        if self.records.is_empty() {
            return Err(Error::InvalidConfig(
                "refusing to emit an empty curve table".into(),
            ));
        }
        let mut out = String::from("curve_id,t,value,activation,support\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.curve_id,
                fnum(r.t),
                fnum(r.value),
                r.activation,
                r.support
            )
            .unwrap();
        }
        Ok(out)
    }

    pub fn json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let csv = self.csv()?;
        let json = self.json()?;
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("curves.csv"), csv.as_bytes())?;
        write_atomic(&dir.join("curves.json"), json.as_bytes())?;
        Ok(())
    }
}

impl HessianScanReport {
    /// `m,seed,slot_i,slot_j,kind,estimate,reference,bound,satisfied`
    pub fn csv(&self) -> Result<String> {
        if self.records.is_empty() {
            return Err(Error::InvalidConfig(
                "refusing to emit an empty scan".into(),
            ));
        }
        let mut out =
            String::from("m,seed,slot_i,slot_j,kind,estimate,reference,bound,satisfied\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.m,
                r.seed,
                r.slot_i,
                r.slot_j,
                r.kind,
                fnum(r.estimate),
                fnum(r.reference),
                fnum(r.bound),
                r.satisfied
            )
            .unwrap();
        }
        Ok(out)
    }

    pub fn json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let csv = self.csv()?;
        let json = self.json()?;
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("hessian.csv"), csv.as_bytes())?;
        write_atomic(&dir.join("hessian.json"), json.as_bytes())?;
        Ok(())
    }
}

impl BoundSuiteReport {
    /// `bound_name,seed,theoretical,empirical,side,satisfied`
    pub fn csv(&self) -> Result<String> {
        if self.reports.is_empty() {
            return Err(Error::InvalidConfig(
                "refusing to emit an empty bound suite".into(),
            ));
        }
        let mut out = String::from("bound_name,seed,theoretical,empirical,side,satisfied\n");
        for r in &self.reports {
            writeln!(
                out,
                "{},{},{},{},{:?},{}",
                r.bound_name,
                r.seed,
                fnum(r.theoretical),
                fnum(r.empirical),
                r.side,
                r.satisfied
            )
            .unwrap();
        }
        Ok(out)
    }

    pub fn json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let csv = self.csv()?;
        let json = self.json()?;
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("bounds.csv"), csv.as_bytes())?;
        write_atomic(&dir.join("bounds.json"), json.as_bytes())?;
        Ok(())
    }
}
