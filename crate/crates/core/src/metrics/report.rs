//! Tabular metric output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::DecayTable;
use crate::error::{LabError, Result};

/// One measured quantity; `scale` is the cylinder radius or ladder floor it
/// refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub kind: String,
    pub exponent: f64,
    pub scale: f64,
    pub value: f64,
    pub fit_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub rows: Vec<MetricRow>,
    pub decay: Vec<DecayTable>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    scenario: &'a str,
    kind: &'a str,
    exponent: f64,
    scale: f64,
    value: f64,
    fit_residual: f64,
}

impl RegularityReport {
    pub fn push(&mut self, kind: &str, exponent: f64, scale: f64, value: f64, fit_residual: f64) {
        self.rows.push(MetricRow {
            kind: kind.to_string(),
            exponent,
            scale,
            value,
            fit_residual,
        });
    }

    pub fn get(&self, kind: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.kind == kind)
    }

    /// Rejects NaN entries; `+∞` is the documented marker for vanishing
    /// increments and passes.
    pub fn validate(&self) -> Result<()> {
        match self
            .rows
            .iter()
            .find(|r| [r.exponent, r.scale, r.value, r.fit_residual].iter().any(|v| v.is_nan()))
        {
            Some(r) => Err(LabError::NonFinite(format!("metric {}", r.kind))),
            None => Ok(()),
        }
    }

    /// Writes `scenario,kind,exponent,scale,value,fit_residual` rows.
    pub fn write_csv<W: Write>(&self, scenario: &str, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(CsvRow {
                scenario,
                kind: &r.kind,
                exponent: r.exponent,
                scale: r.scale,
                value: r.value,
                fit_residual: r.fit_residual,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut r = RegularityReport::default();
        r.push("holder", 0.5, 0.5, 1.25, 0.0);
        r.push("time-exponent", f64::NAN, 0.5, f64::INFINITY, 0.0);
        assert!(r.validate().is_err());
        r.rows.pop();
        let mut buf = Vec::new();
        r.write_csv("zero", &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "scenario,kind,exponent,scale,value,fit_residual\nzero,holder,0.5,0.5,1.25,0.0\n"
        );
    }
}
