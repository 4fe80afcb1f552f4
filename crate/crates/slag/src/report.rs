//! Verification reports: the per-property record of what was sampled, what
//! was fitted, and whether the check passed. Reports serialize with a fixed
//! field order so identical runs produce identical bytes.

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SampleSpec {
    pub seed: u64,
    pub shells: u32,
    pub directions: u32,
    pub points: u64,
    pub r_min: f64,
    pub r_max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub id: String,
    pub pass: bool,
    pub samples: SampleSpec,
    /// Run parameters as ordered key/value text.
    pub params: Vec<(String, String)>,
    /// Fitted constants and exponents.
    pub fitted: Vec<(String, f64)>,
    /// Worst-case margins of each inequality checked (>= 0 means satisfied).
    pub margins: Vec<(String, f64)>,
    pub notes: Vec<String>,
    /// Optional long-format table for plot emission.
    pub table_columns: Vec<String>,
    pub table: Vec<Vec<f64>>,
}

impl VerificationReport {
    pub fn new(id: &str) -> Self {
        VerificationReport {
            id: id.to_string(),
            pass: true,
            samples: SampleSpec::default(),
            params: Vec::new(),
            fitted: Vec::new(),
            margins: Vec::new(),
            notes: Vec::new(),
            table_columns: Vec::new(),
            table: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn fit(&mut self, key: &str, value: f64) -> &mut Self {
        self.fitted.push((key.to_string(), value));
        self
    }

    pub fn fitted_value(&self, key: &str) -> Option<f64> {
        self.fitted.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// Record an inequality margin; a negative margin fails the report.
    pub fn margin(&mut self, key: &str, value: f64) -> &mut Self {
        self.margins.push((key.to_string(), value));
        if !(value >= 0.0) {
            self.pass = false;
        }
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn require(&mut self, key: &str, ok: bool) -> &mut Self {
        self.margin(key, if ok { 0.0 } else { -1.0 });
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

/// Minimal CSV writer for numeric sample tables; no quoting is ever needed.
pub fn write_csv(path: &std::path::Path, columns: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_drive_pass_flag() {
        let mut r = VerificationReport::new("demo");
        r.margin("ok", 0.25);
        assert!(r.pass);
        r.margin("bad", -0.1);
        assert!(!r.pass);
    }

    #[test]
    fn json_fields_keep_order() {
        let mut r = VerificationReport::new("demo");
        r.param("m", 2).fit("slope", 1.0).margin("gap", 0.5);
        let j = r.to_json().unwrap();
        let id_pos = j.find("\"id\"").unwrap();
        let pass_pos = j.find("\"pass\"").unwrap();
        let fitted_pos = j.find("\"fitted\"").unwrap();
        assert!(id_pos < pass_pos && pass_pos < fitted_pos);
    }
}
