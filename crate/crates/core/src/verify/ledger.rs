//! Diagnostic ledger: one row per check, with hard (asserted), soft (trend or constant-bearing)
//! and info rows.
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Hard,
    Soft,
    Info,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// measured ≤ reference
    AtMost,
    /// measured ≥ reference
    AtLeast,
    /// |measured − reference| ≤ tolerance
    Within(#[serde(with = "f64_bits")] u64),
    /// no comparison
    None,
}

/// Non-finite values are written as null and read back as NaN.
mod nan_null {
    use serde::{Deserialize, Deserializer, Serializer};
    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

mod f64_bits {
    use serde::{Deserialize, Deserializer, Serializer};
    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(f64::from_bits(*v))
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        Ok(f64::deserialize(d)?.to_bits())
    }
}

impl Relation {
    pub fn within(tol: f64) -> Self {
        Relation::Within(tol.to_bits())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub level: Option<usize>,
    pub id: String,
    /// Time of the worst case, when the row is a maximum over the time grid.
    pub t: Option<f64>,
    #[serde(with = "nan_null")]
    pub measured: f64,
    #[serde(with = "nan_null")]
    pub reference: f64,
    pub relation: Relation,
    /// Signed slack: positive when the relation holds.
    #[serde(with = "nan_null")]
    pub margin: f64,
    pub flag: Flag,
    pub pass: bool,
    pub note: String,
}

impl LedgerRow {
    pub fn new(
        level: Option<usize>,
        id: &str,
        measured: f64,
        reference: f64,
        relation: Relation,
        flag: Flag,
    ) -> Self {
        let margin = match relation {
            Relation::AtMost => reference - measured,
            Relation::AtLeast => measured - reference,
            Relation::Within(b) => f64::from_bits(b) - (measured - reference).abs(),
            Relation::None => 0.0,
        };
        // NaN compares false, so a NaN measurement fails
        let pass = relation == Relation::None || margin >= 0.0;
        LedgerRow {
            level,
            id: id.into(),
            t: None,
            measured,
            reference,
            relation,
            margin,
            flag,
            pass,
            note: String::new(),
        }
    }

    pub fn at(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.note = s.into();
        self
    }

    pub fn info(level: Option<usize>, id: &str, measured: f64) -> Self {
        let mut r = LedgerRow::new(level, id, measured, f64::NAN, Relation::None, Flag::Info);
        r.pass = true;
        r
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticLedger {
    pub rows: Vec<LedgerRow>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    level: String,
    id: &'a str,
    t: String,
    measured: f64,
    reference: f64,
    relation: String,
    margin: f64,
    flag: &'a str,
    pass: bool,
    note: &'a str,
}

impl DiagnosticLedger {
    pub fn push(&mut self, row: LedgerRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = LedgerRow>) {
        self.rows.extend(rows);
    }

    pub fn hard_failures(&self) -> Vec<&LedgerRow> {
        self.rows
            .iter()
            .filter(|r| r.flag == Flag::Hard && !r.pass)
            .collect()
    }

    pub fn soft_failures(&self) -> Vec<&LedgerRow> {
        self.rows
            .iter()
            .filter(|r| r.flag == Flag::Soft && !r.pass)
            .collect()
    }

    pub fn row(&self, level: Option<usize>, id: &str) -> Option<&LedgerRow> {
        self.rows.iter().find(|r| r.level == level && r.id == id)
    }

    pub fn ids(&self, level: Option<usize>) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|r| r.level == level)
            .map(|r| r.id.as_str())
            .collect()
    }

    /// Ids from `required` that are missing at `level`.
    pub fn missing(&self, level: Option<usize>, required: &[&str]) -> Vec<String> {
        let have = self.ids(level);
        required
            .iter()
            .filter(|id| !have.contains(id))
            .map(|s| s.to_string())
            .collect()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(CsvRow {
                level: r.level.map(|l| l.to_string()).unwrap_or_default(),
                id: &r.id,
                t: r.t.map(|t| format!("{t:.9}")).unwrap_or_default(),
                measured: r.measured,
                reference: r.reference,
                relation: match r.relation {
                    Relation::AtMost => "<=".into(),
                    Relation::AtLeast => ">=".into(),
                    Relation::Within(b) => format!("+-{:e}", f64::from_bits(b)),
                    Relation::None => String::new(),
                },
                margin: r.margin,
                flag: match r.flag {
                    Flag::Hard => "hard",
                    Flag::Soft => "soft",
                    Flag::Info => "info",
                },
                pass: r.pass,
                note: &r.note,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON nested by level ("global" for rows without a level).
    pub fn to_json(&self) -> serde_json::Value {
        let mut by: BTreeMap<String, Vec<&LedgerRow>> = BTreeMap::new();
        for r in &self.rows {
            let key = r
                .level
                .map(|l| format!("level_{l}"))
                .unwrap_or_else(|| "global".into());
            by.entry(key).or_default().push(r);
        }
        serde_json::json!({
            "hard_failures": self.hard_failures().len(),
            "soft_failures": self.soft_failures().len(),
            "levels": by,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let mut rows = Vec::new();
        if let Some(levels) = v.get("levels").and_then(|l| l.as_object()) {
            for list in levels.values() {
                let part: Vec<LedgerRow> = serde_json::from_value(list.clone())?;
                rows.extend(part);
            }
        }
        Ok(DiagnosticLedger { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_and_flags() {
        let r = LedgerRow::new(Some(1), "x", 1.0, 2.0, Relation::AtMost, Flag::Hard);
        assert!(r.pass && r.margin == 1.0);
        let r = LedgerRow::new(Some(1), "x", f64::NAN, 2.0, Relation::AtMost, Flag::Hard);
        assert!(!r.pass);
        let r = LedgerRow::new(None, "y", 1.95, 2.0, Relation::within(0.1), Flag::Soft);
        assert!(r.pass);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let mut l = DiagnosticLedger::default();
        l.push(LedgerRow::new(Some(1), "a", 1.0, 2.0, Relation::AtMost, Flag::Hard).at(0.5));
        l.push(LedgerRow::new(None, "b", 3.0, 2.0, Relation::AtMost, Flag::Soft).note("desk"));
        l.push(LedgerRow::info(Some(2), "c", 4.0));
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let back = DiagnosticLedger::from_json(&l.to_json()).unwrap();
        assert_eq!(back.rows.len(), 3);
        assert!(back
            .rows
            .iter()
            .any(|r| r.id == "c" && r.reference.is_nan()));
        assert_eq!(l.hard_failures().len(), 0);
        assert_eq!(l.soft_failures().len(), 1);
        assert_eq!(l.missing(Some(1), &["a", "z"]), vec!["z".to_string()]);
    }
}
