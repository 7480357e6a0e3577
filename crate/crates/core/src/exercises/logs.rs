//! Reading and writing the files of a run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::skin::SkinState;

pub const RUN_FILE: &str = "run.txt";
pub const SCENE_FILE: &str = "scene.yaml";

/// Ordered `key=value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    pub entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::SchemaMismatch(format!("missing key `{key}`")))
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| Error::Parse(format!("`{key}` is not a number: `{v}`")))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            writeln!(s, "{k}={v}").unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = Self::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{line}`")))?;
            kv.set(k.trim(), v.trim());
        }
        Ok(kv)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// A CSV file whose cells are all numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty CSV".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("CSV row {}: non-numeric cell", i + 2)))?;
            if row.len() != columns.len() {
                return Err(Error::Parse(format!("CSV row {} has {} cells, expected {}", i + 2, row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::SchemaMismatch(format!("missing column `{name}`")))
    }

    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[c]).collect())
    }

    /// Column indices whose name starts with `prefix`.
    pub fn columns_with_prefix(&self, prefix: &str) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.starts_with(prefix))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Per-step maximum activation of every skin part, rebuilt from a skin log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkinTimeline {
    pub times: Vec<f64>,
    pub max_by_part: BTreeMap<String, Vec<u8>>,
}

impl SkinTimeline {
    pub fn new(times: Vec<f64>) -> Self {
        Self {
            times,
            max_by_part: BTreeMap::new(),
        }
    }

    /// Append one step of a live skin state.
    pub fn push(&mut self, time: f64, state: &SkinState) {
        let step = self.times.len();
        self.times.push(time);
        for v in self.max_by_part.values_mut() {
            v.push(0);
        }
        for (part, readings) in &state.parts {
            for r in readings.values() {
                self.record(step, part, r.activation);
            }
        }
    }

    pub fn record(&mut self, step: usize, part: &str, activation: u8) {
        let n = self.times.len();
        let v = self.max_by_part.entry(part.to_string()).or_insert_with(|| vec![0; n]);
        v[step] = v[step].max(activation);
    }

    pub fn max_at(&self, part: &str, step: usize) -> u8 {
        self.max_by_part.get(part).map_or(0, |v| v[step])
    }

    /// Join skin log rows to step times by exact `sim_time` match.
    pub fn from_skin_log(times: Vec<f64>, skin_csv: &str) -> Result<Self> {
        let index: BTreeMap<u64, usize> = times.iter().enumerate().map(|(i, t)| (t.to_bits(), i)).collect();
        let mut tl = Self::new(times);
        let mut lines = skin_csv.lines();
        if lines.next() != Some(crate::world::SKIN_HEADER) {
            return Err(Error::SchemaMismatch("skin log header".into()));
        }
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(Error::Parse(format!("bad skin log row `{line}`")));
            }
            let t: f64 = f[0].parse().map_err(|_| Error::Parse("bad skin time".into()))?;
            let a: u8 = f[3].parse().map_err(|_| Error::Parse("bad activation".into()))?;
            let step = *index
                .get(&t.to_bits())
                .ok_or_else(|| Error::SchemaMismatch(format!("skin time {t} not in trajectory")))?;
            tl.record(step, f[1], a);
        }
        Ok(tl)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_values_round_trip() {
        let mut kv = KeyValues::default();
        kv.set("exercise", "gaze");
        kv.set("score", 0.5);
        kv.set("exercise", "push");
        let back = KeyValues::parse(&kv.to_text()).unwrap();
        assert_eq!(back, kv);
        assert_eq!(back.require("exercise").unwrap(), "push");
        assert_eq!(back.require_f64("score").unwrap(), 0.5);
        assert!(back.require("seed").is_err());
    }

    #[test]
    fn numeric_table() {
        let t = NumericTable::parse("a,b\n1,2\n3,4.5\n").unwrap();
        assert_eq!(t.values("b").unwrap(), vec![2.0, 4.5]);
        assert!(NumericTable::parse("a,b\n1\n").is_err());
        assert!(NumericTable::parse("a\nx\n").is_err());
    }
}
