//! Command output: aligned `label  value unit` lines for people, sorted
//! `key=value` lines with `--porcelain`.

use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Count(u64),
    Text(String),
}

impl Value {
    fn porcelain(&self) -> String {
        match self {
            Value::Number(x) => x.to_string(),
            Value::Count(n) => n.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    fn human(&self) -> String {
        match self {
            Value::Number(x) if *x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) => format!("{x:.4e}"),
            Value::Number(x) => format!("{x:.4}"),
            other => other.porcelain(),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    unit: &'static str,
    value: Value,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    entries: Vec<Entry>,
}

impl Report {
    pub fn number(&mut self, key: impl Into<String>, value: f64, unit: &'static str) -> &mut Self {
        self.push(key, Value::Number(value), unit)
    }

    pub fn count(&mut self, key: impl Into<String>, value: u64) -> &mut Self {
        self.push(key, Value::Count(value), "")
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.push(key, Value::Text(value.into()), "")
    }

    fn push(&mut self, key: impl Into<String>, value: Value, unit: &'static str) -> &mut Self {
        self.entries.push(Entry {
            key: key.into(),
            unit,
            value,
        });
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|e| e.key == key).map(|e| &e.value)
    }

    /// Porcelain lines, sorted by key.
    pub fn porcelain_lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .entries
            .iter()
            .map(|e| format!("{}={}", e.key, e.value.porcelain()))
            .collect();
        lines.sort();
        lines
    }

    pub fn write(&self, w: &mut dyn Write, porcelain: bool) -> std::io::Result<()> {
        if porcelain {
            for line in self.porcelain_lines() {
                writeln!(w, "{line}")?;
            }
            return Ok(());
        }
        let width = self.entries.iter().map(|e| e.key.len()).max().unwrap_or(0);
        for e in &self.entries {
            let value = e.value.human();
            if e.unit.is_empty() {
                writeln!(w, "{:<width$}  {value}", e.key)?;
            } else {
                writeln!(w, "{:<width$}  {value} {}", e.key, e.unit)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn porcelain_is_sorted_and_exact() {
        let mut r = Report::default();
        r.number("t_cooled_k", 108.21712345678901, "K").count("b", 3).text("a", "x");
        let mut out = Vec::new();
        r.write(&mut out, true).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a=x\nb=3\nt_cooled_k=108.21712345678901\n");
    }

    #[test]
    fn human_output_keeps_insertion_order() {
        let mut r = Report::default();
        r.number("zeta", 9.0e-6, "s").number("a", 108.2, "K");
        let mut out = Vec::new();
        r.write(&mut out, false).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "zeta  9.0000e-6 s\na     108.2000 K\n");
    }
}
