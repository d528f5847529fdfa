use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use quakescore::io::format_float;
use serde_json::{Map, Value};

/// Output directory of one run.
pub struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// CSV text builder. Fields are written verbatim; callers format numbers.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.iter().map(|h| quote(h)).collect::<Vec<_>>().join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: impl IntoIterator<Item = S>) {
        let fields: Vec<String> = fields.into_iter().map(|f| quote(f.as_ref())).collect();
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn f(v: f64) -> String {
    format_float(v)
}

/// JSON number, or the CSV spelling for values JSON cannot hold.
pub fn num(v: f64) -> Value {
    match serde_json::Number::from_f64(v) {
        Some(n) => Value::Number(n),
        None => Value::String(format_float(v)),
    }
}

pub fn obj(fields: impl IntoIterator<Item = (&'static str, Value)>) -> Value {
    Value::Object(
        fields
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect::<Map<_, _>>(),
    )
}

/// File-name stems for model ids, unique across the list.
pub fn file_stems(ids: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    ids.iter()
        .enumerate()
        .map(|(i, id)| {
            let clean: String = id
                .chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                        c
                    } else {
                        '_'
                    }
                })
                .collect();
            let clean = if clean.is_empty() { "model".to_string() } else { clean };
            if seen.insert(clean.clone()) {
                clean
            } else {
                let alt = format!("{clean}_{}", i + 1);
                seen.insert(alt.clone());
                alt
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_unique_and_safe() {
        let ids = vec!["a b".to_string(), "a b".to_string(), "x/y".to_string(), String::new()];
        assert_eq!(file_stems(&ids), vec!["a_b", "a_b_2", "x_y", "model"]);
    }

    #[test]
    fn csv_quotes_only_when_needed() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(["1", "x,y"]);
        assert_eq!(c.finish(), "a,b\n1,\"x,y\"\n");
    }

    #[test]
    fn non_finite_numbers_become_strings() {
        assert_eq!(num(f64::INFINITY), Value::String("inf".into()));
        assert_eq!(num(0.5), serde_json::json!(0.5));
    }
}
