use clap::ValueEnum;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Tsv,
    Csv,
}

/// A command result: the JSON document plus an optional natural table.
pub struct Rendered {
    pub json: Value,
    pub table: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
    pub csv_override: Option<String>,
}

impl Rendered {
    pub fn json(json: Value) -> Self {
        Rendered { json, table: None, csv_override: None }
    }

    pub fn table(json: Value, header: Vec<&'static str>, rows: Vec<Vec<String>>) -> Self {
        Rendered { json, table: Some((header, rows)), csv_override: None }
    }

    pub fn render(&self, format: Format) -> String {
        let sep = match format {
            Format::Json => return serde_json::to_string_pretty(&self.json).expect("json"),
            Format::Tsv => "\t",
            Format::Csv => {
                if let Some(s) = &self.csv_override {
                    return s.trim_end().to_string();
                }
                ","
            }
        };
        let rows: Vec<Vec<String>> = match &self.table {
            Some((header, rows)) => {
                let mut all = vec![header.iter().map(|h| h.to_string()).collect()];
                all.extend(rows.iter().cloned());
                all
            }
            None => {
                let mut flat = Vec::new();
                flatten("", &self.json, &mut flat);
                flat.into_iter().map(|(k, v)| vec![k, v]).collect()
            }
        };
        let cell = |c: &String| {
            if format == Format::Csv && (c.contains(',') || c.contains('"')) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.clone()
            }
        };
        rows.iter()
            .map(|r| r.iter().map(cell).collect::<Vec<_>>().join(sep))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// `path -> scalar` pairs in document order.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
