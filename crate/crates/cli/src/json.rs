//! Ordered JSON output with a fixed float format, so that identical runs
//! produce byte-identical reports.

use std::fmt::Write;

use cqlf_core::{Matrix, Vector};

#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(&'static str, Json)>),
}

impl Json {
    pub fn obj() -> Self {
        Json::Obj(Vec::new())
    }

    /// Appends a field; panics on non-objects.
    pub fn with(mut self, key: &'static str, value: impl Into<Json>) -> Self {
        match &mut self {
            Json::Obj(fields) => fields.push((key, value.into())),
            _ => panic!("with() on a non-object"),
        }
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => write!(out, "{i}").unwrap(),
            Json::Num(x) if x.is_finite() => write!(out, "{x:.16e}").unwrap(),
            Json::Num(_) => out.push_str("null"),
            Json::Str(s) => out.push_str(&serde_json::to_string(s).unwrap()),
            Json::Arr(items) if items.iter().all(Json::is_scalar) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write(out, indent);
                }
                out.push(']');
            }
            Json::Arr(items) => {
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    pad(out, indent + 1);
                    item.write(out, indent + 1);
                    out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
                }
                pad(out, indent);
                out.push(']');
            }
            Json::Obj(fields) if fields.is_empty() => out.push_str("{}"),
            Json::Obj(fields) => {
                out.push_str("{\n");
                for (i, (k, v)) in fields.iter().enumerate() {
                    pad(out, indent + 1);
                    write!(out, "\"{k}\": ").unwrap();
                    v.write(out, indent + 1);
                    out.push_str(if i + 1 < fields.len() { ",\n" } else { "\n" });
                }
                pad(out, indent);
                out.push('}');
            }
        }
    }

    /// Human-oriented rendering: one `key: value` line per field, short
    /// floats, nested objects indented.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out, 0);
        out
    }

    fn write_text(&self, out: &mut String, indent: usize) {
        match self {
            Json::Obj(fields) => {
                for (k, v) in fields {
                    pad(out, indent);
                    match v {
                        Json::Obj(inner) if !inner.is_empty() => {
                            writeln!(out, "{k}:").unwrap();
                            v.write_text(out, indent + 1);
                        }
                        Json::Arr(items) if items.iter().any(|i| !i.is_scalar()) => {
                            writeln!(out, "{k}:").unwrap();
                            for item in items {
                                if let Json::Obj(_) = item {
                                    pad(out, indent + 1);
                                    out.push_str("-\n");
                                    item.write_text(out, indent + 2);
                                } else {
                                    pad(out, indent + 1);
                                    writeln!(out, "{}", item.short()).unwrap();
                                }
                            }
                        }
                        _ => writeln!(out, "{k}: {}", v.short()).unwrap(),
                    }
                }
            }
            other => writeln!(out, "{}", other.short()).unwrap(),
        }
    }

    fn short(&self) -> String {
        match self {
            Json::Num(x) if x.is_finite() => format!("{x:.6e}"),
            Json::Num(_) | Json::Null => "-".into(),
            Json::Str(s) => s.clone(),
            Json::Arr(items) => {
                let parts: Vec<String> = items.iter().map(Json::short).collect();
                format!("[{}]", parts.join(", "))
            }
            Json::Obj(fields) => {
                let parts: Vec<String> = fields
                    .iter()
                    .map(|(k, v)| format!("{k}={}", v.short()))
                    .collect();
                format!("{{{}}}", parts.join(", "))
            }
            Json::Bool(b) => b.to_string(),
            Json::Int(i) => i.to_string(),
        }
    }

    fn is_scalar(&self) -> bool {
        !matches!(self, Json::Arr(_) | Json::Obj(_))
    }
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

impl From<bool> for Json {
    fn from(b: bool) -> Self {
        Json::Bool(b)
    }
}

impl From<f64> for Json {
    fn from(x: f64) -> Self {
        Json::Num(x)
    }
}

impl From<usize> for Json {
    fn from(i: usize) -> Self {
        Json::Int(i as i64)
    }
}

impl From<u64> for Json {
    fn from(i: u64) -> Self {
        Json::Int(i as i64)
    }
}

impl From<&str> for Json {
    fn from(s: &str) -> Self {
        Json::Str(s.to_owned())
    }
}

impl From<String> for Json {
    fn from(s: String) -> Self {
        Json::Str(s)
    }
}

impl<T: Into<Json>> From<Option<T>> for Json {
    fn from(v: Option<T>) -> Self {
        v.map_or(Json::Null, Into::into)
    }
}

impl<T: Into<Json>> From<Vec<T>> for Json {
    fn from(v: Vec<T>) -> Self {
        Json::Arr(v.into_iter().map(Into::into).collect())
    }
}

impl From<&[f64]> for Json {
    fn from(v: &[f64]) -> Self {
        Json::Arr(v.iter().map(|&x| Json::Num(x)).collect())
    }
}

impl From<&Vector> for Json {
    fn from(v: &Vector) -> Self {
        v.as_slice().into()
    }
}

impl From<&Matrix> for Json {
    fn from(m: &Matrix) -> Self {
        Json::Arr(
            m.row_iter()
                .map(|r| Json::Arr(r.iter().map(|&x| Json::Num(x)).collect()))
                .collect(),
        )
    }
}
