//! CSV and JSON emission.

use std::io::Write;
use std::path::Path;

use crate::domain::{Domain, GridFunction};
use crate::error::{Error, Result};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Num(v) => fmt_f64(*v),
            Field::Int(v) => v.to_string(),
            Field::Text(s) => s.clone(),
            Field::Bool(b) => b.to_string(),
        }
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Num(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Bool(v)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_string())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Renders a header plus rows as RFC 4180 CSV.
pub fn csv_string(headers: &[&str], rows: &[Vec<Field>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(Field::render)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Writes to `path`, or stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

/// One row per cell: region, coordinates, value.
pub fn grid_function_csv(domain: &Domain, u: &GridFunction, with_shell: bool) -> Result<String> {
    let mut headers = vec!["region", "x"];
    if domain.dimension == 2 {
        headers.push("y");
    }
    headers.push("u");
    let mut rows = Vec::new();
    let mut push = |region: &str, c: &crate::domain::Cell, v: f64| {
        let mut r = vec![Field::from(region), Field::Num(c.center[0])];
        if domain.dimension == 2 {
            r.push(Field::Num(c.center[1]));
        }
        r.push(Field::Num(v));
        rows.push(r);
    };
    for (c, v) in domain.interior.iter().zip(&u.interior) {
        push("interior", c, *v);
    }
    if with_shell {
        for (c, v) in domain.shell.iter().zip(&u.shell) {
            push("shell", c, *v);
        }
    }
    csv_string(&headers, &rows)
}

/// Reads interior values from a CSV with a header. The value column is the
/// one named `f`, `u` or `value`, else the last column; rows follow the
/// interior cell order, and rows tagged `region = shell` fill the shell.
pub fn read_grid_function(domain: &Domain, text: &str) -> Result<GridFunction> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(csv_err)?.clone();
    let col = ["f", "u", "value"]
        .iter()
        .find_map(|name| headers.iter().position(|h| h == *name))
        .unwrap_or(headers.len().saturating_sub(1));
    let region = headers.iter().position(|h| h == "region");
    let mut interior = Vec::new();
    let mut shell = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let raw = rec.get(col).unwrap_or("");
        let v: f64 = raw
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("row {}: '{raw}' is not a number", i + 2)))?;
        match region.and_then(|c| rec.get(c)) {
            Some("shell") => shell.push(v),
            _ => interior.push(v),
        }
    }
    if interior.len() != domain.n_interior() {
        return Err(Error::Mismatch(format!(
            "file has {} interior values, domain has {} cells",
            interior.len(),
            domain.n_interior()
        )));
    }
    if shell.is_empty() {
        shell = vec![0.0; domain.n_shell()];
    }
    GridFunction::from_parts(domain, interior, shell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Shape;

    #[test]
    fn round_trip_is_exact() {
        let d = Domain::build(Shape::Interval { a: 0.0, b: 1.0 }, 0.125, 0.25).unwrap();
        let u = GridFunction::from_fn(&d, |x| (x[0] * 7.3).sin() / 3.0);
        let text = grid_function_csv(&d, &u, true).unwrap();
        let back = read_grid_function(&d, &text).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        let s = csv_string(&["a", "b"], &[vec![Field::from("x,y"), Field::Num(1.0)]]).unwrap();
        assert_eq!(s, "a,b\n\"x,y\",1.0000000000000000e0\n");
    }
}
