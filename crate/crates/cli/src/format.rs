//! Number formatting shared by every artifact: floats are written with 17
//! significant digits so that parsing them back gives the same `f64`.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// `x` with 17 significant digits in scientific notation; `NaN`, `inf` and
/// `-inf` for non-finite values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Builder for a CSV table with one header line and a fixed column order.
#[derive(Debug, Clone)]
pub struct Csv {
    columns: Vec<String>,
    body: String,
}

pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl Csv {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            body: String::new(),
        }
    }

    pub fn header(&self) -> String {
        self.columns.join(",")
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> &mut Self {
        assert_eq!(
            cells.len(),
            self.columns.len(),
            "CSV row width must match the header"
        );
        let line: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::Num(x) => fmt_f64(x),
                Cell::Int(k) => k.to_string(),
                Cell::Text(s) => s,
            })
            .collect();
        self.body.push_str(&line.join(","));
        self.body.push('\n');
        self
    }

    pub fn render(&self) -> String {
        format!("{}\n{}", self.header(), self.body)
    }
}

/// Pretty JSON whose floats go through [`fmt_f64`].
struct Json17 {
    inner: PrettyFormatter<'static>,
}

impl Formatter for Json17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut out,
        Json17 {
            inner: PrettyFormatter::new(),
        },
    );
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(-2.62), "-2.6200000000000001e0");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["V", "Z"]);
        c.row(vec![0.5.into(), 1.0.into()]);
        let text = c.render();
        assert_eq!(text.lines().next(), Some("V,Z"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn json_floats_use_full_precision() {
        let v = serde_json::json!({ "x": 0.1, "n": 3, "bad": f64::NAN });
        let text = to_json(&v);
        assert!(text.contains("\"x\": 1.0000000000000001e-1"), "{text}");
        assert!(text.contains("\"n\": 3"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
        assert!(back["bad"].is_null());
    }

    proptest! {
        #[test]
        fn floats_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
