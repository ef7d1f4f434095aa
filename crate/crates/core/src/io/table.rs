//! Header-first CSV tables with canonical number formatting.

use std::path::Path;

use super::IoError;

/// Significant digits written for every number.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Rounds to nine significant digits and prints the shortest decimal that
/// reads back to that rounded value. Plain notation is used for moderate
/// magnitudes, exponent notation otherwise.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x);
    if r == 0.0 {
        return "0".into();
    }
    let a = r.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

pub fn parse_num(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| fmt_num(*v)).collect());
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| IoError::io(path, e))
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| IoError::Schema(e.to_string()))?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| IoError::Schema(e.to_string()))?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Self { headers, rows })
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        Self::parse(&text)
    }

    /// Errors unless every `required` column is present.
    pub fn require(&self, required: &[&str]) -> Result<(), IoError> {
        let missing: Vec<&str> = required.iter().filter(|h| !self.headers.iter().any(|x| x == *h)).copied().collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(IoError::Schema(format!("missing column(s): {}", missing.join(", "))))
        }
    }

    pub fn column_index(&self, name: &str) -> Result<usize, IoError> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| IoError::Schema(format!("missing column {name}")))
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>, IoError> {
        let i = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                parse_num(&r[i]).ok_or_else(|| IoError::Schema(format!("row {}: {name} = {:?} is not a number", k + 1, r[i])))
            })
            .collect()
    }

    pub fn column_str(&self, name: &str) -> Result<Vec<&str>, IoError> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_is_canonical() {
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(2.0), "2");
        assert_eq!(fmt_num(-1.21), "-1.21");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(123456789.123), "123456789");
        assert_eq!(fmt_num(1.5e-20), "1.5e-20");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.push_nums(&[std::f64::consts::PI, 1e-7]);
        t.push(vec!["x,y".into(), "2".into()]);
        let back = Table::parse(&t.to_csv_string()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column_f64("b").unwrap(), vec![1e-7, 2.0]);
        assert!(back.column_f64("a").is_err());
        assert!(back.require(&["a", "c"]).is_err());
    }
}
