//! JSON and CSV emission with a fixed field order and 12 significant digits.

use std::fmt::Write;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format {other:?} (expected json or csv)")),
        }
    }
}

/// One checked inequality or equality with its inputs' provenance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationRecord {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tol: f64,
    pub pass: bool,
    pub seed: u64,
    pub digest: String,
}

/// A computed quantity, with the expected value and its source when known.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueRow {
    pub quantity: String,
    pub value: f64,
    pub expected: Option<f64>,
    pub provenance: String,
}

/// Real number rounded to 12 significant digits in its shortest form;
/// non-finite values become `inf`, `-inf` or `nan`.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded:?}")
}

fn json_real(x: f64) -> String {
    if x.is_finite() {
        fmt_real(x)
    } else {
        format!("\"{}\"", fmt_real(x))
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

pub fn all_pass(records: &[VerificationRecord]) -> bool {
    records.iter().all(|r| r.pass)
}

pub fn emit_report(records: &[VerificationRecord], format: Format) -> Vec<u8> {
    let mut out = String::new();
    match format {
        Format::Json => {
            out.push_str("{\"records\":[");
            for (i, r) in records.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(
                    out,
                    "\n{{\"id\":{},\"lhs\":{},\"rhs\":{},\"margin\":{},\"tol\":{},\"pass\":{},\"seed\":{},\"digest\":{}}}",
                    json_str(&r.id),
                    json_real(r.lhs),
                    json_real(r.rhs),
                    json_real(r.margin),
                    json_real(r.tol),
                    r.pass,
                    r.seed,
                    json_str(&r.digest)
                )
                .expect("writing to a string");
            }
            out.push_str(if records.is_empty() { "]}\n" } else { "\n]}\n" });
        }
        Format::Csv => {
            out.push_str("id,lhs,rhs,margin,tol,pass,seed,digest\n");
            for r in records {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.id,
                    fmt_real(r.lhs),
                    fmt_real(r.rhs),
                    fmt_real(r.margin),
                    fmt_real(r.tol),
                    r.pass,
                    r.seed,
                    r.digest
                )
                .expect("writing to a string");
            }
        }
    }
    out.into_bytes()
}

pub fn emit_values(target: &str, rows: &[ValueRow], format: Format) -> Vec<u8> {
    let mut out = String::new();
    let opt = |x: Option<f64>| x.map(fmt_real).unwrap_or_default();
    match format {
        Format::Json => {
            write!(out, "{{\"target\":{},\"values\":[", json_str(target))
                .expect("writing to a string");
            for (i, r) in rows.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(
                    out,
                    "\n{{\"quantity\":{},\"value\":{},\"expected\":{},\"provenance\":{}}}",
                    json_str(&r.quantity),
                    json_real(r.value),
                    r.expected.map(json_real).unwrap_or_else(|| "null".into()),
                    json_str(&r.provenance)
                )
                .expect("writing to a string");
            }
            out.push_str(if rows.is_empty() { "]}\n" } else { "\n]}\n" });
        }
        Format::Csv => {
            out.push_str("quantity,value,expected,provenance\n");
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{}",
                    r.quantity,
                    fmt_real(r.value),
                    opt(r.expected),
                    r.provenance
                )
                .expect("writing to a string");
            }
        }
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(pass: bool) -> VerificationRecord {
        VerificationRecord {
            id: "x.check".into(),
            lhs: 1.0 / 3.0,
            rhs: 0.5,
            margin: 0.5 - 1.0 / 3.0,
            tol: 1e-6,
            pass,
            seed: 42,
            digest: "ab".into(),
        }
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_real(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_real(2.0), "2.0");
        assert_eq!(fmt_real(1e-6), "1e-6");
        assert_eq!(fmt_real(-123456.7890123456), "-123456.789012");
        assert_eq!(fmt_real(f64::INFINITY), "inf");
    }

    #[test]
    fn empty_documents_are_valid() {
        let json = emit_report(&[], Format::Json);
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(v["records"].as_array().unwrap().len(), 0);
        assert_eq!(
            emit_report(&[], Format::Csv),
            b"id,lhs,rhs,margin,tol,pass,seed,digest\n"
        );
        assert!(all_pass(&[]));
    }

    #[test]
    fn json_round_trip_and_field_order() {
        let recs = vec![record(true), record(false)];
        let json = String::from_utf8(emit_report(&recs, Format::Json)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["records"][1]["pass"], false);
        assert_eq!(v["records"][0]["lhs"].as_f64().unwrap(), 0.333333333333);
        let keys = [
            "\"id\"",
            "\"lhs\"",
            "\"rhs\"",
            "\"margin\"",
            "\"tol\"",
            "\"pass\"",
            "\"seed\"",
            "\"digest\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(!all_pass(&recs));
    }

    #[test]
    fn csv_rows() {
        let csv = String::from_utf8(emit_report(&[record(false)], Format::Csv)).unwrap();
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(
            line,
            "x.check,0.333333333333,0.5,0.166666666667,1e-6,false,42,ab"
        );
    }

    #[test]
    fn non_finite_values_stay_valid_json() {
        let mut r = record(true);
        r.rhs = f64::INFINITY;
        let v: serde_json::Value =
            serde_json::from_slice(&emit_report(&[r], Format::Json)).unwrap();
        assert_eq!(v["records"][0]["rhs"], "inf");
    }

    #[test]
    fn values_document() {
        let rows = vec![ValueRow {
            quantity: "w_seq".into(),
            value: 0.5,
            expected: None,
            provenance: "optimizer".into(),
        }];
        let v: serde_json::Value =
            serde_json::from_slice(&emit_values("t", &rows, Format::Json)).unwrap();
        assert!(v["values"][0]["expected"].is_null());
        let csv = String::from_utf8(emit_values("t", &rows, Format::Csv)).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "w_seq,0.5,,optimizer");
    }
}
