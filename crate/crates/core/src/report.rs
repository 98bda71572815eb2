//! JSON encoding of evaluation reports.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! every `f64` survives a round trip exactly.

use serde::ser::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::metrics::EvalReport;

/// `f64` serialized with 17 significant digits.
#[derive(Debug, Clone, Copy)]
struct F17(f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw =
            RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(serde::Serialize)]
struct CurvePoint {
    t: F17,
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    p: F17,
    r: F17,
    f1: F17,
}

#[derive(serde::Serialize)]
struct ImageRow<'a> {
    id: &'a str,
    best_f1: F17,
    ac: Option<F17>,
}

#[derive(serde::Serialize)]
struct ReportJson<'a> {
    protocol: String,
    tolerance: F17,
    ods: F17,
    ois: F17,
    ap: F17,
    ac: F17,
    thresholds: Vec<F17>,
    dataset_curve: Vec<CurvePoint>,
    images: Vec<ImageRow<'a>>,
}

/// Pretty-printed report with a trailing newline.
pub fn report_to_json(report: &EvalReport) -> String {
    let doc = ReportJson {
        protocol: report.protocol.to_string(),
        tolerance: F17(report.tolerance),
        ods: F17(report.ods),
        ois: F17(report.ois),
        ap: F17(report.ap),
        ac: F17(report.ac),
        thresholds: report.thresholds().into_iter().map(F17).collect(),
        dataset_curve: report
            .dataset_curve
            .points
            .iter()
            .map(|p| CurvePoint {
                t: F17(p.threshold),
                tp: p.counts.tp,
                fp: p.counts.fp,
                fn_: p.counts.fn_,
                p: F17(p.precision),
                r: F17(p.recall),
                f1: F17(p.f1),
            })
            .collect(),
        images: report
            .images
            .iter()
            .map(|i| ImageRow {
                id: &i.id,
                best_f1: F17(i.best_f1),
                ac: i.ac.map(F17),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("report is serializable");
    out.push('\n');
    out
}
