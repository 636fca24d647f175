//! Report serialization.
//!
//! CSV: UTF-8, `,` separator, `\n` line endings, floats in shortest
//! round-trip form. JSON: sorted keys, two-space indentation.

use std::fs;
use std::io;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::bump::{BumpError, BumpSpec};
use crate::complex2d::BlowupReport;
use crate::construction::FourierSolution3D;
use crate::multifractal::{Prediction, SpectrumReport};
use crate::term_algebra::Coefficient;
use crate::verifier::{BranchReport, ResidualReport};

/// Locale-independent shortest round-trip rendering.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Rows of string cells under a fixed header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| escape(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Array of objects keyed by the header.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        self.header.iter().zip(row).map(|(h, c)| (h.to_string(), Value::String(c.clone()))).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

pub fn json_string(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)
}

fn cell(x: f64) -> String {
    fmt_f64(x)
}

const COMPONENTS: [&str; 3] = ["x", "y", "z"];

/// One row per term of every nonzero component.
///
/// Columns: `k, m, component, amplitude_re, amplitude_im, f_order, freq, re,
/// im, exact`. `f_order` is empty for pure oscillations; `exact` is empty in
/// double mode.
pub fn modes_table<C: Coefficient>(solution: &FourierSolution3D<C>) -> Table {
    let mut t = Table::new(vec!["k", "m", "component", "amplitude_re", "amplitude_im", "f_order", "freq", "re", "im", "exact"]);
    for ((k, m), mode) in solution.modes() {
        for (c, series) in mode.components.iter().enumerate() {
            for (key, coeff) in series.iter() {
                let z = coeff.to_complex();
                t.push(vec![
                    k.to_string(),
                    m.to_string(),
                    COMPONENTS[c].to_string(),
                    cell(mode.amplitude.re),
                    cell(mode.amplitude.im),
                    key.f_order.map(|o| o.to_string()).unwrap_or_default(),
                    key.freq.to_string(),
                    cell(z.re),
                    cell(z.im),
                    coeff.exact_repr().unwrap_or_default(),
                ]);
            }
        }
    }
    t
}

/// One record per nonzero `(k, m, component)`:
/// `{k, m, component, amplitude: [re, im], terms: [{f_order, freq, re, im, exact?}]}`.
pub fn modes_json<C: Coefficient>(solution: &FourierSolution3D<C>) -> Value {
    let mut records = Vec::new();
    for ((k, m), mode) in solution.modes() {
        for (c, series) in mode.components.iter().enumerate() {
            if series.is_zero() {
                continue;
            }
            let terms: Vec<Value> = series
                .iter()
                .map(|(key, coeff)| {
                    let z = coeff.to_complex();
                    let mut obj = json!({ "f_order": key.f_order, "freq": key.freq, "re": z.re, "im": z.im });
                    if let Some(exact) = coeff.exact_repr() {
                        obj["exact"] = Value::String(exact);
                    }
                    obj
                })
                .collect();
            records.push(json!({
                "k": k,
                "m": m,
                "component": COMPONENTS[c],
                "amplitude": [mode.amplitude.re, mode.amplitude.im],
                "terms": terms,
            }));
        }
    }
    json!({ "frame": {
        "v": solution.frame.v, "eta0": solution.frame.eta0, "xi0": solution.frame.xi0, "xi1": solution.frame.xi1,
    }, "box": { "k": solution.bounds.k, "m": solution.bounds.m }, "modes": records })
}

pub fn residual_table(report: &ResidualReport) -> Table {
    let mut t = Table::new(vec!["k", "m", "t", "residual", "relative", "reduction_gap"]);
    for e in &report.entries {
        t.push(vec![e.k.to_string(), e.m.to_string(), cell(e.t), cell(e.residual), cell(e.relative), cell(e.reduction_gap)]);
    }
    t
}

pub fn branch_table(report: &BranchReport) -> Table {
    let mut t = Table::new(vec!["k", "m", "t", "symbolic_norm", "galerkin_norm", "discrepancy"]);
    for r in &report.rows {
        t.push(vec![
            r.k.to_string(),
            r.m.to_string(),
            cell(r.t),
            cell(r.symbolic_norm),
            cell(r.galerkin_norm),
            cell(r.discrepancy),
        ]);
    }
    t
}

pub fn entropy_table(report: &SpectrumReport) -> Table {
    let mut t = Table::new(vec!["t", "q", "N", "H"]);
    for (q, row) in report.qs.iter().zip(&report.entropies) {
        for (n, h) in report.ns.iter().zip(row) {
            t.push(vec![cell(report.t), cell(*q), n.to_string(), cell(*h)]);
        }
    }
    t
}

fn prediction_cell(p: &Option<Prediction>) -> String {
    match p {
        Some(Prediction::Value(v)) => cell(*v),
        Some(Prediction::NotApplicable) => "NOT-APPLICABLE".into(),
        None => String::new(),
    }
}

pub fn dq_table(report: &SpectrumReport) -> Table {
    let mut t = Table::new(vec!["t", "q", "fitted", "predicted", "abs_error", "fit_rms", "n_min", "n_max"]);
    for (fit, pred) in report.fits.iter().zip(&report.predicted) {
        let err = match pred {
            Some(Prediction::Value(v)) => cell((fit.slope - v).abs()),
            _ => String::new(),
        };
        t.push(vec![
            cell(report.t),
            cell(fit.q),
            cell(fit.slope),
            prediction_cell(pred),
            err,
            cell(fit.residual),
            report.ns.first().map(u64::to_string).unwrap_or_default(),
            report.ns.last().map(u64::to_string).unwrap_or_default(),
        ]);
    }
    t
}

pub fn sobolev_table(report: &SpectrumReport) -> Table {
    let mut t = Table::new(vec!["t", "s", "N", "partial_sum"]);
    for (s, sums) in &report.sobolev {
        for (n, v) in report.ns.iter().zip(sums) {
            t.push(vec![cell(report.t), cell(*s), n.to_string(), cell(*v)]);
        }
    }
    t
}

pub fn blowup_table(reports: &[BlowupReport]) -> Table {
    let mut t = Table::new(vec!["s", "t", "n_max", "class", "last_ratio", "log_partial_sum"]);
    for r in reports {
        t.push(vec![cell(r.s), cell(r.t), r.n_max.to_string(), r.class.to_string(), cell(r.last_ratio), cell(r.log_partial_sum)]);
    }
    t
}

/// `(t, N, energy)` rows.
pub fn energy_table(rows: &[(f64, u64, f64)]) -> Table {
    let mut t = Table::new(vec!["t", "N", "energy"]);
    for &(time, n, e) in rows {
        t.push(vec![cell(time), n.to_string(), cell(e)]);
    }
    t
}

/// Bump derivatives `f^{(n)}(t)` for `n = 0..=order` at each time.
pub fn bump_table(bump: &BumpSpec, times: &[f64], order: usize) -> Result<Table, BumpError> {
    let mut t = Table::new(vec!["t", "n", "value"]);
    for &time in times {
        let table = bump.derivatives(time, order)?;
        for (n, v) in table.values().iter().enumerate() {
            t.push(vec![cell(time), n.to_string(), cell(*v)]);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{build_solution, BoxSize, GeneratorData, LatticeFrame, Profile};
    use crate::term_algebra::ExactCoeff;
    use num_complex::Complex64;
    use std::collections::BTreeSet;

    fn small<C: Coefficient>() -> FourierSolution3D<C> {
        let gen = GeneratorData {
            h: Profile::Exponential { scale: 1.0, rate: 1.0 },
            g: Profile::Power { scale: std::f64::consts::E, exponent: 0.3 },
            bump: BumpSpec::half(1.0).unwrap(),
        };
        build_solution(LatticeFrame::default(), gen, BoxSize::new(1, 1).unwrap()).unwrap()
    }

    #[test]
    fn float_format_is_round_trip() {
        for x in [0.1, 1.0, -2.5e-17, 1e300, 0.0, 1.0 / 3.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0), "1.0");
    }

    #[test]
    fn empty_report_is_header_only() {
        let t = blowup_table(&[]);
        assert_eq!(t.to_csv(), "s,t,n_max,class,last_ratio,log_partial_sum\n");
        assert_eq!(energy_table(&[]).to_csv(), "t,N,energy\n");
    }

    #[test]
    fn small_box_mode_records() {
        let sol = small::<ExactCoeff>();
        let json = modes_json(&sol);
        let records = json["modes"].as_array().unwrap();
        let points: BTreeSet<(i64, i64)> =
            records.iter().map(|r| (r["k"].as_i64().unwrap(), r["m"].as_i64().unwrap())).collect();
        assert_eq!(points.len(), 7);
        assert!(records.iter().all(|r| r["terms"][0]["exact"].is_string()));
        let table = modes_table(&sol);
        let rows: BTreeSet<(String, String)> = table.rows.iter().map(|r| (r[0].clone(), r[1].clone())).collect();
        assert_eq!(rows.len(), 7);
    }

    #[test]
    fn re_export_is_byte_identical() {
        let a = json_string(&modes_json(&small::<Complex64>()));
        let b = json_string(&modes_json(&small::<Complex64>()));
        assert_eq!(a, b);
        let ea = modes_table(&small::<ExactCoeff>()).to_csv();
        let eb = modes_table(&small::<ExactCoeff>()).to_csv();
        assert_eq!(ea, eb);
    }

    #[test]
    fn json_keys_sorted() {
        let s = json_string(&json!({ "zeta": 1, "alpha": 2 }));
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }

    #[test]
    fn csv_escaping() {
        let mut t = Table::new(vec!["a"]);
        t.push(vec!["1 + 2,3".into()]);
        assert_eq!(t.to_csv(), "a\n\"1 + 2,3\"\n");
    }
}
