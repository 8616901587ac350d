//! Report shapes and their JSON/CSV encodings, plus plot-data tables for
//! Monte Carlo summaries.
//!
//! JSON reports are objects `{"schema_version": 1, "kind": …, …fields}`.
//! Non-finite floats are the strings `"inf"`, `"-inf"`, `"nan"`, and a grid
//! selection where every test rejects has `"alpha_max": "integrated"`.
//! CSV reports are long tables with columns `alpha0,statistic,value`;
//! `alpha0` is empty for quantities not tied to a test value, and floats
//! carry 17 significant digits.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisReport;
use crate::error::{Error, Result};
use crate::estimate::{corrected_theta, estimate_alpha, fit_hierarchical, fit_raw, Interval};
use crate::montecarlo::{Calibration, McSummary};
use crate::process::{ArPath, PathOrigin};
use crate::serde_float::csv_repr;
use crate::spectra::RootSign;
use crate::urtest::{run_test, AlphaMax, SelectionReport, TestReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// One row of a long CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub alpha0: Option<f64>,
    pub statistic: String,
    pub value: String,
}

impl CsvRow {
    fn global(statistic: impl Into<String>, value: impl ToString) -> Self {
        Self {
            alpha0: None,
            statistic: statistic.into(),
            value: value.to_string(),
        }
    }

    fn at(alpha0: f64, statistic: impl Into<String>, value: impl ToString) -> Self {
        Self {
            alpha0: Some(alpha0),
            statistic: statistic.into(),
            value: value.to_string(),
        }
    }
}

fn num(v: f64) -> String {
    csv_repr(v)
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), csv_repr)
}

fn sign_str(s: RootSign) -> &'static str {
    match s {
        RootSign::Positive => "positive",
        RootSign::Negative => "negative",
    }
}

fn alpha_max_str(a: AlphaMax) -> String {
    match a {
        AlphaMax::Value(v) => csv_repr(v),
        AlphaMax::Integrated => "integrated".into(),
    }
}

fn interval_rows(rows: &mut Vec<CsvRow>, prefix: &str, alpha0: Option<f64>, ci: Option<Interval>) {
    if let Some(ci) = ci {
        for (suffix, v) in [("lo", ci.lo), ("hi", ci.hi)] {
            rows.push(CsvRow {
                alpha0,
                statistic: format!("{prefix}_{suffix}"),
                value: num(v),
            });
        }
    }
}

fn vector_rows(rows: &mut Vec<CsvRow>, name: &str, v: &[f64]) {
    for (i, x) in v.iter().enumerate() {
        rows.push(CsvRow::global(format!("{name}[{}]", i + 1), num(*x)));
    }
}

fn test_rows(rows: &mut Vec<CsvRow>, t: &TestReport) {
    let a = t.alpha0;
    rows.push(CsvRow::at(a, "z_squared", num(t.z_squared)));
    rows.push(CsvRow::at(a, "critical_value", num(t.critical_value)));
    rows.push(CsvRow::at(a, "reject", t.reject));
    rows.push(CsvRow::at(a, "v_hat", num(t.v_hat)));
    rows.push(CsvRow::at(a, "alpha_hat", opt_num(t.alpha_hat)));
    rows.push(CsvRow::at(a, "pi_hat", opt_num(t.pi_hat)));
    interval_rows(rows, "ci", Some(a), t.ci);
}

fn selection_rows(rows: &mut Vec<CsvRow>, s: &SelectionReport) {
    rows.push(CsvRow::global("n", s.n));
    rows.push(CsvRow::global("p", s.p));
    rows.push(CsvRow::global("c", num(s.c)));
    rows.push(CsvRow::global("epsilon", num(s.epsilon)));
    rows.push(CsvRow::global("sign", sign_str(s.sign)));
    for t in &s.per_alpha0 {
        test_rows(rows, t);
    }
    rows.push(CsvRow::global("alpha_max", alpha_max_str(s.alpha_max)));
    interval_rows(rows, "ci_at_alpha_max", None, s.ci_at_alpha_max);
}

/// A serializable command result.
pub trait Report: Serialize + DeserializeOwned {
    const KIND: &'static str;

    fn csv_rows(&self) -> Vec<CsvRow>;

    fn write_csv(&self, out: &mut Vec<u8>) -> Result<()> {
        write_rows(out, &self.csv_rows())
    }
}

fn write_rows(out: &mut Vec<u8>, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha0", "statistic", "value"])?;
    for r in rows {
        let a = r.alpha0.map(csv_repr).unwrap_or_default();
        w.write_record([a.as_str(), r.statistic.as_str(), r.value.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a long table written by [`emit_report`].
pub fn read_csv_rows(bytes: &[u8]) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |column: usize, message: String| Error::Parse { line, column, message };
        let alpha0 = match rec.get(0).unwrap_or("") {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|e| bad(1, e.to_string()))?),
        };
        let statistic = rec.get(1).ok_or_else(|| bad(2, "missing statistic".into()))?;
        let value = rec.get(2).ok_or_else(|| bad(3, "missing value".into()))?;
        rows.push(CsvRow {
            alpha0,
            statistic: statistic.to_string(),
            value: value.to_string(),
        });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct EnvelopeRef<'a, T> {
    schema_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Deserialize)]
struct Envelope<T> {
    schema_version: u32,
    kind: String,
    #[serde(flatten)]
    body: T,
}

pub fn emit_report<R: Report>(report: &R, format: Format) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        Format::Json => {
            let env = EnvelopeRef {
                schema_version: SCHEMA_VERSION,
                kind: R::KIND,
                body: report,
            };
            serde_json::to_writer_pretty(&mut out, &env)?;
            out.push(b'\n');
        }
        Format::Csv => report.write_csv(&mut out)?,
    }
    Ok(out)
}

/// Inverse of [`emit_report`] for JSON.
pub fn parse_report<R: Report>(bytes: &[u8]) -> Result<R> {
    let env: Envelope<R> = serde_json::from_slice(bytes)?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported schema_version {}",
            env.schema_version
        )));
    }
    if env.kind != R::KIND {
        return Err(Error::InvalidConfig(format!(
            "expected a {} report, found {}",
            R::KIND,
            env.kind
        )));
    }
    Ok(env.body)
}

/// A simulated path with the coefficients that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub origin: PathOrigin,
    /// `X_{1-m}, …, X_0`.
    pub presample: Vec<f64>,
    pub observations: Vec<f64>,
}

impl From<&ArPath> for SimulationReport {
    fn from(path: &ArPath) -> Self {
        Self {
            origin: path.origin.clone(),
            presample: path.presample().to_vec(),
            observations: path.observations().to_vec(),
        }
    }
}

impl Report for SimulationReport {
    const KIND: &'static str = "simulation";

    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        vector_rows(&mut rows, "x", &self.observations);
        rows
    }

    /// Wide table `k,x` of the observations, readable by `ingest_csv`.
    fn write_csv(&self, out: &mut Vec<u8>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "x"])?;
        for (i, v) in self.observations.iter().enumerate() {
            w.write_record([(i + 1).to_string(), csv_repr(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalSummary {
    pub alpha0: f64,
    pub c: f64,
    pub sign: RootSign,
    pub v_hat: f64,
    pub beta_hat: Vec<f64>,
    pub alpha_hat: Option<f64>,
    pub theta_tilde: Vec<f64>,
}

/// Raw and, optionally, hierarchical least-squares fits of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub n: usize,
    pub p: usize,
    pub theta_hat: Vec<f64>,
    pub residual_variance: f64,
    pub hierarchical: Option<HierarchicalSummary>,
}

pub fn estimate_report(
    path: &ArPath,
    p: usize,
    hierarchical: Option<(f64, f64, RootSign)>,
) -> Result<EstimateReport> {
    let raw = fit_raw(path, p)?;
    let hierarchical = match hierarchical {
        Some((alpha0, c, sign)) => {
            let fit = fit_hierarchical(path, p, alpha0, c, sign)?;
            Some(HierarchicalSummary {
                alpha0,
                c,
                sign,
                v_hat: fit.v_hat,
                beta_hat: fit.beta_hat.clone(),
                alpha_hat: estimate_alpha(&fit, c, path.n()),
                theta_tilde: corrected_theta(&fit),
            })
        }
        None => None,
    };
    Ok(EstimateReport {
        n: path.n(),
        p,
        theta_hat: raw.theta_hat,
        residual_variance: raw.residual_variance,
        hierarchical,
    })
}

impl Report for EstimateReport {
    const KIND: &'static str = "estimate";

    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = vec![CsvRow::global("n", self.n), CsvRow::global("p", self.p)];
        vector_rows(&mut rows, "theta_hat", &self.theta_hat);
        rows.push(CsvRow::global("residual_variance", num(self.residual_variance)));
        if let Some(h) = &self.hierarchical {
            let a = h.alpha0;
            rows.push(CsvRow::at(a, "v_hat", num(h.v_hat)));
            for (i, b) in h.beta_hat.iter().enumerate() {
                rows.push(CsvRow::at(a, format!("beta_hat[{}]", i + 1), num(*b)));
            }
            rows.push(CsvRow::at(a, "alpha_hat", opt_num(h.alpha_hat)));
            for (i, t) in h.theta_tilde.iter().enumerate() {
                rows.push(CsvRow::at(a, format!("theta_tilde[{}]", i + 1), num(*t)));
            }
        }
        rows
    }
}

/// Tests at explicit test values, each reported independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRun {
    pub n: usize,
    pub p: usize,
    pub c: f64,
    pub sign: RootSign,
    pub tests: Vec<TestReport>,
}

pub fn test_run(
    path: &ArPath,
    p: usize,
    alpha0s: &[f64],
    c: f64,
    sign: RootSign,
    epsilon: f64,
) -> Result<TestRun> {
    let tests = alpha0s
        .iter()
        .map(|&a| run_test(path, p, a, c, sign, epsilon))
        .collect::<Result<Vec<_>>>()?;
    Ok(TestRun {
        n: path.n(),
        p,
        c,
        sign,
        tests,
    })
}

impl Report for TestRun {
    const KIND: &'static str = "test";

    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = vec![
            CsvRow::global("n", self.n),
            CsvRow::global("p", self.p),
            CsvRow::global("c", num(self.c)),
            CsvRow::global("sign", sign_str(self.sign)),
        ];
        for t in &self.tests {
            test_rows(&mut rows, t);
        }
        rows
    }
}

impl Report for SelectionReport {
    const KIND: &'static str = "selection";

    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        selection_rows(&mut rows, self);
        rows
    }
}

impl Report for McSummary {
    const KIND: &'static str = "mc_summary";

    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = vec![
            CsvRow::global("n", self.n),
            CsvRow::global("p", self.p),
            CsvRow::global("c", num(self.c)),
            CsvRow::global("alpha", num(self.alpha)),
            CsvRow::global("sign", sign_str(self.sign)),
            CsvRow::global("epsilon", num(self.epsilon)),
            CsvRow::global("seed", self.seed),
            CsvRow::global("replications", self.replications),
            CsvRow::global("errors", self.errors),
        ];
        for a in &self.per_alpha0 {
            rows.push(CsvRow::at(a.alpha0, "rejection_freq", num(a.rejection_freq)));
            rows.push(CsvRow::at(a.alpha0, "rejections", a.rejections));
            rows.push(CsvRow::at(a.alpha0, "completed", a.completed));
        }
        for b in &self.alpha_max_hist {
            rows.push(match b.bin {
                AlphaMax::Value(v) => CsvRow::at(v, "alpha_max_count", b.count),
                AlphaMax::Integrated => CsvRow::global("alpha_max_count_integrated", b.count),
            });
        }
        rows.push(CsvRow::global("theorem1_samples", self.theorem1_std_errors.len()));
        rows.push(CsvRow::global("theorem1_undefined", self.theorem1_undefined));
        rows
    }
}

impl Report for Calibration {
    const KIND: &'static str = "calibration";

    fn csv_rows(&self) -> Vec<CsvRow> {
        vec![
            CsvRow::global("replications", self.replications),
            CsvRow::global("errors", self.errors),
            CsvRow::global("undefined", self.undefined),
            CsvRow::global("samples", self.samples),
            CsvRow::global("mean", num(self.mean)),
            CsvRow::global("variance", num(self.variance)),
            CsvRow::global("skewness", num(self.skewness)),
            CsvRow::global("excess_kurtosis", num(self.excess_kurtosis)),
            CsvRow::global("ks_distance", num(self.ks_distance)),
        ]
    }
}

impl Report for AnalysisReport {
    const KIND: &'static str = "analysis";

    fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = vec![
            CsvRow::global("name", &self.name),
            CsvRow::global("chosen_p", self.chosen_p),
            CsvRow::global("lambda1_sign_used", sign_str(self.lambda1_sign_used)),
        ];
        selection_rows(&mut rows, &self.selection);
        interval_rows(&mut rows, "alpha_interval", None, self.alpha_interval);
        interval_rows(&mut rows, "quasi_unit_root", None, self.quasi_unit_root_interval);
        if let Some(t) = &self.theta_tilde {
            vector_rows(&mut rows, "theta_tilde", t);
        }
        rows
    }
}

/// Quartiles by linear interpolation between order statistics, with Tukey
/// whiskers at the most extreme values within 1.5 IQR of the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub count: usize,
    pub whisker_lo: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_hi: f64,
    pub outliers: usize,
}

fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    let h = q * (xs.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || xs[lo] == xs[hi] {
        xs[lo]
    } else {
        xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
    }
}

/// Box statistics of `xs`; every field is NaN (count 0) when empty.
pub fn box_stats(xs: &[f64]) -> BoxStats {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return BoxStats {
            count: 0,
            whisker_lo: f64::NAN,
            q1: f64::NAN,
            median: f64::NAN,
            q3: f64::NAN,
            whisker_hi: f64::NAN,
            outliers: 0,
        };
    }
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let median = quantile_sorted(&v, 0.5);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = if iqr.is_finite() {
        (q1 - 1.5 * iqr, q3 + 1.5 * iqr)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    let inside: Vec<f64> = v
        .iter()
        .copied()
        .filter(|&x| x >= lo_fence && x <= hi_fence)
        .collect();
    BoxStats {
        count: v.len(),
        whisker_lo: inside.first().copied().unwrap_or(q1),
        q1,
        median,
        q3,
        whisker_hi: inside.last().copied().unwrap_or(q3),
        outliers: v.len() - inside.len(),
    }
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(out)
}

/// The three plot-data tables of a summary as `(file name, bytes)`:
/// `power_curve.csv`, `z_boxplot.csv` (NaN row for an empty reservoir) and
/// `alpha_max_hist.csv`.
pub fn plot_tables(summary: &McSummary) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let power = table(
        &["alpha0", "rejection_frequency"],
        summary
            .per_alpha0
            .iter()
            .map(|a| vec![csv_repr(a.alpha0), csv_repr(a.rejection_freq)])
            .collect(),
    )?;
    let boxes = table(
        &["alpha0", "count", "whisker_lo", "q1", "median", "q3", "whisker_hi", "outliers"],
        summary
            .per_alpha0
            .iter()
            .map(|a| {
                let b = box_stats(&a.z_samples);
                vec![
                    csv_repr(a.alpha0),
                    b.count.to_string(),
                    csv_repr(b.whisker_lo),
                    csv_repr(b.q1),
                    csv_repr(b.median),
                    csv_repr(b.q3),
                    csv_repr(b.whisker_hi),
                    b.outliers.to_string(),
                ]
            })
            .collect(),
    )?;
    let hist = table(
        &["alpha_max", "count"],
        summary
            .alpha_max_hist
            .iter()
            .map(|b| vec![alpha_max_str(b.bin), b.count.to_string()])
            .collect(),
    )?;
    Ok(vec![
        ("power_curve.csv", power),
        ("z_boxplot.csv", boxes),
        ("alpha_max_hist.csv", hist),
    ])
}

/// Writes [`plot_tables`] into `dir`, returning the paths written.
pub fn emit_plot_data(summary: &McSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    let tables = plot_tables(summary)?;
    std::fs::create_dir_all(dir)?;
    tables
        .into_iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            std::fs::write(&path, bytes)?;
            Ok(path)
        })
        .collect()
}
