//! Real-data pipeline: CSV ingestion, differencing, PACF order choice, and
//! grid selection with the implied interval for the quasi-unit root.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{corrected_theta, fit_hierarchical, Interval};
use crate::process::ArPath;
use crate::spectra::RootSign;
use crate::urtest::{resolve_sign, select_alpha_max, AlphaMax, Grid, SelectionReport, SignMode};

pub const MIN_SERIES_LEN: usize = 10;

/// One numeric column read from a delimited file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFile {
    pub name: String,
    pub values: Vec<f64>,
    pub source: PathBuf,
}

impl SeriesFile {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn to_path(&self) -> ArPath {
        ArPath::from_observations(
            &self.name,
            &self.source.display().to_string(),
            self.values.clone(),
        )
    }
}

/// A column chosen by header name or by 0-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for Column {
    type Err = std::convert::Infallible;

    /// Digits select by position, anything else by name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        })
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Column::Name(n) => f.write_str(n),
            Column::Index(i) => write!(f, "{i}"),
        }
    }
}

/// Picks `,`, tab or `;` by frequency on the first non-blank line.
fn detect_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    [b',', b'\t', b';']
        .into_iter()
        .map(|d| (first.bytes().filter(|&b| b == d).count(), d))
        .filter(|&(count, _)| count > 0)
        .max_by_key(|&(count, d)| (count, std::cmp::Reverse(d)))
        .map_or(b',', |(_, d)| d)
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads one numeric column from delimited text.
///
/// The first row is a header when any of its cells is not a number. Without
/// `column` the last column is used. A header can only be matched by name
/// when present; a numeric `column` indexes positions in either case. Every
/// data row must hold a finite number in the chosen column.
pub fn ingest_csv(path: &Path, column: Option<&Column>) -> Result<SeriesFile> {
    let text = std::fs::read_to_string(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    parse_series(&text, column, &stem, path)
}

pub fn parse_series(
    text: &str,
    column: Option<&Column>,
    default_name: &str,
    source: &Path,
) -> Result<SeriesFile> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let first = loop {
        match records.next() {
            None => return Err(Error::TooShort { len: 0, min: MIN_SERIES_LEN }),
            Some(rec) => {
                let rec = rec?;
                if rec.iter().any(|c| !c.is_empty()) {
                    break rec;
                }
            }
        }
    };
    let header = first.iter().any(|c| parse_number(c).is_none());
    let width = first.len();

    let index = match column {
        Some(Column::Index(i)) => *i,
        Some(Column::Name(name)) => {
            if !header {
                return Err(Error::MissingColumn(format!("{name} (file has no header)")));
            }
            first
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?
        }
        None => width - 1,
    };
    if index >= width {
        return Err(Error::MissingColumn(format!(
            "index {index} (file has {width} columns)"
        )));
    }
    let name = if header {
        first[index].to_string()
    } else if width == 1 {
        default_name.to_string()
    } else {
        format!("{default_name}[{index}]")
    };

    let mut values = Vec::new();
    let data_rows = std::iter::once(Ok(first.clone()))
        .filter(|_| !header)
        .chain(records);
    for rec in data_rows {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let cell = rec.get(index).ok_or_else(|| Error::Parse {
            line,
            column: index + 1,
            message: format!("row has {} fields", rec.len()),
        })?;
        let v = parse_number(cell).ok_or_else(|| Error::Parse {
            line,
            column: index + 1,
            message: format!("not a finite number: {cell:?}"),
        })?;
        values.push(v);
    }
    if values.len() < MIN_SERIES_LEN {
        return Err(Error::TooShort {
            len: values.len(),
            min: MIN_SERIES_LEN,
        });
    }
    Ok(SeriesFile {
        name,
        values,
        source: source.to_path_buf(),
    })
}

/// `y_k = x_{k+1} − x_k`.
pub fn difference(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::TooShort { len: x.len(), min: 2 });
    }
    Ok(x.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Partial autocorrelations at lags `1..=max_lag` by the Durbin–Levinson
/// recursion on the sample autocorrelations of the demeaned series.
pub fn pacf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n <= max_lag + 2 {
        return Err(Error::TooShort {
            len: n,
            min: max_lag + 3,
        });
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    if c0 <= 0.0 {
        return Err(Error::InvalidConfig("PACF of a constant series".into()));
    }
    let r: Vec<f64> = (0..=max_lag)
        .map(|k| d.iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / c0)
        .collect();

    let mut out = Vec::with_capacity(max_lag);
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    for k in 1..=max_lag {
        let num = r[k] - (1..k).map(|j| phi[j - 1] * r[k - j]).sum::<f64>();
        let den = 1.0 - (1..k).map(|j| phi[j - 1] * r[j]).sum::<f64>();
        let kk = num / den;
        let prev = phi.clone();
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - kk * prev[k - j - 1];
        }
        phi.push(kk);
        out.push(kk);
    }
    Ok(out)
}

/// `1 +` the largest lag whose |PACF| exceeds `multiplier/√n`, or 1 when no
/// lag does.
pub fn pacf_order(x: &[f64], max_lag: usize, multiplier: f64) -> Result<usize> {
    let band = multiplier / (x.len() as f64).sqrt();
    let partial = pacf(x, max_lag)?;
    Ok(1 + partial
        .iter()
        .rposition(|v| v.abs() > band)
        .map_or(0, |l| l + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    pub c: f64,
    pub epsilon: f64,
    pub grid: Grid,
    pub sign: SignMode,
    /// Fixes the order instead of choosing it from the PACF.
    pub p: Option<usize>,
    pub max_lag: usize,
    pub threshold_multiplier: f64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.05,
            grid: Grid::standard(),
            sign: SignMode::Positive,
            p: None,
            max_lag: 10,
            threshold_multiplier: 1.96,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub name: String,
    pub n: usize,
    pub chosen_p: usize,
    pub lambda1_sign_used: RootSign,
    pub selection: SelectionReport,
    /// Interval for the selected α, clipped to `[grid floor, 1)`.
    pub alpha_interval: Option<Interval>,
    /// `(1 − c n^{−α_lo}, 1 − c n^{−α_hi})`, or `(1, 1)` when integrated.
    pub quasi_unit_root_interval: Option<Interval>,
    /// Corrected coefficients at the selected α; absent when integrated.
    pub theta_tilde: Option<Vec<f64>>,
}

impl AnalysisReport {
    /// One-line summary with intervals at two decimals.
    pub fn summary_line(&self) -> String {
        let fmt = |i: &Option<Interval>| match i {
            Some(i) => format!("[{:.2}, {:.2}]", i.lo, i.hi),
            None => "n/a".into(),
        };
        let selected = match self.selection.alpha_max {
            AlphaMax::Value(a) => format!("{a:.2}"),
            AlphaMax::Integrated => "integrated".into(),
        };
        format!(
            "{}: n={} p={} alpha_max={} alpha in {} quasi-root in {}",
            self.name,
            self.n,
            self.chosen_p,
            selected,
            fmt(&self.alpha_interval),
            fmt(&self.quasi_unit_root_interval)
        )
    }
}

pub fn quasi_root(c: f64, n: usize, alpha: f64) -> f64 {
    1.0 - c * (n as f64).powf(-alpha)
}

pub fn analyze(series: &SeriesFile, options: &AnalyzeOptions) -> Result<AnalysisReport> {
    let n = series.n();
    if n < MIN_SERIES_LEN {
        return Err(Error::TooShort {
            len: n,
            min: MIN_SERIES_LEN,
        });
    }
    let p = match options.p {
        Some(p) => p,
        None => pacf_order(
            &difference(&series.values)?,
            options.max_lag,
            options.threshold_multiplier,
        )?,
    };
    let path = series.to_path();
    let sign = resolve_sign(options.sign, &path, p)?;
    let selection = select_alpha_max(&path, p, &options.grid, options.c, sign, options.epsilon)?;

    let (alpha_interval, quasi, theta_tilde) = match selection.alpha_max {
        AlphaMax::Integrated => (None, Some(Interval::new(1.0, 1.0)), None),
        AlphaMax::Value(a) => {
            let fit = fit_hierarchical(&path, p, a, options.c, sign)?;
            let ci = selection.ci_at_alpha_max;
            let quasi = ci.map(|i| {
                Interval::new(quasi_root(options.c, n, i.lo), quasi_root(options.c, n, i.hi))
            });
            (ci, quasi, Some(corrected_theta(&fit)))
        }
    };
    Ok(AnalysisReport {
        name: series.name.clone(),
        n,
        chosen_p: p,
        lambda1_sign_used: sign,
        selection,
        alpha_interval,
        quasi_unit_root_interval: quasi,
        theta_tilde,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::recurse;
    use crate::rng::replication_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn parse(text: &str, col: Option<&str>) -> Result<SeriesFile> {
        let col = col.map(|c| c.parse::<Column>().unwrap());
        parse_series(text, col.as_ref(), "s", Path::new("mem.csv"))
    }

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = replication_rng(seed, 0);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn headerless_single_column() {
        let text: String = (0..120).map(|i| format!("{}\n", i as f64 * 0.5)).collect();
        let s = parse(&text, None).unwrap();
        assert_eq!(s.n(), 120);
        assert_eq!(s.values[3], 1.5);
        assert_eq!(s.name, "s");
    }

    #[test]
    fn header_and_named_column() {
        let mut text = String::from("year,velocity\n");
        for i in 0..12 {
            text.push_str(&format!("{},{}\n", 1900 + i, 2.0 + i as f64));
        }
        let s = parse(&text, Some("velocity")).unwrap();
        assert_eq!(s.name, "velocity");
        assert_eq!(s.values[0], 2.0);
        let by_index = parse(&text, Some("0")).unwrap();
        assert_eq!(by_index.values[0], 1900.0);
        assert!(matches!(parse(&text, Some("gnp")), Err(Error::MissingColumn(_))));
        assert!(matches!(parse(&text, Some("5")), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn tab_and_semicolon_files() {
        let tab: String = (0..10).map(|i| format!("{i}\t{}\n", i * 2)).collect();
        assert_eq!(parse(&tab, None).unwrap().values[4], 8.0);
        let semi: String = (0..10).map(|i| format!("{i};{}.5\n", i)).collect();
        assert_eq!(parse(&semi, Some("1")).unwrap().values[2], 2.5);
    }

    #[test]
    fn bad_cell_reports_its_line() {
        let mut rows: Vec<String> = (0..12).map(|i| i.to_string()).collect();
        rows[6] = "abc".into();
        let text = rows.join("\n");
        match parse(&text, None) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 7);
                assert_eq!(column, 1);
            }
            other => panic!("{other:?}"),
        }
        let mut with_header = String::from("a,b\n");
        for i in 0..12 {
            if i == 5 {
                with_header.push_str("1,\n");
            } else {
                with_header.push_str(&format!("{i},{i}\n"));
            }
        }
        assert!(matches!(parse(&with_header, Some("b")), Err(Error::Parse { line: 7, column: 2, .. })));
        assert!(matches!(parse("1\n2\n3\n", None), Err(Error::TooShort { len: 3, .. })));
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&[1.0, 2.0, 4.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(difference(&[3.0; 5]).unwrap(), vec![0.0; 4]);
        assert!(matches!(difference(&[1.0]), Err(Error::TooShort { .. })));
    }

    /// PACF at lag k as the last coefficient of an OLS AR(k) fit on the
    /// autocorrelation (Yule–Walker) system, solved by Gaussian elimination.
    fn pacf_yule_walker(x: &[f64], k: usize) -> f64 {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let c0: f64 = d.iter().map(|v| v * v).sum();
        let r = |h: usize| d.iter().zip(&d[h..]).map(|(a, b)| a * b).sum::<f64>() / c0;
        let mut a: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let mut row: Vec<f64> = (0..k).map(|j| r(i.abs_diff(j))).collect();
                row.push(r(i + 1));
                row
            })
            .collect();
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for row in col + 1..k {
                let f = a[row][col] / a[col][col];
                for j in col..=k {
                    a[row][j] -= f * a[col][j];
                }
            }
        }
        let mut sol = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| a[i][j] * sol[j]).sum();
            sol[i] = (a[i][k] - s) / a[i][i];
        }
        sol[k - 1]
    }

    #[test]
    fn durbin_levinson_matches_yule_walker() {
        let x = recurse(&[0.6, -0.2], &[0.0, 0.0], &gaussian(400, 3));
        let partial = pacf(&x, 6).unwrap();
        for k in 1..=6 {
            assert!((partial[k - 1] - pacf_yule_walker(&x, k)).abs() < 1e-12, "lag {k}");
        }
        assert!(pacf(&x[..8], 6).is_err());
        assert!(pacf(&[1.0; 20], 3).is_err());
    }

    #[test]
    fn white_noise_order_one() {
        // seed chosen so that every lag stays inside the band
        let mut seed = 0;
        let x = loop {
            let x = gaussian(10_000, seed);
            let band = 1.96 / 100.0;
            if pacf(&x, 10).unwrap().iter().all(|v| v.abs() < band) {
                break x;
            }
            seed += 1;
        };
        assert_eq!(pacf_order(&x, 10, 1.96).unwrap(), 1);
    }

    #[test]
    fn ar1_exceeds_band_at_lag_one() {
        let y = recurse(&[0.5], &[0.0], &gaussian(500, 17));
        let partial = pacf(&y, 10).unwrap();
        assert!((partial[0] - 0.5).abs() < 0.1);
        assert!(pacf_order(&y, 10, 1.96).unwrap() >= 2);
    }

    #[test]
    fn nearly_unstable_ar2_gets_order_two() {
        // (1 − 0.99L)(1 − 0.6L): differences behave like an AR(1) in 0.6
        let theta = [0.99 + 0.6, -0.99 * 0.6];
        let x = recurse(&theta, &[0.0, 0.0], &gaussian(2000, 5));
        let dx = difference(&x).unwrap();
        let partial = pacf(&dx, 10).unwrap();
        assert!(partial[0] > 0.4);
        assert_eq!(pacf_order(&dx, 10, 1.96).unwrap(), 2);
    }

    #[test]
    fn quasi_root_endpoints() {
        assert!((quasi_root(1.0, 120, 0.5) - 0.9087).abs() < 1e-4);
        assert!((quasi_root(1.0, 120, 0.67) - 0.9595).abs() < 1e-4);
    }

    #[test]
    fn random_walk_analysis() {
        let mut x = gaussian(300, 9);
        for k in 1..x.len() {
            x[k] += x[k - 1];
        }
        let s = SeriesFile {
            name: "rw".into(),
            values: x,
            source: PathBuf::from("rw.csv"),
        };
        let report = analyze(&s, &AnalyzeOptions::default()).unwrap();
        assert_eq!(report.n, 300);
        if let Some(q) = report.quasi_unit_root_interval {
            assert!(q.lo > 0.0 && q.lo <= q.hi && q.hi <= 1.0);
        }
        match report.selection.alpha_max {
            AlphaMax::Integrated => {
                assert_eq!(report.quasi_unit_root_interval, Some(Interval::new(1.0, 1.0)));
                assert!(report.theta_tilde.is_none());
            }
            AlphaMax::Value(_) => {
                assert_eq!(report.theta_tilde.as_ref().unwrap().len(), report.chosen_p);
                if let Some(ci) = report.alpha_interval {
                    assert!(ci.lo >= 0.5 && ci.hi < 1.0);
                }
            }
        }
    }
}
