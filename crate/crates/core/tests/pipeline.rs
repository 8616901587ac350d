use std::io::Write;

use nearunit::analysis::{
    analyze, ingest_csv, quasi_root, AnalysisReport, AnalyzeOptions, Column, SeriesFile,
};
use nearunit::process::{build_theta_n, simulate};
use nearunit::report::{emit_report, parse_report, Format, SimulationReport};
use nearunit::rng::replication_rng;
use nearunit::{AlphaMax, Interval, ModelConfig, RootSign, SecondaryRoots, SignMode};
use proptest::prelude::*;

fn sample(n: usize, p: usize, alpha: f64, sign: RootSign, seed: u64) -> Vec<f64> {
    let secondary = if p > 1 { SecondaryRoots::Random } else { SecondaryRoots::Fixed(vec![]) };
    let cfg = ModelConfig::new(n, alpha).with_order(p, secondary).with_sign(sign).with_seed(seed);
    let mut rng = replication_rng(seed, 0);
    let theta = build_theta_n(&cfg, &mut rng).unwrap();
    simulate(&cfg, &theta, &mut rng).unwrap().observations().to_vec()
}

fn series(values: Vec<f64>) -> SeriesFile {
    SeriesFile {
        name: "test".into(),
        values,
        source: "mem".into(),
    }
}

#[test]
fn simulated_file_through_analysis() {
    let cfg = ModelConfig::new(600, 0.7).with_seed(12);
    let mut rng = replication_rng(12, 0);
    let theta = build_theta_n(&cfg, &mut rng).unwrap();
    let path = simulate(&cfg, &theta, &mut rng).unwrap();
    let csv = emit_report(&SimulationReport::from(&path), Format::Csv).unwrap();

    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(&csv).unwrap();
    let s = ingest_csv(file.path(), Some(&Column::Name("x".into()))).unwrap();
    assert_eq!(s.values, path.observations());

    let report = analyze(&s, &AnalyzeOptions::default()).unwrap();
    assert_eq!(report.n, 600);
    assert_eq!(report.lambda1_sign_used, RootSign::Positive);
    if let (Some(ci), Some(q)) = (report.alpha_interval, report.quasi_unit_root_interval) {
        assert_eq!(q.lo, quasi_root(1.0, 600, ci.lo));
        assert_eq!(q.hi, quasi_root(1.0, 600, ci.hi));
    }
    let json = emit_report(&report, Format::Json).unwrap();
    assert_eq!(parse_report::<AnalysisReport>(&json).unwrap(), report);
}

#[test]
fn explosive_series_is_integrated() {
    let mut x = vec![1.0];
    let noise = sample(199, 1, 0.9, RootSign::Positive, 3);
    for e in noise {
        let last = *x.last().unwrap();
        x.push(1.02 * last + e);
    }
    let report = analyze(&series(x), &AnalyzeOptions { p: Some(1), ..Default::default() }).unwrap();
    assert_eq!(report.selection.alpha_max, AlphaMax::Integrated);
    assert_eq!(report.quasi_unit_root_interval, Some(Interval::new(1.0, 1.0)));
    assert!(report.alpha_interval.is_none());
    assert!(report.theta_tilde.is_none());
    let json = String::from_utf8(emit_report(&report, Format::Json).unwrap()).unwrap();
    assert!(json.contains("\"alpha_max\": \"integrated\""));
}

#[test]
fn negative_root_detected_automatically() {
    let x = sample(800, 1, 0.6, RootSign::Negative, 8);
    let opts = AnalyzeOptions { sign: SignMode::Auto, p: Some(1), ..Default::default() };
    let report = analyze(&series(x), &opts).unwrap();
    assert_eq!(report.lambda1_sign_used, RootSign::Negative);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn analysis_interval_stays_in_grid_range(
        seed in 0u64..10_000,
        n in 60usize..500,
        p in 1usize..=3,
        alpha in 0.5f64..0.95,
        negative in any::<bool>(),
    ) {
        let sign = if negative { RootSign::Negative } else { RootSign::Positive };
        let x = sample(n, p, alpha, sign, seed);
        let opts = AnalyzeOptions { sign: sign.into(), ..Default::default() };
        let report = analyze(&series(x), &opts).unwrap();
        if let Some(ci) = report.alpha_interval {
            prop_assert!(ci.lo >= 0.5);
            prop_assert!(ci.hi < 1.0);
            prop_assert!(ci.lo <= ci.hi);
        }
        if let Some(q) = report.quasi_unit_root_interval {
            prop_assert!(q.lo > 0.0 && q.lo <= q.hi && q.hi <= 1.0);
        }
        if let AlphaMax::Value(a) = report.selection.alpha_max {
            prop_assert_eq!(report.theta_tilde.as_ref().map(Vec::len), Some(report.chosen_p));
            prop_assert!(report.selection.grid.as_slice().contains(&a));
        }
    }
}
