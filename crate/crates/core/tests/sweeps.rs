use kpp_core::sweeps::{
    format_float, metadata_path, parse_records, records_to_csv, GridPolicy, SweepMetadata, CSV_HEADER,
};
use kpp_core::{fit_loglog_slope, read_records, run_sweep, write_records, Execution, SweepConfig, SweepRecord};
use proptest::prelude::*;

fn config(deltas: &[f64], freqs: &[u32], n: usize) -> SweepConfig {
    let mut cfg = SweepConfig::new(deltas.to_vec(), freqs.to_vec());
    cfg.grid = GridPolicy::Fixed { n_y: n, n_tau: n };
    cfg
}

#[test]
fn zero_amplitude_record() {
    let out = run_sweep(&config(&[0.0], &[0], 16)).unwrap();
    assert_eq!(out.records.len(), 1);
    let r = out.records[0];
    assert!((r.c_star + 2.0).abs() < 1e-8);
    assert!(r.enhancement.abs() < 1e-8);
}

#[test]
fn oscillating_beats_steady() {
    let out = run_sweep(&config(&[1.0], &[0, 1], 16)).unwrap();
    let e: Vec<f64> = out.records.iter().map(|r| r.enhancement).collect();
    assert_eq!(out.records[0].freq, 0);
    assert!(e[1] >= e[0], "{e:?}");
}

#[test]
fn enhancement_increases_with_amplitude() {
    let out = run_sweep(&config(&[0.25, 0.5, 1.0], &[1], 16)).unwrap();
    let e: Vec<f64> = out.records.iter().map(|r| r.enhancement).collect();
    assert!(e.windows(2).all(|w| w[1] > w[0]) && e[0] > 0.0, "{e:?}");
    assert!(out.max_identity_defect < 1e-8);
}

#[test]
fn full_grid_round_trip_is_bitwise() {
    let deltas = [0.1, 0.2, 0.3, 0.4, 0.5];
    let freqs = [0, 1, 2, 3, 4];
    // 8 points in τ alias n = 2, 3 (the top eigenvector loses positivity)
    // and turn n = 4 into a steady shear, so τ gets 16.
    let mut cfg = SweepConfig::new(deltas.to_vec(), freqs.to_vec());
    cfg.grid = GridPolicy::Fixed { n_y: 8, n_tau: 16 };
    let out = run_sweep(&cfg).unwrap();
    assert!(out.failures.is_empty(), "{:?}", out.failures);
    assert_eq!(out.records.len(), 25);
    // δ-major order
    assert_eq!((out.records[0].delta, out.records[0].freq), (0.1, 0));
    assert_eq!((out.records[1].delta, out.records[1].freq), (0.1, 1));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    write_records(&out.records, &path).unwrap();
    let back = read_records(&path).unwrap();
    assert_eq!(back.len(), 25);
    for (a, b) in out.records.iter().zip(&back) {
        assert_eq!(a.delta.to_bits(), b.delta.to_bits());
        assert_eq!(a.freq, b.freq);
        assert_eq!(a.lambda_star.to_bits(), b.lambda_star.to_bits());
        assert_eq!(a.c_star.to_bits(), b.c_star.to_bits());
        assert_eq!(a.enhancement.to_bits(), b.enhancement.to_bits());
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.residual.to_bits(), b.residual.to_bits());
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
}

#[test]
fn deterministic_across_runs_and_execution_modes() {
    let mut cfg = config(&[0.2, 0.4, 0.8], &[0, 1, 2], 16);
    let a = records_to_csv(&run_sweep(&cfg).unwrap().records);
    let b = records_to_csv(&run_sweep(&cfg).unwrap().records);
    cfg.execution = Execution::Sequential;
    let c = records_to_csv(&run_sweep(&cfg).unwrap().records);
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn warm_start_matches_cold_start() {
    let mut cfg = config(&[0.2, 0.4, 0.8], &[1, 2], 16);
    let cold = run_sweep(&cfg).unwrap().records;
    cfg.warm_start = true;
    let warm = run_sweep(&cfg).unwrap().records;
    assert_eq!(cold.len(), warm.len());
    for (a, b) in cold.iter().zip(&warm) {
        assert_eq!((a.delta, a.freq), (b.delta, b.freq));
        assert!((a.c_star - b.c_star).abs() < 1e-9, "{a:?} vs {b:?}");
    }
}

#[test]
fn failures_are_logged_not_fatal() {
    // λδ far beyond what an 8x8 grid resolves: the pair fails, the sweep does not.
    let cfg = config(&[0.1, 400.0], &[1], 8);
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.records.len() + out.failures.len(), 2);
    assert_eq!(out.records[0].delta, 0.1);
}

#[test]
fn metadata_sidecar() {
    let cfg = config(&[0.0], &[0], 8);
    let out = run_sweep(&cfg).unwrap();
    let meta = SweepMetadata::new(&cfg, &out).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = metadata_path(dir.path().join("s.csv"));
    assert!(path.to_string_lossy().ends_with("s.meta.json"));
    meta.write(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["grids"][0]["n_y"], 8);
    assert_eq!(v["fprime0"], 1.0);
    assert_eq!(v["tolerances"]["grad_tol"], 1e-8);
    assert_eq!(v["config"]["deltas"][0], 0.0);
}

#[test]
fn config_json_defaults() {
    let cfg: SweepConfig = serde_json::from_str(r#"{"deltas":[0.1,0.2],"freqs":[1]}"#).unwrap();
    assert_eq!(cfg.fprime0, 1.0);
    assert_eq!(cfg.grid, GridPolicy::Scaled);
    assert!(!cfg.warm_start);
    let fixed: SweepConfig =
        serde_json::from_str(r#"{"deltas":[1],"freqs":[0],"grid":{"kind":"fixed","n_y":8,"n_tau":12}}"#).unwrap();
    assert_eq!(fixed.grid, GridPolicy::Fixed { n_y: 8, n_tau: 12 });
}

#[test]
fn synthetic_quadratic_fit() {
    let recs: Vec<SweepRecord> = (1..=6)
        .map(|k| {
            let d = 0.1 * k as f64;
            SweepRecord {
                delta: d,
                freq: 1,
                lambda_star: 1.0,
                c_star: -2.0 - d * d,
                enhancement: d * d,
                iterations: 3,
                residual: 1e-14,
            }
        })
        .collect();
    assert!((fit_loglog_slope(&recs, (0.1, 1.0)).unwrap().slope - 2.0).abs() < 1e-12);
}

fn record() -> impl Strategy<Value = SweepRecord> {
    (
        any::<f64>(),
        any::<u32>(),
        any::<f64>(),
        any::<f64>(),
        any::<f64>(),
        0usize..1_000_000,
        any::<f64>(),
    )
        .prop_map(|(delta, freq, lambda_star, c_star, enhancement, iterations, residual)| SweepRecord {
            delta,
            freq,
            lambda_star,
            c_star,
            enhancement,
            iterations,
            residual,
        })
}

proptest! {
    #[test]
    fn float_format_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = format_float(x);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        prop_assert!(!s.contains(','));
    }

    #[test]
    fn csv_round_trips(recs in proptest::collection::vec(record(), 0..20)) {
        let recs: Vec<SweepRecord> = recs
            .into_iter()
            .filter(|r| [r.delta, r.lambda_star, r.c_star, r.enhancement, r.residual].iter().all(|x| x.is_finite()))
            .collect();
        let text = records_to_csv(&recs);
        let back = parse_records(text.as_bytes()).unwrap();
        prop_assert_eq!(records_to_csv(&back), text);
        prop_assert_eq!(back.len(), recs.len());
    }
}
