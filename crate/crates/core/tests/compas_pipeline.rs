mod common;

use std::fs;

use accfair::compas::{
    load_compas_csv, load_compas_reader, run_audit, AuditConfig, FilterRule, FilterSpec,
    LoadOptions,
};
use accfair::Error;

/// Values for the synthetic fixture, computed independently at 40 digits.
#[allow(clippy::excessive_precision)]
mod expected {
    pub const N: usize = 50;
    pub const BRIER: f64 = -0.6907600036;
    pub const LOG: f64 = -1.606_403_086_062_773_3;
    pub const FNR_BLACK: f64 = 0.505_882_352_941_176_47;
    pub const FNR_NONBLACK: f64 = 0.493_743_75;
    pub const EQOPP: f64 = -0.012_138_602_941_176_471;
    pub const U_BRIER: f64 = 1.447_680_807_789_028_2;
    pub const U_LOG: f64 = 0.622_508_764_254_778_76;
    pub const U_EQOPP: f64 = 82.381_803_313_444_589;
    pub const ULOG_EQOPP: f64 = 4.411_364_578_953_400_1;
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn synthetic_fixture_matches_independent_values() {
    let loaded = load_compas_csv(
        common::fixture("compas_synthetic.csv"),
        &LoadOptions::default(),
    )
    .unwrap();
    let r = run_audit(&loaded, &AuditConfig::default()).unwrap();
    assert_eq!(r.n_records, expected::N);
    assert!(close(r.brier, expected::BRIER, 1e-12), "{}", r.brier);
    assert!(close(r.log, expected::LOG, 1e-12), "{}", r.log);
    assert!(close(r.fnr_black, expected::FNR_BLACK, 1e-12));
    assert!(close(r.fnr_nonblack, expected::FNR_NONBLACK, 1e-12));
    assert!(close(r.eqopp, expected::EQOPP, 1e-12));
    let rec = &r.utilities["reciprocal"];
    assert!(close(rec["brier"], expected::U_BRIER, 1e-12));
    assert!(close(rec["log"], expected::U_LOG, 1e-12));
    assert!(close(rec["eqopp"], expected::U_EQOPP, 1e-10));
    assert!(close(
        r.utilities["log-eqopp"]["eqopp"],
        expected::ULOG_EQOPP,
        1e-12
    ));
    assert_eq!(r.group_sizes["Black"], 25);
    assert_eq!(r.group_sizes["non-Black"], 25);
}

#[test]
fn synthetic_fixture_report_is_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = load_compas_csv(
        common::fixture("compas_synthetic.csv"),
        &LoadOptions::default(),
    )
    .unwrap();
    let config = AuditConfig {
        out_dir: Some(dir.path().to_path_buf()),
        ..AuditConfig::default()
    };
    let report = run_audit(&loaded, &config).unwrap().to_json();
    let golden_path = common::fixture("compas_synthetic_report.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden_path, &report).unwrap();
    }
    let golden = fs::read_to_string(&golden_path).unwrap();
    assert_eq!(report, golden);
    assert_eq!(
        fs::read_to_string(dir.path().join("audit_report.json")).unwrap(),
        golden
    );
}

#[test]
fn runs_are_byte_identical() {
    let loaded = load_compas_csv(
        common::fixture("compas_synthetic.csv"),
        &LoadOptions::default(),
    )
    .unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let config = AuditConfig {
            out_dir: Some(dir.path().to_path_buf()),
            write_svg: true,
            ..AuditConfig::default()
        };
        run_audit(&loaded, &config).unwrap();
    }
    for name in [
        "audit_report.json",
        "sweep_reciprocal.csv",
        "sweep_log-eqopp.csv",
        "sweep_reciprocal.svg",
        "sweep_log-eqopp.svg",
    ] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let csv = fs::read_to_string(a.path().join("sweep_reciprocal.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "w_brier,w_log,w_eqopp,overall");
    assert_eq!(csv.lines().count(), 1 + 4851);
}

#[test]
fn propublica_filter_counts_reconcile() {
    let options = LoadOptions {
        filter: FilterSpec::propublica(),
        ..LoadOptions::default()
    };
    let loaded = load_compas_csv(common::fixture("compas_synthetic.csv"), &options).unwrap();
    let audit = &loaded.filter_audit;
    assert!(audit.reconciles());
    assert_eq!(audit.raw_rows, 50);
    assert_eq!(audit.n_records, 38);
    let counts: Vec<(FilterRule, usize)> = audit
        .removed_by_rule
        .iter()
        .map(|r| (r.rule, r.removed))
        .collect();
    assert_eq!(
        counts,
        vec![
            (FilterRule::ChargeWindow, 8),
            (FilterRule::RecidFlag, 1),
            (FilterRule::TrafficOffense, 2),
            (FilterRule::ScoreText, 1),
        ]
    );
    let sizes: usize = loaded.partition.group_sizes().values().sum();
    assert_eq!(sizes, audit.n_records);
}

#[test]
fn single_rules_can_be_toggled() {
    let options = LoadOptions {
        filter: "traffic-offense".parse().unwrap(),
        ..LoadOptions::default()
    };
    let loaded = load_compas_csv(common::fixture("compas_synthetic.csv"), &options).unwrap();
    assert_eq!(loaded.filter_audit.n_records, 48);
    assert!("bogus".parse::<FilterSpec>().is_err());
}

const HEADER: &str = "id,race,decile_score,two_year_recid\n";

#[test]
fn out_of_range_decile_is_a_row_error() {
    let data = format!("{HEADER}1,African-American,11,0\n2,Caucasian,3,1\n3,African-American,2,0\n4,Caucasian,2,0\n");
    let err = load_compas_reader(data.as_bytes(), &LoadOptions::default()).unwrap_err();
    match err {
        Error::BadRows { errors } => {
            assert_eq!(errors.len(), 1);
            assert_eq!(errors[0].row, 1);
        }
        other => panic!("unexpected {other}"),
    }
    let options = LoadOptions {
        skip_bad_rows: true,
        ..LoadOptions::default()
    };
    let loaded = load_compas_reader(data.as_bytes(), &options).unwrap();
    assert_eq!(loaded.filter_audit.bad_rows, 1);
    assert_eq!(loaded.filter_audit.n_records, 3);
    assert!(loaded.filter_audit.reconciles());
}

#[test]
fn empty_and_headerless_inputs_are_schema_errors() {
    assert!(matches!(
        load_compas_reader("".as_bytes(), &LoadOptions::default()),
        Err(Error::Schema(_))
    ));
    assert!(matches!(
        load_compas_reader(HEADER.as_bytes(), &LoadOptions::default()),
        Err(Error::Schema(_))
    ));
    let missing = "id,race,two_year_recid\n1,Caucasian,0\n";
    assert!(matches!(
        load_compas_reader(missing.as_bytes(), &LoadOptions::default()),
        Err(Error::Schema(_))
    ));
    // enabling a rule requires its column
    let options = LoadOptions {
        filter: FilterSpec::propublica(),
        ..LoadOptions::default()
    };
    let data = format!("{HEADER}1,African-American,2,0\n");
    assert!(matches!(
        load_compas_reader(data.as_bytes(), &options),
        Err(Error::Schema(_))
    ));
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_compas_csv("/nonexistent/compas.csv", &LoadOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn degenerate_all_zero_stream() {
    // nobody re-offends, every decile is 0: Brier = -2·0.0001² per record
    let mut data = HEADER.to_string();
    for i in 0..10 {
        let race = if i % 2 == 0 {
            "African-American"
        } else {
            "Caucasian"
        };
        data.push_str(&format!("{i},{race},0,0\n"));
    }
    let loaded = load_compas_reader(data.as_bytes(), &LoadOptions::default()).unwrap();
    let r = run_audit(&loaded, &AuditConfig::default());
    // eqopp is exactly 0, so the reciprocal utilities are undefined
    let err = r.unwrap_err();
    assert!(
        matches!(err.root(), Error::UtilityUndefinedAtOptimum { .. }),
        "{err}"
    );

    let m = accfair::compas::compute_measures(&loaded.stream, &loaded.partition).unwrap();
    assert!((m.brier - -2e-8).abs() < 1e-20);
    assert_eq!(m.eqopp, 0.0);
}

#[test]
fn repeated_ids_are_split_into_units() {
    let data = format!("{HEADER}7,African-American,2,0\n7,African-American,8,0\n8,Caucasian,5,0\n");
    let loaded = load_compas_reader(data.as_bytes(), &LoadOptions::default()).unwrap();
    assert_eq!(loaded.stream.len(), 3);
    let m = accfair::compas::compute_measures(&loaded.stream, &loaded.partition).unwrap();
    assert!((m.fnr_by_group["Black"] - 0.5).abs() < 1e-15);
    assert!((m.fnr_by_group["non-Black"] - 0.5).abs() < 1e-15);
}

#[test]
fn missing_group_positive_class_is_labelled_by_stage() {
    let data = format!("{HEADER}1,African-American,2,1\n2,Caucasian,3,0\n");
    let loaded = load_compas_reader(data.as_bytes(), &LoadOptions::default()).unwrap();
    let err = run_audit(&loaded, &AuditConfig::default()).unwrap_err();
    assert!(err.to_string().starts_with("equal opportunity:"), "{err}");
    assert!(matches!(err.root(), Error::EmptyPositiveClass { .. }));
}
