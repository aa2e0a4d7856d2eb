use bvt_core::catalog::VariantTag;
use bvt_core::harness::*;
use bvt_core::Error;

#[test]
fn config_file_round_trip() {
    let cfg = RunConfig::parse(
        "# quick run\nsuite = mixing\nvariant=inward_depauw\nkmax = 6  # shallow\nlevel=5\ncfl = 0.3\nskip = flow_oracle, \n",
    )
    .unwrap();
    assert_eq!(cfg.suite, "mixing");
    assert_eq!(cfg.variant, VariantTag::InwardDepauw);
    assert_eq!((cfg.k_max, cfg.level), (6, 5));
    assert_eq!(cfg.cfl, 0.3);
    assert_eq!(cfg.skip, vec!["flow_oracle".to_string()]);
    cfg.validate().unwrap();
}

#[test]
fn bad_configs_are_usage_errors() {
    for text in ["suite", "colour = red", "level = six", "variant = sideways"] {
        let err = RunConfig::parse(text).unwrap_err();
        assert!(matches!(err, Error::Usage(_)), "{text}: {err}");
    }
    for text in ["suite = nope", "level = 12", "cfl = 0.9", "horizon = 2"] {
        let err = RunConfig::parse(text).unwrap().validate().unwrap_err();
        assert!(matches!(err, Error::Usage(_)), "{text}: {err}");
    }
}

#[test]
fn heatmap_of_zero_is_white() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.ppm");
    emit_heatmap(&vec![vec![0.0; 5]; 3], -1.0, 1.0, 2, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let header = b"P6\n6 10\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    let body = &bytes[header.len()..];
    assert_eq!(body.len(), 6 * 10 * 3);
    assert!(body.iter().all(|&b| b == 255));
}

#[test]
fn heat_colors_follow_sign() {
    assert_eq!(heat_color(1.0, -1.0, 1.0), [255, 0, 0]);
    assert_eq!(heat_color(-1.0, -1.0, 1.0), [0, 0, 0]);
    assert_eq!(heat_color(0.0, -1.0, 1.0), [255, 255, 255]);
}

#[test]
fn mixing_suite_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::parse("suite = mixing\nkmax = 6").unwrap();
    cfg.out_dir = dir.path().to_path_buf();
    let report = run_suite(&cfg).unwrap();
    assert!(report.verdict.ok(), "{}", report.summary());
    let json = load_report(&dir.path().join("report.json")).unwrap();
    assert_eq!(json["suite"], "mixing");
    assert_eq!(json["records"].as_array().unwrap().len(), 2);
}
