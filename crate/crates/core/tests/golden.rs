//! Fixture replication against the checked-in outputs in `tests/golden/`.
//!
//! Set `PANELKIT_BLESS=1` to rewrite the golden files after an intended change.

use std::path::PathBuf;

use panelkit::fixture;
use panelkit::report::{render, run_replication, ReplicationConfig, TableFormat, TABLE_IDS};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn fixture_outputs_match_golden_files() {
    let bundle = run_replication(&ReplicationConfig::default()).unwrap();
    let mut outputs: Vec<(String, String)> = TABLE_IDS
        .iter()
        .map(|id| (format!("{id}.csv"), render(bundle.table(id).unwrap(), TableFormat::Csv, bundle.digits)))
        .collect();
    outputs.push(("provenance.txt".into(), bundle.provenance.render()));
    let bless = std::env::var_os("PANELKIT_BLESS").is_some();
    for (name, text) in outputs {
        let path = golden_dir().join(&name);
        if bless {
            std::fs::write(&path, &text).unwrap();
        }
        let golden = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, golden, "{name} differs from the golden copy");
    }
}

#[test]
fn fixture_recovers_planted_coefficients() {
    let cfg = ReplicationConfig {
        models: vec!["TOTAL".into()],
        ..Default::default()
    };
    let bundle = run_replication(&cfg).unwrap();
    let fd = bundle.models[0].fd.as_ref().unwrap();
    for (name, planted) in [("WAGE", fixture::WAGE_EFFECT), ("OIL", fixture::OIL_EFFECT)] {
        let j = fd.names.iter().position(|n| n == name).unwrap();
        let gap = (fd.coefficients[j] - planted).abs();
        assert!(gap <= 2.0 * fd.standard_errors[j], "{name}: {} vs {planted}", fd.coefficients[j]);
    }
}

#[test]
fn printed_numbers_are_rounded_fields() {
    let bundle = run_replication(&ReplicationConfig::default()).unwrap();
    let csv = render(&bundle.table4, TableFormat::Csv, 4);
    let total = csv.lines().find(|l| l.starts_with("TOTAL,")).unwrap();
    let fd = bundle.models[0].fd.as_ref().unwrap();
    let expected: Vec<String> = (0..3)
        .flat_map(|j| [fd.coefficients[j], fd.standard_errors[j], fd.p_values[j]])
        .map(|v| panelkit::report::format_fixed(v, 4))
        .collect();
    assert_eq!(total, format!("TOTAL,{}", expected.join(",")));
}
