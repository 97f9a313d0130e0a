//! Synthetic stand-in for the study data, shipped with the crate.
//!
//! 29 countries over 2003–2017 with the study's variable names. `TOTAL`
//! follows a random walk whose drift depends on lagged changes in `WAGE` and
//! `OIL` with known coefficients, and every breakdown series is a fixed
//! percentage of `TOTAL`, so the share matrix is known exactly.
//!
//! Normal draws use the Irwin-Hall sum of twelve uniforms. It needs only
//! addition, so the generated file is bit-identical on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{cell_variable, parse_long_csv, SourceSchema, StudyManifest, FUNDING_SOURCES, PERFORMANCE_SECTORS};
use crate::panel::{PanelDataset, Record};

/// The shipped fixture, in canonical dump format.
pub const FIXTURE_CSV: &str = include_str!("../fixtures/study_panel.csv");

pub const SEED: u64 = 2019;
pub const INTERCEPT: f64 = 5.0;
pub const WAGE_EFFECT: f64 = 0.25;
pub const OIL_EFFECT: f64 = -0.01;

/// Percent of `TOTAL` in each (performance sector, funding source) cell.
pub const CELL_SHARES: [[f64; 5]; 4] = [
    [51.80, 4.50, 0.04, 0.13, 6.51],
    [0.84, 10.57, 0.05, 0.14, 0.78],
    [1.32, 17.20, 2.23, 0.83, 1.38],
    [0.25, 0.70, 0.01, 0.53, 0.19],
];

/// Countries (by manifest position) with no private non-profit performance data.
const NO_PNP_PERFORMANCE: [usize; 3] = [3, 11, 20];
/// Countries with no higher-education funding data.
const NO_HES_FUNDING: [usize; 2] = [7, 16];

pub fn row_shares() -> [f64; 4] {
    CELL_SHARES.map(|row| row.iter().sum())
}

pub fn column_shares() -> [f64; 5] {
    let mut out = [0.0; 5];
    for row in CELL_SHARES {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0
}

/// Regenerates the fixture records from [`SEED`].
pub fn generate() -> Vec<Record<f64>> {
    let manifest = StudyManifest::oecd();
    let years: Vec<i32> = (manifest.first_period..=manifest.last_period).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut common_oil = Vec::with_capacity(years.len());
    let mut level = 900.0;
    for _ in &years {
        common_oil.push(level);
        level += 25.0 + 120.0 * normal(&mut rng);
    }

    let mut records = Vec::new();
    for (i, unit) in manifest.included.iter().enumerate() {
        let mut wage = 1500.0 + 3500.0 * rng.random::<f64>();
        let wage_drift = 20.0 + 40.0 * rng.random::<f64>();
        let oil_offset = -200.0 + 400.0 * rng.random::<f64>();
        let noise_sd = 10.0 + 10.0 * rng.random::<f64>();
        let mut w = Vec::with_capacity(years.len());
        let mut o = Vec::with_capacity(years.len());
        for k in 0..years.len() {
            w.push(wage);
            wage += wage_drift + 60.0 * normal(&mut rng);
            o.push(common_oil[k] + oil_offset + 40.0 * normal(&mut rng));
        }
        let mut y = Vec::with_capacity(years.len());
        y.push(200.0 + 1000.0 * rng.random::<f64>());
        for k in 1..years.len() {
            let signal = if k >= 2 {
                WAGE_EFFECT * (w[k - 1] - w[k - 2]) + OIL_EFFECT * (o[k - 1] - o[k - 2])
            } else {
                0.0
            };
            y.push(y[k - 1] + INTERCEPT + signal + noise_sd * normal(&mut rng));
        }

        for (k, &year) in years.iter().enumerate() {
            let mut push = |var: String, v: f64| records.push(Record::new(unit.as_str(), year, var, v));
            if rng.random::<f64>() >= 0.02 {
                push("WAGE".into(), w[k]);
            }
            if rng.random::<f64>() >= 0.02 {
                push("OIL".into(), o[k]);
            }
            if rng.random::<f64>() < 0.03 {
                continue;
            }
            let total = y[k];
            push("TOTAL".into(), total);
            let keep = |sector: &str, source: Option<&str>| {
                !(sector == "PNP" && NO_PNP_PERFORMANCE.contains(&i)) && !(source == Some("HES") && NO_HES_FUNDING.contains(&i))
            };
            for (s, sector) in PERFORMANCE_SECTORS.iter().enumerate() {
                for (f, source) in FUNDING_SOURCES.iter().enumerate() {
                    if keep(sector, Some(source)) {
                        push(cell_variable(sector, source), total * CELL_SHARES[s][f] / 100.0);
                    }
                }
                if keep(sector, None) {
                    push(format!("PERF-{sector}"), total * row_shares()[s] / 100.0);
                }
            }
            for (f, source) in FUNDING_SOURCES.iter().enumerate() {
                if keep("", Some(source)) {
                    push(format!("FUND-{source}"), total * column_shares()[f] / 100.0);
                }
            }
        }
    }
    records
}

/// Canonical dump of [`generate`]; equals [`FIXTURE_CSV`].
pub fn canonical_csv() -> String {
    let ds = PanelDataset::build(generate()).expect("fixture keys are unique");
    crate::ingest::canonical_string(&ds)
}

/// The shipped fixture as a dataset.
pub fn dataset() -> PanelDataset<f64> {
    let schema = SourceSchema::canonical("fixtures/study_panel.csv");
    let out = parse_long_csv::<f64>(&schema, FIXTURE_CSV).expect("shipped fixture parses");
    debug_assert!(out.rejects.is_empty());
    PanelDataset::build(out.records).expect("shipped fixture keys are unique")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_margins_sum_to_one_hundred() {
        let total: f64 = row_shares().iter().sum();
        assert!((total - 100.0).abs() < 1e-9);
        assert!((column_shares().iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn shipped_file_matches_generator() {
        assert_eq!(canonical_csv(), FIXTURE_CSV);
    }

    #[test]
    fn fixture_shape() {
        let ds = dataset();
        assert_eq!(ds.unit_count(), 29);
        assert_eq!(ds.periods(), (2003..=2017).collect::<Vec<_>>());
        assert!(ds.present_count("TOTAL").unwrap() < 29 * 15);
        assert!(ds.present_count("PERF-PNP").unwrap() < ds.present_count("PERF-BES").unwrap());
    }
}
