//! Independent reference computations for the integration tests.
//!
//! The reference side never calls the crate's numerics: transforms are built
//! from raw `(unit, period) -> value` maps, and systems are solved by
//! Gauss-Jordan elimination on the normal equations. The invariance helpers
//! at the bottom drive the crate itself.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use panelkit::diagnostics::{breusch_pagan, hausman_aux, honda_lm, wooldridge_fd_serial, Effect, SerialNull};
use panelkit::estimators::{fit_first_differences, fit_pooled, fit_within, Estimator, ModelSpec};
use panelkit::panel::{PanelDataset, Record};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Raw panel: variable -> (unit, period) -> value.
pub type Raw = BTreeMap<String, BTreeMap<(usize, i32), f64>>;

pub struct RandomPanel {
    pub raw: Raw,
    pub units: usize,
    pub regressors: Vec<String>,
    pub dataset: PanelDataset<f64>,
}

/// Unbalanced panel with `N ≤ 10`, `T ≤ 8`, `M ≤ 3` and each cell missing
/// with probability 0.1. Units start at staggered periods.
pub fn random_panel(seed: u64) -> RandomPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let units = rng.random_range(6..=10);
    let m = rng.random_range(1..=3);
    let regressors: Vec<String> = (1..=m).map(|j| format!("x{j}")).collect();
    let mut raw = Raw::new();
    let mut records = Vec::new();
    for u in 0..units {
        let start = rng.random_range(0..=2);
        let len = rng.random_range(6..=8 - start);
        let effect: f64 = rng.random_range(-3.0..3.0);
        for t in start..start + len {
            let t = t + 2000;
            let xs: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y = effect + xs.iter().enumerate().map(|(j, x)| (j as f64 + 1.0) * x).sum::<f64>()
                + rng.random_range(-1.0..1.0);
            let vars = std::iter::once(("y".to_string(), y)).chain(regressors.iter().cloned().zip(xs));
            for (name, v) in vars {
                if rng.random::<f64>() < 0.1 {
                    continue;
                }
                raw.entry(name.clone()).or_default().insert((u, t), v);
                records.push(Record::new(format!("u{u:02}"), t, name, v));
            }
        }
    }
    RandomPanel {
        raw,
        units,
        regressors,
        dataset: PanelDataset::build(records).unwrap(),
    }
}

fn get(raw: &Raw, var: &str, u: usize, t: i32) -> Option<f64> {
    raw.get(var)?.get(&(u, t)).copied()
}

/// Rows of a hand-built regression: unit, dependent, regressors.
pub struct Rows {
    pub unit: Vec<usize>,
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
}

/// `Δy_t` on `[1, Δx_{t−1}]`, using only rows where all four periods exist.
pub fn fd_rows(p: &RandomPanel) -> Rows {
    let mut rows = Rows {
        unit: vec![],
        y: vec![],
        x: vec![],
    };
    for u in 0..p.units {
        for t in 1990..2020 {
            let dy = get(&p.raw, "y", u, t).zip(get(&p.raw, "y", u, t - 1)).map(|(a, b)| a - b);
            let dx: Option<Vec<f64>> = p
                .regressors
                .iter()
                .map(|r| get(&p.raw, r, u, t - 1).zip(get(&p.raw, r, u, t - 2)).map(|(a, b)| a - b))
                .collect();
            if let (Some(dy), Some(dx)) = (dy, dx) {
                rows.unit.push(u);
                rows.y.push(dy);
                rows.x.push(std::iter::once(1.0).chain(dx).collect());
            }
        }
    }
    rows
}

/// Unit-demeaned `y_t` on `x_{t−1}`, dropping units with one row.
pub fn within_rows(p: &RandomPanel) -> Rows {
    let mut by_unit: BTreeMap<usize, Vec<(f64, Vec<f64>)>> = BTreeMap::new();
    for u in 0..p.units {
        for t in 1990..2020 {
            let y = get(&p.raw, "y", u, t);
            let x: Option<Vec<f64>> = p.regressors.iter().map(|r| get(&p.raw, r, u, t - 1)).collect();
            if let (Some(y), Some(x)) = (y, x) {
                by_unit.entry(u).or_default().push((y, x));
            }
        }
    }
    let mut rows = Rows {
        unit: vec![],
        y: vec![],
        x: vec![],
    };
    for (u, obs) in by_unit {
        if obs.len() < 2 {
            continue;
        }
        let n = obs.len() as f64;
        let ybar = obs.iter().map(|o| o.0).sum::<f64>() / n;
        let k = obs[0].1.len();
        let xbar: Vec<f64> = (0..k).map(|j| obs.iter().map(|o| o.1[j]).sum::<f64>() / n).collect();
        for (y, x) in obs {
            rows.unit.push(u);
            rows.y.push(y - ybar);
            rows.x.push(x.iter().zip(&xbar).map(|(a, b)| a - b).collect());
        }
    }
    rows
}

pub fn gram(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = x[0].len();
    let mut g = vec![vec![0.0; k]; k];
    for row in x {
        for a in 0..k {
            for b in 0..k {
                g[a][b] += row[a] * row[b];
            }
        }
    }
    g
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        let d = a[c][c];
        assert!(d.abs() > 1e-12, "singular normal matrix");
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..k {
            if r != c {
                let f = a[r][c];
                let pivot = a[c].clone();
                for (v, pv) in a[r].iter_mut().zip(pivot) {
                    *v -= f * pv;
                }
            }
        }
    }
    a.into_iter().map(|r| r[k..].to_vec()).collect()
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = b[0].len();
    a.iter()
        .map(|r| (0..n).map(|j| r.iter().zip(b).map(|(x, brow)| x * brow[j]).sum()).collect())
        .collect()
}

/// OLS coefficients from the normal equations.
pub fn normal_equations(rows: &Rows) -> Vec<f64> {
    let inv = invert(&gram(&rows.x));
    let k = rows.x[0].len();
    let xty: Vec<f64> = (0..k).map(|j| rows.x.iter().zip(&rows.y).map(|(r, y)| r[j] * y).sum()).collect();
    mat_vec(&inv, &xty)
}

/// Cluster sandwich built one cluster at a time.
pub fn loop_sandwich(rows: &Rows, beta: &[f64]) -> Vec<Vec<f64>> {
    let k = beta.len();
    let mut meat = vec![vec![0.0; k]; k];
    let clusters: std::collections::BTreeSet<usize> = rows.unit.iter().copied().collect();
    for g in clusters {
        let mut score = vec![0.0; k];
        for i in (0..rows.y.len()).filter(|&i| rows.unit[i] == g) {
            let e = rows.y[i] - rows.x[i].iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
            for j in 0..k {
                score[j] += rows.x[i][j] * e;
            }
        }
        for a in 0..k {
            for b in 0..k {
                meat[a][b] += score[a] * score[b];
            }
        }
    }
    let bread = invert(&gram(&rows.x));
    mat_mul(&mat_mul(&bread, &meat), &bread)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn spec_for(ds: &PanelDataset<f64>, est: Estimator) -> ModelSpec {
    let regs: Vec<&str> = ds.variables().iter().map(|v| v.name.as_str()).filter(|n| *n != "y").collect();
    ModelSpec::new("y", &regs, 1, est)
}

/// Rewrites `y` as `f(unit index, period, y)`.
pub fn map_y(ds: &PanelDataset<f64>, f: impl Fn(usize, i32, f64) -> f64) -> PanelDataset<f64> {
    let records = ds.records().into_iter().map(|r| {
        if r.variable == "y" {
            let u = ds.unit_index(&r.unit).unwrap();
            let v = f(u, r.period, r.value);
            Record { value: v, ..r }
        } else {
            r
        }
    });
    PanelDataset::build(records).unwrap()
}

/// Every test statistic plus FD and within t and p values.
pub fn invariants(ds: &PanelDataset<f64>) -> Vec<f64> {
    let pooled = fit_pooled(ds, &spec_for(ds, Estimator::Pooled)).unwrap();
    let fd = fit_first_differences(ds, &spec_for(ds, Estimator::FirstDifferences)).unwrap();
    let within = fit_within(ds, &spec_for(ds, Estimator::Within)).unwrap();
    let tests = [
        honda_lm(&pooled, Effect::Individual).unwrap(),
        honda_lm(&pooled, Effect::Time).unwrap(),
        breusch_pagan(&fd).unwrap(),
        breusch_pagan(&within).unwrap(),
        wooldridge_fd_serial(&fd, SerialNull::FdUncorrelated).unwrap(),
        wooldridge_fd_serial(&fd, SerialNull::LevelsUncorrelated).unwrap(),
        hausman_aux(ds, &spec_for(ds, Estimator::Within)).unwrap(),
    ];
    let mut out: Vec<f64> = tests.iter().flat_map(|t| [t.statistic, t.p_value]).collect();
    for f in [&fd, &within] {
        out.extend(&f.t_stats);
        out.extend(&f.p_values);
    }
    out
}
