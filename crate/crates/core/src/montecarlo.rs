//! Monte Carlo size and power experiments for the specification tests.
//!
//! Each replication draws a fresh panel from a known data generating process
//! with its own ChaCha stream, so results are reproducible for a given seed
//! and independent of the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::diagnostics::{breusch_pagan, hausman_aux, honda_lm, wooldridge_fd_serial, Effect, SerialNull, TestResult};
use crate::error::Result;
use crate::estimators::{fit_first_differences, fit_pooled, Estimator, ModelSpec};
use crate::panel::{PanelDataset, Record};

/// How the dependent variable is generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorProcess {
    /// `y_it = 1 + β·x_{i,t−1} + u_i + e_it` with i.i.d. `e`.
    LevelsIid,
    /// `Δy_it = 0.5 + β·Δx_{i,t−1} + ε_it` with i.i.d. `ε`.
    RandomWalk,
}

/// Panel data generating process with two regressors.
///
/// Regressors are `x_jit = a_ji + ξ_jit` with standard normal parts. The
/// unit effect is `u_i = σ_u (ρ a_1i + sqrt(1 − ρ²) η_i)`, so `ρ` is its
/// correlation with the permanent component of the first regressor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dgp {
    pub units: usize,
    pub periods: usize,
    pub beta: [f64; 2],
    pub effect_sd: f64,
    pub effect_corr: f64,
    pub error_sd: f64,
    pub process: ErrorProcess,
}

impl Dgp {
    /// 29 units over 15 years.
    pub fn study_shape(process: ErrorProcess) -> Self {
        Self {
            units: 29,
            periods: 15,
            beta: [0.5, -0.3],
            effect_sd: 1.0,
            effect_corr: 0.0,
            error_sd: 1.0,
            process,
        }
    }

    pub fn with_effects(mut self, sd: f64, corr: f64) -> Self {
        self.effect_sd = sd;
        self.effect_corr = corr;
        self
    }

    /// Draws one panel with variables `y`, `x1`, `x2` over years 2003 onward.
    pub fn simulate<R: Rng>(&self, rng: &mut R) -> PanelDataset<f64> {
        let mut records = Vec::with_capacity(self.units * self.periods * 3);
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        for i in 0..self.units {
            let a = [normal(), normal()];
            let u = self.effect_sd * (self.effect_corr * a[0] + (1.0 - self.effect_corr.powi(2)).sqrt() * normal());
            // one pre-sample period feeds the first lag
            let x: Vec<[f64; 2]> = (0..=self.periods).map(|_| [a[0] + normal(), a[1] + normal()]).collect();
            let signal = |t: usize| self.beta[0] * x[t][0] + self.beta[1] * x[t][1];
            let mut y_prev = 10.0 + u;
            let unit = format!("U{i:02}");
            for t in 1..=self.periods {
                let y = match self.process {
                    ErrorProcess::LevelsIid => 1.0 + signal(t - 1) + u + self.error_sd * normal(),
                    ErrorProcess::RandomWalk => {
                        let lagged_change = if t >= 2 { signal(t - 1) - signal(t - 2) } else { 0.0 };
                        y_prev + 0.5 + lagged_change + self.error_sd * normal()
                    }
                };
                y_prev = y;
                let year = 2002 + t as i32;
                records.push(Record::new(unit.clone(), year, "y", y));
                records.push(Record::new(unit.clone(), year, "x1", x[t][0]));
                records.push(Record::new(unit.clone(), year, "x2", x[t][1]));
            }
        }
        PanelDataset::build(records).expect("simulated records have unique keys")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    /// Honda individual-effects test, no effects present.
    HondaSize,
    /// Serial-correlation test, levels null, level errors i.i.d.
    SerialLevelsSize,
    /// Breusch-Pagan on the first-difference fit, homoskedastic errors.
    BreuschPaganSize,
    /// Hausman test, effects uncorrelated with regressors.
    HausmanSize,
    /// Hausman test, effects correlated 0.9 with the first regressor.
    HausmanPower,
    /// Serial-correlation test, fd null, level errors i.i.d.
    SerialFdPower,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::HondaSize,
        Experiment::SerialLevelsSize,
        Experiment::BreuschPaganSize,
        Experiment::HausmanSize,
        Experiment::HausmanPower,
        Experiment::SerialFdPower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::HondaSize => "honda-size",
            Experiment::SerialLevelsSize => "serial-levels-size",
            Experiment::BreuschPaganSize => "breusch-pagan-size",
            Experiment::HausmanSize => "hausman-size",
            Experiment::HausmanPower => "hausman-power",
            Experiment::SerialFdPower => "serial-fd-power",
        }
    }

    pub fn is_power(self) -> bool {
        matches!(self, Experiment::HausmanPower | Experiment::SerialFdPower)
    }

    pub fn dgp(self, units: usize, periods: usize) -> Dgp {
        let base = Dgp {
            units,
            periods,
            ..Dgp::study_shape(ErrorProcess::LevelsIid)
        };
        match self {
            Experiment::HondaSize => base.with_effects(0.0, 0.0),
            Experiment::SerialLevelsSize | Experiment::SerialFdPower | Experiment::HausmanSize => base,
            Experiment::BreuschPaganSize => Dgp {
                process: ErrorProcess::RandomWalk,
                ..base
            },
            Experiment::HausmanPower => base.with_effects(1.0, 0.9),
        }
    }

    fn stream(self) -> u64 {
        self as u64
    }

    /// Runs the experiment's test on one simulated panel.
    pub fn evaluate(self, ds: &PanelDataset<f64>) -> Result<TestResult> {
        let spec = |est| ModelSpec::new("y", &["x1", "x2"], 1, est);
        match self {
            Experiment::HondaSize => honda_lm(&fit_pooled(ds, &spec(Estimator::Pooled))?, Effect::Individual),
            Experiment::SerialLevelsSize => wooldridge_fd_serial(
                &fit_first_differences(ds, &spec(Estimator::FirstDifferences))?,
                SerialNull::LevelsUncorrelated,
            ),
            Experiment::SerialFdPower => wooldridge_fd_serial(
                &fit_first_differences(ds, &spec(Estimator::FirstDifferences))?,
                SerialNull::FdUncorrelated,
            ),
            Experiment::BreuschPaganSize => breusch_pagan(&fit_first_differences(ds, &spec(Estimator::FirstDifferences))?),
            Experiment::HausmanSize | Experiment::HausmanPower => hausman_aux(ds, &spec(Estimator::Within)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub replications: usize,
    pub units: usize,
    pub periods: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            replications: 1000,
            units: 29,
            periods: 15,
            alpha: 0.05,
            seed: 20_190_101,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOutcome {
    pub experiment: Experiment,
    pub replications: usize,
    pub rejections: usize,
    /// Replications where the test could not be computed.
    pub failures: usize,
    pub statistics: Vec<f64>,
}

impl McOutcome {
    /// Rejection rate over the replications that produced a statistic.
    pub fn rate(&self) -> f64 {
        let valid = self.replications - self.failures;
        if valid == 0 {
            f64::NAN
        } else {
            self.rejections as f64 / valid as f64
        }
    }

    pub fn mean_statistic(&self) -> f64 {
        self.statistics.iter().sum::<f64>() / self.statistics.len() as f64
    }
}

/// Generator for replication `rep` of `experiment`.
pub fn replication_rng(seed: u64, experiment: Experiment, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ experiment.stream().wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(rep as u64);
    rng
}

pub fn run_experiment(experiment: Experiment, cfg: &McConfig) -> McOutcome {
    let dgp = experiment.dgp(cfg.units, cfg.periods);
    let results: Vec<Option<TestResult>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(cfg.seed, experiment, rep);
            let ds = dgp.simulate(&mut rng);
            experiment.evaluate(&ds).ok()
        })
        .collect();
    let failures = results.iter().filter(|r| r.is_none()).count();
    let valid: Vec<&TestResult> = results.iter().flatten().collect();
    McOutcome {
        experiment,
        replications: cfg.replications,
        rejections: valid.iter().filter(|r| r.p_value < cfg.alpha).count(),
        failures,
        statistics: valid.iter().map(|r| r.statistic).collect(),
    }
}

/// Rendered as `experiment,replications,failures,rejections,rate`.
pub fn outcomes_csv(outcomes: &[McOutcome]) -> String {
    let mut out = String::from("experiment,replications,failures,rejections,rate\n");
    for o in outcomes {
        out.push_str(&format!(
            "{},{},{},{},{:.4}\n",
            o.experiment.name(),
            o.replications,
            o.failures,
            o.rejections,
            o.rate()
        ));
    }
    out
}
