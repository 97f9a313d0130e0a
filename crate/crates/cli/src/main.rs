use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use panelkit::error::{ErrorClass, PanelError, Result};
use panelkit::ingest::{canonical_string, CoverageReport};
use panelkit::montecarlo::{outcomes_csv, run_experiment, Experiment, McConfig};
use panelkit::report::{
    fd_table, figure_table, load_data, provenance, render, replicate_on, run_models, share_table, test_table,
    within_table, write_bundle, write_tables, DataSource, LoadedData, ReplicationConfig,
};

/// Panel regressions of R&D expenditure on wages and oil prices.
#[derive(Parser)]
#[command(name = "panelkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the inputs and write the canonical dump.
    Ingest(RunArgs),
    /// Share matrix and annual averages.
    Describe(RunArgs),
    /// Specification tests and R² per model.
    Test(RunArgs),
    /// First-difference and within coefficient tables.
    Fit(RunArgs),
    /// Every table plus provenance.
    Replicate(RunArgs),
    /// Monte Carlo size and power experiments.
    Mc(McArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Directory of canonical CSV files [default: $PANELKIT_DATA]
    #[arg(long)]
    data: Option<PathBuf>,
    /// Use the bundled synthetic panel.
    #[arg(long, conflicts_with = "data")]
    fixture: bool,
    /// `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or markdown
    #[arg(long)]
    format: Option<String>,
    /// fd, within or both
    #[arg(long)]
    estimator: Option<String>,
    /// classical or arellano
    #[arg(long)]
    vcov: Option<String>,
    /// none or finite-cluster
    #[arg(long)]
    correction: Option<String>,
    #[arg(long)]
    lag: Option<String>,
    #[arg(long)]
    digits: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma-separated dependent variables.
    #[arg(long)]
    models: Option<String>,
    /// mean-of-ratios or ratio-of-sums
    #[arg(long)]
    share_method: Option<String>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long, default_value_t = McConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = McConfig::default().replications)]
    reps: usize,
    /// Experiment names, comma separated [default: all]
    #[arg(long)]
    experiments: Option<String>,
    /// Also write `mc.csv` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    /// Defaults, then the config file, then flags. Data comes from `--fixture`,
    /// `--data`, the config file or `PANELKIT_DATA`, in that order.
    fn resolve(&self) -> Result<ReplicationConfig> {
        let mut cfg = ReplicationConfig::default();
        let mut data_set = false;
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| PanelError::Config(format!("{}: {e}", path.display())))?;
            data_set = text
                .lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .any(|l| l.starts_with("data") || l.starts_with("fixture"));
            cfg.apply_text(&text)?;
        }
        let flags = [
            ("format", &self.format),
            ("estimator", &self.estimator),
            ("vcov", &self.vcov),
            ("correction", &self.correction),
            ("lag", &self.lag),
            ("digits", &self.digits),
            ("seed", &self.seed),
            ("models", &self.models),
            ("share_method", &self.share_method),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if self.fixture {
            cfg.data = DataSource::Fixture;
        } else if let Some(dir) = &self.data {
            cfg.data = DataSource::Directory(dir.clone());
        } else if !data_set {
            match std::env::var_os("PANELKIT_DATA") {
                Some(dir) if !dir.is_empty() => cfg.data = DataSource::Directory(dir.into()),
                _ => {
                    return Err(PanelError::Config(
                        "no data source: pass --data <dir>, --fixture, or set PANELKIT_DATA".into(),
                    ))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_coverage(c: &CoverageReport) {
    eprintln!(
        "read {} rows: {} stored, {} rejected, {} excluded countries, {} outside years, {} unlisted variables",
        c.rows_read,
        c.stored,
        c.rejects.len(),
        c.dropped_units,
        c.dropped_periods,
        c.dropped_variables
    );
    for r in &c.rejects {
        eprintln!("  reject {}:{}: {}", r.path, r.line, r.reason);
    }
}

fn run(cli: Cli) -> Result<()> {
    let load = |args: &RunArgs| -> Result<(ReplicationConfig, LoadedData)> {
        let cfg = args.resolve()?;
        let data = load_data(&cfg)?;
        print_coverage(&data.coverage);
        Ok((cfg, data))
    };
    let report = |paths: Vec<PathBuf>| {
        for p in paths {
            println!("{}", p.display());
        }
    };
    match cli.command {
        Command::Ingest(args) => {
            let (cfg, data) = load(&args)?;
            std::fs::create_dir_all(&cfg.out)?;
            let path = cfg.out.join("study_panel.csv");
            std::fs::write(&path, canonical_string(&data.dataset))?;
            let mut coverage = String::from("variable,present,complete\n");
            for v in &data.coverage.variables {
                coverage.push_str(&format!("{},{},{}\n", v.name, v.present, v.complete));
            }
            let cov_path = cfg.out.join("coverage.csv");
            std::fs::write(&cov_path, coverage)?;
            report(vec![path, cov_path]);
        }
        Command::Describe(args) => {
            let (cfg, data) = load(&args)?;
            let t2 = share_table(&data.dataset, cfg.share_method)?;
            let f1 = figure_table(&data.dataset)?;
            let prov = provenance(&cfg, &data);
            report(write_tables(&[&t2, &f1], &prov, cfg.format, cfg.digits, &cfg.out)?);
        }
        Command::Test(args) => {
            let (cfg, data) = load(&args)?;
            let models = run_models(&data.dataset, &cfg)?;
            let t3 = test_table(&models);
            print!("{}", render(&t3, cfg.format, cfg.digits));
            report(write_tables(&[&t3], &provenance(&cfg, &data), cfg.format, cfg.digits, &cfg.out)?);
        }
        Command::Fit(args) => {
            let (cfg, data) = load(&args)?;
            let models = run_models(&data.dataset, &cfg)?;
            let mut tables = Vec::new();
            if cfg.estimators.as_str() != "within" {
                tables.push(fd_table(&models));
            }
            if cfg.estimators.as_str() != "fd" {
                tables.push(within_table(&models));
            }
            let refs: Vec<_> = tables.iter().collect();
            report(write_tables(&refs, &provenance(&cfg, &data), cfg.format, cfg.digits, &cfg.out)?);
        }
        Command::Replicate(args) => {
            let (cfg, data) = load(&args)?;
            let bundle = replicate_on(&cfg, &data)?;
            report(write_bundle(&bundle, cfg.format, &cfg.out)?);
        }
        Command::Mc(args) => {
            let experiments: Vec<Experiment> = match &args.experiments {
                None => Experiment::ALL.to_vec(),
                Some(list) => list
                    .split(',')
                    .map(|name| {
                        Experiment::ALL
                            .into_iter()
                            .find(|e| e.name() == name.trim())
                            .ok_or_else(|| PanelError::Config(format!("unknown experiment `{name}`")))
                    })
                    .collect::<Result<_>>()?,
            };
            if args.reps == 0 {
                return Err(PanelError::Config("reps must be positive".into()));
            }
            let mc = McConfig {
                replications: args.reps,
                seed: args.seed,
                ..McConfig::default()
            };
            let outcomes: Vec<_> = experiments.iter().map(|&e| run_experiment(e, &mc)).collect();
            let csv = outcomes_csv(&outcomes);
            print!("{csv}");
            if let Some(dir) = args.out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("mc.csv"), csv)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            })
        }
    }
}
