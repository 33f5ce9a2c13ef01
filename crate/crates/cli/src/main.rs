use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use sounder_core::fitting::Family;
use sounder_core::toolkit::pipeline;
use sounder_core::toolkit::tables::{read_column, write_table, RunInfo, Table};
use sounder_core::{RunConfig, Scenario};

/// Sub-THz sliding-correlator channel sounder: waveform synthesis, channel
/// simulation, receiver processing, weather link budgets and statistics.
#[derive(Debug, Parser)]
#[command(name = "sounder", version)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured weather scenario (clear, rain, snow).
    #[arg(long, global = true)]
    scenario: Option<Scenario>,
    /// Overrides the configured number of frames.
    #[arg(long, global = true)]
    frames: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the transmit capture.
    Generate,
    /// Pass the sounding frame through simulated channels.
    Simulate,
    /// Extract profiles, metrics, fits and CDFs from a receive capture.
    Analyze {
        /// Capture to analyze; defaults to the receive capture in the output directory.
        capture: Option<PathBuf>,
    },
    /// Evaluate the link budget over a weather time series.
    Weather {
        /// Weather CSV; defaults to `weather.csv` from the configuration.
        csv: Option<PathBuf>,
    },
    /// Fit distributions to a column of samples.
    Fit {
        /// CSV file with a header, or a plain list of numbers.
        input: PathBuf,
        /// Column to read from a CSV input.
        #[arg(long)]
        column: Option<String>,
        /// Families to fit.
        #[arg(long, value_delimiter = ',', default_values_t = Family::ALL)]
        family: Vec<Family>,
        /// Name used for the output tables.
        #[arg(long, default_value = "samples")]
        name: String,
    },
    /// Derived report tables.
    Report {
        #[command(subcommand)]
        kind: ReportKind,
    },
}

#[derive(Debug, Subcommand)]
enum ReportKind {
    /// Spectral efficiency and capacity per scenario under both noise models.
    Capacity,
    /// Frame arithmetic, FSPL and EIRP.
    Frame,
}

/// Failures that map to exit code 2.
#[derive(Debug)]
struct ConfigError(anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(scenario) = cli.scenario {
        cfg.scenario = scenario;
    }
    if let Some(frames) = cli.frames {
        cfg.frames = frames;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_values(path: &Path, column: Option<&str>) -> anyhow::Result<Vec<f64>> {
    if let Some(column) = column {
        return Ok(read_column(path, column)?);
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        for tok in line.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .with_context(|| format!("{} line {}: {tok:?} is not a number", path.display(), i + 1))?;
            values.push(v);
        }
    }
    Ok(values)
}

fn emit(table: &Table, dir: &Path, cfg: &RunConfig) -> anyhow::Result<()> {
    let path = write_table(dir, table, &RunInfo::new(Some(cfg.seed), None))?;
    print!("{}", String::from_utf8(table.to_csv()?)?);
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli).map_err(ConfigError)?;
    let out = cfg.out_dir.clone();
    match cli.command {
        Command::Generate => {
            println!("{}", pipeline::generate(&cfg, &out)?.display());
        }
        Command::Simulate => {
            let sim = pipeline::simulate(&cfg, &out)?;
            println!("{}", sim.capture.display());
            if let Some(b2b) = &sim.back_to_back {
                println!("{}", b2b.display());
            }
            println!("{}", sim.taps.display());
            println!("{}", sim.truth.display());
        }
        Command::Analyze { capture } => {
            let capture = capture.unwrap_or_else(|| out.join(pipeline::RX_CAPTURE));
            let result = pipeline::analyze(&capture, &cfg, &out)?;
            for (id, e) in &result.failures {
                eprintln!("warning: frame {id}: {e}");
            }
            for note in &result.fits.notes {
                eprintln!("note: {note}");
            }
            eprintln!(
                "{} of {} frames processed",
                result.reports.len(),
                result.frames_total
            );
            for f in &result.files {
                println!("{}", f.display());
            }
        }
        Command::Weather { csv } => {
            let Some(csv) = csv.or_else(|| cfg.weather.csv.clone()) else {
                return Err(ConfigError(anyhow::anyhow!(
                    "no weather CSV given on the command line or in weather.csv"
                ))
                .into());
            };
            println!("{}", pipeline::weather(&cfg, &csv, &out)?.display());
        }
        Command::Fit {
            input,
            column,
            family,
            name,
        } => {
            let values = read_values(&input, column.as_deref())?;
            if values.is_empty() {
                bail!("{} holds no samples", input.display());
            }
            let fits = pipeline::fit_samples(&values, &name, &family, cfg.analysis.cdf_points, &out)?;
            for note in &fits.notes {
                eprintln!("note: {note}");
            }
            for r in &fits.records {
                let params: Vec<String> = r
                    .fit
                    .params
                    .named()
                    .iter()
                    .map(|(k, v)| format!("{k}={v:.6}"))
                    .collect();
                println!(
                    "{} n={} ks={:.4} {}",
                    r.fit.family(),
                    r.fit.sample_count,
                    r.fit.ks_statistic,
                    params.join(" ")
                );
            }
        }
        Command::Report { kind } => {
            let table = match kind {
                ReportKind::Capacity => pipeline::capacity_table(&cfg)?,
                ReportKind::Frame => pipeline::frame_table(&cfg)?,
            };
            emit(&table, &out, &cfg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<ConfigError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
