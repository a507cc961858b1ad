use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use otfluct::branching_system::regime_table;
use otfluct::branching_system::sim::{SimOptions, simulate};
use otfluct::config::{ExperimentConfig, Suite};
use otfluct::osrf_fields::sample_field;
use otfluct::rng::{FIELD_STREAM, StreamKey};
use otfluct::stable_motion::StabilityVector;
use otfluct::verify::{Runner, Sidecar, all_pass, field_points, write_covariances, write_integrated, write_report, write_samples};
use otfluct::{Error, Result};

#[derive(Parser)]
#[command(name = "otfluct", version, about = "Occupation-time fluctuations of degenerate branching stable systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; results go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: configured, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suites to run, comma separated or repeated (default: configured).
    #[arg(long, global = true, value_delimiter = ',')]
    suite: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replicates of the rescaled fluctuations on every ladder rung.
    Simulate {
        /// Also write the event log of the first this many replicates of each rung.
        #[arg(long, default_value_t = 0)]
        event_logs: usize,
    },
    /// Limit covariances on the configured time grid.
    Limits,
    /// Covariance matrix and draws of the configured operator-scaling field.
    Field,
    /// Run verification suites; exits with failure iff a check fails.
    Verify,
    /// Regime, norming and theorem for a stability vector.
    Regimes {
        /// Stability indices, overriding the configured ones.
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Limits => "limits",
            Command::Field => "field",
            Command::Verify => "verify",
            Command::Regimes { .. } => "regimes",
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if !cli.suite.is_empty() {
        cfg.suites = cli.suite.iter().map(|s| Suite::parse(s.trim())).collect::<Result<_>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn threads(cli: &Cli, cfg: Option<&ExperimentConfig>) -> usize {
    cli.threads
        .or(cfg.and_then(|c| c.threads))
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// A named file under `--out`, or stdout.
fn sink(out: Option<&Path>, name: &str) -> Result<Box<dyn Write>> {
    match out {
        Some(dir) => Ok(Box::new(File::create(dir.join(name))?)),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn run(cli: &Cli) -> Result<(bool, u64, usize)> {
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
    }
    let out = cli.out.as_deref();
    if let Command::Regimes { alphas } = &cli.command {
        let alphas = if alphas.is_empty() { load(cli)?.params.alphas } else { alphas.clone() };
        let row = regime_table(&StabilityVector::new(alphas)?)?;
        let mut w = csv::Writer::from_writer(sink(out, "regimes.csv")?);
        w.write_record(["alpha_bar", "regime", "norming", "theorem"])?;
        w.write_record([row.alpha_bar.to_string(), row.regime.into(), row.norming, row.theorem.into()])?;
        w.flush()?;
        return Ok((true, 0, 1));
    }
    let cfg = load(cli)?;
    let nt = threads(cli, Some(&cfg));
    let mut runner = Runner::new(&cfg, nt)?;
    runner.progress = true;
    let ok = match &cli.command {
        Command::Simulate { event_logs } => {
            let sim = &cfg.simulation;
            if out.is_none() && sim.n_ladder.len() > 1 {
                return Err(Error::Config("several ladder rungs need --out".into()));
            }
            if out.is_none() && *event_logs > 0 {
                return Err(Error::Config("event logs need --out".into()));
            }
            for (k, n) in sim.n_ladder.iter().enumerate() {
                let batch = runner.batch(k, false)?;
                write_samples(&batch.samples, &sim.t_grid, sink(out, &format!("samples_n{n}.csv"))?)?;
                if let Some(dir) = out {
                    if !cfg.weights.is_empty() {
                        write_integrated(&batch.samples, File::create(dir.join(format!("integrated_n{n}.csv")))?)?;
                    }
                    let params = cfg.params.system(*n)?;
                    let bx = runner.sim_box(&params)?;
                    let opts = SimOptions { budget: sim.budget, ..SimOptions::default() };
                    for s in batch.samples.iter().take(*event_logs) {
                        let log = simulate(&params, &bx, StreamKey::new(s.seed, s.replicate), &opts)?;
                        log.write_csv(File::create(dir.join(format!("events_n{n}_r{}.csv", s.replicate)))?)?;
                    }
                }
            }
            true
        }
        Command::Limits => {
            let rows = runner.limits()?;
            write_covariances(&rows, sink(out, "covariances.csv")?)?;
            true
        }
        Command::Field => {
            for spec in cfg.field.specs()? {
                let points = field_points(&cfg, &spec);
                let key = StreamKey::new(cfg.seed, FIELD_STREAM);
                let g = runner.install(|| sample_field(&spec, &points, cfg.field.draws, key, &cfg.quadrature))?;
                let tag = format!("{:?}", spec.which).to_lowercase();
                g.write_covariance(sink(out, &format!("field_{tag}.csv"))?)?;
                if let Some(dir) = out {
                    if cfg.field.draws > 0 {
                        g.write_draws(File::create(dir.join(format!("field_{tag}_draws.csv")))?)?;
                    }
                }
            }
            true
        }
        Command::Verify => {
            let rows = runner.run(&cfg.suites)?;
            for r in rows.iter().filter(|r| !r.pass) {
                eprintln!("FAIL {} {}: estimate {} target {} budget {}", r.suite, r.check, r.estimate, r.target, r.budget);
            }
            write_report(&rows, sink(out, "report.csv")?)?;
            all_pass(&rows)
        }
        Command::Regimes { .. } => unreachable!(),
    };
    Ok((ok, cfg.seed, nt))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    match run(&cli) {
        Ok((ok, seed, nt)) => {
            if let Some(dir) = &cli.out {
                let side = Sidecar::new(cli.command.name(), seed, nt, start.elapsed().as_secs_f64());
                if let Err(e) = side.write(&dir.join("metadata.json")) {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
