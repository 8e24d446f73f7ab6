//! Command-line front end. Every command writes a CSV whose first line is
//! `# {"tool":"pspin","version":..,"command":..,"config":{..}}`; passing that
//! file back through `--config` repeats the run.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use commands::{ChaosCsvRow, FpCsvRow, ParisiCsvRow, PhaseCsvRow, ShatterCsvRow, Table};
pub use config::{
    config_document, parse_any_config, parse_config, parse_header, ChaosRunConfig, FpConfig, Header, ParisiConfig,
    PhaseConfig, QGridSpec, ShatterConfig, SimulateConfig, MAX_LAB_ENTRIES, TOOL, VERSION,
};

use crate::error::{Error, Result};
use crate::lab::SamplerMethod;

#[derive(Debug, Parser)]
#[command(name = "pspin", version, about = "Phase structure of spherical p-spin glasses")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dynamical and static boundaries of pure models over a range of p.
    Phase(PhaseArgs),
    /// Crisanti-Sommers minimization for one mixture over several beta.
    Parisi(ParisiArgs),
    /// Franz-Parisi potential on an overlap grid.
    Fp(FpArgs),
    /// Search for increasing windows of the potential near q = 1.
    ShatterScan(ShatterArgs),
    /// Langevin correlation function from equilibrium starts.
    Simulate(SimulateArgs),
    /// Overlap and Wasserstein chaos under correlated disorder.
    Chaos(ChaosArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config, or a CSV previously written by the same command.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub p_min: Option<usize>,
    #[arg(long)]
    pub p_max: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ParisiArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Pure p-spin mixture (overrides --mixture).
    #[arg(long)]
    pub p: Option<usize>,
    /// Mixture coefficients of degrees 1, 2, ...
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mixture: Option<Vec<f64>>,
    #[arg(long = "beta", value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Number of grid intervals.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub q_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FpArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Uniform overlap grid: first point.
    #[arg(long, allow_hyphen_values = true)]
    pub q_min: Option<f64>,
    /// Uniform overlap grid: last point.
    #[arg(long)]
    pub q_last: Option<f64>,
    /// Uniform overlap grid: number of points.
    #[arg(long)]
    pub n_q: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ShatterArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "p", value_delimiter = ',')]
    pub p_list: Option<Vec<usize>>,
    /// Inverse temperatures as fractions of beta_c(p).
    #[arg(long = "beta-fraction", value_delimiter = ',')]
    pub beta_fractions: Option<Vec<f64>>,
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SamplerArg {
    LangevinEquilibrated,
    ReplicaExchange,
}

impl From<SamplerArg> for SamplerMethod {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::LangevinEquilibrated => SamplerMethod::LangevinEquilibrated,
            SamplerArg::ReplicaExchange => SamplerMethod::ReplicaExchange,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub n_steps: Option<usize>,
    #[arg(long)]
    pub record_every: Option<usize>,
    #[arg(long)]
    pub n_trajectories: Option<usize>,
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerArg>,
}

#[derive(Debug, Args)]
pub struct ChaosArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "epsilon", value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long)]
    pub n_disorders: Option<usize>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerArg>,
}

/// Outcome of a successful run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Summary {
    pub command: &'static str,
    pub rows: usize,
    /// Rows whose computation failed and carry an error column.
    pub failed_rows: usize,
}

fn load<T: DeserializeOwned + Default>(common: &CommonArgs, command: &str) -> Result<T> {
    match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
            parse_config(&text, command)
        }
        None => Ok(T::default()),
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// Renders the header line and CSV body.
pub fn render<C: Serialize, R: Serialize>(command: &str, config: &C, rows: &[R]) -> Result<Vec<u8>> {
    let mut buf = Header::new(command, config)?.to_line().into_bytes();
    buf.push(b'\n');
    let mut w = csv::Writer::from_writer(buf);
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, bytes).map_err(|e| Error::from(e).context(format!("writing {}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn finish<C: Serialize, R: Serialize>(
    command: &'static str,
    config: &C,
    out: Option<&Path>,
    table: Table<R>,
) -> Result<Summary> {
    let bytes = render(command, config, &table.rows)?;
    emit(&bytes, out)?;
    if table.failures > 0 {
        log::warn!("{command}: {} row(s) failed; see the error column", table.failures);
    }
    Ok(Summary {
        command,
        rows: table.rows.len(),
        failed_rows: table.failures,
    })
}

fn dispatch(command: Command) -> Result<Summary> {
    match command {
        Command::Phase(a) => {
            let mut cfg: PhaseConfig = load(&a.common, "phase")?;
            set(&mut cfg.seed, a.common.seed);
            set(&mut cfg.out, a.common.out.map(Some));
            set(&mut cfg.p_min, a.p_min);
            set(&mut cfg.p_max, a.p_max);
            set(&mut cfg.tol, a.tol);
            cfg.validate()?;
            finish("phase", &cfg, cfg.out.as_deref(), commands::phase(&cfg))
        }
        Command::Parisi(a) => {
            let mut cfg: ParisiConfig = load(&a.common, "parisi")?;
            set(&mut cfg.seed, a.common.seed);
            set(&mut cfg.out, a.common.out.map(Some));
            set(&mut cfg.mixture, a.mixture);
            if let Some(p) = a.p {
                cfg.mixture = crate::mixtures::MixtureFn::pure(p)?.coeffs().to_vec();
            }
            set(&mut cfg.betas, a.betas);
            set(&mut cfg.grid.m, a.m);
            set(&mut cfg.grid.q_max, a.q_max);
            cfg.validate()?;
            let table = commands::parisi(&cfg)?;
            finish("parisi", &cfg, cfg.out.as_deref(), table)
        }
        Command::Fp(a) => {
            let mut cfg: FpConfig = load(&a.common, "fp")?;
            set(&mut cfg.seed, a.common.seed);
            set(&mut cfg.out, a.common.out.map(Some));
            set(&mut cfg.p, a.p);
            set(&mut cfg.beta, a.beta);
            set(&mut cfg.grid.m, a.m);
            if a.q_min.is_some() || a.q_last.is_some() || a.n_q.is_some() {
                let (min, max, n) = match cfg.q_grid {
                    QGridSpec::Uniform { min, max, n } => (min, max, n),
                    QGridSpec::Geometric { .. } => (0.0, 0.999, 100),
                };
                cfg.q_grid = QGridSpec::Uniform {
                    min: a.q_min.unwrap_or(min),
                    max: a.q_last.unwrap_or(max),
                    n: a.n_q.unwrap_or(n),
                };
            }
            cfg.validate()?;
            let table = commands::fp(&cfg)?;
            finish("fp", &cfg, cfg.out.as_deref(), table)
        }
        Command::ShatterScan(a) => {
            let mut cfg: ShatterConfig = load(&a.common, "shatter-scan")?;
            set(&mut cfg.seed, a.common.seed);
            set(&mut cfg.out, a.common.out.map(Some));
            set(&mut cfg.p_list, a.p_list);
            set(&mut cfg.beta_fractions, a.beta_fractions);
            set(&mut cfg.grid.m, a.m);
            cfg.validate()?;
            let table = commands::shatter_scan(&cfg)?;
            finish("shatter-scan", &cfg, cfg.out.as_deref(), table)
        }
        Command::Simulate(a) => {
            let mut cfg: SimulateConfig = load(&a.common, "simulate")?;
            if let Some(seed) = a.common.seed {
                cfg.seed = seed;
                cfg.disorder_seed = None;
                cfg.dynamics_seed = None;
            }
            set(&mut cfg.out, a.common.out.map(Some));
            set(&mut cfg.n, a.n);
            set(&mut cfg.p, a.p);
            set(&mut cfg.beta, a.beta);
            set(&mut cfg.step, a.step);
            set(&mut cfg.n_steps, a.n_steps);
            set(&mut cfg.record_every, a.record_every);
            set(&mut cfg.n_trajectories, a.n_trajectories);
            set(&mut cfg.sampler.method, a.sampler.map(Into::into));
            cfg.resolve()?;
            let table = commands::simulate(&cfg)?;
            finish("simulate", &cfg, cfg.out.as_deref(), table)
        }
        Command::Chaos(a) => {
            let mut cfg: ChaosRunConfig = load(&a.common, "chaos")?;
            set(&mut cfg.seed, a.common.seed);
            set(&mut cfg.out, a.common.out.map(Some));
            set(&mut cfg.n, a.n);
            set(&mut cfg.p, a.p);
            set(&mut cfg.beta, a.beta);
            set(&mut cfg.epsilons, a.epsilons);
            set(&mut cfg.n_disorders, a.n_disorders);
            set(&mut cfg.n_samples, a.n_samples);
            set(&mut cfg.sampler.method, a.sampler.map(Into::into));
            cfg.validate()?;
            let table = commands::chaos(&cfg)?;
            finish("chaos", &cfg, cfg.out.as_deref(), table)
        }
    }
}

/// Runs a parsed command line inside a worker pool of the requested size.
pub fn run(cli: Cli) -> Result<Summary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

/// Parses `args` (including the program name) and runs them.
pub fn run_from<I, T>(args: I) -> Result<Summary>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(cli)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(path: &Path) -> String {
        let text = std::fs::read_to_string(path).unwrap();
        text.split_once('\n').unwrap().1.to_string()
    }

    #[test]
    fn phase_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("phase.csv");
        let s = run_from(["pspin", "phase", "--p-min", "3", "--p-max", "3", "--out", out.to_str().unwrap()]).unwrap();
        assert_eq!((s.rows, s.failed_rows), (1, 0));
        let text = std::fs::read_to_string(&out).unwrap();
        let header = parse_header(text.lines().next().unwrap()).unwrap();
        assert_eq!(header.command, "phase");
        assert_eq!(header.config["p_max"], 3);
        let csv_body = body(&out);
        let mut rdr = csv::Reader::from_reader(csv_body.as_bytes());
        let row = rdr.records().next().unwrap().unwrap();
        let beta_d: f64 = row[1].parse().unwrap();
        let beta_c: f64 = row[2].parse().unwrap();
        assert!((beta_d - 1.1547005383792515).abs() < 1e-8);
        assert!(beta_d < beta_c);
    }

    #[test]
    fn rerun_from_header_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a.csv");
        let second = dir.path().join("b.csv");
        run_from([
            "pspin", "parisi", "--p", "3", "--beta", "0.8,1.5", "--m", "128", "--out", first.to_str().unwrap(),
        ])
        .unwrap();
        run_from(["pspin", "parisi", "--config", first.to_str().unwrap(), "--out", second.to_str().unwrap()]).unwrap();
        assert_eq!(body(&first), body(&second));
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        let out = dir.path().join("o.csv");
        std::fs::write(&cfg, r#"{"p_min": 4, "p_max": 6}"#).unwrap();
        let s = run_from([
            "pspin", "phase", "--config", cfg.to_str().unwrap(), "--p-max", "5", "--out", out.to_str().unwrap(),
        ])
        .unwrap();
        assert_eq!(s.rows, 2);
    }

    #[test]
    fn hard_errors() {
        assert!(run_from(["pspin", "phase", "--p-min", "2"]).is_err());
        assert!(run_from(["pspin", "phase", "--config", "/nonexistent/x.json"]).is_err());
        assert!(run_from(["pspin", "bogus"]).is_err());
        assert!(run_from(["pspin", "simulate", "--n", "4096"]).is_err());
    }
}
