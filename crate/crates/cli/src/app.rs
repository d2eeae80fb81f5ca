//! Command implementations shared by the binary and the tests.

use std::path::{Path, PathBuf};

use crate::accept::{run_suite, suite_result, DEFAULT_SEED};
use crate::config::{Format, RunConfig};
use crate::error::{CliError, Result};
use crate::jobs::{run_task, tasks, Section};
use crate::output::{artifacts, write_outputs, JobResult, Manifest};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Flagged,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Clean => 0,
            Outcome::Flagged => 2,
        }
    }
}

struct Resolved {
    config: RunConfig,
    seed: u64,
    out: PathBuf,
    formats: Vec<Format>,
    pool: rayon::ThreadPool,
}

fn resolve(opts: &RunOptions, config: RunConfig, default_seed: Option<u64>, default_out: Option<&str>) -> Result<Resolved> {
    let seed = opts
        .seed
        .or(config.seed)
        .or(default_seed)
        .ok_or_else(|| CliError::Usage("no seed: set `seed` in the config or pass --seed".into()))?;
    let out = opts
        .out
        .clone()
        .or_else(|| config.out.clone())
        .or_else(|| default_out.map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("no output directory: set `out` in the config or pass --out".into()))?;
    let formats = opts.format.map(|f| vec![f]).unwrap_or_else(|| config.formats.clone());
    if formats.is_empty() {
        return Err(CliError::Usage("at least one output format is needed".into()));
    }
    let workers = opts.workers.or(config.workers).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    Ok(Resolved { config, seed, out, formats, pool })
}

fn finish(out: &Path, results: &[JobResult], formats: &[Format]) -> Result<(Manifest, Outcome)> {
    let arts = artifacts(results, formats)?;
    let manifest = write_outputs(out, &arts)?;
    let mut outcome = Outcome::Clean;
    for r in results {
        for f in &r.output.flags {
            eprintln!("FLAG {}: {f}", r.output.name);
            outcome = Outcome::Flagged;
        }
    }
    Ok((manifest, outcome))
}

/// Runs one config section and writes its outputs.
pub fn run_section(section: Section, opts: &RunOptions) -> Result<(Manifest, Outcome)> {
    let path = opts.config.as_deref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let r = resolve(opts, RunConfig::load(path)?, None, None)?;
    let list = tasks(&r.config, section, r.seed);
    let results = r.pool.install(|| list.iter().map(run_task).collect::<Result<Vec<_>>>())?;
    finish(&r.out, &results, &r.formats)
}

/// Runs acceptance criteria 1 to 10, printing one line per criterion.
pub fn run_accept(opts: &RunOptions) -> Result<(Manifest, Outcome)> {
    let config = match opts.config.as_deref() {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let r = resolve(opts, config, Some(DEFAULT_SEED), Some("acceptance"))?;
    let criteria = r.pool.install(|| run_suite(r.seed, |c, d| println!("{} [{:.1} s]", c.line(), d.as_secs_f64())))?;
    let result = suite_result(r.seed, &criteria)?;
    finish(&r.out, &[result], &r.formats)
}
