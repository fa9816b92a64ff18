//! Library side of the `trajspec` binary: configuration, the per-command
//! pipeline and artifact writing.

pub mod artifacts;
pub mod config;
pub mod pipeline;
pub mod report;
pub mod svg;

use std::fmt;

use trajspec::cache::ContentCache;

use crate::artifacts::{Artifacts, Meta, ARTIFACT_VERSION};
use crate::config::{ConfigError, Overrides, RunConfig};
use crate::pipeline::{Context, Failure, PipelineError};

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some instruments or pairs failed; the rest were written.
    Partial,
    ConfigError,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Partial => 1,
            Outcome::ConfigError => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Table1,
    Dist,
    Qq,
    Spectrum,
    Ensemble,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Table1 => "table1",
            Command::Dist => "dist",
            Command::Qq => "qq",
            Command::Spectrum => "spectrum",
            Command::Ensemble => "ensemble",
            Command::Report => "report",
        }
    }

    fn needs_instruments(self) -> bool {
        self != Command::Ensemble
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn context(config: RunConfig) -> Context {
    let meta = Meta {
        artifact_version: ARTIFACT_VERSION,
        config_hash: config.hash(),
        seed: config.seed,
    };
    let cache = config
        .cache
        .then(|| ContentCache::new(config.output.join(".cache")));
    Context {
        artifacts: Artifacts::new(config.output.clone(), meta),
        cache,
        config,
    }
}

fn execute(command: Command, ctx: &Context) -> Result<Vec<Failure>, PipelineError> {
    if command == Command::Ensemble {
        pipeline::ensemble(ctx)?;
        return Ok(Vec::new());
    }
    let (instruments, mut failures) = pipeline::load_instruments(ctx);
    match command {
        Command::Table1 => failures.extend(pipeline::table1(ctx, &instruments)?.failures),
        Command::Dist => failures.extend(pipeline::distributions(ctx, &instruments)?.failures),
        Command::Qq => failures.extend(pipeline::qq(ctx, &instruments)?.failures),
        Command::Spectrum => {
            let ensemble = pipeline::ensemble(ctx)?;
            failures.extend(pipeline::spectra(ctx, &instruments, ensemble)?.failures);
        }
        Command::Report => failures = report::run(ctx, instruments, failures)?,
        Command::Ensemble => unreachable!(),
    }
    Ok(failures)
}

/// Runs `command` with a loaded configuration and reports problems on
/// stderr.
pub fn run_config(command: Command, config: RunConfig) -> Outcome {
    if command.needs_instruments() && config.instruments.is_empty() {
        eprintln!("error: no instruments given; use --instrument, --fixture, --demo or a config file");
        return Outcome::ConfigError;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if config.jobs > 0 {
        builder = builder.num_threads(config.jobs);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}", PipelineError::Pool(e.to_string()));
            return Outcome::Partial;
        }
    };
    let ctx = context(config);
    let result = pool.install(|| execute(command, &ctx));
    let failures = match result {
        Ok(f) => f,
        Err(PipelineError::Config(e)) => {
            eprintln!("error: {e}");
            return Outcome::ConfigError;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Outcome::Partial;
        }
    };
    if let Err(e) = ctx.manifest(command.name()) {
        eprintln!("error: {e}");
        return Outcome::Partial;
    }
    for f in &failures {
        eprintln!("warning: {} ({}): {}", f.instrument, f.stage, f.error);
    }
    if failures.is_empty() {
        Outcome::Success
    } else {
        Outcome::Partial
    }
}

pub fn run(command: Command, overrides: &Overrides) -> Outcome {
    match RunConfig::load(overrides) {
        Ok(config) => run_config(command, config),
        Err(e) => {
            report_config_error(&e);
            Outcome::ConfigError
        }
    }
}

fn report_config_error(e: &ConfigError) {
    eprintln!("error: {e}");
}
