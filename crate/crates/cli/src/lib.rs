//! The `snowflake-embed` command-line tool.
//!
//! Each stage reads and writes versioned JSON files, so any stage can be run
//! on its own or replaced. Every run also writes `<subcommand>.manifest.json`
//! into the output directory; `snowflake-embed replay <manifest>` re-executes
//! it and reproduces the artifacts byte for byte.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 when the inputs are valid
//! but the construction fails (no admissible tau, color budget exceeded,
//! vector selection stuck). Failures are reported as JSON on stderr.

pub mod args;
mod commands;
mod manifest;

use std::ffi::OsString;

use clap::Parser;
use serde_json::{json, Value};

use snowflake_embed::params::ParamError;
use snowflake_embed::Error as LibError;

pub use args::{Cli, Command, OUT_DIR_ENV};
pub use manifest::{Manifest, RunConfig};

/// Failure of one invocation.
#[derive(Debug)]
pub enum CliError {
    Lib(LibError),
    /// Bad or missing arguments.
    Usage(String),
    /// `--require-pass` and the report failed.
    BoundsFailed(String),
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        CliError::Lib(e)
    }
}

macro_rules! lib_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Lib(e.into())
            }
        }
    )*};
}
lib_from!(
    snowflake_embed::io::IoError,
    snowflake_embed::metric_space::MetricError,
    snowflake_embed::dimension::DimensionError,
    snowflake_embed::params::ParamError,
    snowflake_embed::nets::NetError,
    snowflake_embed::embedding::EmbedError,
    snowflake_embed::verify::VerifyError,
    snowflake_embed::generators::GeneratorError
);

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) if e.is_mathematical() => 2,
            CliError::BoundsFailed(_) => 2,
            _ => 1,
        }
    }

    /// Machine-readable diagnostic written to stderr.
    pub fn diagnostic(&self) -> Value {
        let (kind, message, details) = match self {
            CliError::Lib(e) => (e.kind(), e.to_string(), lib_details(e)),
            CliError::Usage(m) => ("Usage", m.clone(), Value::Null),
            CliError::BoundsFailed(m) => ("BoundsFailed", m.clone(), Value::Null),
        };
        json!({
            "error": kind,
            "message": message,
            "exit_code": self.exit_code(),
            "details": details,
        })
    }
}

fn lib_details(e: &LibError) -> Value {
    use snowflake_embed::embedding::EmbedError;
    use snowflake_embed::nets::NetError;
    match e {
        LibError::Param(ParamError::NoFeasibleTau { grid_step, caps }) => json!({
            "grid_step": grid_step,
            "analytic_tau_cap": caps.overall,
            "caps": caps,
        }),
        LibError::Param(ParamError::BudgetOverflow { log10_value, cap }) => json!({
            "log10_budget": log10_value,
            "cap": cap,
        }),
        LibError::Net(NetError::BudgetExceeded { level, point, needed, budget })
        | LibError::Embed(EmbedError::Net(NetError::BudgetExceeded { level, point, needed, budget })) => json!({
            "level": level,
            "point": point,
            "needed": needed,
            "budget": budget,
        }),
        LibError::Embed(EmbedError::SelectionFailed { k, point, color, direction, supplied, pairs, killed }) => json!({
            "k": k,
            "point": point,
            "color": color,
            "direction": direction,
            "supplied": supplied.to_string(),
            "pairs": pairs,
            "killed": killed,
        }),
        _ => Value::Null,
    }
}

/// Parses `argv` (including the program name), runs it and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.global.log_level.filter())
        .format_timestamp(None)
        .is_test(cfg!(test))
        .try_init();
    log::set_max_level(cli.global.log_level.filter());

    match execute(cli) {
        Ok(stdout) => {
            println!("{stdout}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<String, CliError> {
    let config = match cli.command {
        Command::Replay(r) => {
            let manifest: Manifest = snowflake_embed::io::read_json(&r.manifest)?;
            let mut config = manifest.config;
            // Explicit flags win over the recorded ones.
            if cli.global.out_dir.is_some() {
                config.global.out_dir = cli.global.out_dir;
            }
            if cli.global.threads.is_some() {
                config.global.threads = cli.global.threads;
            }
            config
        }
        command => RunConfig {
            global: cli.global,
            command,
        },
    };
    let config = config.resolve()?;
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = config.global.threads {
            builder = builder.num_threads(n);
        }
        builder
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?
    };
    pool.install(|| commands::dispatch(&config))
}
