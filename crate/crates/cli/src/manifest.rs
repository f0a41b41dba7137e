use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use snowflake_embed::generators::PRNG_ID;
use snowflake_embed::io::{write_json, SCHEMA_VERSION};

use crate::args::{Command, GlobalArgs};
use crate::CliError;

/// The fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub global: GlobalArgs,
    pub command: Command,
}

/// Record of one run; replaying `config` reproduces `outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub prng: String,
    /// Wall-clock start in seconds since the epoch; informational only and
    /// kept out of the artifacts themselves.
    pub started_unix: u64,
    pub config: RunConfig,
    pub outputs: Vec<PathBuf>,
}

fn absolute(p: &Path) -> Result<PathBuf, CliError> {
    std::path::absolute(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
}

impl RunConfig {
    /// Fills the output directory and makes every path absolute.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let out = self.global.out_dir.take().unwrap_or_else(|| PathBuf::from("."));
        self.global.out_dir = Some(absolute(&out)?);
        let abs = |p: &mut PathBuf| -> Result<(), CliError> {
            *p = absolute(p)?;
            Ok(())
        };
        match &mut self.command {
            Command::Gen(_) | Command::Pipeline(_) | Command::Replay(_) => {}
            Command::Dims(a) => abs(&mut a.input)?,
            Command::Params(a) => {
                if let Some(p) = a.input.as_mut() {
                    abs(p)?;
                }
            }
            Command::Nets(a) => {
                abs(&mut a.input)?;
                abs(&mut a.params)?;
            }
            Command::Embed(a) => {
                abs(&mut a.input)?;
                if let Some(p) = a.params.as_mut() {
                    abs(p)?;
                }
            }
            Command::Verify(a) => {
                abs(&mut a.input)?;
                abs(&mut a.embedding)?;
            }
        }
        Ok(self)
    }

    pub fn out_dir(&self) -> &Path {
        self.global.out_dir.as_deref().unwrap_or(Path::new("."))
    }

    /// `name` under the output directory unless already absolute.
    pub fn output(&self, name: &Path) -> PathBuf {
        self.out_dir().join(name)
    }

    pub fn write_manifest(&self, outputs: Vec<PathBuf>) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            schema: SCHEMA_VERSION,
            tool: "snowflake-embed".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            prng: PRNG_ID.into(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            config: self.clone(),
            outputs,
        };
        let path = self.output(Path::new(&format!("{}.manifest.json", self.command.name())));
        write_json(&path, &manifest)?;
        Ok(path)
    }
}
