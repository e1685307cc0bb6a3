//! TOML experiment files and their merge with command-line flags.
//!
//! Precedence: flag, then `JAMMING_*` environment variable (both resolved by
//! clap), then the config file.

use std::path::{Path, PathBuf};

use jamming_core::{Error, Kernel, KernelSpec, Result};
use serde::Deserialize;

/// Every key an experiment file may contain. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub lambda: Option<f64>,
    pub horizon: Option<f64>,
    pub p: Option<f64>,
    pub paths: Option<usize>,
    pub preset: Option<String>,
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub kernel: Option<KernelSpec>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Parameters after merging flags with the config file.
#[derive(Debug, Default)]
pub struct Settings {
    pub n: Option<usize>,
    pub c: Option<f64>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub lambda: Option<f64>,
    pub horizon: Option<f64>,
    pub p: Option<f64>,
    pub paths: Option<usize>,
    pub preset: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub kernel: Option<KernelSpec>,
    /// Directory of the config file, for relative table paths.
    pub base_dir: Option<PathBuf>,
}

impl Settings {
    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("--seed is required for simulation commands".into()))
    }

    pub fn runs(&self, default: usize) -> Result<usize> {
        match self.runs.unwrap_or(default) {
            0 => Err(Error::InvalidParameter("runs must be at least 1".into())),
            r => Ok(r),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(jamming_core::fluid::DEFAULT_DT)
    }

    /// The kernel named by `--N`/`--c` (Erdős–Rényi) or by the config file.
    /// Flags override the matching fields of an `er` kernel block.
    pub fn kernel(&self) -> Result<Kernel> {
        let (file_n, file_c) = match &self.kernel {
            Some(KernelSpec::Er { n, c }) => (Some(*n), Some(*c)),
            Some(spec @ KernelSpec::Table { .. }) => {
                if self.n.is_some() || self.c.is_some() {
                    return Err(Error::Config(
                        "--N/--c cannot be combined with a table kernel".into(),
                    ));
                }
                return Kernel::from_spec(spec, self.base_dir.as_deref());
            }
            None => (None, None),
        };
        let n = self.n.or(file_n).ok_or_else(|| Error::Config("missing --N".into()))?;
        let c = self.c.or(file_c).ok_or_else(|| Error::Config("missing --c".into()))?;
        Kernel::erdos_renyi(n, c)
    }

    /// `c` from the flags or an `er` kernel block, if any.
    pub fn er_c(&self) -> Option<f64> {
        self.c.or(match &self.kernel {
            Some(KernelSpec::Er { c, .. }) => Some(*c),
            _ => None,
        })
    }
}
