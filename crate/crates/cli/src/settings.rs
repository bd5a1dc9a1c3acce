use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lifespan_core::lab::{parse_config, parse_eps_list, ConfigMap};
use lifespan_core::wave::ProfileKind;

/// Lifespan experiments for the damped wave equation `u_tt − Δu + u_t = |u|^p`.
#[derive(Debug, Parser)]
#[command(name = "lifespan", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the heat kernel (mass, semigroup, heat residual order).
    KernelCheck,
    /// Lifespan sweep of the PDE over the ε grid.
    PdeSweep,
    /// Lifespan sweep of the comparison ODE over the ε grid.
    OdeSweep,
    /// Heat-kernel functionals of a snapshot dump.
    Functionals,
    /// Fit a lifespan law to a sweep report.
    Fit,
}

/// Options shared by all subcommands. Each may also be given in the config
/// file under its long name; flags win.
#[derive(Debug, Default, Args)]
pub struct Opts {
    /// Flat `key = value` file with defaults for any option below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Comma separated ε values.
    #[arg(long, global = true)]
    pub eps: Option<String>,
    #[arg(long, global = true)]
    pub dr: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Final time (PDE) or integration horizon (ODE).
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true, value_parser = ProfileKind::from_str)]
    pub profile: Option<ProfileKind>,
    /// Initial velocity is this multiple of the profile.
    #[arg(long, global = true)]
    pub g_scale: Option<f64>,
    /// Adaptive step factor.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Snapshot spacing.
    #[arg(long, global = true)]
    pub cadence: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub c0: Option<f64>,
    /// ODE form: `second` (with inertia) or `first`.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Start of the γ̃ recursion.
    #[arg(long, global = true)]
    pub t0: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Input file of `functionals` (snapshot dump) and `fit` (report).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Directory receiving one snapshot dump per ε.
    #[arg(long, global = true)]
    pub dump: Option<PathBuf>,
    /// Optional lifespan report of `ode-sweep`.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Law for `fit`: auto, critical, subcritical, ode-critical, ode-subcritical.
    #[arg(long, global = true)]
    pub law: Option<String>,
    /// Concurrent runs; 0 uses every core.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Refinement level: each level halves dr, dt, θ and the cadence.
    #[arg(long, global = true)]
    pub refine: Option<u32>,
}

const KEYS: &[&str] = &[
    "dim", "p", "eps", "dr", "dt", "t-max", "profile", "g-scale", "theta", "cadence", "beta", "alpha", "c0", "mode",
    "t0", "out", "input", "dump", "report", "law", "workers", "seed", "refine",
];

/// Flag values backed by the config file.
pub struct Resolved<'a> {
    opts: &'a Opts,
    file: ConfigMap,
}

impl<'a> Resolved<'a> {
    pub fn new(opts: &'a Opts) -> Result<Self> {
        let file = match &opts.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                parse_config(&text).with_context(|| format!("in config {}", path.display()))?
            }
            None => ConfigMap::new(),
        };
        if let Some(key) = file.keys().find(|k| !KEYS.contains(&k.as_str())) {
            bail!("unknown config key `{key}`");
        }
        Ok(Self { opts, file })
    }

    fn lookup<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key `{key}`: invalid value `{raw}`: {e}")),
            None => Ok(None),
        }
    }

    pub fn dim(&self) -> Result<Option<usize>> {
        self.lookup(self.opts.dim, "dim")
    }
    pub fn p(&self) -> Result<Option<f64>> {
        self.lookup(self.opts.p, "p")
    }
    pub fn eps(&self) -> Result<Option<Vec<f64>>> {
        match self.lookup(self.opts.eps.clone(), "eps")? {
            Some(text) => Ok(Some(parse_eps_list(&text)?)),
            None => Ok(None),
        }
    }
    pub fn dr(&self) -> Result<Option<f64>> {
        self.lookup(self.opts.dr, "dr")
    }
    pub fn dt(&self) -> Result<Option<f64>> {
        self.lookup(self.opts.dt, "dt")
    }
    pub fn t_max(&self) -> Result<Option<f64>> {
        self.lookup(self.opts.t_max, "t-max")
    }
    pub fn profile(&self) -> Result<Option<ProfileKind>> {
        self.lookup(self.opts.profile, "profile")
    }
    pub fn g_scale(&self) -> Result<Option<f64>> {
        self.lookup(self.opts.g_scale, "g-scale")
    }
    pub fn theta(&self) -> Result<Option<f64>> {
        self.lookup(self.opts.theta, "theta")
    }
    pub fn cadence(&self) -> Result<Option<f64>> {
        self.lookup(self.opts.cadence, "cadence")
    }
    pub fn beta(&self) -> Result<Option<f64>> {
        self.lookup(self.opts.beta, "beta")
    }
    pub fn alpha(&self) -> Result<Option<f64>> {
        self.lookup(self.opts.alpha, "alpha")
    }
    pub fn c0(&self) -> Result<Option<f64>> {
        self.lookup(self.opts.c0, "c0")
    }
    pub fn mode(&self) -> Result<Option<String>> {
        self.lookup(self.opts.mode.clone(), "mode")
    }
    pub fn t0(&self) -> Result<Option<f64>> {
        self.lookup(self.opts.t0, "t0")
    }
    pub fn out(&self) -> Result<Option<PathBuf>> {
        self.lookup(self.opts.out.clone(), "out")
    }
    pub fn input(&self) -> Result<Option<PathBuf>> {
        self.lookup(self.opts.input.clone(), "input")
    }
    pub fn dump(&self) -> Result<Option<PathBuf>> {
        self.lookup(self.opts.dump.clone(), "dump")
    }
    pub fn report(&self) -> Result<Option<PathBuf>> {
        self.lookup(self.opts.report.clone(), "report")
    }
    pub fn law(&self) -> Result<Option<String>> {
        self.lookup(self.opts.law.clone(), "law")
    }
    pub fn workers(&self) -> Result<Option<usize>> {
        self.lookup(self.opts.workers, "workers")
    }
    pub fn seed(&self) -> Result<Option<u64>> {
        self.lookup(self.opts.seed, "seed")
    }
    pub fn refine(&self) -> Result<Option<u32>> {
        self.lookup(self.opts.refine, "refine")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "dim = 3\np = 2\nprofile = cone\n").unwrap();
        let opts = Opts {
            config: Some(path),
            p: Some(1.5),
            ..Opts::default()
        };
        let r = Resolved::new(&opts).unwrap();
        assert_eq!(r.dim().unwrap(), Some(3));
        assert_eq!(r.p().unwrap(), Some(1.5));
        assert_eq!(r.profile().unwrap(), Some(ProfileKind::Cone));
        assert_eq!(r.dr().unwrap(), None);
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "dimension = 3\n").unwrap();
        let opts = Opts {
            config: Some(path.clone()),
            ..Opts::default()
        };
        assert!(Resolved::new(&opts).is_err());
        std::fs::write(&path, "dim = three\n").unwrap();
        let r = Resolved::new(&opts).unwrap();
        assert!(r.dim().is_err());
    }
}
