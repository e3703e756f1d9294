//! Command-line front end: experiment configuration, subcommands and output.
//!
//! A run reads one TOML experiment file (or the built-in defaults), applies
//! the command-line overrides, validates every field and writes a single
//! table as CSV or JSON.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::channel::{f_alpha_t, taps, ChannelGeometry, MemoryPolicy};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::link::TailModel;
use crate::montecarlo::{empirical_cdf, simulate_with, write_records_csv, SimConfig, RECORD_CSV_HEADER};
use crate::optimize::{
    alpha_star_closed_form, locate_ber_minimum, sid_grid_argmax, LinkParams, MinimumSearch, ThresholdPolicy,
};
use crate::table::{Cell, SweepResult};

/// Environment variable naming the directory searched for configuration.
pub const CONFIG_DIR_ENV: &str = "PCRX_CONFIG_DIR";

/// File looked up in the configuration directory when `--config` is absent.
pub const DEFAULT_CONFIG_FILE: &str = "pcrx.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "pcrx",
    version,
    about = "Partially counting absorbing receiver: channel, simulation and BER tools"
)]
pub struct Cli {
    /// Experiment file (TOML). Relative paths that do not exist are also
    /// looked up in the configuration directory.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Overrides both the simulation and the link seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Output file; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Worker threads; 1 runs sequentially. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory holding `pcrx.toml`.
    #[arg(long, global = true, env = CONFIG_DIR_ENV, value_name = "DIR")]
    pub config_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Analytic and simulated joint CDF over the angle and time grids.
    Cdf,
    /// Channel taps p_n for every counting angle.
    Taps,
    /// Monte Carlo BER per angle (and per M when link.m_grid is set).
    Ber,
    /// Closed-form, SID-grid and BER-grid optimal counting angles.
    Optimize,
    /// Peak time of the hitting rate per gap and angle.
    Peak,
    /// Raw per-molecule absorption records.
    Simulate,
    /// Prints the effective configuration as TOML.
    Config,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryBlock,
    pub region: RegionBlock,
    pub timing: TimingBlock,
    pub simulation: SimulationBlock,
    pub link: LinkBlock,
    pub output: OutputBlock,
}

/// Lengths in µm, diffusion coefficient in µm²/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryBlock {
    pub r0: f64,
    pub rr: f64,
    #[serde(rename = "D")]
    pub diffusivity: f64,
    /// Surface gaps d = r0 − rr scanned by `peak`.
    pub gaps: Vec<f64>,
}

/// Counting half-angles in radians. Give `alpha` or `alphas`, not both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// Appends the closed-form optimum (or its boundary suggestion).
    pub include_alpha_star: bool,
    /// Grid step of the SID argmax, degrees.
    pub sid_step_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingBlock {
    /// Symbol duration, seconds.
    pub t_s: f64,
    /// Evaluation times of `cdf`, seconds, ascending.
    pub times: Vec<f64>,
    /// Explicit memory length; overrides the truncation rule.
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub memory_length: Option<usize>,
    pub rel_tol: f64,
    pub max_taps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationBlock {
    /// When false `cdf` reports the analytic values only.
    pub enabled: bool,
    pub dt: f64,
    /// Defaults to the larger of 100·t_s and the last CDF time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub n_molecules: u64,
    pub seed: u64,
    pub far_field: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBlock {
    pub n1: u64,
    pub n0: u64,
    /// Fixed detection threshold; re-optimised per point when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u64>,
    pub n_bits: u64,
    pub prior1: f64,
    pub seed: u64,
    pub tail: TailModel,
    /// Bit-1 amounts swept by `ber`; empty means n1 only.
    pub m_grid: Vec<u64>,
    /// Whether `optimize` runs the BER angle search.
    pub search_minimum: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        GeometryBlock {
            r0: 10.0,
            rr: 5.0,
            diffusivity: 80.0,
            gaps: (3..=10).map(f64::from).collect(),
        }
    }
}

impl Default for RegionBlock {
    fn default() -> Self {
        RegionBlock {
            alpha: None,
            alphas: None,
            include_alpha_star: false,
            sid_step_deg: 0.1,
        }
    }
}

impl Default for TimingBlock {
    fn default() -> Self {
        let policy = MemoryPolicy::default();
        TimingBlock {
            t_s: 0.15,
            times: (1..=20).map(|k| 0.5 * k as f64).collect(),
            memory_length: None,
            rel_tol: policy.rel_tol,
            max_taps: policy.max_taps,
        }
    }
}

impl Default for SimulationBlock {
    fn default() -> Self {
        SimulationBlock {
            enabled: true,
            dt: 1e-4,
            t_max: None,
            n_molecules: 100_000,
            seed: 0,
            far_field: true,
        }
    }
}

impl Default for LinkBlock {
    fn default() -> Self {
        let p = LinkParams::default();
        LinkBlock {
            n1: p.n1,
            n0: p.n0,
            threshold: None,
            n_bits: p.n_bits,
            prior1: p.prior1,
            seed: p.seed,
            tail: p.tail,
            m_grid: Vec::new(),
            search_minimum: true,
        }
    }
}

/// Default counting angles: π/6, π/4, π/3, π/2, π.
pub fn default_alphas() -> Vec<f64> {
    vec![PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0, PI]
}

fn check_positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite and > 0, got {v}")))
    }
}

fn check_ascending(path: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::config(path, "must not be empty"));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::config(path, "must be strictly ascending"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(origin, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }

    /// Reads and validates a configuration file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_toml_str(&text, &path.display().to_string())
    }

    /// Configuration for a run: `explicit` when given (falling back to the
    /// directory for relative paths that do not exist), otherwise
    /// `dir/pcrx.toml` when present, otherwise the defaults.
    pub fn locate(explicit: Option<&Path>, dir: Option<&Path>) -> Result<Self> {
        match (explicit, dir) {
            (Some(p), Some(d)) if p.is_relative() && !p.exists() && d.join(p).exists() => {
                ExperimentConfig::from_path(&d.join(p))
            }
            (Some(p), _) => ExperimentConfig::from_path(p),
            (None, Some(d)) if d.join(DEFAULT_CONFIG_FILE).is_file() => {
                ExperimentConfig::from_path(&d.join(DEFAULT_CONFIG_FILE))
            }
            (None, _) => Ok(ExperimentConfig::default()),
        }
    }

    /// Checks every field; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        for (i, &gap) in self.geometry.gaps.iter().enumerate() {
            check_positive(&format!("geometry.gaps[{i}]"), gap)?;
        }
        check_ascending("geometry.gaps", &self.geometry.gaps)?;
        self.configured_alphas()?;
        let step = self.region.sid_step_deg;
        if !(step > 0.0 && step <= 180.0) {
            return Err(Error::config(
                "region.sid_step_deg",
                format!("must lie in (0, 180], got {step}"),
            ));
        }
        check_positive("timing.t_s", self.timing.t_s)?;
        for (i, &t) in self.timing.times.iter().enumerate() {
            check_positive(&format!("timing.times[{i}]"), t)?;
        }
        check_ascending("timing.times", &self.timing.times)?;
        self.memory_policy()?;
        let sim = &self.simulation;
        check_positive("simulation.dt", sim.dt)?;
        if sim.n_molecules == 0 {
            return Err(Error::config("simulation.n_molecules", "must be at least 1"));
        }
        if let Some(t_max) = sim.t_max {
            check_positive("simulation.t_max", t_max)?;
            if t_max < sim.dt {
                return Err(Error::config("simulation.t_max", "must be at least simulation.dt"));
            }
        }
        let link = &self.link;
        if link.n1 <= link.n0 {
            return Err(Error::config("link.n1", format!("must exceed link.n0 = {}", link.n0)));
        }
        if link.n_bits == 0 {
            return Err(Error::config("link.n_bits", "must be at least 1"));
        }
        if !(link.prior1 > 0.0 && link.prior1 < 1.0) {
            return Err(Error::config(
                "link.prior1",
                format!("must lie in (0, 1), got {}", link.prior1),
            ));
        }
        for (i, &m) in link.m_grid.iter().enumerate() {
            if m <= link.n0 {
                return Err(Error::config(
                    format!("link.m_grid[{i}]"),
                    format!("must exceed link.n0 = {}", link.n0),
                ));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ChannelGeometry> {
        let g = &self.geometry;
        ChannelGeometry::new(g.r0, g.rr, g.diffusivity).map_err(|e| match e {
            Error::Domain { name, expected, value } => {
                Error::config(format!("geometry.{name}"), format!("{expected}, got {value}"))
            }
            other => other,
        })
    }

    /// Angles given in the region block, before any α* is appended.
    pub fn configured_alphas(&self) -> Result<Vec<f64>> {
        let r = &self.region;
        let (alphas, path) = match (&r.alpha, &r.alphas) {
            (Some(_), Some(_)) => return Err(Error::config("region", "give either alpha or alphas, not both")),
            (Some(a), None) => (vec![*a], "region.alpha"),
            (None, Some(list)) => (list.clone(), "region.alphas"),
            (None, None) => (default_alphas(), "region.alphas"),
        };
        if alphas.is_empty() {
            return Err(Error::config(path, "must not be empty"));
        }
        for (i, &a) in alphas.iter().enumerate() {
            if !(0.0..=PI).contains(&a) {
                let at = if r.alpha.is_some() {
                    path.to_string()
                } else {
                    format!("{path}[{i}]")
                };
                return Err(Error::config(at, format!("must lie in [0, pi], got {a}")));
            }
        }
        Ok(alphas)
    }

    /// Configured angles, followed by the closed-form optimum when requested.
    pub fn alphas(&self) -> Result<Vec<f64>> {
        let mut alphas = self.configured_alphas()?;
        if self.region.include_alpha_star {
            let (a, _) = closed_form_or_boundary(&self.geometry()?, self.timing.t_s)?;
            alphas.push(a);
        }
        Ok(alphas)
    }

    pub fn memory_policy(&self) -> Result<MemoryPolicy> {
        let t = &self.timing;
        let policy = MemoryPolicy {
            rel_tol: t.rel_tol,
            max_taps: t.max_taps,
            length: t.memory_length,
        };
        policy.validate().map_err(|e| match e {
            Error::Domain { name, expected, value } => {
                let field = if name == "length" { "L" } else { name };
                Error::config(format!("timing.{field}"), format!("{expected}, got {value}"))
            }
            other => other,
        })?;
        Ok(policy)
    }

    pub fn link_params(&self) -> Result<LinkParams> {
        let l = &self.link;
        Ok(LinkParams {
            n1: l.n1,
            n0: l.n0,
            n_bits: l.n_bits,
            seed: l.seed,
            prior1: l.prior1,
            threshold: l.threshold.map_or(ThresholdPolicy::Optimize, ThresholdPolicy::Fixed),
            memory: self.memory_policy()?,
            tail: l.tail,
        })
    }

    /// Simulation horizon: the configured t_max or max(100·t_s, last CDF time).
    pub fn simulation_horizon(&self) -> f64 {
        self.simulation.t_max.unwrap_or_else(|| {
            let last = self.timing.times.last().copied().unwrap_or(0.0);
            (100.0 * self.timing.t_s).max(last)
        })
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let s = &self.simulation;
        Ok(
            SimConfig::new(self.geometry()?, s.dt, self.simulation_horizon(), s.n_molecules, s.seed)?
                .with_far_field(s.far_field),
        )
    }

    /// Applies the command-line overrides.
    pub fn apply_overrides(&mut self, cli: &Cli) {
        if let Some(seed) = cli.seed {
            self.simulation.seed = seed;
            self.link.seed = seed;
        }
        if let Some(format) = cli.format {
            self.output.format = format;
        }
        if let Some(out) = &cli.out {
            self.output.path = Some(out.clone());
        }
    }
}

/// Closed-form α*, or the boundary it suggests when no interior optimum
/// exists. The flag is true for an interior optimum.
pub fn closed_form_or_boundary(geom: &ChannelGeometry, t_s: f64) -> Result<(f64, bool)> {
    match alpha_star_closed_form(geom, t_s) {
        Ok(a) => Ok((a, true)),
        Err(Error::NoInteriorOptimum { boundary, .. }) => Ok((boundary, false)),
        Err(e) => Err(e),
    }
}

/// Process exit code for an error: 2 configuration, 3 numeric, 4 I/O.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Domain { .. } => 2,
        Error::Numeric(_) | Error::Contract(_) | Error::NoInteriorOptimum { .. } => 3,
        Error::Io(_) => 4,
    }
}

fn execution(threads: Option<usize>) -> Result<Execution> {
    match threads {
        Some(0) => Err(Error::config("--threads", "must be at least 1")),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Execution::Sequential),
        None => Ok(Execution::default()),
    }
}

/// Result of a subcommand, ready to be written.
pub enum Output {
    Table(SweepResult),
    Text(String),
    Records(Vec<crate::montecarlo::HitRecord>),
}

impl Output {
    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        match (self, format) {
            (Output::Table(t), Format::Csv) => t.write_csv(&mut buf)?,
            (Output::Table(t), Format::Json) => t.write_json(&mut buf)?,
            (Output::Text(s), _) => buf.extend_from_slice(s.as_bytes()),
            (Output::Records(r), Format::Csv) => write_records_csv(r, &mut buf)?,
            (Output::Records(r), Format::Json) => records_table(r).write_json(&mut buf)?,
        }
        Ok(buf)
    }
}

fn records_table(records: &[crate::montecarlo::HitRecord]) -> SweepResult {
    let mut t = SweepResult::new(&RECORD_CSV_HEADER);
    for r in records {
        t.push(vec![Cell::from(r.molecule_id), r.hit_time.into(), r.hit_angle.into()]);
    }
    t
}

/// Loads the configuration, applies the overrides, runs the subcommand and
/// writes its output.
pub fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = ExperimentConfig::locate(cli.config.as_deref(), cli.config_dir.as_deref())?;
    cfg.apply_overrides(cli);
    cfg.validate()?;
    let exec = execution(cli.threads)?;
    let output = run_command(cli.command, &cfg, exec)?;
    let bytes = output.render(cfg.output.format)?;
    match &cfg.output.path {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

pub fn run_command(command: Command, cfg: &ExperimentConfig, exec: Execution) -> Result<Output> {
    Ok(match command {
        Command::Cdf => Output::Table(cmd_cdf(cfg, exec)?),
        Command::Taps => Output::Table(cmd_taps(cfg)?),
        Command::Ber => Output::Table(cmd_ber(cfg, exec)?),
        Command::Optimize => Output::Table(cmd_optimize(cfg, exec)?),
        Command::Peak => Output::Table(cmd_peak(cfg)?),
        Command::Simulate => Output::Records(simulate_with(&cfg.sim_config()?, exec)?),
        Command::Config => Output::Text(cfg.to_toml_string()),
    })
}

/// Rows (alpha_rad, time_s, f_analytic, f_empirical, n_molecules).
pub fn cmd_cdf(cfg: &ExperimentConfig, exec: Execution) -> Result<SweepResult> {
    let geom = cfg.geometry()?;
    let alphas = cfg.alphas()?;
    let times = &cfg.timing.times;
    let empirical = if cfg.simulation.enabled {
        let sim = cfg.sim_config()?;
        if sim.t_max() < *times.last().expect("validated non-empty") {
            return Err(Error::config("simulation.t_max", "must cover the last of timing.times"));
        }
        let records = simulate_with(&sim, exec)?;
        let per_alpha = alphas
            .iter()
            .map(|&a| empirical_cdf(&records, sim.n_molecules(), &[a], times))
            .collect::<Result<Vec<_>>>()?;
        Some((per_alpha, sim.n_molecules()))
    } else {
        None
    };
    let mut t = SweepResult::new(&["alpha_rad", "time_s", "f_analytic", "f_empirical", "n_molecules"]);
    for (i, &a) in alphas.iter().enumerate() {
        for (j, &time) in times.iter().enumerate() {
            let (emp, n) = match &empirical {
                Some((cdfs, n)) => (Cell::from(cdfs[i].value(0, j)), Cell::from(*n)),
                None => (Cell::Missing, Cell::from(0u64)),
            };
            t.push(vec![a.into(), time.into(), f_alpha_t(&geom, a, time)?.into(), emp, n]);
        }
    }
    Ok(t)
}

/// Rows (alpha_rad, alpha_deg, n, p_n, cumulative, tail_mass).
pub fn cmd_taps(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let geom = cfg.geometry()?;
    let policy = cfg.memory_policy()?;
    let t_s = cfg.timing.t_s;
    let mut t = SweepResult::new(&["alpha_rad", "alpha_deg", "n", "p_n", "cumulative", "tail_mass"]);
    for a in cfg.alphas()? {
        let tv = taps(&geom, a, t_s, policy.resolve(&geom, a, t_s)?)?;
        let mut cum = 0.0;
        for (k, &p) in tv.taps().iter().enumerate() {
            cum += p;
            t.push(vec![
                a.into(),
                a.to_degrees().into(),
                Cell::from(k + 1),
                p.into(),
                cum.into(),
                tv.tail_mass().into(),
            ]);
        }
    }
    Ok(t)
}

/// Rows (alpha_rad, alpha_deg, m, ber, ci_halfwidth, threshold_used, errors, bits).
pub fn cmd_ber(cfg: &ExperimentConfig, exec: Execution) -> Result<SweepResult> {
    let geom = cfg.geometry()?;
    let base = cfg.link_params()?;
    let ms = if cfg.link.m_grid.is_empty() {
        vec![base.n1]
    } else {
        cfg.link.m_grid.clone()
    };
    let mut t = SweepResult::new(&[
        "alpha_rad",
        "alpha_deg",
        "m",
        "ber",
        "ci_halfwidth",
        "threshold_used",
        "errors",
        "bits",
    ]);
    let alphas = cfg.alphas()?;
    for m in ms {
        let params = LinkParams { n1: m, ..base };
        for &a in &alphas {
            let r = params.ber(&geom, a, cfg.timing.t_s, exec)?;
            t.push(vec![
                a.into(),
                a.to_degrees().into(),
                Cell::from(m),
                r.ber.into(),
                r.confidence_halfwidth_95.into(),
                Cell::from(r.threshold),
                Cell::from(r.errors),
                Cell::from(r.bits),
            ]);
        }
    }
    Ok(t)
}

/// One row comparing the three optimal-angle estimates, in degrees.
pub fn cmd_optimize(cfg: &ExperimentConfig, exec: Execution) -> Result<SweepResult> {
    let geom = cfg.geometry()?;
    let t_s = cfg.timing.t_s;
    let (closed, interior) = closed_form_or_boundary(&geom, t_s)?;
    let sid = sid_grid_argmax(&geom, t_s, cfg.region.sid_step_deg.to_radians())?;
    let ber = if cfg.link.search_minimum {
        Some(locate_ber_minimum(
            &geom,
            t_s,
            &cfg.link_params()?,
            &MinimumSearch::default(),
            exec,
        )?)
    } else {
        None
    };
    let deg = |x: f64| Cell::from(x.to_degrees());
    let ber_alpha = ber.as_ref().map(|b| b.alpha());
    let mut t = SweepResult::new(&[
        "t_s",
        "alpha_star_closed_form_deg",
        "closed_form_kind",
        "alpha_star_sid_grid_deg",
        "alpha_star_ber_grid_deg",
        "alpha_star_ber_fit_deg",
        "ber_fit_halfwidth_deg",
        "gap_closed_sid_deg",
        "gap_sid_ber_deg",
        "gap_closed_ber_deg",
    ]);
    t.push(vec![
        t_s.into(),
        deg(closed),
        if interior { "interior" } else { "boundary" }.into(),
        deg(sid),
        ber.as_ref().map_or(Cell::Missing, |b| deg(b.grid.alpha)),
        ber.as_ref().and_then(|b| b.fit).map_or(Cell::Missing, |f| deg(f.alpha)),
        ber.as_ref()
            .and_then(|b| b.fit)
            .map_or(Cell::Missing, |f| deg(f.halfwidth_95)),
        deg((closed - sid).abs()),
        ber_alpha.map_or(Cell::Missing, |b| deg((sid - b).abs())),
        ber_alpha.map_or(Cell::Missing, |b| deg((closed - b).abs())),
    ]);
    Ok(t)
}

/// Least-squares slope of ln y on ln x; `None` for fewer than two points.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Rows (gap_um, alpha_rad, t_peak_s, slope); `slope` is the log–log slope
/// of t_peak against the gap for that angle, empty for a single gap.
pub fn cmd_peak(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let g = &cfg.geometry;
    let alphas = cfg.alphas()?;
    if let Some(i) = alphas.iter().position(|&a| a == 0.0) {
        return Err(Error::config(
            format!("region.alphas[{i}]"),
            "peak time needs alpha > 0",
        ));
    }
    let mut t = SweepResult::new(&["gap_um", "alpha_rad", "t_peak_s", "slope"]);
    for &a in &alphas {
        let peaks = g
            .gaps
            .iter()
            .map(|&d| {
                let geom = ChannelGeometry::with_gap(d, g.rr, g.diffusivity)?;
                crate::channel::peak_time(&geom, a)
            })
            .collect::<Result<Vec<_>>>()?;
        let slope = log_log_slope(&g.gaps, &peaks);
        for (&d, &tp) in g.gaps.iter().zip(&peaks) {
            t.push(vec![d.into(), a.into(), tp.into(), slope.into()]);
        }
    }
    Ok(t)
}
