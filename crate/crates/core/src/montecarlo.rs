//! Brownian-motion particle simulator for the absorbing sphere.
//!
//! The receiver is centred at the origin and the transmitter sits at
//! (r₀, 0, 0). Each molecule takes independent Gaussian steps with per-axis
//! variance 2DΔt and is absorbed at the first point where its straight-line
//! step meets the sphere. Crossings that happen inside a step and return are
//! missed, so the absorbed fraction is biased low and converges from below as
//! Δt shrinks.
//!
//! Every molecule draws from its own ChaCha8 stream keyed by (seed, molecule
//! id), and results are gathered in molecule order, so the output is a pure
//! function of the configuration whatever the thread count.

use std::io::Write;

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelGeometry;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::table::{csv_err, fmt_f64};

/// Header of the raw-record CSV dump.
pub const RECORD_CSV_HEADER: [&str; 3] = ["molecule_id", "hit_time_s", "hit_angle_rad"];

/// With far-field stepping enabled, a molecule at surface distance δ takes a
/// step of (δ/FAR_FIELD_SIGMAS)²/(2D) when that exceeds Δt, i.e. a step whose
/// per-axis standard deviation is δ/FAR_FIELD_SIGMAS.
pub const FAR_FIELD_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    geometry: ChannelGeometry,
    dt: f64,
    t_max: f64,
    n_molecules: u64,
    seed: u64,
    far_field: bool,
}

impl SimConfig {
    /// Fixed-step configuration. `dt` and `t_max` in seconds.
    pub fn new(geometry: ChannelGeometry, dt: f64, t_max: f64, n_molecules: u64, seed: u64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain("dt", dt, "time step must be finite and > 0"));
        }
        if !(t_max >= dt) || !t_max.is_finite() {
            return Err(Error::domain("t_max", t_max, "horizon must be finite and >= dt"));
        }
        if n_molecules == 0 {
            return Err(Error::domain("n_molecules", 0.0, "need at least one molecule"));
        }
        Ok(SimConfig {
            geometry,
            dt,
            t_max,
            n_molecules,
            seed,
            far_field: false,
        })
    }

    /// Enables longer steps far from the receiver (see [`FAR_FIELD_SIGMAS`]).
    /// Near the surface the step is always `dt`.
    pub fn with_far_field(mut self, enabled: bool) -> Self {
        self.far_field = enabled;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn geometry(&self) -> &ChannelGeometry {
        &self.geometry
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_molecules(&self) -> u64 {
        self.n_molecules
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn far_field(&self) -> bool {
        self.far_field
    }

    /// Per-axis standard deviation √(2DΔt) of one base step.
    pub fn step_sigma(&self) -> f64 {
        (2.0 * self.geometry.diffusivity() * self.dt).sqrt()
    }
}

/// First hit of one absorbed molecule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitRecord {
    pub molecule_id: u64,
    /// Seconds after release.
    pub hit_time: f64,
    /// Polar angle of the absorption point from the axis towards the
    /// transmitter, in [0, π].
    pub hit_angle: f64,
}

type Vec3 = [f64; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Smallest λ ∈ [0, 1] with |p + λ(q − p)| = rr, for p outside the sphere.
fn entry_fraction(p: &Vec3, q: &Vec3, rr: f64) -> Option<f64> {
    let c = dot(p, p) - rr * rr;
    if c <= 0.0 {
        return None;
    }
    let v = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let a = dot(&v, &v);
    let b = 2.0 * dot(p, &v);
    if a == 0.0 || b >= 0.0 {
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    // both roots are positive; this is the smaller one without cancellation
    let lambda = 2.0 * c / (-b + disc.sqrt());
    (lambda <= 1.0).then_some(lambda)
}

/// First intersection of the step `p_prev → p_next` with the sphere of
/// radius `rr`, returned as (point, fraction of the step).
pub fn crossing_point(p_prev: Vec3, p_next: Vec3, rr: f64) -> Result<(Vec3, f64)> {
    let lambda = entry_fraction(&p_prev, &p_next, rr).ok_or_else(|| {
        Error::Contract(format!(
            "segment {p_prev:?} -> {p_next:?} does not enter the sphere of radius {rr}"
        ))
    })?;
    let point = [
        p_prev[0] + lambda * (p_next[0] - p_prev[0]),
        p_prev[1] + lambda * (p_next[1] - p_prev[1]),
        p_prev[2] + lambda * (p_next[2] - p_prev[2]),
    ];
    Ok((point, lambda))
}

fn polar_angle(p: &Vec3) -> f64 {
    (p[1] * p[1] + p[2] * p[2]).sqrt().atan2(p[0])
}

fn molecule_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn track(cfg: &SimConfig, id: u64) -> Result<Option<HitRecord>> {
    let mut rng = molecule_rng(cfg.seed, id);
    let g = &cfg.geometry;
    let rr = g.rr();
    let two_d = 2.0 * g.diffusivity();
    let mut pos: Vec3 = [g.r0(), 0.0, 0.0];
    let mut t = 0.0;
    let mut steps = 0u64;
    // fixed stepping keeps t = k·dt exactly; far-field steps accumulate
    let fixed = !cfg.far_field;
    loop {
        let remaining = cfg.t_max - t;
        if remaining <= 1e-12 * cfg.t_max {
            return Ok(None);
        }
        let mut h = cfg.dt;
        if cfg.far_field {
            let gap = dot(&pos, &pos).sqrt() - rr;
            let far = (gap / FAR_FIELD_SIGMAS).powi(2) / two_d;
            if far > h {
                h = far;
            }
        }
        h = h.min(remaining);
        let sigma = (two_d * h).sqrt();
        let step: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let next = [
            pos[0] + sigma * step[0],
            pos[1] + sigma * step[1],
            pos[2] + sigma * step[2],
        ];
        if !next.iter().all(|x| x.is_finite()) {
            return Err(Error::Numeric(format!(
                "molecule {id} reached a non-finite position at t = {t}"
            )));
        }
        if let Some(lambda) = entry_fraction(&pos, &next, rr) {
            let point = [
                pos[0] + lambda * (next[0] - pos[0]),
                pos[1] + lambda * (next[1] - pos[1]),
                pos[2] + lambda * (next[2] - pos[2]),
            ];
            return Ok(Some(HitRecord {
                molecule_id: id,
                hit_time: (t + lambda * h).min(cfg.t_max),
                hit_angle: polar_angle(&point),
            }));
        }
        pos = next;
        steps += 1;
        t = if fixed { steps as f64 * cfg.dt } else { t + h };
    }
}

/// Runs every molecule and returns the records of the absorbed ones, in
/// molecule order.
pub fn simulate(cfg: &SimConfig) -> Result<Vec<HitRecord>> {
    simulate_with(cfg, Execution::default())
}

pub fn simulate_with(cfg: &SimConfig, exec: Execution) -> Result<Vec<HitRecord>> {
    let per_molecule = exec.map(0..cfg.n_molecules, |id| track(cfg, id));
    let mut out = Vec::new();
    for r in per_molecule {
        if let Some(rec) = r? {
            out.push(rec);
        }
    }
    Ok(out)
}

/// Fraction of released molecules absorbed with angle ≤ α and time ≤ t on an
/// (α, t) grid. `values[i][j]` belongs to `alphas[i]`, `times[j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdf {
    pub alphas: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub n_molecules: u64,
}

impl EmpiricalCdf {
    pub fn value(&self, alpha_index: usize, time_index: usize) -> f64 {
        self.values[alpha_index][time_index]
    }
}

fn check_ascending(name: &'static str, xs: &[f64]) -> Result<()> {
    if let Some(w) = xs.windows(2).find(|w| !(w[0] <= w[1])) {
        return Err(Error::domain(name, w[1], "grid must be nondecreasing"));
    }
    Ok(())
}

pub fn empirical_cdf(records: &[HitRecord], n_molecules: u64, alphas: &[f64], times: &[f64]) -> Result<EmpiricalCdf> {
    if n_molecules == 0 {
        return Err(Error::domain("n_molecules", 0.0, "need at least one molecule"));
    }
    if (records.len() as u64) > n_molecules {
        return Err(Error::Contract(format!(
            "{} records for {n_molecules} molecules",
            records.len()
        )));
    }
    check_ascending("alpha", alphas)?;
    check_ascending("t", times)?;
    let mut by_angle: Vec<&HitRecord> = records.iter().collect();
    by_angle.sort_by(|a, b| a.hit_angle.total_cmp(&b.hit_angle));
    let n = n_molecules as f64;
    let values = alphas
        .iter()
        .map(|&alpha| {
            let inside = by_angle.partition_point(|r| r.hit_angle <= alpha);
            let mut t_sorted: Vec<f64> = by_angle[..inside].iter().map(|r| r.hit_time).collect();
            t_sorted.sort_by(f64::total_cmp);
            times
                .iter()
                .map(|&t| t_sorted.partition_point(|&h| h <= t) as f64 / n)
                .collect()
        })
        .collect();
    Ok(EmpiricalCdf {
        alphas: alphas.to_vec(),
        times: times.to_vec(),
        values,
        n_molecules,
    })
}

/// Writes records as CSV with header `molecule_id,hit_time_s,hit_angle_rad`.
pub fn write_records_csv<W: Write>(records: &[HitRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(RECORD_CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([r.molecule_id.to_string(), fmt_f64(r.hit_time), fmt_f64(r.hit_angle)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
