//! Choice of the counting angle: the signal-to-interference difference
//! SID(α) = 2F(α, t_s) − F(α, ∞), its grid maximiser, the closed-form
//! approximation α*, and Monte Carlo BER sweeps over α.

use std::f64::consts::PI;

use serde::Serialize;

use crate::channel::{
    f_alpha_inf, fhit, r0_star, taps, u_of_t, ChannelGeometry, EiCoefficient, JointCdf, MemoryPolicy,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::link::{ber_monte_carlo_with, ber_with_optimal_threshold, training_seed, BerResult, LinkConfig, TailModel};
use crate::specfun::{ei_neg_f, erfc_f};
use crate::table::{Cell, SweepResult};

/// Default grid step of SID argmax searches, 0.1°.
pub const DEFAULT_STEP: f64 = PI / 1800.0;

/// 2F(α, t_s) − F(α, ∞).
pub fn sid(geom: &ChannelGeometry, alpha: f64, t_s: f64) -> Result<f64> {
    let cdf = JointCdf::new(geom, t_s)?;
    Ok(2.0 * cdf.cdf(alpha)? - f_alpha_inf(geom, alpha)?)
}

/// {0, step, 2·step, …} up to π, with π appended when step does not divide it.
pub fn angle_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() || step > PI {
        return Err(Error::domain("step", step, "grid step must lie in (0, pi]"));
    }
    let n = PI / step;
    let whole = n.round();
    let mut grid: Vec<f64> = if (n - whole).abs() < 1e-9 * n {
        (0..whole as usize).map(|i| i as f64 * step).collect()
    } else {
        (0..=n.floor() as usize).map(|i| i as f64 * step).collect()
    };
    grid.push(PI);
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SidCurve {
    pub alphas: Vec<f64>,
    pub sid_values: Vec<f64>,
    pub argmax_alpha: f64,
}

impl SidCurve {
    pub fn argmax_index(&self) -> usize {
        first_extreme(&self.sid_values, |a, b| a > b)
    }

    /// Whether the forward differences change from positive to nonpositive
    /// at the argmax, i.e. the optimum is an interior stationary point.
    pub fn derivative_changes_sign(&self) -> bool {
        let i = self.argmax_index();
        if i == 0 || i + 1 >= self.sid_values.len() {
            return false;
        }
        let v = &self.sid_values;
        v[i] - v[i - 1] > 0.0 && v[i + 1] - v[i] <= 0.0
    }
}

/// Index of the first element that no later element beats under `better`.
fn first_extreme(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if better(v, values[best]) {
            best = i;
        }
    }
    best
}

/// SID on the grid of [`angle_grid`].
pub fn sid_curve(geom: &ChannelGeometry, t_s: f64, step: f64, exec: Execution) -> Result<SidCurve> {
    let alphas = angle_grid(step)?;
    let cdf = JointCdf::new(geom, t_s)?;
    let values = exec.map(0..alphas.len() as u64, |i| {
        let a = alphas[i as usize];
        Ok(2.0 * cdf.cdf(a)? - f_alpha_inf(geom, a)?)
    });
    let sid_values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    let best = first_extreme(&sid_values, |a, b| a > b);
    Ok(SidCurve {
        argmax_alpha: alphas[best],
        alphas,
        sid_values,
    })
}

/// Grid maximiser of SID; ties resolve to the smallest α.
pub fn sid_grid_argmax(geom: &ChannelGeometry, t_s: f64, step: f64) -> Result<f64> {
    Ok(sid_curve(geom, t_s, step, Execution::default())?.argmax_alpha)
}

/// Length scale in which the closed-form constants are evaluated. The
/// closed form adds Y (a length) to M (an area), so its value depends on the
/// unit; the derivation works in metres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum LengthUnit {
    #[default]
    Metre,
    Micrometre,
}

impl LengthUnit {
    /// Length of one micrometre in this unit.
    fn scale(self) -> f64 {
        match self {
            LengthUnit::Metre => 1e-6,
            LengthUnit::Micrometre => 1.0,
        }
    }
}

/// Constants of the small-x expansion of SID.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SidConstants {
    /// D·t_s.
    pub a: f64,
    /// −2·r_r·F_hit(t_s)/U(t_s).
    pub y: f64,
    /// r₀²/2.
    pub m_const: f64,
    /// r₀*(α)² = r₀² − 2r₀r_r cos α + r_r².
    pub x: f64,
}

impl SidConstants {
    pub fn new(geom: &ChannelGeometry, alpha: f64, t_s: f64, unit: LengthUnit) -> Result<Self> {
        let s = unit.scale();
        let u = u_of_t(geom, t_s)?;
        if !(u > 0.0) {
            return Err(Error::Numeric(format!("U({t_s}) = {u} leaves Y undefined")));
        }
        let y = -2.0 * geom.rr() * s * fhit(geom, t_s)? / u;
        let dist = r0_star(geom, alpha)? * s;
        Ok(SidConstants {
            a: geom.diffusivity() * s * s * t_s,
            y,
            m_const: (geom.r0() * s).powi(2) / 2.0,
            x: dist * dist,
        })
    }

    /// The α-dependent erfc/Ei group of SID,
    /// Y·(a·erfc(√x/√(4a)) + k·√a·√x·Ei(−x/4a))/(a·√x).
    pub fn sid1_exact(&self, coef: EiCoefficient) -> f64 {
        let k = match coef {
            EiCoefficient::Exact => 0.5 / PI.sqrt(),
            EiCoefficient::Alternate => 1.0 / (2.0 * PI).sqrt(),
        };
        let (a, x) = (self.a, self.x);
        let sx = x.sqrt();
        self.y * (a * erfc_f(sx / (4.0 * a).sqrt()) + k * a.sqrt() * sx * ei_neg_f(-x / (4.0 * a))) / (a * sx)
    }

    /// Y/√x − Y·ln x/(2√(πa)).
    pub fn sid1_series(&self) -> f64 {
        self.y / self.x.sqrt() - self.y * self.x.ln() / (2.0 * (PI * self.a).sqrt())
    }
}

/// Largest relative gap between [`SidConstants::sid1_series`] and
/// [`SidConstants::sid1_exact`] over `alphas`.
pub fn sid1_series_error(
    geom: &ChannelGeometry,
    t_s: f64,
    alphas: &[f64],
    unit: LengthUnit,
    coef: EiCoefficient,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &alpha in alphas {
        let c = SidConstants::new(geom, alpha, t_s, unit)?;
        let exact = c.sid1_exact(coef);
        worst = worst.max(((c.sid1_series() - exact) / exact).abs());
    }
    Ok(worst)
}

/// arccos((r₀² + r_r² − x*)/(2r₀r_r)) with √x* = √(πa)·(Y + M)/Y, evaluated
/// in metres.
///
/// An argument outside [−1, 1] is reported as [`Error::NoInteriorOptimum`]
/// with the boundary angle the optimum saturates at (π when x* exceeds
/// (r₀ + r_r)², 0 when it falls below (r₀ − r_r)²).
pub fn alpha_star_closed_form(geom: &ChannelGeometry, t_s: f64) -> Result<f64> {
    alpha_star_closed_form_in(geom, t_s, LengthUnit::Metre)
}

pub fn alpha_star_closed_form_in(geom: &ChannelGeometry, t_s: f64, unit: LengthUnit) -> Result<f64> {
    let c = SidConstants::new(geom, 0.0, t_s, unit)?;
    let s = unit.scale();
    let (r0, rr) = (geom.r0() * s, geom.rr() * s);
    let x_star = PI * c.a * ((c.y + c.m_const) / c.y).powi(2);
    let argument = (r0 * r0 + rr * rr - x_star) / (2.0 * r0 * rr);
    if !argument.is_finite() {
        return Err(Error::Numeric(format!("closed-form arccos argument is {argument}")));
    }
    if !(-1.0..=1.0).contains(&argument) {
        return Err(Error::NoInteriorOptimum {
            argument,
            boundary: if argument < -1.0 { PI } else { 0.0 },
        });
    }
    Ok(argument.acos())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ThresholdPolicy {
    /// Re-optimise τ for every configuration on a separate training run.
    Optimize,
    Fixed(u64),
}

/// Link settings shared by every point of a BER sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkParams {
    pub n1: u64,
    pub n0: u64,
    pub n_bits: u64,
    pub seed: u64,
    pub prior1: f64,
    pub threshold: ThresholdPolicy,
    pub memory: MemoryPolicy,
    pub tail: TailModel,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            n1: 300,
            n0: 0,
            n_bits: 1_000_000,
            seed: 0,
            prior1: 0.5,
            threshold: ThresholdPolicy::Optimize,
            memory: MemoryPolicy::default(),
            tail: TailModel::MeanField,
        }
    }
}

impl LinkParams {
    /// Taps for (α, t_s) and the link configuration built on them.
    pub fn link_config(&self, geom: &ChannelGeometry, alpha: f64, t_s: f64) -> Result<LinkConfig> {
        let len = self.memory.resolve(geom, alpha, t_s)?;
        let tv = taps(geom, alpha, t_s, len)?;
        let threshold = match self.threshold {
            ThresholdPolicy::Fixed(t) => t,
            ThresholdPolicy::Optimize => 0,
        };
        Ok(
            LinkConfig::new(tv, self.n1, self.n0, threshold, self.n_bits, self.seed)?
                .with_prior1(self.prior1)?
                .with_tail(self.tail),
        )
    }

    /// BER at (α, t_s) under the threshold policy.
    pub fn ber(&self, geom: &ChannelGeometry, alpha: f64, t_s: f64, exec: Execution) -> Result<BerResult> {
        let cfg = self.link_config(geom, alpha, t_s)?;
        match self.threshold {
            ThresholdPolicy::Fixed(_) => ber_monte_carlo_with(&cfg, exec),
            ThresholdPolicy::Optimize => ber_with_optimal_threshold(&cfg, exec),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerPoint {
    pub alpha: f64,
    pub result: BerResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerSweep {
    pub points: Vec<BerPoint>,
}

impl BerSweep {
    /// Lowest-BER point; ties resolve to the smallest α.
    pub fn argmin(&self) -> Option<&BerPoint> {
        let bers: Vec<f64> = self.points.iter().map(|p| p.result.ber).collect();
        (!bers.is_empty()).then(|| &self.points[first_extreme(&bers, |a, b| a < b)])
    }

    pub fn to_table(&self) -> SweepResult {
        let mut t = SweepResult::new(&[
            "alpha_rad",
            "alpha_deg",
            "ber",
            "ci_halfwidth",
            "threshold_used",
            "errors",
            "bits",
        ]);
        for p in &self.points {
            let r = &p.result;
            t.push(vec![
                p.alpha.into(),
                p.alpha.to_degrees().into(),
                r.ber.into(),
                r.confidence_halfwidth_95.into(),
                Cell::from(r.threshold),
                Cell::from(r.errors),
                Cell::from(r.bits),
            ]);
        }
        t
    }
}

/// Builds taps, picks the threshold and measures the BER at every α. All
/// points share the link seed.
pub fn sweep_ber_vs_alpha(
    geom: &ChannelGeometry,
    t_s: f64,
    alphas: &[f64],
    params: &LinkParams,
    exec: Execution,
) -> Result<BerSweep> {
    let points = alphas
        .iter()
        .map(|&alpha| {
            Ok(BerPoint {
                alpha,
                result: params.ber(geom, alpha, t_s, exec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BerSweep { points })
}

/// Two-stage search for the BER-minimising counting angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimumSearch {
    /// Coarse grid step, radians; the grid runs from one step up to π.
    pub coarse_step: f64,
    /// Fine grid step, radians.
    pub fine_step: f64,
    /// Half-span of the fine grid around the coarse minimum, radians.
    pub fine_halfspan: f64,
}

impl Default for MinimumSearch {
    fn default() -> Self {
        MinimumSearch {
            coarse_step: 10f64.to_radians(),
            fine_step: 1f64.to_radians(),
            fine_halfspan: 10f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerMinimum {
    /// Lowest-BER point over both grids.
    pub grid: BerPoint,
    /// Quadratic fit over the fine grid, when one could be made.
    pub fit: Option<ArgminFit>,
    pub coarse: BerSweep,
    pub fine: BerSweep,
}

impl BerMinimum {
    /// Fitted minimiser when available, grid minimiser otherwise.
    pub fn alpha(&self) -> f64 {
        self.fit.map_or(self.grid.alpha, |f| f.alpha)
    }
}

/// Coarse sweep with the link seed, then a fine sweep around its minimum in
/// which every angle gets its own seed so that the points are independent
/// samples for [`fit_ber_minimum`].
pub fn locate_ber_minimum(
    geom: &ChannelGeometry,
    t_s: f64,
    params: &LinkParams,
    search: &MinimumSearch,
    exec: Execution,
) -> Result<BerMinimum> {
    let n = (PI / search.coarse_step).round().max(1.0) as usize;
    let coarse_alphas: Vec<f64> = (1..=n).map(|i| (i as f64 * search.coarse_step).min(PI)).collect();
    let coarse = sweep_ber_vs_alpha(geom, t_s, &coarse_alphas, params, exec)?;
    let centre = coarse
        .argmin()
        .ok_or_else(|| Error::Numeric("empty coarse BER sweep".into()))?
        .alpha;
    let k = (search.fine_halfspan / search.fine_step).round() as i64;
    let fine_alphas: Vec<f64> = (-k..=k)
        .map(|i| centre + i as f64 * search.fine_step)
        .filter(|a| *a > 0.0 && *a <= PI + 1e-12)
        .map(|a| a.min(PI))
        .collect();
    let points = fine_alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let p = LinkParams {
                seed: training_seed(params.seed.wrapping_add(i as u64 + 1)),
                ..*params
            };
            Ok(BerPoint {
                alpha,
                result: p.ber(geom, alpha, t_s, exec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fine = BerSweep { points };
    let mut all: Vec<BerPoint> = coarse.points.iter().chain(&fine.points).copied().collect();
    all.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let grid = *BerSweep { points: all }.argmin().expect("coarse sweep is not empty");
    let samples: Vec<(f64, f64, u64)> = fine
        .points
        .iter()
        .map(|p| (p.alpha, p.result.ber, p.result.bits))
        .collect();
    Ok(BerMinimum {
        grid,
        fit: fit_ber_minimum(&samples).ok(),
        coarse,
        fine,
    })
}

/// Minimiser of a noisy BER curve from a weighted quadratic fit of ln BER.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArgminFit {
    /// Vertex of the fitted parabola, radians.
    pub alpha: f64,
    /// 95% half-width of `alpha` (delta method), radians.
    pub halfwidth_95: f64,
    /// Points that entered the fit.
    pub points: usize,
    /// Residual χ² per degree of freedom.
    pub reduced_chi2: f64,
}

/// Fits ln BER = c₀ + c₁x + c₂x² over `points` (α in radians, BER, bits),
/// weighting each point by its inverse binomial variance of ln BER,
/// n·p/(1 − p). Points with zero errors are skipped. The covariance is
/// inflated by the reduced χ² when that exceeds 1. The vertex must fall
/// inside the sampled range.
pub fn fit_ber_minimum(points: &[(f64, f64, u64)]) -> Result<ArgminFit> {
    let usable: Vec<&(f64, f64, u64)> = points.iter().filter(|p| p.1 > 0.0 && p.1 < 1.0).collect();
    if usable.len() < 5 {
        return Err(Error::Numeric(format!(
            "BER minimum fit needs at least 5 points with errors, got {}",
            usable.len()
        )));
    }
    let center = usable.iter().map(|p| p.0).sum::<f64>() / usable.len() as f64;
    // normal equations in degrees about the centre, for conditioning
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for &&(alpha, ber, bits) in &usable {
        let x = (alpha - center).to_degrees();
        let w = bits as f64 * ber / (1.0 - ber);
        let row = [1.0, x, x * x];
        for i in 0..3 {
            aty[i] += w * row[i] * ber.ln();
            for j in 0..3 {
                ata[i][j] += w * row[i] * row[j];
            }
        }
    }
    let cov = invert3(&ata).ok_or_else(|| Error::Numeric("BER minimum fit is singular".into()))?;
    let c: Vec<f64> = (0..3).map(|i| (0..3).map(|j| cov[i][j] * aty[j]).sum()).collect();
    if !(c[2] > 0.0) {
        return Err(Error::Numeric("fitted ln BER curve has no minimum".into()));
    }
    let dof = usable.len() - 3;
    let chi2: f64 = usable
        .iter()
        .map(|&&(alpha, ber, bits)| {
            let x = (alpha - center).to_degrees();
            let w = bits as f64 * ber / (1.0 - ber);
            w * (ber.ln() - (c[0] + c[1] * x + c[2] * x * x)).powi(2)
        })
        .sum();
    let reduced = chi2 / dof as f64;
    let inflate = reduced.max(1.0);
    let vertex = -c[1] / (2.0 * c[2]);
    let (lo, hi) = usable
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.0), h.max(p.0)));
    let alpha = center + vertex.to_radians();
    if !(lo..=hi).contains(&alpha) {
        return Err(Error::Numeric(format!(
            "fitted BER minimum {alpha} lies outside the sampled range [{lo}, {hi}]"
        )));
    }
    let g = [0.0, -1.0 / (2.0 * c[2]), c[1] / (2.0 * c[2] * c[2])];
    let var: f64 = (0..3)
        .map(|i| (0..3).map(|j| g[i] * cov[i][j] * g[j]).sum::<f64>())
        .sum::<f64>()
        * inflate;
    Ok(ArgminFit {
        alpha,
        halfwidth_95: 1.96 * var.sqrt().to_radians(),
        points: usable.len(),
        reduced_chi2: reduced,
    })
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r1, r2) = ((j + 1) % 3, (j + 2) % 3);
            let (c1, c2) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        let g = angle_grid(PI / 4.0).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), PI);
        let g = angle_grid(1.0).unwrap();
        assert_eq!(g, vec![0.0, 1.0, 2.0, 3.0, PI]);
        assert_eq!(angle_grid(DEFAULT_STEP).unwrap().len(), 1801);
        assert!(angle_grid(0.0).is_err());
        assert!(angle_grid(-1.0).is_err());
    }

    #[test]
    fn sid_edges() {
        let g = ChannelGeometry::default();
        assert_eq!(sid(&g, 0.0, 0.15).unwrap(), 0.0);
        // 2·F_hit(0.15) − 0.5
        let full = sid(&g, PI, 0.15).unwrap();
        assert!((full - (2.0 * 0.153_717_082_963_697_7 - 0.5)).abs() < 1e-12, "{full}");
    }

    #[test]
    fn ties_pick_the_first() {
        assert_eq!(first_extreme(&[1.0, 3.0, 3.0, 2.0], |a, b| a > b), 1);
        assert_eq!(first_extreme(&[2.0, 1.0, 1.0], |a, b| a < b), 1);
    }

    #[test]
    fn closed_form_in_micrometres_has_no_interior_optimum() {
        let g = ChannelGeometry::default();
        match alpha_star_closed_form_in(&g, 0.15, LengthUnit::Micrometre) {
            Err(Error::NoInteriorOptimum { argument, boundary }) => {
                assert!(argument < -1.0);
                assert_eq!(boundary, PI);
            }
            other => panic!("expected boundary outcome, got {other:?}"),
        }
    }

    #[test]
    fn quadratic_fit_recovers_vertex() {
        let pts: Vec<(f64, f64, u64)> = (20..=40)
            .map(|d| {
                let x = d as f64 - 31.3;
                ((d as f64).to_radians(), (-4.0 + 0.002 * x * x).exp(), 1_000_000)
            })
            .collect();
        let fit = fit_ber_minimum(&pts).unwrap();
        assert!((fit.alpha.to_degrees() - 31.3).abs() < 1e-6, "{fit:?}");
        assert!(fit.halfwidth_95 > 0.0 && fit.halfwidth_95 < 1f64.to_radians());
        let m = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let inv = invert3(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                assert!((e - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(fit_ber_minimum(&pts[..4]).is_err());
        let shifted: Vec<(f64, f64, u64)> = (20..=40)
            .map(|d| {
                (
                    (d as f64).to_radians(),
                    (-4.0 + 0.002 * (d as f64 - 60.0).powi(2)).exp(),
                    10_000,
                )
            })
            .collect();
        assert!(fit_ber_minimum(&shifted).is_err());
        let hump: Vec<(f64, f64, u64)> = (20..=40)
            .map(|d| {
                (
                    (d as f64).to_radians(),
                    (-4.0 - 0.002 * (d as f64 - 30.0).powi(2)).exp(),
                    10_000,
                )
            })
            .collect();
        assert!(fit_ber_minimum(&hump).is_err());
    }

    #[test]
    fn sid_constants_signs() {
        let g = ChannelGeometry::default();
        let c = SidConstants::new(&g, 1.0, 0.15, LengthUnit::Metre).unwrap();
        assert!(c.a > 0.0 && c.y < 0.0 && c.y.is_finite());
        assert!(c.x >= 25e-12 * (1.0 - 1e-12) && c.x <= 225e-12);
        assert!((c.m_const - 5e-11).abs() < 1e-24);
    }
}
