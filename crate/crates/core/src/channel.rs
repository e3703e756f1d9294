//! Analytical channel model for a point transmitter and an absorbing sphere
//! that counts only molecules hitting a cap of half-angle α facing the
//! transmitter.
//!
//! Angles θ are measured at the receiver centre from the axis pointing at the
//! transmitter. With γ = r_r/r₀ the distance from the transmitter to the
//! surface point at angle θ is r₀*(θ) = r₀·√(1 − 2γ cos θ + γ²).
//!
//! The joint density of the absorption angle and "absorbed by time t" is
//!
//! ```text
//! p(θ, t) = F_hit(t) · κ(θ) erfc(r₀*(θ)/√(4Dt)) / ∫₀^π κ(θ') erfc(r₀*(θ')/√(4Dt)) dθ'
//! κ(θ)    = sin θ / (1 − 2γ cos θ + γ²)^{3/2}
//! ```
//!
//! and F(α, t) = ∫₀^α p(θ, t) dθ. The denominator integral is U(t).
//!
//! ## Closed forms
//!
//! Substituting s = r₀*(θ) turns κ·erfc into (r₀²/r_r)·erfc(s/c)/s² ds with
//! c = √(4Dt), whose antiderivative is −H(s) with
//!
//! ```text
//! H(s) = erfc(s/c)/s + Ei(−s²/c²) / (2√(π D t))
//! U(t)    = (r₀²/r_r) · [H(r₀ − r_r) − H(r₀ + r_r)]
//! F(α, t) = r₀ · erfc((r₀ − r_r)/c) · [H(r₀ − r_r) − H(r₀*(α))] / U(t)
//! ```
//!
//! The adaptive quadrature of p(θ, t) is the reference path ([`f_alpha_t`]);
//! the closed form ([`f_alpha_t_closed`]) is kept as an independent
//! cross-check. Units are micrometres and seconds throughout.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::Integrator;
use crate::scalar::{bracket_max_on_grid, golden_section_max};
use crate::specfun::{ei_neg_f, erfc_f, erfcx_f};

/// Transmitter/receiver geometry and the medium's diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct ChannelGeometry {
    r0: f64,
    rr: f64,
    diffusivity: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    r0: f64,
    rr: f64,
    #[serde(rename = "D")]
    diffusivity: f64,
}

impl TryFrom<RawGeometry> for ChannelGeometry {
    type Error = Error;
    fn try_from(raw: RawGeometry) -> Result<Self> {
        ChannelGeometry::new(raw.r0, raw.rr, raw.diffusivity)
    }
}

impl From<ChannelGeometry> for RawGeometry {
    fn from(g: ChannelGeometry) -> Self {
        RawGeometry {
            r0: g.r0,
            rr: g.rr,
            diffusivity: g.diffusivity,
        }
    }
}

impl Default for ChannelGeometry {
    /// r₀ = 10 µm, r_r = 5 µm, D = 80 µm²/s.
    fn default() -> Self {
        ChannelGeometry {
            r0: 10.0,
            rr: 5.0,
            diffusivity: 80.0,
        }
    }
}

impl ChannelGeometry {
    /// `r0`: transmitter to receiver-centre distance (µm), `rr`: receiver
    /// radius (µm), `diffusivity`: D (µm²/s).
    pub fn new(r0: f64, rr: f64, diffusivity: f64) -> Result<Self> {
        if !(rr > 0.0) || !rr.is_finite() {
            return Err(Error::domain("rr", rr, "receiver radius must be finite and > 0"));
        }
        if !(r0 > rr) || !r0.is_finite() {
            return Err(Error::domain("r0", r0, "transmitter distance must exceed rr"));
        }
        if !(diffusivity > 0.0) || !diffusivity.is_finite() {
            return Err(Error::domain(
                "D",
                diffusivity,
                "diffusion coefficient must be finite and > 0",
            ));
        }
        Ok(ChannelGeometry { r0, rr, diffusivity })
    }

    /// Geometry with a given surface gap d = r₀ − r_r.
    pub fn with_gap(gap: f64, rr: f64, diffusivity: f64) -> Result<Self> {
        ChannelGeometry::new(rr + gap, rr, diffusivity)
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn rr(&self) -> f64 {
        self.rr
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    /// Shortest transmitter-to-surface distance d = r₀ − r_r.
    pub fn gap(&self) -> f64 {
        self.r0 - self.rr
    }

    /// γ = r_r / r₀.
    pub fn ratio(&self) -> f64 {
        self.rr / self.r0
    }

    /// Angular kernel sin θ / (1 − 2γ cos θ + γ²)^{3/2}.
    fn kernel(&self, theta: f64) -> f64 {
        let g = self.ratio();
        let q = 1.0 - 2.0 * g * theta.cos() + g * g;
        theta.sin() / (q * q.sqrt())
    }

    /// r₀*(θ)² − d², written with 1 − cos θ = 2 sin²(θ/2) to keep precision
    /// near θ = 0.
    fn excess_sq(&self, theta: f64) -> f64 {
        let s = (0.5 * theta).sin();
        4.0 * self.r0 * self.rr * s * s
    }

    fn distance_at(&self, theta: f64) -> f64 {
        (self.gap().powi(2) + self.excess_sq(theta)).sqrt()
    }
}

/// Half-aperture α of the counting cap; α = π counts the whole sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CountingRegion {
    alpha: f64,
}

impl CountingRegion {
    pub fn new(alpha: f64) -> Result<Self> {
        check_angle("alpha", alpha)?;
        Ok(CountingRegion { alpha })
    }

    pub fn full() -> Self {
        CountingRegion { alpha: PI }
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        CountingRegion::new(deg.to_radians())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl TryFrom<f64> for CountingRegion {
    type Error = Error;
    fn try_from(alpha: f64) -> Result<Self> {
        CountingRegion::new(alpha)
    }
}

impl From<CountingRegion> for f64 {
    fn from(r: CountingRegion) -> f64 {
        r.alpha
    }
}

fn check_angle(name: &'static str, angle: f64) -> Result<()> {
    if !(0.0..=PI).contains(&angle) {
        return Err(Error::domain(name, angle, "angle must lie in [0, pi]"));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain("t", t, "time must be finite and >= 0"));
    }
    Ok(())
}

fn check_positive_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain("t", t, "time must be finite and > 0"));
    }
    Ok(())
}

/// Fraction of molecules absorbed anywhere on the sphere by time `t`:
/// (r_r/r₀)·erfc((r₀ − r_r)/√(4Dt)). Zero at t = 0.
pub fn fhit(geom: &ChannelGeometry, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(fhit_f(geom, t))
}

fn fhit_f(geom: &ChannelGeometry, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    geom.ratio() * erfc_f(geom.gap() / (4.0 * geom.diffusivity * t).sqrt())
}

/// Distance from the transmitter to the surface point at angle `theta`.
pub fn r0_star(geom: &ChannelGeometry, theta: f64) -> Result<f64> {
    check_angle("theta", theta)?;
    Ok(geom.distance_at(theta))
}

/// Angular density of eventually absorbed molecules, 2π r_r² sin θ ε(θ).
pub fn p_theta_inf(geom: &ChannelGeometry, theta: f64) -> Result<f64> {
    check_angle("theta", theta)?;
    let g = geom.ratio();
    // 2π r_r² sin θ · (1 − γ²) / (4π r_r r₀ (…)^{3/2})
    Ok(0.5 * g * (1.0 - g * g) * geom.kernel(theta))
}

/// Analytic maximiser of [`p_theta_inf`]: the root in (0, 1) of
/// γc² + (1 + γ²)c − 3γ = 0 for c = cos θ*.
pub fn p_theta_inf_argmax(geom: &ChannelGeometry) -> f64 {
    let g = geom.ratio();
    let b = 1.0 + g * g;
    let c = (-b + (b * b + 12.0 * g * g).sqrt()) / (2.0 * g);
    c.acos()
}

/// F(α, ∞) from the antiderivative of the ε-kernel:
/// (r₀² − r_r²)/(2r₀) · (1/(r₀ − r_r) − 1/r₀*(α)).
pub fn f_alpha_inf(geom: &ChannelGeometry, alpha: f64) -> Result<f64> {
    check_angle("alpha", alpha)?;
    Ok(f_alpha_inf_f(geom, alpha))
}

fn f_alpha_inf_f(geom: &ChannelGeometry, alpha: f64) -> f64 {
    let (r0, rr) = (geom.r0, geom.rr);
    let d = geom.gap();
    let s = geom.distance_at(alpha);
    // 1/d − 1/s = (s − d)/(d s), with s − d = excess/(s + d)
    let diff = geom.excess_sq(alpha) / ((s + d) * d * s);
    (r0 * r0 - rr * rr) / (2.0 * r0) * diff
}

fn joint_integrator() -> Integrator {
    Integrator {
        abs_tol: 1e-300,
        rel_tol: 1e-12,
        max_evals: 1_000_000,
    }
}

/// The joint angle/time distribution at one fixed time, with the θ-normaliser
/// U(t) evaluated once so that many cap angles can be queried cheaply.
///
/// erfc is carried as erfcx(z)·exp(z₀² − z²), i.e. scaled by exp(z₀²) with
/// z₀ = d/√(4Dt). The scale cancels in every ratio and keeps small times from
/// underflowing.
#[derive(Debug, Clone)]
pub struct JointCdf {
    geom: ChannelGeometry,
    t: f64,
    inv_c: f64,
    fhit: f64,
    scaled_norm: f64,
    integrator: Integrator,
}

impl JointCdf {
    pub fn new(geom: &ChannelGeometry, t: f64) -> Result<Self> {
        check_positive_time(t)?;
        let mut cdf = JointCdf {
            geom: *geom,
            t,
            inv_c: 1.0 / (4.0 * geom.diffusivity * t).sqrt(),
            fhit: fhit_f(geom, t),
            scaled_norm: 0.0,
            integrator: joint_integrator(),
        };
        let norm = cdf.scaled_integral(PI)?;
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Numeric(format!(
                "angular normaliser is not positive (t = {t}, value = {norm})"
            )));
        }
        cdf.scaled_norm = norm;
        Ok(cdf)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn fhit(&self) -> f64 {
        self.fhit
    }

    fn scaled_integrand(&self, theta: f64) -> f64 {
        let z = self.geom.distance_at(theta) * self.inv_c;
        let shift = self.geom.excess_sq(theta) * self.inv_c * self.inv_c;
        self.geom.kernel(theta) * erfcx_f(z) * (-shift).exp()
    }

    /// ∫₀^upper of the scaled integrand, split at θ_w·4ᵏ where
    /// θ_w = √(4Dt/(r₀ r_r)) is the angular width of the early-time peak.
    fn scaled_integral(&self, upper: f64) -> Result<f64> {
        let width = 1.0 / (self.inv_c * (self.geom.r0 * self.geom.rr).sqrt());
        let mut total = 0.0;
        let mut lo = 0.0;
        let mut hi = width;
        while lo < upper {
            let b = hi.min(upper);
            total += self.integrator.integrate(|th| self.scaled_integrand(th), lo, b)?.value;
            lo = b;
            hi *= 4.0;
        }
        Ok(total)
    }

    /// U(t) by quadrature, unscaled. Underflows to 0 for very small t.
    pub fn normaliser(&self) -> f64 {
        let z0 = self.geom.gap() * self.inv_c;
        self.scaled_norm * (-z0 * z0).exp()
    }

    /// p(θ, t).
    pub fn density(&self, theta: f64) -> Result<f64> {
        check_angle("theta", theta)?;
        Ok(self.fhit * self.scaled_integrand(theta) / self.scaled_norm)
    }

    /// Fraction of the absorbed-by-t mass that fell inside the cap, F(α,t)/F_hit(t).
    pub fn cap_fraction(&self, alpha: f64) -> Result<f64> {
        check_angle("alpha", alpha)?;
        if alpha == PI {
            return Ok(1.0);
        }
        let part = self.scaled_integral(alpha)?;
        Ok((part / self.scaled_norm).clamp(0.0, 1.0))
    }

    /// F(α, t) by quadrature.
    pub fn cdf(&self, alpha: f64) -> Result<f64> {
        Ok(self.fhit * self.cap_fraction(alpha)?)
    }
}

/// p(θ, t), the final normalised joint density.
pub fn p_theta_t(geom: &ChannelGeometry, theta: f64, t: f64) -> Result<f64> {
    check_angle("theta", theta)?;
    JointCdf::new(geom, t)?.density(theta)
}

/// F(α, t) by adaptive quadrature of p(θ, t) over [0, α] (reference path).
/// F(α, 0) = 0 by continuous extension.
pub fn f_alpha_t(geom: &ChannelGeometry, alpha: f64, t: f64) -> Result<f64> {
    check_angle("alpha", alpha)?;
    check_time(t)?;
    if t == 0.0 || alpha == 0.0 {
        return Ok(0.0);
    }
    JointCdf::new(geom, t)?.cdf(alpha)
}

/// U(t) by adaptive quadrature of its defining θ-integral.
pub fn u_of_t_quadrature(geom: &ChannelGeometry, t: f64) -> Result<f64> {
    Ok(JointCdf::new(geom, t)?.normaliser())
}

/// Coefficient multiplying √(Dt)·s·Ei(−s²/4Dt) in the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EiCoefficient {
    /// 1/(2√π), the value obtained by integrating p(θ, t) exactly.
    Exact,
    /// 1/√(2π) in F(α, t) and 1 in U(t), an inconsistent alternative
    /// parameterisation. Kept for discrepancy reports only.
    Alternate,
}

impl EiCoefficient {
    fn for_cdf(self) -> f64 {
        match self {
            EiCoefficient::Exact => 0.5 / PI.sqrt(),
            EiCoefficient::Alternate => 1.0 / (2.0 * PI).sqrt(),
        }
    }

    fn for_normaliser(self) -> f64 {
        match self {
            EiCoefficient::Exact => 0.5 / PI.sqrt(),
            EiCoefficient::Alternate => 1.0,
        }
    }
}

/// (Dt·erfc(s/√(4Dt)) + k·√(Dt)·s·Ei(−s²/4Dt)) / (Dt·s)
fn h_group(s: f64, dt: f64, k: f64) -> f64 {
    let z = s / (4.0 * dt).sqrt();
    erfc_f(z) / s + k * ei_neg_f(-z * z) / dt.sqrt()
}

fn u_closed(geom: &ChannelGeometry, t: f64, coef: EiCoefficient) -> f64 {
    let dt = geom.diffusivity * t;
    let k = coef.for_normaliser();
    geom.r0 * geom.r0 / geom.rr * (h_group(geom.gap(), dt, k) - h_group(geom.r0 + geom.rr, dt, k))
}

/// U(t) from its closed form (erfc/Ei groups at r₀ − r_r and r₀ + r_r).
pub fn u_of_t(geom: &ChannelGeometry, t: f64) -> Result<f64> {
    check_positive_time(t)?;
    let u = u_closed(geom, t, EiCoefficient::Exact);
    if !u.is_finite() {
        return Err(Error::Numeric(format!("closed-form U({t}) is not finite")));
    }
    // below ~1e-300 the erfc/Ei groups have cancelled to noise
    Ok(u.max(0.0))
}

/// F(α, t) from the closed form with the given Ei coefficient convention.
pub fn f_alpha_t_closed(geom: &ChannelGeometry, alpha: f64, t: f64, coef: EiCoefficient) -> Result<f64> {
    check_angle("alpha", alpha)?;
    check_time(t)?;
    if t == 0.0 || alpha == 0.0 {
        return Ok(0.0);
    }
    let dt = geom.diffusivity * t;
    let u = u_closed(geom, t, coef);
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Numeric(format!(
            "closed-form normaliser U({t}) = {u} is unusable"
        )));
    }
    let k = coef.for_cdf();
    let z0 = geom.gap() / (4.0 * dt).sqrt();
    let groups = h_group(geom.gap(), dt, k) - h_group(geom.distance_at(alpha), dt, k);
    Ok(geom.r0 * erfc_f(z0) * groups / u)
}

/// Channel taps of one counting configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TapVector {
    taps: Vec<f64>,
    symbol_duration: f64,
    alpha: f64,
    geometry: ChannelGeometry,
    window_cdf: f64,
    asymptote: f64,
}

impl TapVector {
    /// Builds a tap vector from explicit probabilities, e.g. for tests or
    /// empirically estimated taps. `asymptote` is the eventual counted mass
    /// F(α, ∞); it must be at least the sum of the taps.
    pub fn from_parts(
        taps: Vec<f64>,
        symbol_duration: f64,
        alpha: f64,
        geometry: ChannelGeometry,
        asymptote: f64,
    ) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Contract("tap vector must hold at least one tap".into()));
        }
        if let Some(bad) = taps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::domain("tap", *bad, "tap probabilities must lie in [0, 1]"));
        }
        let window_cdf: f64 = taps.iter().sum();
        if window_cdf > 1.0 + 1e-12 {
            return Err(Error::domain("sum(taps)", window_cdf, "taps must sum to at most 1"));
        }
        if asymptote + 1e-12 < window_cdf || asymptote > 1.0 + 1e-12 {
            return Err(Error::domain("asymptote", asymptote, "must lie in [sum(taps), 1]"));
        }
        Ok(TapVector {
            taps,
            symbol_duration,
            alpha,
            geometry,
            window_cdf,
            asymptote: asymptote.max(window_cdf),
        })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn symbol_duration(&self) -> f64 {
        self.symbol_duration
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn geometry(&self) -> &ChannelGeometry {
        &self.geometry
    }

    /// F(α, L·t_s), the mass covered by the explicit taps.
    pub fn window_cdf(&self) -> f64 {
        self.window_cdf
    }

    /// F(α, ∞).
    pub fn asymptote(&self) -> f64 {
        self.asymptote
    }

    /// Counted mass arriving after the last explicit tap, F(α, ∞) − F(α, L·t_s).
    pub fn tail_mass(&self) -> f64 {
        (self.asymptote - self.window_cdf).max(0.0)
    }
}

/// p_n = F(α, n·t_s) − F(α, (n−1)·t_s) for n = 1..=L.
pub fn taps(geom: &ChannelGeometry, alpha: f64, t_s: f64, len: usize) -> Result<TapVector> {
    check_angle("alpha", alpha)?;
    check_positive_time(t_s)?;
    if len == 0 {
        return Err(Error::domain("L", 0.0, "memory length must be >= 1"));
    }
    let mut cdf = Vec::with_capacity(len + 1);
    cdf.push(0.0);
    for n in 1..=len {
        cdf.push(f_alpha_t(geom, alpha, n as f64 * t_s)?);
    }
    let mut taps = Vec::with_capacity(len);
    for w in cdf.windows(2) {
        let p = w[1] - w[0];
        if p < -1e-12 {
            return Err(Error::Numeric(format!(
                "negative tap {p:e}: F(alpha, t) lost monotonicity"
            )));
        }
        taps.push(p.max(0.0));
    }
    let window_cdf = cdf[len];
    Ok(TapVector {
        taps,
        symbol_duration: t_s,
        alpha,
        geometry: *geom,
        window_cdf,
        asymptote: f_alpha_inf_f(geom, alpha).max(window_cdf),
    })
}

/// Smallest L with F(α, ∞) − F(α, L·t_s) < rel_tol·F(α, ∞).
///
/// The tail decays like 1/√t, so L grows as rel_tol⁻²; the search only
/// evaluates F at O(log L) points.
pub fn memory_length(geom: &ChannelGeometry, alpha: f64, t_s: f64, rel_tol: f64) -> Result<u64> {
    check_angle("alpha", alpha)?;
    check_positive_time(t_s)?;
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::domain("rel_tol", rel_tol, "must lie in (0, 1)"));
    }
    let total = f_alpha_inf_f(geom, alpha);
    if total == 0.0 {
        return Ok(1);
    }
    let ok = |n: u64| -> Result<bool> { Ok(total - f_alpha_t(geom, alpha, n as f64 * t_s)? < rel_tol * total) };
    let mut hi = 1u64;
    while !ok(hi)? {
        if hi > 1 << 52 {
            return Err(Error::Numeric("memory length search overflowed".into()));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return Ok(1);
    }
    // invariant: ok(hi), !ok(lo)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Memory length used to build taps: the truncation rule of
/// [`memory_length`], capped at `max_taps`, unless `length` fixes it
/// explicitly. Counted mass beyond the last tap is carried by
/// [`TapVector::tail_mass`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryPolicy {
    pub rel_tol: f64,
    pub max_taps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
}

impl Default for MemoryPolicy {
    fn default() -> Self {
        MemoryPolicy {
            rel_tol: 1e-4,
            max_taps: 100,
            length: None,
        }
    }
}

impl MemoryPolicy {
    pub fn fixed(length: usize) -> Self {
        MemoryPolicy {
            length: Some(length),
            ..MemoryPolicy::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == Some(0) {
            return Err(Error::domain("length", 0.0, "need at least one tap"));
        }
        if self.max_taps == 0 {
            return Err(Error::domain("max_taps", 0.0, "need at least one tap"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::domain("rel_tol", self.rel_tol, "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn resolve(&self, geom: &ChannelGeometry, alpha: f64, t_s: f64) -> Result<usize> {
        self.validate()?;
        check_angle("alpha", alpha)?;
        check_positive_time(t_s)?;
        if let Some(len) = self.length {
            return Ok(len);
        }
        let total = f_alpha_inf_f(geom, alpha);
        if total == 0.0 {
            return Ok(1);
        }
        let residual = total - f_alpha_t(geom, alpha, self.max_taps as f64 * t_s)?;
        if residual >= self.rel_tol * total {
            return Ok(self.max_taps);
        }
        Ok(memory_length(geom, alpha, t_s, self.rel_tol)? as usize)
    }
}

/// Hitting rate ∂F(α, t)/∂t by a central difference with h = max(1e-6, 1e-4·t).
pub fn hitting_rate(geom: &ChannelGeometry, alpha: f64, t: f64) -> Result<f64> {
    check_positive_time(t)?;
    let h = (1e-4 * t).max(1e-6);
    let lo = (t - h).max(0.0);
    let hi = t + h;
    Ok((f_alpha_t(geom, alpha, hi)? - f_alpha_t(geom, alpha, lo)?) / (hi - lo))
}

const PEAK_SEARCH_LO: f64 = 1e-6;
const PEAK_SEARCH_HI: f64 = 1e3;
const PEAK_GRID: usize = 181;

/// Time at which the hitting rate of the cap is maximal.
///
/// A log-spaced scan over [1e-6 s, 1e3 s] brackets the peak, golden-section
/// search in ln t refines it to a relative 1e-6.
pub fn peak_time(geom: &ChannelGeometry, alpha: f64) -> Result<f64> {
    check_angle("alpha", alpha)?;
    if alpha == 0.0 {
        return Err(Error::domain("alpha", alpha, "peak time needs alpha > 0"));
    }
    let rate = |ln_t: f64| hitting_rate(geom, alpha, ln_t.exp()).unwrap_or(f64::NAN);
    let (lo, _, hi) = bracket_max_on_grid(rate, PEAK_SEARCH_LO.ln(), PEAK_SEARCH_HI.ln(), PEAK_GRID)
        .map_err(|e| Error::Numeric(format!("peak time for alpha = {alpha}: {e}")))?;
    let rate = |ln_t: f64| hitting_rate(geom, alpha, ln_t.exp()).unwrap_or(f64::NEG_INFINITY);
    let (ln_t, best) = golden_section_max(rate, lo, hi, 1e-7, 200);
    if !best.is_finite() || best <= 0.0 {
        return Err(Error::Numeric(format!(
            "hitting rate at the peak is not positive (alpha = {alpha})"
        )));
    }
    Ok(ln_t.exp())
}
