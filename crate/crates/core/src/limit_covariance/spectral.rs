//! Spectral integrals `∫_{ℝ^d} Π_k h_k(z_k) S(z)^{-q} dz` with
//! `S(z) = Σ_k |z_k|^{α_k}`.
//!
//! The singular kernel is removed with the Laplace representation
//! `S^{-q} = Γ(q)^{-1} ∫_0^∞ τ^{q-1} e^{-τS} dτ`, after which the integrand
//! factorises over axes:
//!
//! `J = Γ(q)^{-1} ∫_0^∞ τ^{q-1} Π_k H_k(τ) dτ`, `H_k(τ) = ∫_ℝ h_k(z) e^{-τ|z|^{α_k}} dz`.
//!
//! The τ integral runs in `σ = ln τ` with analytic tails on both sides: for
//! small τ the factors tend to `H_k(0)`, for large τ to
//! `2Γ(1 + 1/α_k) h_k(0) τ^{-1/α_k}`. The integral converges iff `q < ᾱ`.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result, invalid};
use crate::quad::{Estimate, GaussLegendre};
use crate::stable_motion::StabilityVector;
use crate::test_function::TestFunction;

use super::QuadratureConfig;

/// Distance in `σ` beyond the axis transition scales where the tail
/// asymptotics are exact to double precision.
const SIGMA_MARGIN: f64 = 36.0;

/// One real, even, bounded one-dimensional factor `h`.
pub trait AxisFactor: Sync {
    /// `H(τ) = ∫_ℝ h(z) e^{-τ|z|^α} dz`.
    fn laplace(&self, alpha: f64, tau: f64, rule: &GaussLegendre) -> f64;
    /// `h(0)`.
    fn at_zero(&self) -> f64;
    /// Frequency scale on which `h` varies.
    fn scale(&self) -> f64;
}

/// `∫ Π_k h_k(z_k) S(z)^{-q} dz`. The error is estimated by doubling the
/// nodes per panel.
pub fn schwinger(sv: &StabilityVector, factors: &[&dyn AxisFactor], q: f64, qc: &QuadratureConfig) -> Result<Estimate> {
    let abar = sv.alpha_bar();
    if factors.len() != sv.dim() {
        return Err(invalid("one factor per coordinate required"));
    }
    if !(q > 0.0) {
        return Err(invalid("kernel power must be positive"));
    }
    if q >= abar {
        return Err(invalid(format!(
            "kernel S^-{q} is not integrable at the origin when ᾱ = {abar} (need q < ᾱ)"
        )));
    }
    if factors.iter().any(|f| f.at_zero() == 0.0) {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let coarse = schwinger_with(sv, factors, q, &qc.rule(), qc.panel_width);
    let fine = schwinger_with(sv, factors, q, &qc.doubled().rule(), qc.panel_width);
    let err = (fine - coarse).abs();
    let target = qc.abs_tol.max(qc.rel_tol * fine.abs());
    if !fine.is_finite() {
        return Err(Error::Quadrature("non-finite spectral integral".into()));
    }
    if err > 1e3 * target {
        return Err(Error::Quadrature(format!(
            "spectral integral {fine:.6e}: doubling difference {err:.3e} exceeds target {target:.3e}"
        )));
    }
    Ok(Estimate::new(fine, err))
}

fn schwinger_with(sv: &StabilityVector, factors: &[&dyn AxisFactor], q: f64, rule: &GaussLegendre, width: f64) -> f64 {
    let alphas = sv.alphas();
    let abar = sv.alpha_bar();
    // Transition of axis k: e^{-τ z^α} starts to cut h at its own scale.
    let marks: Vec<f64> = factors
        .iter()
        .zip(alphas)
        .map(|(f, a)| -a * f.scale().ln())
        .collect();
    let lo = marks.iter().cloned().fold(f64::INFINITY, f64::min) - SIGMA_MARGIN;
    let hi = marks.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + SIGMA_MARGIN;
    let m = ((hi - lo) / width).ceil() as usize;
    let body = rule.panels(
        |s| {
            let tau = s.exp();
            let mut p = (q * s).exp();
            for (f, a) in factors.iter().zip(alphas) {
                p *= f.laplace(*a, tau, rule);
                if p == 0.0 {
                    break;
                }
            }
            p
        },
        lo,
        hi,
        m,
    );
    let h0: f64 = factors.iter().zip(alphas).map(|(f, a)| f.laplace(*a, 0.0, rule)).product();
    let lower = h0 * (q * lo).exp() / q;
    let c_inf: f64 = factors
        .iter()
        .zip(alphas)
        .map(|(f, a)| 2.0 * gamma(1.0 + 1.0 / a) * f.at_zero())
        .product();
    let upper = c_inf * ((q - abar) * hi).exp() / (abar - q);
    (body + lower + upper) / gamma(q)
}

/// Generic Laplace transform of an even integrand by quadrature on the
/// half-line: logarithmic panels near the origin (where `e^{-τz^α}` has its
/// cusp) and uniform panels of the feature width further out.
pub(crate) fn half_line_laplace<F: Fn(f64) -> f64>(
    h: F,
    h0: f64,
    alpha: f64,
    tau: f64,
    fine: f64,
    z_max: f64,
    rule: &GaussLegendre,
) -> f64 {
    let z_kill = if tau > 0.0 { (40.0 / tau).powf(1.0 / alpha) } else { f64::INFINITY };
    let top = z_max.min(z_kill);
    let z1 = fine.min(top);
    let zc = if tau > 0.0 { tau.powf(-1.0 / alpha) } else { f64::INFINITY };
    let lo = z1.min(zc).ln() - 36.0;
    let g = |z: f64| {
        let d = if tau > 0.0 { (-tau * z.powf(alpha)).exp() } else { 1.0 };
        h(z) * d
    };
    let mut s = rule.log_panels(g, lo, z1.ln(), 1.0) + h0 * lo.exp();
    if top > z1 {
        let m = ((top - z1) / fine).ceil().max(1.0) as usize;
        s += rule.panels(g, z1, top, m);
    }
    2.0 * s
}

/// Product of the Fourier transforms of two elementary test functions along
/// one axis: `A_1(z) A_2(z) cos((c_1 - c_2) z)`.
pub struct PairFactor<'a> {
    f1: &'a TestFunction,
    f2: &'a TestFunction,
    k: usize,
    shift: f64,
    fine: f64,
    z_max: f64,
}

impl<'a> PairFactor<'a> {
    pub fn new(f1: &'a TestFunction, f2: &'a TestFunction, k: usize) -> Result<Self> {
        let (Some(s1), Some(s2)) = (f1.axis_shift(k), f2.axis_shift(k)) else {
            return Err(invalid("pair factors need elementary test functions"));
        };
        let (d1, o1) = f1.axis_scale(k).unwrap();
        let (d2, o2) = f2.axis_scale(k).unwrap();
        let shift = s1 - s2;
        // Combined Gaussian decay e^{-(w1²+w2²)z²/2}.
        let sq = d1.powi(-2) + d2.powi(-2);
        let z_max = (80.0 / sq).sqrt();
        let osc = if shift != 0.0 { 1.0 / shift.abs() } else { f64::INFINITY };
        let fine = d1.min(d2).min(o1).min(o2).min(osc).min(z_max);
        Ok(Self { f1, f2, k, shift, fine, z_max })
    }

    fn h(&self, z: f64) -> f64 {
        let a = self.f1.axis_amplitude(self.k, z).unwrap() * self.f2.axis_amplitude(self.k, z).unwrap();
        if self.shift == 0.0 { a } else { a * (self.shift * z).cos() }
    }
}

impl AxisFactor for PairFactor<'_> {
    fn laplace(&self, alpha: f64, tau: f64, rule: &GaussLegendre) -> f64 {
        half_line_laplace(|z| self.h(z), self.at_zero(), alpha, tau, self.fine, self.z_max, rule)
    }

    fn at_zero(&self) -> f64 {
        self.h(0.0)
    }

    fn scale(&self) -> f64 {
        self.fine
    }
}

/// Indicator of `[-1, 1]`, used by the convergence sanity check.
struct UnitIndicator;

impl AxisFactor for UnitIndicator {
    fn laplace(&self, alpha: f64, tau: f64, rule: &GaussLegendre) -> f64 {
        if tau == 0.0 {
            return 2.0;
        }
        let zc = tau.powf(-1.0 / alpha).min(1.0);
        let lo = zc.ln() - 36.0;
        2.0 * (rule.log_panels(|z| (-tau * z.powf(alpha)).exp(), lo, 0.0, 1.0) + lo.exp())
    }

    fn at_zero(&self) -> f64 {
        1.0
    }

    fn scale(&self) -> f64 {
        1.0
    }
}

/// `∫_{[-1,1]^d} S(z)^{-q} dz` with the Laplace variable truncated at
/// `τ ≤ tau_max`. As `tau_max → ∞` this converges iff `q < ᾱ`; it is a
/// sanity probe of the integrability boundary, not a production integral.
pub fn cube_moment(sv: &StabilityVector, q: f64, tau_max: f64, qc: &QuadratureConfig) -> f64 {
    let rule = qc.rule();
    let lo = -SIGMA_MARGIN;
    let hi = tau_max.ln();
    let m = ((hi - lo) / qc.panel_width).ceil().max(1.0) as usize;
    let body = rule.panels(
        |s| {
            let tau = s.exp();
            sv.alphas().iter().fold((q * s).exp(), |p, a| p * UnitIndicator.laplace(*a, tau, &rule))
        },
        lo,
        hi,
        m,
    );
    let lower = 2f64.powi(sv.dim() as i32) * (q * lo).exp() / q;
    (body + lower) / gamma(q)
}

/// Whether the cube moment settles as the Laplace cutoff grows.
pub fn cube_moment_converges(sv: &StabilityVector, q: f64, qc: &QuadratureConfig) -> bool {
    let a = cube_moment(sv, q, 1e12, qc);
    let b = cube_moment(sv, q, 1e24, qc);
    ((b - a) / b).abs() < 1e-3
}

/// `∫_{ℝ^d} h_1 h_2-type` integral of two elementary test functions against
/// `S^{-q}`: `∫ S(z)^{-q} φ̂_1(z) conj(φ̂_2(z)) dz`. Combinations are expanded
/// bilinearly.
pub fn spectral_integral(sv: &StabilityVector, f1: &TestFunction, f2: &TestFunction, q: f64, qc: &QuadratureConfig) -> Result<Estimate> {
    if f1.dim() != sv.dim() || f2.dim() != sv.dim() {
        return Err(invalid("test function dimension differs from the motion"));
    }
    let mut total = Estimate::new(0.0, 0.0);
    for (a, e1) in f1.terms() {
        for (b, e2) in f2.terms() {
            let pairs = (0..sv.dim()).map(|k| PairFactor::new(e1, e2, k)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&dyn AxisFactor> = pairs.iter().map(|p| p as &dyn AxisFactor).collect();
            let e = schwinger(sv, &refs, q, qc)?;
            total = total + Estimate::new(a * b * e.value, (a * b).abs() * e.error);
        }
    }
    Ok(total)
}
