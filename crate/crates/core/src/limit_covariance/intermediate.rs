//! Intermediate regime `1 < ᾱ < 2`.
//!
//! `C(r,t) = ∫_0^r e^{-θu} ∫_0^t e^{-θv} ∫_0^{u∧v} e^{θs} (u+v-2s)^{-ᾱ} ds dv du`.
//!
//! With `q = u+v-2s` the `s` integral is `½ e^{-θb/2} (G(a) - G(b))`,
//! where `a = |u-v|`, `b = u+v` and `G(x) = ∫_x^∞ e^{-θq/2} q^{-ᾱ} dq` is an
//! upper incomplete gamma function. In the rotated coordinates `(b, c = u-v)`
//! the `b` integral of the `G(|c|)` term and the `c` integral of the `G(b)`
//! term are elementary, leaving two one-dimensional integrals. The
//! `x^{1-ᾱ}` singularity of `G` at 0 is absorbed by `x = y^m`, `m = 1/(2-ᾱ)`.

use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{Result, invalid};
use crate::quad::{Estimate, Tolerance, adaptive_breaks};
use crate::stable_motion::StabilityVector;

use super::QuadratureConfig;

/// Sub-fractional Brownian motion covariance with index `(3-ᾱ)/2`.
pub fn subfbm_cov(s: f64, t: f64, abar: f64) -> f64 {
    let p = 3.0 - abar;
    s.powf(p) + t.powf(p) - 0.5 * ((s + t).powf(p) + (s - t).abs().powf(p))
}

pub(crate) fn require_intermediate(sv: &StabilityVector) -> Result<()> {
    let abar = sv.alpha_bar();
    if !(abar > 1.0 && abar < 2.0) {
        return Err(invalid(format!("intermediate regime needs 1 < ᾱ < 2, got {abar}")));
    }
    Ok(())
}

/// `γ π^{-d} Π_k Γ(1/α_k)/α_k`.
pub fn intermediate_constant(sv: &StabilityVector, gamma_rate: f64) -> f64 {
    let p: f64 = sv.alphas().iter().map(|a| gamma(1.0 / a) / a).product();
    gamma_rate * p / std::f64::consts::PI.powi(sv.dim() as i32)
}

/// `x^{ᾱ-1} G(x)`, bounded on `[0, ∞)` and equal to `1/(ᾱ-1)` at 0 or for
/// `θ = 0`.
fn g_scaled(x: f64, theta: f64, abar: f64) -> f64 {
    let z = 0.5 * theta * x;
    if z == 0.0 {
        return 1.0 / (abar - 1.0);
    }
    // z^{ᾱ-1} Γ(1-ᾱ, z) = (e^{-z} - z^{ᾱ-1} Γ(2-ᾱ, z)) / (ᾱ-1).
    let a = 2.0 - abar;
    ((-z).exp() - z.powf(abar - 1.0) * gamma_ur(a, z) * gamma(a)) / (abar - 1.0)
}

/// `∫_lo^hi e^{-θb/2} db`.
fn damped_length(theta: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let k = 0.5 * theta;
    if k == 0.0 { hi - lo } else { (-k * lo).exp() * -(-k * (hi - lo)).exp_m1() / k }
}

/// `C(r,t)`.
pub fn intermediate_c(r: f64, t: f64, theta: f64, sv: &StabilityVector, qc: &QuadratureConfig) -> Result<Estimate> {
    require_intermediate(sv)?;
    if r < 0.0 || t < 0.0 || theta < 0.0 {
        return Err(invalid("times and θ must be nonnegative"));
    }
    if r == 0.0 || t == 0.0 {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let abar = sv.alpha_bar();
    let m = 1.0 / (2.0 - abar);
    let root = |x: f64| x.powf(1.0 / m);
    let tol = Tolerance::new(qc.abs_tol, qc.rel_tol);
    let sorted = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };

    // A = ∫ G(|c|) W(c) dc over c ∈ [-t, r], W(c) = ∫_{|c|}^{min(2r-c, 2t+c)} e^{-θb/2} db.
    let w = |c: f64| damped_length(theta, c.abs(), (2.0 * r - c).min(2.0 * t + c));
    let mut right = |y: f64| {
        let c = y.powf(m);
        m * g_scaled(c, theta, abar) * w(c)
    };
    let mut left = |y: f64| {
        let c = y.powf(m);
        m * g_scaled(c, theta, abar) * w(-c)
    };
    let kink = r - t;
    let a_pos = adaptive_breaks(&mut right, &sorted(vec![0.0, root(kink.max(0.0)), root(r)]), tol)?;
    let a_neg = adaptive_breaks(&mut left, &sorted(vec![0.0, root((-kink).max(0.0)), root(t)]), tol)?;

    // B = ∫ e^{-θb/2} G(b) L(b) db over b ∈ [0, r+t], L the length of the c-slice.
    let mut slice = |y: f64| {
        let b = y.powf(m);
        let len = b.min(2.0 * r - b) - (-b).max(b - 2.0 * t);
        m * (-0.5 * theta * b).exp() * g_scaled(b, theta, abar) * len.max(0.0)
    };
    let b = adaptive_breaks(&mut slice, &sorted(vec![0.0, root(r.min(t)), root(r.max(t)), root(r + t)]), tol)?;

    let value = 0.25 * (a_pos.value + a_neg.value - b.value);
    let error = 0.25 * (a_pos.error + a_neg.error + b.error);
    if !value.is_finite() {
        return Err(crate::error::Error::Quadrature("intermediate covariance is not finite".into()));
    }
    Ok(Estimate::new(value, error))
}

/// Limit covariance of the intermediate regime.
#[allow(clippy::too_many_arguments)]
pub fn cov_intermediate(r: f64, t: f64, theta: f64, sv: &StabilityVector, gamma_rate: f64, mass1: f64, mass2: f64, qc: &QuadratureConfig) -> Result<Estimate> {
    let c = intermediate_c(r, t, theta, sv, qc)?;
    let k = intermediate_constant(sv, gamma_rate) * mass1 * mass2;
    Ok(Estimate::new(k * c.value, k.abs() * c.error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussLegendre;
    use approx::assert_relative_eq;

    #[test]
    fn subfbm_basic_values() {
        let abar = 1.4;
        assert_eq!(subfbm_cov(0.0, 0.7, abar), 0.0);
        let s: f64 = 0.8;
        let p = 3.0 - abar;
        assert_relative_eq!(subfbm_cov(s, s, abar), 2.0 * s.powf(p) - 0.5 * (2.0 * s).powf(p), max_relative = 1e-14);
        assert_relative_eq!(subfbm_cov(2.0 * 0.3, 2.0 * 0.9, abar), 2f64.powf(p) * subfbm_cov(0.3, 0.9, abar), max_relative = 1e-13);
    }

    #[test]
    fn theta_zero_closed_form() {
        let qc = QuadratureConfig::default();
        for abar in [1.25, 1.5, 1.75] {
            let sv = StabilityVector::new(vec![1.0 / abar]).unwrap();
            let k = 1.0 / ((abar - 1.0) * (2.0 - abar) * (3.0 - abar));
            for (r, t) in [(1.0, 1.0), (0.3, 0.9), (1.0, 0.2)] {
                let c = intermediate_c(r, t, 0.0, &sv, &qc).unwrap();
                assert_relative_eq!(c.value, k * subfbm_cov(r, t, abar), max_relative = 1e-11);
            }
        }
    }

    /// Independent route: `q^{-ᾱ} = Γ(ᾱ)^{-1} ∫ λ^{ᾱ-1} e^{-λq} dλ` turns the
    /// triple integral into elementary exponential integrals `I(λ)`.
    fn laplace_route(r: f64, t: f64, theta: f64, abar: f64) -> f64 {
        let l = |a: f64, x1: f64, x2: f64| {
            if a == 0.0 { x2 - x1 } else { ((-a * x1).exp() - (-a * x2).exp()) / a }
        };
        // ∫_0^r du ∫_0^{u∧t} dv over the region v ≤ u.
        let half = |r: f64, t: f64, lam: f64| {
            let k = theta + lam;
            let c0 = r.min(t);
            let mut a = (l(theta, 0.0, c0) - l(k, 0.0, c0)) / lam + (l(2.0 * k, 0.0, c0) - l(k, 0.0, c0)) / k;
            if r > t {
                let lk = l(k, t, r);
                let shifted = ((-theta * t).exp() - (-theta * t - k * (r - t)).exp()) / k;
                a += (shifted - lk) / lam + (-k * t).exp_m1() / k * lk;
            }
            a
        };
        let i_of = |lam: f64| (half(r, t, lam) + half(t, r, lam)) / (theta + 2.0 * lam);
        let gl = GaussLegendre::new(20);
        let lo = 1e-6f64;
        let body = gl.log_panels(|lam| lam.powf(abar - 1.0) * i_of(lam), lo.ln(), 220.0, 0.5);
        let head = lo.powf(abar) / abar * i_of(lo);
        (body + head) / gamma(abar)
    }

    #[test]
    fn laplace_route_reproduces_theta_zero_closed_form() {
        let abar = 1.5;
        let k = 1.0 / ((abar - 1.0) * (2.0 - abar) * (3.0 - abar));
        let want = k * subfbm_cov(0.6, 1.0, abar);
        assert_relative_eq!(laplace_route(0.6, 1.0, 0.0, abar), want, max_relative = 1e-7);
    }

    #[test]
    fn theta_positive_matches_laplace_route() {
        let qc = QuadratureConfig::default();
        for (abar, theta, r, t) in [(1.5, 0.8, 0.7, 1.0), (1.25, 2.0, 1.0, 1.0), (1.75, 1.0, 1.0, 0.4)] {
            let sv = StabilityVector::new(vec![1.0 / abar]).unwrap();
            let got = intermediate_c(r, t, theta, &sv, &qc).unwrap().value;
            let want = laplace_route(r, t, theta, abar);
            assert_relative_eq!(got, want, max_relative = 1e-7);
        }
    }

    #[test]
    fn symmetric_in_times() {
        let qc = QuadratureConfig::default();
        let sv = StabilityVector::new(vec![0.8]).unwrap();
        let a = intermediate_c(0.3, 0.9, 0.5, &sv, &qc).unwrap().value;
        let b = intermediate_c(0.9, 0.3, 0.5, &sv, &qc).unwrap().value;
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }
}
