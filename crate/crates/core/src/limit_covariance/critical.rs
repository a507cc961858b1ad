//! Critical regime `ᾱ = 2`.
//!
//! The covariance involves `C_θ(r,t) = ∫_0^{r∧t} e^{-θs} G(θ, r-s, t-s) ds`
//! with `G(x,u,v) = ∫_{ℝ^d} φ(x,u,v,S(y)) dy`. Every such `d`-dimensional
//! integral depends on `y` only through `S(y)`, and the level sets of `S`
//! have volume `V(ρ) = V(1) ρ^{ᾱ}`, so
//! `∫ F(S(y)) dy = ᾱ V(1) ∫_0^∞ F(ρ) ρ^{ᾱ-1} dρ`. The radial integrals are
//! done in `ln ρ`.

use statrs::function::gamma::gamma;

use crate::error::{Result, invalid};
use crate::quad::{Estimate, GaussLegendre, Tolerance, adaptive_breaks};
use crate::stable_motion::StabilityVector;

use super::QuadratureConfig;

/// How `G` is evaluated inside the time integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalRoute {
    /// `Φ(ux) + Φ(vx) - Φ((u+v)x) + Φ₂` via the kernel decomposition.
    Decomposition,
    /// Radial integral of the full kernel.
    Direct,
}

fn one_minus_exp(a: f64) -> f64 {
    -(-a).exp_m1()
}

fn check_z(z: f64) -> Result<()> {
    if z > 0.0 { Ok(()) } else { Err(invalid(format!("kernel needs z > 0, got {z}"))) }
}

/// The kernel `φ(x,u,v,z)` of the critical covariance.
pub fn phi_kernel(x: f64, u: f64, v: f64, z: f64) -> Result<f64> {
    check_z(z)?;
    Ok(phi_raw(x, u, v, z))
}

fn phi_raw(x: f64, u: f64, v: f64, z: f64) -> f64 {
    let y = x + z;
    let first = (u * z * (-u * y).exp() * one_minus_exp(v * y) + v * z * (-v * y).exp() * one_minus_exp(u * y)) / (y * y);
    first + phi2(x, u, v, z)
}

/// `φ₁(x,u,z) = u z e^{-u(x+z)} / (x+z)²`.
pub fn phi1(x: f64, u: f64, z: f64) -> f64 {
    let y = x + z;
    u * z * (-u * y).exp() / (y * y)
}

/// `φ₂(x,u,v,z) = 2x (1-e^{-u(x+z)})(1-e^{-v(x+z)}) / (x+z)³`.
pub fn phi2(x: f64, u: f64, v: f64, z: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let y = x + z;
    2.0 * x * one_minus_exp(u * y) * one_minus_exp(v * y) / (y * y * y)
}

/// `φ - [φ₁(u) + φ₁(v) - φ₁(u+v) + φ₂]`.
pub fn decomposition_residual(x: f64, u: f64, v: f64, z: f64) -> Result<f64> {
    let full = phi_kernel(x, u, v, z)?;
    Ok(full - (phi1(x, u, z) + phi1(x, v, z) - phi1(x, u + v, z) + phi2(x, u, v, z)))
}

/// `V(1) = vol{y : S(y) ≤ 1} = 2^d Π Γ(1 + 1/α_k) / Γ(1 + ᾱ)`.
pub fn unit_level_volume(sv: &StabilityVector) -> f64 {
    let p: f64 = sv.alphas().iter().map(|a| 2.0 * gamma(1.0 + 1.0 / a)).product();
    p / gamma(1.0 + sv.alpha_bar())
}

/// `∫_{ℝ^d} F(S(y)) dy` with `ln ρ` restricted to `[lo, hi]`.
pub fn radial_integral<F: Fn(f64) -> f64>(sv: &StabilityVector, f: F, lo: f64, hi: f64, rule: &GaussLegendre) -> f64 {
    let abar = sv.alpha_bar();
    let c = abar * unit_level_volume(sv);
    c * rule.log_panels(|rho| f(rho) * rho.powf(abar - 1.0), lo, hi, 0.5)
}

pub(crate) fn require_critical(sv: &StabilityVector) -> Result<()> {
    let abar = sv.alpha_bar();
    if (abar - 2.0).abs() > 1e-9 {
        return Err(invalid(format!("critical regime needs ᾱ = 2, got {abar}")));
    }
    Ok(())
}

/// Log-radius window outside which the radial integrands are negligible.
fn window(x: f64, u: f64, v: f64) -> (f64, f64) {
    let small = u.min(v).max(1e-300);
    // Every integrand vanishes at least like ρ² at the origin.
    let lo = -40.0;
    let hi = (1.0 / small).max(1.0).ln() + x.max(1.0).ln() + 42.0;
    (lo, hi)
}

/// `Φ(x) = ∫_{ℝ^d} φ₁(x, 1, S(y)) dy`.
pub fn capital_phi(x: f64, sv: &StabilityVector, qc: &QuadratureConfig) -> Result<f64> {
    require_critical(sv)?;
    if x < 0.0 {
        return Err(invalid("Φ is defined for x ≥ 0"));
    }
    Ok(capital_phi_with(x, sv, &qc.rule()))
}

fn capital_phi_with(x: f64, sv: &StabilityVector, rule: &GaussLegendre) -> f64 {
    // e^{-ρ} kills the integrand well before ρ = 800.
    radial_integral(sv, |rho| phi1(x, 1.0, rho), -40.0, 800f64.ln(), rule)
}

/// `Φ₂(x,u,v) = ∫_{ℝ^d} φ₂(x,u,v,S(y)) dy`.
pub fn capital_phi2(x: f64, u: f64, v: f64, sv: &StabilityVector, qc: &QuadratureConfig) -> Result<f64> {
    require_critical(sv)?;
    Ok(capital_phi2_with(x, u, v, sv, &qc.rule()))
}

fn capital_phi2_with(x: f64, u: f64, v: f64, sv: &StabilityVector, rule: &GaussLegendre) -> f64 {
    if x == 0.0 || u == 0.0 || v == 0.0 {
        return 0.0;
    }
    let (lo, hi) = window(x, u, v);
    radial_integral(sv, |rho| phi2(x, u, v, rho), lo, hi, rule)
}

/// `G(x,u,v) = ∫_{ℝ^d} φ(x,u,v,S(y)) dy` by the chosen route.
pub fn inner_integral(x: f64, u: f64, v: f64, sv: &StabilityVector, route: CriticalRoute, rule: &GaussLegendre) -> f64 {
    if u <= 0.0 || v <= 0.0 {
        return 0.0;
    }
    match route {
        CriticalRoute::Decomposition => {
            capital_phi_with(u * x, sv, rule) + capital_phi_with(v * x, sv, rule)
                - capital_phi_with((u + v) * x, sv, rule)
                + capital_phi2_with(x, u, v, sv, rule)
        }
        CriticalRoute::Direct => {
            let (lo, hi) = window(x, u, v);
            radial_integral(sv, |rho| phi_raw(x, u, v, rho), lo, hi, rule)
        }
    }
}

/// `C_θ(r,t)`.
pub fn critical_c(r: f64, t: f64, theta: f64, sv: &StabilityVector, route: CriticalRoute, qc: &QuadratureConfig) -> Result<Estimate> {
    require_critical(sv)?;
    if r < 0.0 || t < 0.0 || theta < 0.0 {
        return Err(invalid("times and θ must be nonnegative"));
    }
    let m = r.min(t);
    if m == 0.0 {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let rule = qc.rule();
    let mut f = |s: f64| (-theta * s).exp() * inner_integral(theta, r - s, t - s, sv, route, &rule);
    // G(θ,u,v) behaves like u ln u as u → 0, i.e. at the upper end.
    let breaks = crate::quad::graded_toward(0.0, m, 0.25, 16);
    adaptive_breaks(&mut f, &breaks, Tolerance::new(qc.abs_tol, qc.rel_tol))
}

/// Limit covariance of the critical regime:
/// `γ (2π)^{-d} (∫φ₁)(∫φ₂) C_θ(r,t)`.
#[allow(clippy::too_many_arguments)]
pub fn cov_critical(r: f64, t: f64, theta: f64, sv: &StabilityVector, gamma_rate: f64, mass1: f64, mass2: f64, qc: &QuadratureConfig) -> Result<Estimate> {
    let c = critical_c(r, t, theta, sv, CriticalRoute::Decomposition, qc)?;
    let k = gamma_rate * mass1 * mass2 / (2.0 * std::f64::consts::PI).powi(sv.dim() as i32);
    Ok(Estimate::new(k * c.value, k.abs() * c.error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn e1(x: f64) -> f64 {
        // Exponential integral by its series (small x) or continued fraction.
        if x < 1.0 {
            let mut sum = 0.0;
            let mut term = 1.0;
            for k in 1..60 {
                term *= -x / k as f64;
                sum -= term / k as f64;
            }
            -0.5772156649015329 - x.ln() + sum
        } else {
            let mut f = 0.0;
            for k in (1..200).rev() {
                let k = k as f64;
                f = k / (1.0 + k / (x + f));
            }
            (-x).exp() / (x + f)
        }
    }

    #[test]
    fn kernel_special_values() {
        assert_eq!(phi_kernel(1.3, 0.0, 0.0, 0.7).unwrap(), 0.0);
        let (u, v, z) = (0.4, 1.1, 0.9);
        let want = (u * z * (-u * z as f64).exp() * (1.0 - (-v * z as f64).exp())
            + v * z * (-v * z as f64).exp() * (1.0 - (-u * z as f64).exp()))
            / (z * z);
        assert_relative_eq!(phi_kernel(0.0, u, v, z).unwrap(), want, max_relative = 1e-14);
        assert!(phi_kernel(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn unit_level_volume_in_one_dimension() {
        // {|y|^{1/2} ≤ 1} = [-1, 1].
        let sv = StabilityVector::new(vec![0.5]).unwrap();
        assert_relative_eq!(unit_level_volume(&sv), 2.0, max_relative = 1e-14);
        let sv = StabilityVector::new(vec![2.0, 2.0, 2.0, 2.0]).unwrap();
        // {Σ y² ≤ 1} in ℝ⁴ has volume π²/2.
        assert_relative_eq!(unit_level_volume(&sv), std::f64::consts::PI.powi(2) / 2.0, max_relative = 1e-13);
    }

    #[test]
    fn capital_phi_matches_exponential_integral_form() {
        // Φ(x) = 2V(1) [e^{-x}(1+x) - (2x + x²) E₁(x)].
        let qc = QuadratureConfig::default();
        for alphas in [vec![0.5], vec![1.0, 1.0], vec![0.8, 4.0 / 3.0]] {
            let sv = StabilityVector::new(alphas).unwrap();
            let v1 = unit_level_volume(&sv);
            for x in [0.0f64, 1e-6, 0.3, 1.0, 4.0, 20.0] {
                let want = if x == 0.0 {
                    2.0 * v1
                } else {
                    2.0 * v1 * ((-x).exp() * (1.0 + x) - (2.0 * x + x * x) * e1(x))
                };
                let got = capital_phi(x, &sv, &qc).unwrap();
                assert!((got - want).abs() <= 1e-11 * (2.0 * v1), "x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn capital_phi_matches_direct_spatial_integral() {
        // d = 1, α = 1/2: ∫ φ₁(x, 1, |y|^{1/2}) dy in y itself.
        let qc = QuadratureConfig::default();
        let sv = StabilityVector::new(vec![0.5]).unwrap();
        for x in [0.0, 0.5, 2.0] {
            let f = |y: f64| {
                let z = y.sqrt();
                2.0 * phi1(x, 1.0, z)
            };
            let mut f = f;
            let mut breaks = vec![0.0];
            breaks.extend((-12..=6).map(|k| 10f64.powi(k)));
            let direct = adaptive_breaks(&mut f, &breaks, Tolerance::new(1e-13, 1e-12)).unwrap().value;
            assert_relative_eq!(capital_phi(x, &sv, &qc).unwrap(), direct, max_relative = 1e-10);
        }
        assert_relative_eq!(capital_phi(0.0, &sv, &qc).unwrap(), 4.0, max_relative = 1e-13);
    }

    #[test]
    fn scaling_identity_for_phi_one() {
        let qc = QuadratureConfig::default();
        let rule = qc.rule();
        let sv = StabilityVector::new(vec![0.8, 4.0 / 3.0]).unwrap();
        for x in [0.2, 1.5] {
            for c in [0.5, 2.0] {
                let lhs = radial_integral(&sv, |rho| phi1(x, c, rho), -45.0, 10.0, &rule);
                let rhs = capital_phi(c * x, &sv, &qc).unwrap();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn routes_agree_on_inner_integral() {
        let qc = QuadratureConfig::default();
        let rule = qc.rule();
        let sv = StabilityVector::new(vec![0.5]).unwrap();
        for (x, u, v) in [(1.0, 0.3, 0.9), (0.2, 2.0, 1e-4), (3.0, 1.0, 1.0)] {
            let a = inner_integral(x, u, v, &sv, CriticalRoute::Decomposition, &rule);
            let b = inner_integral(x, u, v, &sv, CriticalRoute::Direct, &rule);
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn regime_is_enforced() {
        let qc = QuadratureConfig::default();
        let sv = StabilityVector::new(vec![0.4]).unwrap();
        assert!(capital_phi(0.0, &sv, &qc).is_err());
        assert!(critical_c(1.0, 1.0, 0.0, &sv, CriticalRoute::Direct, &qc).is_err());
    }
}
