//! Limit covariances of the rescaled occupation-time fluctuations in the
//! three regimes, the critical kernel and its decomposition, and the
//! closed-form degenerations used as oracles.

pub mod critical;
pub mod intermediate;
pub mod spectral;

use serde::{Deserialize, Serialize};

use crate::branching_system::{Regime, SystemParams};
use crate::error::{Result, invalid};
use crate::quad::{Estimate, GaussLegendre};
use crate::stable_motion::StabilityVector;
use crate::test_function::TestFunction;

pub use critical::{
    CriticalRoute, capital_phi, capital_phi2, cov_critical, critical_c, decomposition_residual, phi_kernel, phi1, phi2,
};
pub use intermediate::{cov_intermediate, intermediate_c, intermediate_constant, subfbm_cov};
pub use spectral::{cube_moment, cube_moment_converges, spectral_integral};

/// Accuracy knobs shared by all quadratures in this module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Gauss-Legendre nodes per panel; doubled for the error estimate.
    pub nodes: usize,
    /// Panel width in logarithmic variables.
    pub panel_width: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { nodes: 16, panel_width: 0.5, abs_tol: 1e-14, rel_tol: 1e-11 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 8 {
            return Err(invalid("quadrature needs at least 8 nodes per panel"));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.panel_width > 0.0) {
            return Err(invalid("quadrature tolerances and panel width must be positive"));
        }
        Ok(())
    }

    pub fn rule(&self) -> GaussLegendre {
        GaussLegendre::new(self.nodes)
    }

    pub fn doubled(&self) -> Self {
        Self { nodes: 2 * self.nodes, ..*self }
    }
}

/// `∫_0^m e^{-θs} ds`, with the `θ → 0` limit taken analytically.
pub fn time_weight(theta: f64, m: f64) -> f64 {
    if theta == 0.0 { m } else { -(-theta * m).exp_m1() / theta }
}

/// Spectral factor of the large-regime covariance,
/// `(2π)^{-d} ∫ (2/S + γ/S²) φ̂₁ conj(φ̂₂) dz`.
pub fn large_spectral_factor(sv: &StabilityVector, f1: &TestFunction, f2: &TestFunction, gamma_rate: f64, qc: &QuadratureConfig) -> Result<Estimate> {
    require_large(sv)?;
    let j1 = spectral_integral(sv, f1, f2, 1.0, qc)?;
    let j2 = if gamma_rate != 0.0 { spectral_integral(sv, f1, f2, 2.0, qc)? } else { Estimate::new(0.0, 0.0) };
    let c = (2.0 * std::f64::consts::PI).powi(-(sv.dim() as i32));
    Ok(Estimate::new(
        c * (2.0 * j1.value + gamma_rate * j2.value),
        c * (2.0 * j1.error + gamma_rate.abs() * j2.error),
    ))
}

pub(crate) fn require_large(sv: &StabilityVector) -> Result<()> {
    let abar = sv.alpha_bar();
    if abar <= 2.0 {
        return Err(invalid(format!("large regime needs ᾱ > 2, got {abar}")));
    }
    Ok(())
}

/// Limit covariance of the large regime.
#[allow(clippy::too_many_arguments)]
pub fn cov_large(r: f64, t: f64, f1: &TestFunction, f2: &TestFunction, sv: &StabilityVector, gamma_rate: f64, theta: f64, qc: &QuadratureConfig) -> Result<Estimate> {
    if r < 0.0 || t < 0.0 || theta < 0.0 {
        return Err(invalid("times and θ must be nonnegative"));
    }
    let s = large_spectral_factor(sv, f1, f2, gamma_rate, qc)?;
    let w = time_weight(theta, r.min(t));
    Ok(Estimate::new(s.value * w, s.error * w))
}

/// Time weight `h` of the integrated functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    Constant { value: f64 },
    /// `h(t) = a + b t`.
    Linear { a: f64, b: f64 },
}

impl Weight {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Weight::Constant { value } => *value,
            Weight::Linear { a, b } => a + b * t,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Weight::Constant { value } if *value == 0.0) || matches!(self, Weight::Linear { a, b } if *a == 0.0 && *b == 0.0)
    }
}

/// `∫_0^1 ∫_0^1 h(r) h(t) Cov(r,t) dr dt` for a symmetric covariance,
/// integrated over the triangle `t ≤ r` (where the covariance is smooth)
/// by a tensor Gauss-Legendre rule; the error is the node-doubling gap.
pub fn integrated_variance<F>(mut cov: F, h: &Weight, nodes: usize) -> Result<Estimate>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    if h.is_zero() {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let mut with = |n: usize| -> Result<f64> {
        let gl = GaussLegendre::new(n);
        let mut total = 0.0;
        for (x, w) in gl.nodes().iter().zip(gl.weights()) {
            let r = 0.5 * (1.0 + x);
            let mut inner = 0.0;
            for (y, v) in gl.nodes().iter().zip(gl.weights()) {
                let t = 0.5 * r * (1.0 + y);
                inner += v * h.eval(t) * cov(r, t)?;
            }
            total += w * h.eval(r) * 0.5 * r * inner;
        }
        Ok(2.0 * 0.5 * total)
    };
    let coarse = with(nodes)?;
    let fine = with(2 * nodes)?;
    Ok(Estimate::new(fine, (fine - coarse).abs()))
}

/// Limit covariances of one system for a fixed family of test functions,
/// with the time-independent factors precomputed.
#[derive(Debug, Clone)]
pub struct LimitModel {
    params: SystemParams,
    masses: Vec<f64>,
    spectral: Vec<Vec<Estimate>>,
    qc: QuadratureConfig,
}

impl LimitModel {
    pub fn new(params: &SystemParams, functions: &[TestFunction], qc: &QuadratureConfig) -> Result<Self> {
        qc.validate()?;
        for f in functions {
            if f.dim() != params.sv.dim() {
                return Err(invalid("test function dimension differs from the motion"));
            }
        }
        let masses = functions.iter().map(|f| f.integral()).collect();
        let mut spectral = Vec::new();
        if params.regime()? == Regime::Large {
            for f1 in functions {
                let mut row = Vec::new();
                for f2 in functions {
                    row.push(large_spectral_factor(&params.sv, f1, f2, params.gamma, qc)?);
                }
                spectral.push(row);
            }
        }
        Ok(Self { params: params.clone(), masses, spectral, qc: *qc })
    }

    pub fn regime(&self) -> Regime {
        self.params.regime().expect("validated at construction")
    }

    /// Limit of `Cov(⟨X_n(r), φ_i⟩, ⟨X_n(t), φ_j⟩)`.
    pub fn cov(&self, i: usize, j: usize, r: f64, t: f64) -> Result<Estimate> {
        let p = &self.params;
        match self.regime() {
            Regime::Large => {
                let s = self.spectral[i][j];
                let w = time_weight(p.theta, r.min(t));
                Ok(Estimate::new(s.value * w, s.error * w))
            }
            Regime::Critical => cov_critical(r, t, p.theta, &p.sv, p.gamma, self.masses[i], self.masses[j], &self.qc),
            Regime::Intermediate => {
                cov_intermediate(r, t, p.theta, &p.sv, p.gamma, self.masses[i], self.masses[j], &self.qc)
            }
        }
    }

    /// Limit variance of `⟨X̃_n, φ_i ⊗ h⟩`.
    pub fn integrated(&self, i: usize, h: &Weight, nodes: usize) -> Result<Estimate> {
        integrated_variance(|r, t| self.cov(i, i, r, t).map(|e| e.value), h, nodes)
    }
}
