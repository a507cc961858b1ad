//! TOML experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::branching_system::{Boundary, SystemParams};
use crate::error::{Error, Result};
use crate::limit_covariance::{QuadratureConfig, Weight};
use crate::osrf_fields::{FieldSpec, Which};
use crate::stable_motion::StabilityVector;
use crate::test_function::TestFunction;

/// Verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    MeanIdentity,
    CovarianceVsLimit,
    IntegratedFunctional,
    FieldProperties,
    KernelIdentities,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::MeanIdentity => "mean-identity",
            Suite::CovarianceVsLimit => "covariance-vs-limit",
            Suite::IntegratedFunctional => "integrated-functional",
            Suite::FieldProperties => "field-properties",
            Suite::KernelIdentities => "kernel-identities",
        }
    }

    pub fn parse(s: &str) -> Result<Suite> {
        toml::Value::String(s.to_string())
            .try_into()
            .map_err(|_| Error::Config(format!("unknown suite `{s}`")))
    }

    fn needs_simulation(&self) -> bool {
        matches!(self, Suite::MeanIdentity | Suite::CovarianceVsLimit | Suite::IntegratedFunctional)
    }
}

/// The branching system, without the time-scale index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub alphas: Vec<f64>,
    pub gamma: f64,
    pub theta: f64,
}

impl ParamsConfig {
    pub fn system(&self, n: f64) -> Result<SystemParams> {
        SystemParams::new(StabilityVector::new(self.alphas.clone())?, self.gamma, self.theta, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Replicates per ladder rung.
    pub replicates: usize,
    /// Time-scale indices, strictly increasing.
    pub n_ladder: Vec<f64>,
    /// Rescaled observation times for `⟨X_n(t), φ⟩`.
    pub t_grid: Vec<f64>,
    /// Raw times `s` at which `⟨N(s), φ⟩` is probed (mean identity).
    pub probes: Vec<f64>,
    /// Trapezoid steps on `[0, 1]` for the integrated functional.
    pub integration_steps: usize,
    /// Box radius margin in units of the stable displacement scale.
    pub margin: f64,
    /// Time steps over the horizon.
    pub steps: usize,
    pub boundary: Boundary,
    /// Cap on expected particle-seconds per replicate.
    pub budget: f64,
    /// Relative slack allowed for finite-`n` bias at the largest `n`.
    pub gap_budget: f64,
    /// Re-run the largest rung in a doubled box and compare.
    pub doubling_check: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            n_ladder: vec![16.0],
            t_grid: vec![1.0],
            probes: vec![],
            integration_steps: 64,
            margin: 3.0,
            steps: 2048,
            boundary: Boundary::Periodic,
            budget: crate::branching_system::sim::DEFAULT_BUDGET,
            gap_budget: 0.15,
            doubling_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub which: Vec<Which>,
    pub alphas: Vec<f64>,
    pub theta: f64,
    pub gamma: f64,
    /// Scaling factors probed by the operator-scaling check.
    pub scales: Vec<f64>,
    /// Point set for `field` output and the Gram checks.
    pub points: Vec<Vec<f64>>,
    pub draws: usize,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            which: vec![Which::Y1],
            alphas: vec![0.4],
            theta: 1.0,
            gamma: 1.0,
            scales: vec![0.5, 2.0, 4.0],
            points: vec![],
            draws: 0,
        }
    }
}

impl FieldConfig {
    pub fn specs(&self) -> Result<Vec<FieldSpec>> {
        let sv = StabilityVector::new(self.alphas.clone())?;
        self.which.iter().map(|w| FieldSpec::new(*w, sv.clone(), self.theta, self.gamma)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// Stability vector with `ᾱ = 2` for the critical degeneration.
    pub critical_alphas: Vec<f64>,
    /// Values of `ᾱ` for the intermediate degeneration.
    pub intermediate_abars: Vec<f64>,
    /// Indices `α` (d = 1) for the Gaussian spectral oracle.
    pub oracle_alphas: Vec<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { critical_alphas: vec![0.5], intermediate_abars: vec![1.25, 1.5, 1.75], oracle_alphas: vec![0.4, 0.8] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub suites: Vec<Suite>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    pub params: ParamsConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub functions: Vec<TestFunction>,
    #[serde(default)]
    pub weights: Vec<Weight>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub kernels: KernelConfig,
}

fn default_seed() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Largest rescaled time any request needs.
    pub fn t_max(&self, n: f64) -> f64 {
        let probe = self.simulation.probes.iter().cloned().fold(0.0, f64::max) / n;
        let mut t = self.simulation.t_grid.iter().cloned().fold(probe, f64::max);
        if !self.weights.is_empty() {
            t = t.max(1.0);
        }
        t
    }

    /// Every inconsistency is reported here, before any simulation.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let sv = StabilityVector::new(self.params.alphas.clone())?;
        self.quadrature.validate()?;
        let sim = &self.simulation;
        let simulating = self.suites.iter().any(|s| s.needs_simulation());
        if simulating {
            if sim.replicates < 2 {
                return fail("at least two replicates are required".into());
            }
            if sim.n_ladder.is_empty() || sim.n_ladder.windows(2).any(|w| !(w[1] > w[0])) {
                return fail("n_ladder must be nonempty and strictly increasing".into());
            }
            if self.functions.is_empty() {
                return fail("simulation suites need at least one test function".into());
            }
            if sim.steps == 0 || sim.integration_steps == 0 {
                return fail("steps and integration_steps must be positive".into());
            }
            if !(sim.gap_budget >= 0.0) || !(sim.margin >= 0.0) || !(sim.budget > 0.0) {
                return fail("gap_budget, margin and budget must be nonnegative".into());
            }
            if sim.t_grid.iter().any(|t| !(*t > 0.0)) {
                return fail("t_grid times must be positive".into());
            }
            if sim.probes.iter().any(|t| !(*t > 0.0)) {
                return fail("probe times must be positive".into());
            }
            for n in &sim.n_ladder {
                self.params.system(*n)?;
            }
        }
        if self.suites.contains(&Suite::MeanIdentity) && sim.probes.is_empty() {
            return fail("mean-identity needs probe times".into());
        }
        if self.suites.contains(&Suite::CovarianceVsLimit) && sim.t_grid.is_empty() {
            return fail("covariance-vs-limit needs a t_grid".into());
        }
        if self.suites.contains(&Suite::IntegratedFunctional) && self.weights.is_empty() {
            return fail("integrated-functional needs at least one weight".into());
        }
        for f in &self.functions {
            f.validate()?;
            if f.dim() != sv.dim() {
                return fail("test function dimension differs from the motion".into());
            }
        }
        if self.suites.contains(&Suite::FieldProperties) {
            let specs = self.field.specs()?;
            if self.field.scales.iter().any(|c| !(*c > 0.0)) {
                return fail("field scales must be positive".into());
            }
            for p in &self.field.points {
                if p.len() != specs[0].sv.dim() || p.iter().any(|x| !(*x >= 0.0)) {
                    return fail("field points must lie in [0, ∞)^d".into());
                }
            }
        }
        Ok(())
    }
}
