//! The weakly degenerate branching particle system: parameters, regimes,
//! the exact mean factors and the simulator.
//!
//! Particles move as independent copies of the stable motion, live for an
//! `Exp(γ)` time and then split into two with probability `e^{-δ a}/2`
//! (`a` = age at the split) or vanish otherwise. The initial population is a
//! unit-intensity Poisson field.

pub mod occupation;
pub mod sim;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Result, invalid};
use crate::stable_motion::StabilityVector;

pub use occupation::{FluctuationSample, Occupation, fluctuation_sample, integrated_functional, occupation_functional};
pub use sim::{Boundary, EventLog, ParticleRecord, PathVisitor, SimOptions, SimulationBox, TimeGrid, simulate, simulate_with};

/// How far `ᾱ` may sit from 2 and still count as critical.
pub const CRITICAL_TOLERANCE: f64 = 1e-9;

/// Which limit theorem governs the fluctuations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Large,
    Critical,
    Intermediate,
}

impl Regime {
    pub fn classify(abar: f64) -> Result<Regime> {
        if !(abar > 1.0) {
            return Err(invalid(format!("ᾱ = {abar} is unsupported; it must exceed 1")));
        }
        Ok(if (abar - 2.0).abs() <= CRITICAL_TOLERANCE {
            Regime::Critical
        } else if abar > 2.0 {
            Regime::Large
        } else {
            Regime::Intermediate
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Large => "large",
            Regime::Critical => "critical",
            Regime::Intermediate => "intermediate",
        }
    }

    /// The norming `F_n` as a formula.
    pub fn norming_formula(&self, abar: f64) -> String {
        match self {
            Regime::Large => "sqrt(n)".into(),
            Regime::Critical => "sqrt(n ln n)".into(),
            Regime::Intermediate => format!("n^((3-{abar})/2)"),
        }
    }

    /// Number of the limit theorem for this regime.
    pub fn theorem(&self) -> &'static str {
        match self {
            Regime::Large => "2.1",
            Regime::Critical => "2.2",
            Regime::Intermediate => "2.3",
        }
    }
}

/// Parameters of the `n`-th system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub sv: StabilityVector,
    /// Branching rate.
    pub gamma: f64,
    /// Limit of `n δ_n`.
    pub theta: f64,
    /// Time-scale index.
    pub n: f64,
}

impl SystemParams {
    /// `γ = 0` is allowed only with `θ = 0`, as a no-branching diagnostic.
    pub fn new(sv: StabilityVector, gamma: f64, theta: f64, n: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("branching rate must be finite and nonnegative, got {gamma}")));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(invalid(format!("θ must be finite and nonnegative, got {theta}")));
        }
        if !(n > 0.0 && n.is_finite()) {
            return Err(invalid(format!("n must be positive, got {n}")));
        }
        let p = Self { sv, gamma, theta, n };
        if gamma == 0.0 {
            if theta != 0.0 {
                return Err(invalid("γ = 0 is only a diagnostic mode and needs θ = 0"));
            }
        } else if p.delta() >= gamma {
            return Err(invalid(format!("δ_n = {} must be below γ = {gamma}", p.delta())));
        }
        if p.regime()? == Regime::Critical && n <= 1.0 {
            return Err(invalid("the critical norming needs n > 1"));
        }
        Ok(p)
    }

    /// `δ_n = θ/n`.
    pub fn delta(&self) -> f64 {
        self.theta / self.n
    }

    pub fn regime(&self) -> Result<Regime> {
        Regime::classify(self.sv.alpha_bar())
    }

    /// `F_n`.
    pub fn norming(&self) -> f64 {
        let n = self.n;
        match self.regime().expect("validated at construction") {
            Regime::Large => n.sqrt(),
            Regime::Critical => (n * n.ln()).sqrt(),
            Regime::Intermediate => n.powf(0.5 * (3.0 - self.sv.alpha_bar())),
        }
    }

    /// Same system at another time scale.
    pub fn with_n(&self, n: f64) -> Result<Self> {
        Self::new(self.sv.clone(), self.gamma, self.theta, n)
    }

    /// `f̄_n(s) = 1 + δ/(γ-δ) (1 - e^{-(γ-δ)s})`.
    pub fn mean_factor_fbar(&self, s: f64) -> Result<f64> {
        let (g, d) = self.rates()?;
        if !(s >= 0.0) {
            return Err(invalid(format!("time must be nonnegative, got {s}")));
        }
        if d == 0.0 {
            return Ok(1.0);
        }
        Ok(1.0 - d / (g - d) * (-(g - d) * s).exp_m1())
    }

    /// `f_n(s) = f̄_n(s) e^{-δ s}`, so that `E⟨N(s), φ⟩ = f_n(s) ∫φ`.
    pub fn mean_factor_f(&self, s: f64) -> Result<f64> {
        Ok(self.mean_factor_fbar(s)? * (-self.delta() * s).exp())
    }

    /// `∫_0^S f_n(s) ds` in closed form.
    pub fn mean_factor_integral(&self, upto: f64) -> Result<f64> {
        let (g, d) = self.rates()?;
        if !(upto >= 0.0) {
            return Err(invalid(format!("time must be nonnegative, got {upto}")));
        }
        if d == 0.0 {
            return Ok(upto);
        }
        let e = |a: f64| -(-a * upto).exp_m1() / a;
        Ok((g * e(d) - d * e(g)) / (g - d))
    }

    fn rates(&self) -> Result<(f64, f64)> {
        let d = self.delta();
        if d > 0.0 && d >= self.gamma {
            return Err(invalid(format!("δ_n = {d} must be below γ = {}", self.gamma)));
        }
        Ok((self.gamma, d))
    }
}

/// Number of children left by a particle that splits at `age`: two with
/// probability `e^{-δ·age}/2`, otherwise none.
pub fn offspring_count<R: Rng + ?Sized>(age: f64, delta: f64, rng: &mut R) -> Result<u8> {
    if !(age >= 0.0) || !(delta >= 0.0) {
        return Err(invalid(format!("age and δ must be nonnegative, got {age} and {delta}")));
    }
    Ok(draw_offspring(age, delta, rng))
}

#[inline]
pub(crate) fn draw_offspring<R: Rng + ?Sized>(age: f64, delta: f64, rng: &mut R) -> u8 {
    let p = 0.5 * (-delta * age).exp();
    if rng.random::<f64>() < p { 2 } else { 0 }
}

/// One row of the regime table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeRow {
    pub alpha_bar: f64,
    pub regime: &'static str,
    pub norming: String,
    pub theorem: &'static str,
}

pub fn regime_table(sv: &StabilityVector) -> Result<RegimeRow> {
    let abar = sv.alpha_bar();
    let r = Regime::classify(abar)?;
    Ok(RegimeRow { alpha_bar: abar, regime: r.name(), norming: r.norming_formula(abar), theorem: r.theorem() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussLegendre;
    use crate::rng::StreamKey;
    use approx::assert_relative_eq;

    fn params(gamma: f64, theta: f64, n: f64) -> SystemParams {
        SystemParams::new(StabilityVector::new(vec![0.8]).unwrap(), gamma, theta, n).unwrap()
    }

    #[test]
    fn mean_factor_examples() {
        let p = params(1.0, 1.0, 10.0);
        assert_eq!(p.mean_factor_fbar(0.0).unwrap(), 1.0);
        assert_eq!(p.mean_factor_f(0.0).unwrap(), 1.0);
        assert_relative_eq!(p.mean_factor_fbar(200.0).unwrap(), 1.0 / 0.9, max_relative = 1e-14);
        let want = (1.0 + (0.1 / 0.9) * (1.0 - (-0.9f64).exp())) * (-0.1f64).exp();
        assert_relative_eq!(p.mean_factor_f(1.0).unwrap(), want, max_relative = 1e-14);
        let q = params(1.0, 0.0, 10.0);
        for s in [0.0, 0.5, 30.0] {
            assert_eq!(q.mean_factor_f(s).unwrap(), 1.0);
        }
        assert!(p.mean_factor_f(-1.0).is_err());
    }

    /// `m(s) = e^{-γs} + ∫_0^s γ e^{-γu} e^{-δu} m(s-u) du`: a particle alive
    /// at `s` either has not split, or split at `u` leaving two children
    /// with probability `e^{-δu}/2` each carrying `m(s-u)`.
    fn renewal(gamma: f64, delta: f64, s_max: f64, steps: usize) -> Vec<f64> {
        let h = s_max / steps as f64;
        let mut m = vec![1.0; steps + 1];
        let k = |u: f64| gamma * (-(gamma + delta) * u).exp();
        for i in 1..=steps {
            let s = i as f64 * h;
            // Trapezoid with the unknown m(s) on the right-hand side at u = 0.
            let mut acc = 0.5 * k(s) * m[0];
            for j in 1..i {
                acc += k(j as f64 * h) * m[i - j];
            }
            m[i] = ((-gamma * s).exp() + h * acc) / (1.0 - 0.5 * h * k(0.0));
        }
        m
    }

    #[test]
    fn mean_factor_solves_renewal_equation() {
        let p = params(1.0, 1.0, 10.0);
        let steps = 4000;
        let m = renewal(1.0, 0.1, 5.0, steps);
        for i in [400, 1000, 4000] {
            let s = 5.0 * i as f64 / steps as f64;
            assert_relative_eq!(m[i], p.mean_factor_f(s).unwrap(), max_relative = 1e-6);
        }
    }

    #[test]
    fn mean_integral_matches_quadrature() {
        let gl = GaussLegendre::new(30);
        for (g, th, n) in [(1.0, 1.0, 10.0), (2.0, 0.5, 1.0), (1.0, 0.0, 4.0)] {
            let p = params(g, th, n);
            let num = gl.panels(|s| p.mean_factor_f(s).unwrap(), 0.0, 7.0, 10);
            assert_relative_eq!(p.mean_factor_integral(7.0).unwrap(), num, max_relative = 1e-13);
        }
    }

    #[test]
    fn parameter_validation() {
        let sv = StabilityVector::new(vec![0.8]).unwrap();
        assert!(SystemParams::new(sv.clone(), 1.0, 10.0, 10.0).is_err());
        assert!(SystemParams::new(sv.clone(), 0.0, 1.0, 10.0).is_err());
        assert!(SystemParams::new(sv.clone(), 0.0, 0.0, 10.0).is_ok());
        assert!(SystemParams::new(sv, 1.0, 0.0, 0.0).is_err());
        let crit = StabilityVector::new(vec![0.5]).unwrap();
        assert!(SystemParams::new(crit, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn norming_per_regime() {
        let n = 64.0;
        let large = SystemParams::new(StabilityVector::new(vec![0.4]).unwrap(), 1.0, 0.0, n).unwrap();
        assert_relative_eq!(large.norming(), 8.0);
        let crit = SystemParams::new(StabilityVector::new(vec![0.5]).unwrap(), 1.0, 0.0, n).unwrap();
        assert_relative_eq!(crit.norming(), (n * n.ln()).sqrt());
        let mid = SystemParams::new(StabilityVector::new(vec![0.8]).unwrap(), 1.0, 0.0, n).unwrap();
        assert_relative_eq!(mid.norming(), n.powf(0.875), max_relative = 1e-14);
    }

    #[test]
    fn offspring_law() {
        let mut rng = StreamKey::new(5, 0).particle(0);
        let m = 100_000;
        let twos = (0..m).filter(|_| offspring_count(3.0, 0.0, &mut rng).unwrap() == 2).count();
        assert!((twos as f64 / m as f64 - 0.5).abs() < 3.0 * (0.25 / m as f64).sqrt() + 1e-3);
        let p = 0.5 * (-0.4f64 * 2.0).exp();
        let twos = (0..m).filter(|_| offspring_count(2.0, 0.4, &mut rng).unwrap() == 2).count();
        let se = (p * (1.0 - p) / m as f64).sqrt();
        assert!((twos as f64 / m as f64 - p).abs() < 4.0 * se);
        assert_eq!(offspring_count(1e6, 1.0, &mut rng).unwrap(), 0);
        assert!(offspring_count(-1.0, 0.1, &mut rng).is_err());
    }

    #[test]
    fn regime_table_examples() {
        let r = regime_table(&StabilityVector::new(vec![0.4]).unwrap()).unwrap();
        assert_eq!((r.alpha_bar, r.regime, r.norming.as_str(), r.theorem), (2.5, "large", "sqrt(n)", "2.1"));
        let r = regime_table(&StabilityVector::new(vec![0.5]).unwrap()).unwrap();
        assert_eq!((r.regime, r.norming.as_str(), r.theorem), ("critical", "sqrt(n ln n)", "2.2"));
        let r = regime_table(&StabilityVector::new(vec![1.5, 1.5]).unwrap()).unwrap();
        assert_relative_eq!(r.alpha_bar, 4.0 / 3.0, max_relative = 1e-15);
        assert_eq!((r.regime, r.theorem), ("intermediate", "2.3"));
        assert!(Regime::classify(1.0).is_err());
    }
}
