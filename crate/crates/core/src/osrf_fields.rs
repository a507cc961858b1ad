//! The operator-scaling Gaussian fields `Y₁`, `Y₂` of the large regime.
//!
//! `Cov(Y(u), Y(v)) = K ∫ Π_k (1 - e^{iu_k z_k})(1 - e^{-iv_k z_k}) / z_k² S(z)^{-q} dz`
//! with `q = 1` for `Y₁` and `q = 2` for `Y₂`. Odd parts cancel, leaving the
//! even per-axis factor `c(z) = (1 - cos uz - cos vz + cos wz)/z²`,
//! `w = |u - v|`, whose Laplace transform is
//! `H(τ) = u B(τu^{-α}) + v B(τv^{-α}) - w B(τw^{-α})` with the universal
//! profile `B(s) = ∫ (1 - cos y)/y² e^{-s|y|^α} dy`. `B` is tabulated once
//! per `α`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result, invalid};
use crate::limit_covariance::QuadratureConfig;
use crate::limit_covariance::spectral::{AxisFactor, schwinger};
use crate::quad::{Estimate, GaussLegendre};
use crate::rng::StreamKey;
use crate::stable_motion::StabilityVector;

/// Largest point set accepted by the dense sampler.
pub const MAX_POINTS: usize = 2000;

/// Eigenvalues down to `-CLIP · λ_max` are treated as roundoff and zeroed.
pub const CLIP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Y1,
    Y2,
}

/// Law of one of the two fields.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub which: Which,
    pub sv: StabilityVector,
    pub theta: f64,
    pub gamma: f64,
}

impl FieldSpec {
    pub fn new(which: Which, sv: StabilityVector, theta: f64, gamma: f64) -> Result<Self> {
        let abar = sv.alpha_bar();
        if abar <= 2.0 {
            return Err(invalid(format!("the fields need ᾱ > 2, got {abar}")));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(invalid("θ must be finite and nonnegative"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("γ must be positive"));
        }
        Ok(Self { which, sv, theta, gamma })
    }

    /// `K₁ = 2(1 - e^{-θ})/((2π)^d θ)` and `K₂ = γ(1 - e^{-θ})/((2π)^d θ)`,
    /// with their `θ → 0` limits.
    pub fn constant(&self) -> f64 {
        let time = if self.theta == 0.0 { 1.0 } else { -(-self.theta).exp_m1() / self.theta };
        let lead = match self.which {
            Which::Y1 => 2.0,
            Which::Y2 => self.gamma,
        };
        lead * time / (2.0 * std::f64::consts::PI).powi(self.sv.dim() as i32)
    }

    /// Kernel power `q` in `S(z)^{-q}`.
    pub fn kernel_power(&self) -> f64 {
        match self.which {
            Which::Y1 => 1.0,
            Which::Y2 => 2.0,
        }
    }

    /// `β` with `Cov(Y(c^H u), Y(c^H v)) = c^β Cov(Y(u), Y(v))`: the
    /// substitution `x = c^H z` gives `β = q + ᾱ`.
    pub fn scaling_exponent(&self) -> f64 {
        self.kernel_power() + self.sv.alpha_bar()
    }
}

/// Piecewise Chebyshev interpolant of `ln B(e^σ)` on `[SIGMA_LO, SIGMA_HI]`.
#[derive(Debug)]
struct ProfileTable {
    alpha: f64,
    values: Vec<Vec<f64>>,
}

const SIGMA_LO: f64 = -80.0;
const SIGMA_HI: f64 = 60.0;
const PANEL: f64 = 1.0;
const DEGREE: usize = 24;

fn cheb_node(j: usize) -> f64 {
    -((2 * j + 1) as f64 * std::f64::consts::PI / (2 * DEGREE) as f64).cos()
}

impl ProfileTable {
    fn build(alpha: f64) -> Self {
        let panels = ((SIGMA_HI - SIGMA_LO) / PANEL).round() as usize;
        let values = (0..panels)
            .into_par_iter()
            .map(|p| {
                let a = SIGMA_LO + p as f64 * PANEL;
                (0..DEGREE)
                    .map(|j| {
                        let s = (a + 0.5 * PANEL * (1.0 + cheb_node(j))).exp();
                        profile_direct(alpha, s).ln()
                    })
                    .collect()
            })
            .collect();
        Self { alpha, values }
    }

    fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return std::f64::consts::PI;
        }
        let sigma = s.ln();
        if sigma < SIGMA_LO {
            return std::f64::consts::PI;
        }
        if sigma >= SIGMA_HI {
            return profile_large(self.alpha, s);
        }
        let p = (((sigma - SIGMA_LO) / PANEL) as usize).min(self.values.len() - 1);
        let x = 2.0 * (sigma - SIGMA_LO - p as f64 * PANEL) / PANEL - 1.0;
        // Barycentric formula for first-kind Chebyshev nodes.
        let (mut num, mut den) = (0.0, 0.0);
        for (j, v) in self.values[p].iter().enumerate() {
            let xj = cheb_node(j);
            let mut w = ((2 * j + 1) as f64 * std::f64::consts::PI / (2 * DEGREE) as f64).sin();
            if j % 2 == 1 {
                w = -w;
            }
            let d = x - xj;
            if d == 0.0 {
                return v.exp();
            }
            num += w / d * v;
            den += w / d;
        }
        (num / den).exp()
    }
}

/// Large-`s` expansion `Γ(1+1/α) s^{-1/α} - Γ(3/α)/(12α) s^{-3/α}`.
fn profile_large(alpha: f64, s: f64) -> f64 {
    gamma(1.0 + 1.0 / alpha) * s.powf(-1.0 / alpha) - gamma(3.0 / alpha) / (12.0 * alpha) * s.powf(-3.0 / alpha)
}

/// Periods integrated explicitly before the tail expansion takes over.
const PERIODS: usize = 200;

/// `B(s)` by direct quadrature: logarithmic panels on the first period,
/// one Gauss-Legendre panel per period up to `Y = 2π·PERIODS`, and beyond
/// that `∫_Y^∞ g (1 - cos y) dy = ∫_Y^∞ g dy + g'(Y) + O(Y^{-5})` for
/// `g(y) = y^{-2} e^{-s y^α}`.
pub fn profile_direct(alpha: f64, s: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let rule = GaussLegendre::new(24);
    let damp = |y: f64| if s == 0.0 { 1.0 } else { (-s * y.powf(alpha)).exp() };
    let f = |y: f64| {
        let h = (0.5 * y).sin();
        2.0 * h * h / (y * y) * damp(y)
    };
    let y_kill = if s > 0.0 { (745.0 / s).powf(1.0 / alpha) } else { f64::INFINITY };
    let y_c = if s > 0.0 { s.powf(-1.0 / alpha) } else { f64::INFINITY };
    let first = two_pi.min(y_kill);
    let lo = first.min(y_c).ln() - 36.0;
    let mut half = rule.log_panels(f, lo, first.ln(), 0.25) + 0.5 * lo.exp();
    let big_y = two_pi * PERIODS as f64;
    if y_kill > two_pi {
        let top = big_y.min(y_kill);
        let periods = (top / two_pi).ceil() as usize;
        for k in 1..periods {
            let a = k as f64 * two_pi;
            half += rule.integrate(f, a, (a + two_pi).min(top));
        }
        if y_kill > big_y {
            // ∫_Y^∞ y^{-2} e^{-s y^α} dy = ∫_0^{1/Y} e^{-s x^{-α}} dx.
            let tail = if s == 0.0 {
                1.0 / big_y
            } else {
                let x_hi = (1.0 / big_y).ln();
                let x_lo = x_hi.min(s.ln() / alpha) - 60.0;
                rule.log_panels(|x| (-s * x.powf(-alpha)).exp(), x_lo, x_hi, 0.5)
            };
            let gp = damp(big_y) * (-2.0 * big_y.powi(-3) - s * alpha * big_y.powf(alpha - 3.0));
            half += tail + gp;
        }
    }
    2.0 * half
}

fn table(alpha: f64) -> Arc<ProfileTable> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<ProfileTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("profile cache poisoned");
    guard.entry(alpha.to_bits()).or_insert_with(|| Arc::new(ProfileTable::build(alpha))).clone()
}

/// Tabulated `B(s)` for index `α`.
pub fn profile(alpha: f64, s: f64) -> f64 {
    table(alpha).eval(s)
}

struct FieldFactor {
    u: f64,
    v: f64,
    table: Arc<ProfileTable>,
}

impl FieldFactor {
    fn term(&self, a: f64, alpha: f64, tau: f64) -> f64 {
        if a == 0.0 { 0.0 } else { a * self.table.eval(tau * a.powf(-alpha)) }
    }
}

impl AxisFactor for FieldFactor {
    fn laplace(&self, alpha: f64, tau: f64, _rule: &GaussLegendre) -> f64 {
        let w = (self.u - self.v).abs();
        self.term(self.u, alpha, tau) + self.term(self.v, alpha, tau) - self.term(w, alpha, tau)
    }

    fn at_zero(&self) -> f64 {
        self.u * self.v
    }

    fn scale(&self) -> f64 {
        1.0 / self.u.max(self.v)
    }
}

fn check_point(spec: &FieldSpec, u: &[f64]) -> Result<()> {
    if u.len() != spec.sv.dim() {
        return Err(invalid("point dimension differs from the field"));
    }
    if u.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(invalid("the fields are defined on [0, ∞)^d only"));
    }
    Ok(())
}

/// `Cov(Y(u), Y(v))`.
pub fn cov_field(spec: &FieldSpec, u: &[f64], v: &[f64], qc: &QuadratureConfig) -> Result<Estimate> {
    check_point(spec, u)?;
    check_point(spec, v)?;
    let factors: Vec<FieldFactor> = spec
        .sv
        .alphas()
        .iter()
        .zip(u.iter().zip(v))
        .map(|(a, (x, y))| FieldFactor { u: *x, v: *y, table: table(*a) })
        .collect();
    let refs: Vec<&dyn AxisFactor> = factors.iter().map(|f| f as &dyn AxisFactor).collect();
    let j = schwinger(&spec.sv, &refs, spec.kernel_power(), qc)?;
    let k = spec.constant();
    Ok(Estimate::new(k * j.value, k * j.error))
}

/// `½(u^{2h} + v^{2h} - |u - v|^{2h})`.
pub fn fbm_cov(h: f64, u: f64, v: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(invalid(format!("Hurst index {h} outside (0, 1)")));
    }
    let p = 2.0 * h;
    Ok(0.5 * (u.powf(p) + v.powf(p) - (u - v).abs().powf(p)))
}

/// `d = 1` closed form: `K C(u^{1+β} + v^{1+β} - |u-v|^{1+β})` with `β = qα`
/// and `C = ∫ (1 - cos y)|y|^{-2-β} dy = -2Γ(-1-β) cos(π(1+β)/2)`.
pub fn cov_field_1d(spec: &FieldSpec, u: f64, v: f64) -> Result<f64> {
    if spec.sv.dim() != 1 {
        return Err(invalid("closed form only in one dimension"));
    }
    let b = spec.kernel_power() * spec.sv.alphas()[0];
    if b >= 1.0 {
        return Err(invalid("closed form needs qα < 1"));
    }
    let c = -2.0 * gamma(-1.0 - b) * (std::f64::consts::FRAC_PI_2 * (1.0 + b)).cos();
    let p = 1.0 + b;
    Ok(spec.constant() * c * (u.powf(p) + v.powf(p) - (u - v).abs().powf(p)))
}

/// Relative violation of operator scaling,
/// `|Cov(c^H u, c^H v) - c^β Cov(u, v)| / max(|c^β Cov(u,v)|, ε)`.
pub fn scaling_defect(spec: &FieldSpec, c: f64, u: &[f64], v: &[f64], qc: &QuadratureConfig) -> Result<f64> {
    if !(c > 0.0) {
        return Err(invalid("scaling factor must be positive"));
    }
    let h = spec.sv.scaling();
    let lhs = cov_field(spec, &h.apply(c, u), &h.apply(c, v), qc)?.value;
    let rhs = c.powf(spec.scaling_exponent()) * cov_field(spec, u, v, qc)?.value;
    Ok((lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE))
}

/// `E[(Y(u) - Y(v))²]`.
pub fn increment_variance(spec: &FieldSpec, u: &[f64], v: &[f64], qc: &QuadratureConfig) -> Result<f64> {
    Ok(cov_field(spec, u, u, qc)?.value + cov_field(spec, v, v, qc)?.value - 2.0 * cov_field(spec, u, v, qc)?.value)
}

/// Increment variances over two translates of the same increment: from
/// `v₁ = 0` to `u₁ = (0, 1, …, 1)` and from `v₂ = e₁` to `u₂ = (1, …, 1)`.
/// Stationary increments would make them equal.
pub fn nonstationarity_witness(spec: &FieldSpec, qc: &QuadratureConfig) -> Result<(f64, f64)> {
    let d = spec.sv.dim();
    if d < 2 {
        return Err(invalid("the witness needs d ≥ 2"));
    }
    let v1 = vec![0.0; d];
    let mut v2 = vec![0.0; d];
    v2[0] = 1.0;
    let mut u1 = vec![1.0; d];
    u1[0] = 0.0;
    let u2 = vec![1.0; d];
    Ok((increment_variance(spec, &u1, &v1, qc)?, increment_variance(spec, &u2, &v2, qc)?))
}

/// Covariance matrix of a point set and Gaussian draws with that law.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub points: Vec<Vec<f64>>,
    pub covariance: DMatrix<f64>,
    /// One vector of field values per draw.
    pub draws: Vec<Vec<f64>>,
}

impl GridSample {
    /// CSV `row, col, value` of the covariance matrix.
    pub fn write_covariance<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["row", "col", "value"])?;
        for i in 0..self.covariance.nrows() {
            for j in 0..self.covariance.ncols() {
                out.write_record([i.to_string(), j.to_string(), self.covariance[(i, j)].to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// CSV `draw, point, value`.
    pub fn write_draws<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["draw", "point", "value"])?;
        for (k, d) in self.draws.iter().enumerate() {
            for (i, v) in d.iter().enumerate() {
                out.write_record([k.to_string(), i.to_string(), v.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Covariance matrix over `points`, assembled in parallel.
pub fn covariance_matrix(spec: &FieldSpec, points: &[Vec<f64>], qc: &QuadratureConfig) -> Result<DMatrix<f64>> {
    let m = points.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let vals = pairs
        .par_iter()
        .map(|&(i, j)| cov_field(spec, &points[i], &points[j], qc).map(|e| e.value))
        .collect::<Result<Vec<f64>>>()?;
    let mut c = DMatrix::zeros(m, m);
    for (&(i, j), v) in pairs.iter().zip(vals) {
        c[(i, j)] = v;
        c[(j, i)] = v;
    }
    Ok(c)
}

/// Draw `n_draws` centred Gaussian vectors with the field's covariance.
pub fn sample_field(spec: &FieldSpec, points: &[Vec<f64>], n_draws: usize, key: StreamKey, qc: &QuadratureConfig) -> Result<GridSample> {
    if points.len() > MAX_POINTS {
        return Err(invalid(format!("at most {MAX_POINTS} points are supported")));
    }
    let covariance = covariance_matrix(spec, points, qc)?;
    let m = points.len();
    let mut draws = Vec::with_capacity(n_draws);
    if m > 0 && n_draws > 0 {
        let eig = SymmetricEigen::new(covariance.clone());
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let low = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if low < -CLIP * top.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd(low));
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
        let mut rng = key.auxiliary(0);
        for _ in 0..n_draws {
            let z = nalgebra::DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            draws.push((&factor * z).iter().cloned().collect());
        }
    }
    Ok(GridSample { points: points.to_vec(), covariance, draws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(which: Which, alphas: Vec<f64>) -> FieldSpec {
        FieldSpec::new(which, StabilityVector::new(alphas).unwrap(), 1.0, 1.0).unwrap()
    }

    #[test]
    fn profile_matches_cauchy_closed_form() {
        // α = 1: B(s) = π - s ln(1 + 1/s²) - 2 arctan s.
        let exact = |s: f64| std::f64::consts::PI - s * (1.0 / (s * s)).ln_1p() - 2.0 * s.atan();
        for s in [1e-6, 0.01, 0.3, 1.0, 7.0] {
            assert_relative_eq!(profile_direct(1.0, s), exact(s), max_relative = 1e-11);
            assert_relative_eq!(profile(1.0, s), exact(s), max_relative = 1e-11);
        }
        assert_relative_eq!(profile(1.0, 1e4), 1e-4, max_relative = 1e-8);
        assert_relative_eq!(profile(1.0, 0.0), std::f64::consts::PI);
    }

    #[test]
    fn table_matches_direct_quadrature() {
        for alpha in [0.3, 0.4, 1.7] {
            for sigma in [-30.0, -3.3, 0.1, 2.7, 15.5] {
                let s = f64::exp(sigma);
                assert_relative_eq!(profile(alpha, s), profile_direct(alpha, s), max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn origin_has_zero_covariance() {
        let qc = QuadratureConfig::default();
        let s = spec(Which::Y1, vec![0.3, 0.4]);
        assert_eq!(cov_field(&s, &[0.0, 0.0], &[1.0, 1.0], &qc).unwrap().value, 0.0);
        assert!(cov_field(&s, &[-1.0, 0.0], &[1.0, 1.0], &qc).is_err());
    }

    #[test]
    fn one_dimensional_fields_match_closed_form() {
        let qc = QuadratureConfig::default();
        for which in [Which::Y1, Which::Y2] {
            let s = spec(which, vec![0.4]);
            for (u, v) in [(1.0, 1.0), (0.5, 2.0), (2.5, 1.5)] {
                let got = cov_field(&s, &[u], &[v], &qc).unwrap().value;
                assert_relative_eq!(got, cov_field_1d(&s, u, v).unwrap(), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn fbm_cov_examples() {
        assert_relative_eq!(fbm_cov(0.7, 1.3, 1.3).unwrap(), 1.3f64.powf(1.4));
        assert_relative_eq!(fbm_cov(0.5, 0.4, 2.0).unwrap(), 0.4, max_relative = 1e-15);
        assert_relative_eq!(fbm_cov(0.7, 1.0, 2.0).unwrap(), 2f64.powf(0.4), max_relative = 1e-15);
        assert!(fbm_cov(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn constants_and_exponents() {
        let s = FieldSpec::new(Which::Y1, StabilityVector::new(vec![0.4]).unwrap(), 0.0, 3.0).unwrap();
        assert_relative_eq!(s.constant(), 2.0 / (2.0 * std::f64::consts::PI));
        assert_eq!(s.scaling_exponent(), 3.5);
        let s2 = FieldSpec { which: Which::Y2, ..s };
        assert_relative_eq!(s2.constant(), 3.0 / (2.0 * std::f64::consts::PI));
        assert_eq!(s2.scaling_exponent(), 4.5);
        assert!(FieldSpec::new(Which::Y1, StabilityVector::new(vec![0.5]).unwrap(), 0.0, 1.0).is_err());
    }

    #[test]
    fn sampler_edge_cases() {
        let qc = QuadratureConfig::default();
        let s = spec(Which::Y1, vec![0.4]);
        let g = sample_field(&s, &[vec![0.0]], 5, StreamKey::new(1, 0), &qc).unwrap();
        assert!(g.draws.iter().all(|d| d[0] == 0.0));
        let g = sample_field(&s, &[vec![1.0], vec![2.0]], 0, StreamKey::new(1, 0), &qc).unwrap();
        assert!(g.draws.is_empty());
        assert_eq!(g.covariance.nrows(), 2);
    }
}
