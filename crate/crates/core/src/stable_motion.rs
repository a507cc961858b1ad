//! Anisotropic symmetric stable motion.
//!
//! Coordinate `k` is an independent symmetric `α_k`-stable Lévy process with
//! characteristic function `exp(-t |z_k|^{α_k})`. The whole process is
//! operator self-similar with exponent `H = diag(1/α_1, ..., 1/α_d)`.

use rand::{Rng, RngExt};
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Result, invalid};

/// Tolerance used to special-case the Cauchy and Gaussian indices.
const INDEX_SNAP: f64 = 1e-12;

/// Per-coordinate stability indices `α_k ∈ (0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVector {
    alphas: Vec<f64>,
}

impl StabilityVector {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(invalid("stability vector must have at least one coordinate"));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a <= 2.0)) {
            return Err(invalid(format!("stability index {a} outside (0, 2]")));
        }
        let sv = Self { alphas };
        if sv.alpha_bar() <= 1.0 {
            return Err(invalid(format!("ᾱ = {} must exceed 1", sv.alpha_bar())));
        }
        Ok(sv)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    /// `ᾱ = Σ 1/α_k`, the effective spectral dimension.
    pub fn alpha_bar(&self) -> f64 {
        self.alphas.iter().map(|a| 1.0 / a).sum()
    }

    /// `S(z) = Σ |z_k|^{α_k}`.
    pub fn symbol(&self, z: &[f64]) -> f64 {
        self.alphas.iter().zip(z).map(|(a, x)| x.abs().powf(*a)).sum()
    }

    pub fn scaling(&self) -> ScalingMatrixH {
        ScalingMatrixH { exponents: self.alphas.iter().map(|a| 1.0 / a).collect() }
    }
}

/// The diagonal exponent matrix `H`; `c^H` scales coordinate `k` by `c^{1/α_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingMatrixH {
    exponents: Vec<f64>,
}

impl ScalingMatrixH {
    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    /// Diagonal of `c^H`.
    pub fn power(&self, c: f64) -> Vec<f64> {
        self.exponents.iter().map(|h| c.powf(*h)).collect()
    }

    /// `c^H x`.
    pub fn apply(&self, c: f64, x: &[f64]) -> Vec<f64> {
        self.exponents.iter().zip(x).map(|(h, v)| c.powf(*h) * v).collect()
    }

    /// Trace of `H`, equal to `ᾱ`.
    pub fn trace(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

/// Chambers-Mallows-Stuck sampler for one index, with the per-index
/// constants hoisted out of the hot loop.
#[derive(Debug, Clone, Copy)]
pub struct StableSampler {
    kind: Kind,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Gaussian,
    Cauchy,
    General { alpha: f64, inv: f64, tail: f64 },
}

impl StableSampler {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(invalid(format!("stability index {alpha} outside (0, 2]")));
        }
        let kind = if (alpha - 2.0).abs() < INDEX_SNAP {
            Kind::Gaussian
        } else if (alpha - 1.0).abs() < INDEX_SNAP {
            Kind::Cauchy
        } else {
            Kind::General { alpha, inv: 1.0 / alpha, tail: (1.0 - alpha) / alpha }
        };
        Ok(Self { kind })
    }

    /// Draw with characteristic function `exp(-|z|^α)`.
    #[inline]
    pub fn unit<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            Kind::Gaussian => {
                let g: f64 = rng.sample(StandardNormal);
                std::f64::consts::SQRT_2 * g
            }
            Kind::Cauchy => (std::f64::consts::PI * (rng.random::<f64>() - 0.5)).tan(),
            Kind::General { alpha, inv, tail } => {
                let v = std::f64::consts::PI * (rng.random::<f64>() - 0.5);
                let w: f64 = rng.sample(Exp1);
                (alpha * v).sin() / v.cos().powf(inv) * (((1.0 - alpha) * v).cos() / w).powf(tail)
            }
        }
    }

    /// Scale factor `t^{1/α}` turning a unit draw into a time-`t` increment.
    #[inline]
    pub fn time_scale(&self, t: f64) -> f64 {
        match self.kind {
            Kind::Gaussian => t.sqrt(),
            Kind::Cauchy => t,
            Kind::General { inv, .. } => t.powf(inv),
        }
    }
}

/// One draw of a symmetric `α`-stable variable with characteristic function
/// `exp(-t|z|^α)`.
pub fn sample_stable<R: Rng + ?Sized>(alpha: f64, t: f64, rng: &mut R) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("stable draw needs t > 0, got {t}")));
    }
    let s = StableSampler::new(alpha)?;
    Ok(s.time_scale(t) * s.unit(rng))
}

/// Path of the motion on `grid` (which must start at 0 and increase),
/// relative to its starting point.
pub fn sample_increments<R: Rng + ?Sized>(sv: &StabilityVector, grid: &[f64], rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if grid.first() != Some(&0.0) {
        return Err(invalid("time grid must start at 0"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("time grid must be strictly increasing"));
    }
    let samplers: Vec<StableSampler> = sv.alphas.iter().map(|a| StableSampler::new(*a)).collect::<Result<_>>()?;
    let mut path = vec![vec![0.0; sv.dim()]];
    for w in grid.windows(2) {
        let dt = w[1] - w[0];
        let prev = path.last().unwrap();
        let next = prev
            .iter()
            .zip(&samplers)
            .map(|(x, s)| x + s.time_scale(dt) * s.unit(rng))
            .collect();
        path.push(next);
    }
    Ok(path)
}

/// Characteristic function `E exp(i z·ξ_t) = exp(-t S(z))` (real by symmetry).
pub fn chf(sv: &StabilityVector, t: f64, z: &[f64]) -> Result<f64> {
    if t < 0.0 || z.len() != sv.dim() {
        return Err(invalid("chf needs t ≥ 0 and z of the motion's dimension"));
    }
    Ok((-t * sv.symbol(z)).exp())
}

/// `c^H x`; the law of `ξ_{ct}` equals that of `c^H ξ_t`.
pub fn operator_scale(sv: &StabilityVector, c: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !(c > 0.0) {
        return Err(invalid(format!("scaling factor must be positive, got {c}")));
    }
    Ok(sv.scaling().apply(c, x))
}
