//! Spatial test functions.
//!
//! Both elementary kinds are products of one-dimensional factors whose
//! Fourier transforms have the form `A_k(z) e^{i c_k z}` with `A_k` real and
//! even. That structure is what the spectral quadrature relies on.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Result, invalid};

/// Distance, in units of the Gaussian scale, beyond which a factor is below
/// machine precision relative to its peak.
const GAUSS_CUTOFF: f64 = 8.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `Π_k exp(-(x_k - c_k)^2 / (2 w_k^2))`.
    GaussianBump { center: Vec<f64>, widths: Vec<f64> },
    /// Indicator of the box `Π [c_k - h_k, c_k + h_k]` convolved with a
    /// normalised Gaussian of standard deviation `σ_k` per axis.
    MollifiedBox {
        center: Vec<f64>,
        half_widths: Vec<f64>,
        smoothing: Vec<f64>,
    },
    /// Finite linear combination.
    Combination { terms: Vec<(f64, TestFunction)> },
}

impl TestFunction {
    pub fn gaussian(center: Vec<f64>, widths: Vec<f64>) -> Result<Self> {
        let f = TestFunction::GaussianBump { center, widths };
        f.validate()?;
        Ok(f)
    }

    pub fn mollified_box(center: Vec<f64>, half_widths: Vec<f64>, smoothing: Vec<f64>) -> Result<Self> {
        let f = TestFunction::MollifiedBox { center, half_widths, smoothing };
        f.validate()?;
        Ok(f)
    }

    pub fn combination(terms: Vec<(f64, TestFunction)>) -> Result<Self> {
        let f = TestFunction::Combination { terms };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TestFunction::GaussianBump { center, widths } => {
                if center.is_empty() || center.len() != widths.len() {
                    return Err(invalid("gaussian bump: center and widths must have equal nonzero length"));
                }
                if widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(invalid("gaussian bump: widths must be positive"));
                }
            }
            TestFunction::MollifiedBox { center, half_widths, smoothing } => {
                if center.is_empty() || center.len() != half_widths.len() || center.len() != smoothing.len() {
                    return Err(invalid("mollified box: dimension mismatch"));
                }
                if half_widths.iter().chain(smoothing).any(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(invalid("mollified box: half widths and smoothing must be positive"));
                }
            }
            TestFunction::Combination { terms } => {
                let Some((_, first)) = terms.first() else {
                    return Err(invalid("combination must have at least one term"));
                };
                let d = first.dim();
                for (_, t) in terms {
                    t.validate()?;
                    if t.dim() != d {
                        return Err(invalid("combination terms differ in dimension"));
                    }
                }
            }
        }
        if self.center().iter().any(|c| !c.is_finite()) {
            return Err(invalid("test function center must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            TestFunction::GaussianBump { center, .. } | TestFunction::MollifiedBox { center, .. } => center.len(),
            TestFunction::Combination { terms } => terms[0].1.dim(),
        }
    }

    fn center(&self) -> Vec<f64> {
        match self {
            TestFunction::GaussianBump { center, .. } | TestFunction::MollifiedBox { center, .. } => center.clone(),
            TestFunction::Combination { terms } => vec![0.0; terms[0].1.dim()],
        }
    }

    /// `∫ φ(x) dx`.
    pub fn integral(&self) -> f64 {
        let root2pi = (2.0 * std::f64::consts::PI).sqrt();
        match self {
            TestFunction::GaussianBump { widths, .. } => widths.iter().map(|w| w * root2pi).product(),
            TestFunction::MollifiedBox { half_widths, .. } => half_widths.iter().map(|h| 2.0 * h).product(),
            TestFunction::Combination { terms } => terms.iter().map(|(a, t)| a * t.integral()).sum(),
        }
    }

    /// Radius of the sup-norm ball outside which `φ` is negligible.
    pub fn support_radius(&self) -> f64 {
        match self {
            TestFunction::GaussianBump { center, widths } => center
                .iter()
                .zip(widths)
                .map(|(c, w)| c.abs() + GAUSS_CUTOFF * w)
                .fold(0.0, f64::max),
            TestFunction::MollifiedBox { center, half_widths, smoothing } => center
                .iter()
                .zip(half_widths)
                .zip(smoothing)
                .map(|((c, h), s)| c.abs() + h + GAUSS_CUTOFF * s)
                .fold(0.0, f64::max),
            TestFunction::Combination { terms } => {
                terms.iter().map(|(_, t)| t.support_radius()).fold(0.0, f64::max)
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_wrapped(x, None)
    }

    /// Evaluate on the torus with the given side lengths, using the nearest
    /// periodic image of each coordinate.
    pub fn eval_wrapped(&self, x: &[f64], period: Option<&[f64]>) -> f64 {
        let disp = |k: usize, c: f64| {
            let d = x[k] - c;
            match period {
                Some(p) => d - p[k] * (d / p[k]).round(),
                None => d,
            }
        };
        match self {
            TestFunction::GaussianBump { center, widths } => {
                let mut q = 0.0;
                for (k, (c, w)) in center.iter().zip(widths).enumerate() {
                    let u = disp(k, *c) / w;
                    q += u * u;
                }
                (-0.5 * q).exp()
            }
            TestFunction::MollifiedBox { center, half_widths, smoothing } => {
                let mut v = 1.0;
                for (k, ((c, h), s)) in center.iter().zip(half_widths).zip(smoothing).enumerate() {
                    let d = disp(k, *c);
                    let r = std::f64::consts::SQRT_2 * s;
                    v *= 0.5 * (erf((d + h) / r) - erf((d - h) / r));
                }
                v
            }
            TestFunction::Combination { terms } => terms.iter().map(|(a, t)| a * t.eval_wrapped(x, period)).sum(),
        }
    }

    /// `φ̂(z) = ∫ e^{i⟨x,z⟩} φ(x) dx` as `(re, im)`.
    pub fn fourier(&self, z: &[f64]) -> (f64, f64) {
        match self {
            TestFunction::Combination { terms } => terms.iter().fold((0.0, 0.0), |(re, im), (a, t)| {
                let (r, i) = t.fourier(z);
                (re + a * r, im + a * i)
            }),
            _ => {
                let mut amp = 1.0;
                let mut phase = 0.0;
                for (k, zk) in z.iter().enumerate() {
                    amp *= self.axis_amplitude(k, *zk).unwrap_or(0.0);
                    phase += self.axis_shift(k).unwrap_or(0.0) * zk;
                }
                (amp * phase.cos(), amp * phase.sin())
            }
        }
    }

    /// Elementary pieces with their coefficients, for bilinear expansion.
    pub fn terms(&self) -> Vec<(f64, &TestFunction)> {
        match self {
            TestFunction::Combination { terms } => terms
                .iter()
                .flat_map(|(a, t)| t.terms().into_iter().map(move |(b, u)| (a * b, u)))
                .collect(),
            other => vec![(1.0, other)],
        }
    }

    /// Real even amplitude of the Fourier transform along axis `k`; the full
    /// transform is `Π_k amplitude_k(z_k) e^{i shift_k z_k}`.
    /// Returns `None` for combinations.
    pub fn axis_amplitude(&self, k: usize, z: f64) -> Option<f64> {
        let root2pi = (2.0 * std::f64::consts::PI).sqrt();
        match self {
            TestFunction::GaussianBump { widths, .. } => {
                let w = widths[k];
                Some(w * root2pi * (-0.5 * w * w * z * z).exp())
            }
            TestFunction::MollifiedBox { half_widths, smoothing, .. } => {
                let (h, s) = (half_widths[k], smoothing[k]);
                let sinc = if (h * z).abs() < 1e-4 {
                    let u = h * z;
                    2.0 * h * (1.0 - u * u / 6.0 + u.powi(4) / 120.0)
                } else {
                    2.0 * (h * z).sin() / z
                };
                Some(sinc * (-0.5 * s * s * z * z).exp())
            }
            TestFunction::Combination { .. } => None,
        }
    }

    /// Phase shift along axis `k` (the center coordinate).
    pub fn axis_shift(&self, k: usize) -> Option<f64> {
        match self {
            TestFunction::GaussianBump { center, .. } | TestFunction::MollifiedBox { center, .. } => Some(center[k]),
            TestFunction::Combination { .. } => None,
        }
    }

    /// Length scale of the amplitude along axis `k` (the scale beyond which
    /// it has decayed); used to place quadrature panels.
    pub fn axis_scale(&self, k: usize) -> Option<(f64, f64)> {
        // (decay scale in frequency, oscillation scale in frequency)
        match self {
            TestFunction::GaussianBump { widths, .. } => Some((1.0 / widths[k], f64::INFINITY)),
            TestFunction::MollifiedBox { half_widths, smoothing, .. } => {
                Some((1.0 / smoothing[k], 1.0 / half_widths[k]))
            }
            TestFunction::Combination { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussLegendre;
    use approx::assert_relative_eq;

    #[test]
    fn integrals_match_quadrature() {
        let gl = GaussLegendre::new(40);
        let g = TestFunction::gaussian(vec![0.3], vec![0.8]).unwrap();
        let b = TestFunction::mollified_box(vec![-1.0], vec![1.5], vec![0.3]).unwrap();
        for f in [&g, &b] {
            let num = gl.panels(|x| f.eval(&[x]), -15.0, 15.0, 60);
            assert_relative_eq!(num, f.integral(), max_relative = 1e-12);
        }
    }

    #[test]
    fn fourier_amplitude_matches_direct_transform() {
        let gl = GaussLegendre::new(40);
        let b = TestFunction::mollified_box(vec![0.7], vec![1.2], vec![0.4]).unwrap();
        for z in [0.0, 0.3, 1.7, 4.0] {
            // Re ∫ e^{izx} φ(x) dx = A(z) cos(cz).
            let re = gl.panels(|x| (z * x).cos() * b.eval(&[x]), -12.0, 12.0, 80);
            let want = b.axis_amplitude(0, z).unwrap() * (z * 0.7).cos();
            assert!((re - want).abs() < 1e-10, "z={z}: {re} vs {want}");
        }
    }

    #[test]
    fn wrapped_evaluation_uses_nearest_image() {
        let g = TestFunction::gaussian(vec![0.0], vec![1.0]).unwrap();
        let p = [10.0];
        assert_relative_eq!(g.eval_wrapped(&[9.5], Some(&p)), g.eval(&[-0.5]), max_relative = 1e-14);
    }

    #[test]
    fn combination_is_linear() {
        let a = TestFunction::gaussian(vec![0.0, 1.0], vec![1.0, 0.5]).unwrap();
        let b = TestFunction::mollified_box(vec![1.0, 0.0], vec![0.5, 0.5], vec![0.2, 0.2]).unwrap();
        let c = TestFunction::combination(vec![(2.0, a.clone()), (-0.5, b.clone())]).unwrap();
        let x = [0.4, 0.9];
        assert_relative_eq!(c.eval(&x), 2.0 * a.eval(&x) - 0.5 * b.eval(&x), max_relative = 1e-14);
        assert_relative_eq!(c.integral(), 2.0 * a.integral() - 0.5 * b.integral(), max_relative = 1e-14);
        assert_eq!(c.terms().len(), 2);
    }

    #[test]
    fn rejects_malformed() {
        assert!(TestFunction::gaussian(vec![0.0], vec![0.0]).is_err());
        assert!(TestFunction::gaussian(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TestFunction::combination(vec![]).is_err());
    }
}
