//! Occupation functionals and rescaled fluctuation samples.

use serde::Serialize;

use super::SystemParams;
use super::sim::{EventLog, PathVisitor, SimOptions, SimulationBox, TimeGrid, simulate_with};
use crate::error::{Result, invalid};
use crate::limit_covariance::Weight;
use crate::rng::StreamKey;
use crate::test_function::TestFunction;

/// Streaming accumulator of `⟨N(s), φ⟩` at knots and of the trapezoidal
/// occupation integral per knot interval, for several test functions.
#[derive(Debug, Clone)]
pub struct Occupation<'a> {
    functions: &'a [TestFunction],
    period: Option<Vec<f64>>,
    /// `[φ][interval]`.
    occupation: Vec<Vec<f64>>,
    /// `[φ][knot]`.
    instantaneous: Vec<Vec<f64>>,
    current: Vec<f64>,
    next: Vec<f64>,
}

impl<'a> Occupation<'a> {
    pub fn new(functions: &'a [TestFunction], grid: &TimeGrid, period: Option<Vec<f64>>) -> Self {
        let m = grid.knots().len();
        Self {
            functions,
            period,
            occupation: vec![vec![0.0; m.saturating_sub(1)]; functions.len()],
            instantaneous: vec![vec![0.0; m]; functions.len()],
            current: vec![0.0; functions.len()],
            next: vec![0.0; functions.len()],
        }
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(self.functions) {
            *o = f.eval_wrapped(x, self.period.as_deref());
        }
    }

    /// Occupation integral of `φ_i` over `[0, knot_j]`, for every knot.
    pub fn cumulative(&self, i: usize) -> Vec<f64> {
        let mut acc = vec![0.0];
        let mut s = 0.0;
        for v in &self.occupation[i] {
            s += v;
            acc.push(s);
        }
        acc
    }

    /// `⟨N(knot_j), φ_i⟩` for every knot.
    pub fn instantaneous(&self, i: usize) -> &[f64] {
        &self.instantaneous[i]
    }
}

impl PathVisitor for Occupation<'_> {
    fn begin(&mut self, _id: u64, _parent: Option<u64>, _birth: f64, x: &[f64]) {
        let mut cur = std::mem::take(&mut self.current);
        self.eval_into(x, &mut cur);
        self.current = cur;
    }

    fn segment(&mut self, interval: usize, t0: f64, t1: f64, x1: &[f64]) {
        let mut next = std::mem::take(&mut self.next);
        self.eval_into(x1, &mut next);
        let h = 0.5 * (t1 - t0);
        for (i, (a, b)) in self.current.iter().zip(&next).enumerate() {
            self.occupation[i][interval] += h * (a + b);
        }
        self.next = std::mem::replace(&mut self.current, next);
    }

    fn at_knot(&mut self, knot: usize, _t: f64) {
        for (i, v) in self.current.iter().enumerate() {
            self.instantaneous[i][knot] += v;
        }
    }

    fn finish(&mut self, _id: u64, _split: f64, _children: Option<u8>) {}
}

/// Trapezoidal `∫_0^{upto} ⟨N(s), φ⟩ ds` from a stored event log.
pub fn occupation_functional(log: &EventLog, phi: &TestFunction, upto: f64) -> Result<f64> {
    if !(upto >= 0.0 && upto <= log.horizon) {
        return Err(invalid(format!("upper time {upto} outside [0, {}]", log.horizon)));
    }
    let period = log.period.as_deref();
    let mut total = 0.0;
    for p in &log.particles {
        let mut prev: Option<(f64, f64)> = None;
        for (t, x) in &p.path {
            let v = phi.eval_wrapped(x, period);
            if let Some((t0, v0)) = prev {
                if *t <= upto {
                    total += 0.5 * (t - t0) * (v0 + v);
                } else {
                    if t0 < upto {
                        let vm = v0 + (v - v0) * (upto - t0) / (t - t0);
                        total += 0.5 * (upto - t0) * (v0 + vm);
                    }
                    break;
                }
            }
            prev = Some((*t, v));
        }
    }
    Ok(total)
}

/// What to extract from one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRequest {
    /// Rescaled times in `(0, t_max]` at which `⟨X_n(t), φ⟩` is recorded.
    pub times: Vec<f64>,
    pub functions: Vec<TestFunction>,
    /// Weights `h` for the integrated functional.
    pub weights: Vec<Weight>,
    /// Rescaled-time nodes of the trapezoid for the integrated functional.
    pub integration_grid: Vec<f64>,
    /// Raw times `s` at which `⟨N(s), φ⟩` is recorded.
    pub probes: Vec<f64>,
}

/// Per-replicate values of the fluctuation functionals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationSample {
    pub replicate: u64,
    pub seed: u64,
    pub n: f64,
    /// `⟨X_n(t), φ⟩`, indexed `[t][φ]`.
    pub values: Vec<Vec<f64>>,
    /// `⟨X̃_n, φ ⊗ h⟩`, indexed `[h][φ]`.
    pub integrated: Vec<Vec<f64>>,
    /// `⟨N(s), φ⟩`, indexed `[probe][φ]`.
    pub probes: Vec<Vec<f64>>,
}

/// `∫ h(t) X(t) dt` by the trapezoid on `grid`, or `h(t) X(t)` for a single node.
pub fn integrated_functional(grid: &[f64], values: &[f64], h: &Weight) -> Result<f64> {
    if grid.len() != values.len() || grid.is_empty() {
        return Err(invalid("integration grid and values must be nonempty and of equal length"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("integration grid must be increasing"));
    }
    if grid.len() == 1 {
        return Ok(h.eval(grid[0]) * values[0]);
    }
    let mut s = 0.0;
    for i in 1..grid.len() {
        s += 0.5 * (grid[i] - grid[i - 1]) * (h.eval(grid[i]) * values[i] + h.eval(grid[i - 1]) * values[i - 1]);
    }
    Ok(s)
}

/// Simulate one replicate and evaluate everything `req` asks for.
pub fn fluctuation_sample(
    params: &SystemParams,
    bx: &SimulationBox,
    key: StreamKey,
    opts: &SimOptions,
    req: &SampleRequest,
) -> Result<FluctuationSample> {
    let n = params.n;
    let t_max = bx.horizon() / n;
    let tol = 1e-12 * t_max;
    for &t in &req.times {
        if !(t > 0.0 && t <= t_max + tol) {
            return Err(invalid(format!("observation time {t} outside (0, {t_max}]")));
        }
    }
    if let Some(t) = req.integration_grid.iter().find(|t| !(**t >= 0.0 && **t <= t_max + tol)) {
        return Err(invalid(format!("integration node {t} outside [0, {t_max}]")));
    }
    let raw = |t: f64| (n * t).min(bx.horizon());
    let mut extra: Vec<f64> = req.times.iter().chain(&req.integration_grid).map(|t| raw(*t)).collect();
    extra.extend(&req.probes);
    let grid = TimeGrid::new(bx.horizon(), bx.dt(), &extra)?;
    let mut occ = Occupation::new(&req.functions, &grid, bx.period());
    simulate_with(params, bx, &grid, key, opts, &mut occ)?;

    let f_n = params.norming();
    let cumulative: Vec<Vec<f64>> = (0..req.functions.len()).map(|i| occ.cumulative(i)).collect();
    let fluct = |t: f64| -> Result<Vec<f64>> {
        let s = raw(t);
        let j = grid.index_of(s).expect("observation time is a knot");
        let mean = params.mean_factor_integral(s)?;
        Ok(req
            .functions
            .iter()
            .enumerate()
            .map(|(i, f)| (cumulative[i][j] - mean * f.integral()) / f_n)
            .collect())
    };
    let values = req.times.iter().map(|t| fluct(*t)).collect::<Result<Vec<_>>>()?;
    let path = req.integration_grid.iter().map(|t| fluct(*t)).collect::<Result<Vec<_>>>()?;
    let mut integrated = Vec::with_capacity(req.weights.len());
    for h in &req.weights {
        let mut row = Vec::with_capacity(req.functions.len());
        for i in 0..req.functions.len() {
            let xs: Vec<f64> = path.iter().map(|v| v[i]).collect();
            row.push(integrated_functional(&req.integration_grid, &xs, h)?);
        }
        integrated.push(row);
    }
    let probes = req
        .probes
        .iter()
        .map(|s| {
            let j = grid.index_of(*s).expect("probe time is a knot");
            (0..req.functions.len()).map(|i| occ.instantaneous(i)[j]).collect()
        })
        .collect();
    Ok(FluctuationSample { replicate: key.replicate, seed: key.seed, n, values, integrated, probes })
}
