//! Event-driven simulation of one replicate.
//!
//! The infinite Poisson field is truncated to a box. By default the box is a
//! torus: particles leaving one face re-enter through the opposite one and
//! test functions are evaluated at the nearest periodic image, which keeps
//! the field exactly stationary so the first-moment law holds without
//! boundary loss. Trajectories are realised on a global grid of knots; each
//! lifetime is cut at the knots it spans.

use std::io::Write;

use rand::RngExt;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use super::{SystemParams, draw_offspring};
use crate::error::{Error, Result, invalid};
use crate::rng::{FIELD_STREAM, StreamKey};
use crate::stable_motion::StableSampler;
use crate::test_function::TestFunction;

/// Expected particle-seconds allowed before a run is refused.
pub const DEFAULT_BUDGET: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Opposite faces identified.
    #[default]
    Periodic,
    /// Particles leave for good; the field outside the box is missing.
    Free,
}

/// The truncated space-time domain of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationBox {
    radius: Vec<f64>,
    horizon: f64,
    dt: f64,
    boundary: Boundary,
}

impl SimulationBox {
    /// The box `Π [-radius_k, radius_k]` observed on `[0, horizon]`.
    pub fn new(radius: Vec<f64>, horizon: f64, dt: f64, boundary: Boundary) -> Result<Self> {
        if radius.is_empty() || radius.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(invalid("box radii must be finite and nonnegative"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) || !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("horizon and time step must be positive"));
        }
        Ok(Self { radius, horizon, dt, boundary })
    }

    /// Radius `supp(φ) + margin (n t_max)^{1/α_k}` per coordinate, horizon
    /// `n t_max` and `steps` uniform time steps.
    pub fn enlarged(
        params: &SystemParams,
        functions: &[TestFunction],
        t_max: f64,
        margin: f64,
        steps: usize,
        boundary: Boundary,
    ) -> Result<Self> {
        if !(t_max > 0.0) || !(margin >= 0.0) || steps == 0 {
            return Err(invalid("box rule needs t_max > 0, margin ≥ 0 and at least one step"));
        }
        let supp = functions.iter().map(|f| f.support_radius()).fold(0.0, f64::max);
        let horizon = params.n * t_max;
        let radius = params.sv.alphas().iter().map(|a| supp + margin * horizon.powf(1.0 / a)).collect();
        Self::new(radius, horizon, horizon / steps as f64, boundary)
    }

    pub fn radius(&self) -> &[f64] {
        &self.radius
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn dim(&self) -> usize {
        self.radius.len()
    }

    pub fn volume(&self) -> f64 {
        self.radius.iter().map(|r| 2.0 * r).product()
    }

    /// Side lengths when the box is a torus.
    pub fn period(&self) -> Option<Vec<f64>> {
        match self.boundary {
            Boundary::Periodic => Some(self.radius.iter().map(|r| 2.0 * r).collect()),
            Boundary::Free => None,
        }
    }

    /// Same box with every radius doubled.
    pub fn doubled(&self) -> Self {
        Self { radius: self.radius.iter().map(|r| 2.0 * r).collect(), ..self.clone() }
    }
}

/// Sorted knots on `[0, horizon]`: the uniform `dt` grid together with any
/// observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    knots: Vec<f64>,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64, extra: &[f64]) -> Result<Self> {
        if !(horizon > 0.0) || !(dt > 0.0) {
            return Err(invalid("time grid needs positive horizon and step"));
        }
        if let Some(t) = extra.iter().find(|t| !(**t >= 0.0 && **t <= horizon)) {
            return Err(invalid(format!("observation time {t} outside [0, {horizon}]")));
        }
        let snap = 1e-9 * dt;
        let steps = (horizon / dt - 1e-9).ceil() as usize;
        let mut knots: Vec<f64> = (0..steps).map(|k| k as f64 * dt).collect();
        knots.push(horizon);
        for &t in extra {
            let i = knots.partition_point(|k| *k < t);
            if i < knots.len() && knots[i] - t <= snap {
                knots[i] = t;
            } else if i > 0 && t - knots[i - 1] <= snap {
                knots[i - 1] = t;
            } else {
                knots.insert(i, t);
            }
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn horizon(&self) -> f64 {
        *self.knots.last().expect("grid has knots")
    }

    /// Index of the knot equal to `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.knots.partition_point(|k| *k < t);
        (i < self.knots.len() && self.knots[i] == t).then_some(i)
    }
}

/// Receives the realised trajectories.
///
/// For each particle the simulator calls `begin`, then alternates
/// `segment` calls (consecutive sample points, both inside one knot
/// interval) with `at_knot` calls for knots the particle is alive at; an
/// `at_knot` call always refers to the most recent sample point.
pub trait PathVisitor {
    fn begin(&mut self, id: u64, parent: Option<u64>, birth: f64, x: &[f64]);
    fn segment(&mut self, interval: usize, t0: f64, t1: f64, x1: &[f64]);
    fn at_knot(&mut self, knot: usize, t: f64);
    /// `children` is `None` when the split falls after the horizon.
    fn finish(&mut self, id: u64, split: f64, children: Option<u8>);
}

/// Diagnostic switches and resource limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Cap on expected particle-seconds.
    pub budget: f64,
    /// Keep every particle at its birth position.
    pub frozen: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET, frozen: false }
    }
}

/// Expected total particle-seconds, `volume · ∫_0^T f_n`.
pub fn expected_load(params: &SystemParams, bx: &SimulationBox) -> Result<f64> {
    Ok(bx.volume() * params.mean_factor_integral(bx.horizon())?)
}

struct Pending {
    id: u64,
    parent: Option<u64>,
    birth: f64,
    x: Vec<f64>,
}

/// Run one replicate, streaming its trajectories into `visitor`.
pub fn simulate_with<V: PathVisitor>(
    params: &SystemParams,
    bx: &SimulationBox,
    grid: &TimeGrid,
    key: StreamKey,
    opts: &SimOptions,
    visitor: &mut V,
) -> Result<()> {
    let d = params.sv.dim();
    if bx.dim() != d {
        return Err(invalid("box dimension differs from the motion"));
    }
    if grid.horizon() != bx.horizon() {
        return Err(invalid("time grid and box disagree on the horizon"));
    }
    let load = expected_load(params, bx)?;
    if load > opts.budget {
        return Err(Error::ResourceBudget { needed: load, budget: opts.budget });
    }
    let samplers: Vec<StableSampler> = params.sv.alphas().iter().map(|a| StableSampler::new(*a)).collect::<Result<_>>()?;
    let knots = grid.knots();
    let horizon = bx.horizon();
    let period = bx.period();
    let radius = bx.radius();
    let (gamma, delta) = (params.gamma, params.delta());

    let mut field = key.particle(FIELD_STREAM);
    let volume = bx.volume();
    let count = if volume > 0.0 {
        Poisson::new(volume).map_err(|e| invalid(e.to_string()))?.sample(&mut field) as u64
    } else {
        0
    };
    let mut stack: Vec<Pending> = (0..count)
        .map(|id| {
            let x = radius.iter().map(|r| r * (2.0 * field.random::<f64>() - 1.0)).collect();
            Pending { id, parent: None, birth: 0.0, x }
        })
        .collect();
    stack.reverse();
    let mut next_id = count;

    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut scale = vec![0.0; d];
    let mut scale_h = f64::NAN;
    while let Some(p) = stack.pop() {
        let mut rng = key.particle(p.id);
        let life = if gamma > 0.0 { rng.sample::<f64, _>(Exp1) / gamma } else { f64::INFINITY };
        let split = p.birth + life;
        let end = split.min(horizon);
        visitor.begin(p.id, p.parent, p.birth, &p.x);
        x.copy_from_slice(&p.x);
        let mut t = p.birth;
        let mut j = knots.partition_point(|k| *k <= t);
        if knots[j - 1] == t && t < split {
            visitor.at_knot(j - 1, t);
        }
        loop {
            let (t1, hit) = if j < knots.len() && knots[j] < end { (knots[j], true) } else { (end, false) };
            let h = t1 - t;
            if opts.frozen {
                y.copy_from_slice(&x);
            } else {
                if h != scale_h {
                    for (s, sm) in scale.iter_mut().zip(&samplers) {
                        *s = sm.time_scale(h);
                    }
                    scale_h = h;
                }
                for k in 0..d {
                    y[k] = x[k] + scale[k] * samplers[k].unit(&mut rng);
                }
                if let Some(per) = &period {
                    for k in 0..d {
                        let r = radius[k];
                        if y[k] >= r || y[k] < -r {
                            y[k] -= per[k] * ((y[k] + r) / per[k]).floor();
                        }
                    }
                }
            }
            visitor.segment(j - 1, t, t1, &y);
            std::mem::swap(&mut x, &mut y);
            t = t1;
            if hit {
                visitor.at_knot(j, t);
                j += 1;
            } else {
                break;
            }
        }
        if split < horizon {
            let k = draw_offspring(life, delta, &mut rng);
            visitor.finish(p.id, split, Some(k));
            if k == 2 {
                stack.push(Pending { id: next_id + 1, parent: Some(p.id), birth: split, x: x.clone() });
                stack.push(Pending { id: next_id, parent: Some(p.id), birth: split, x: x.clone() });
                next_id += 2;
            }
        } else {
            visitor.at_knot(knots.len() - 1, horizon);
            visitor.finish(p.id, split, None);
        }
    }
    Ok(())
}

/// Full record of one particle.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleRecord {
    pub id: u64,
    pub parent: Option<u64>,
    pub birth_t: f64,
    /// Drawn split time; may exceed the horizon.
    pub split_t: f64,
    /// Offspring count, `None` if the split is beyond the horizon.
    pub children: Option<u8>,
    /// Sample points `(t, x)` from birth to `min(split, horizon)`.
    pub path: Vec<(f64, Vec<f64>)>,
}

impl ParticleRecord {
    pub fn birth_x(&self) -> &[f64] {
        &self.path[0].1
    }
}

/// Genealogy and trajectories of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub dim: usize,
    pub horizon: f64,
    pub period: Option<Vec<f64>>,
    pub particles: Vec<ParticleRecord>,
}

impl EventLog {
    pub fn empty(dim: usize, horizon: f64, period: Option<Vec<f64>>) -> Self {
        Self { dim, horizon, period, particles: Vec::new() }
    }

    /// CSV with columns `id, parent, birth_t, split_t, k, x_1..x_d` (birth
    /// position); `parent` and `k` are blank when absent.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["id".to_string(), "parent".into(), "birth_t".into(), "split_t".into(), "k".into()];
        header.extend((1..=self.dim).map(|k| format!("x_{k}")));
        out.write_record(&header)?;
        for p in &self.particles {
            let mut row = vec![
                p.id.to_string(),
                p.parent.map(|q| q.to_string()).unwrap_or_default(),
                p.birth_t.to_string(),
                p.split_t.to_string(),
                p.children.map(|k| k.to_string()).unwrap_or_default(),
            ];
            row.extend(p.birth_x().iter().map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

impl PathVisitor for EventLog {
    fn begin(&mut self, id: u64, parent: Option<u64>, birth: f64, x: &[f64]) {
        self.particles.push(ParticleRecord {
            id,
            parent,
            birth_t: birth,
            split_t: f64::NAN,
            children: None,
            path: vec![(birth, x.to_vec())],
        });
    }

    fn segment(&mut self, _interval: usize, _t0: f64, t1: f64, x1: &[f64]) {
        let p = self.particles.last_mut().expect("segment after begin");
        p.path.push((t1, x1.to_vec()));
    }

    fn at_knot(&mut self, _knot: usize, _t: f64) {}

    fn finish(&mut self, _id: u64, split: f64, children: Option<u8>) {
        let p = self.particles.last_mut().expect("finish after begin");
        p.split_t = split;
        p.children = children;
    }
}

/// Run one replicate and keep its full event log.
pub fn simulate(params: &SystemParams, bx: &SimulationBox, key: StreamKey, opts: &SimOptions) -> Result<EventLog> {
    let grid = TimeGrid::new(bx.horizon(), bx.dt(), &[])?;
    let mut log = EventLog::empty(bx.dim(), bx.horizon(), bx.period());
    simulate_with(params, bx, &grid, key, opts, &mut log)?;
    Ok(log)
}
