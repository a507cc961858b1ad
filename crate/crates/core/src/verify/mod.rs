//! Configuration-driven verification suites.

pub mod output;

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::branching_system::sim::SimOptions;
use crate::branching_system::{FluctuationSample, SystemParams, SimulationBox, fluctuation_sample};
use crate::branching_system::occupation::SampleRequest;
use crate::config::{ExperimentConfig, Suite};
use crate::error::{Error, Result};
use crate::limit_covariance::{
    CriticalRoute, LimitModel, capital_phi, critical_c, cube_moment_converges, decomposition_residual, intermediate_c,
    spectral_integral, subfbm_cov,
};
use crate::osrf_fields::{FieldSpec, cov_field, covariance_matrix, fbm_cov, nonstationarity_witness, scaling_defect};
use crate::rng::StreamKey;
use crate::stable_motion::StabilityVector;
use crate::stats::{estimate_cov, mean_se, median};
use crate::test_function::TestFunction;

pub use output::{CovRow, ReportRow, Sidecar, stable_hash, write_covariances, write_integrated, write_report, write_samples};

/// Replicates of one rung of the `n` ladder.
#[derive(Debug, Clone)]
pub struct Batch {
    pub n: f64,
    pub samples: Vec<FluctuationSample>,
}

/// Runs suites on a dedicated worker pool.
pub struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    pool: rayon::ThreadPool,
    /// Report progress on standard error.
    pub progress: bool,
}

fn mix(seed: u64, salt: u64) -> u64 {
    // SplitMix64 finaliser.
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn row(suite: Suite, check: String, n: Option<f64>, estimate: f64, target: f64, budget: f64, pass: bool) -> ReportRow {
    ReportRow { suite: suite.name().into(), check, n, estimate, target, budget, pass }
}

/// Largest relative deviation of `values` from their first entry.
fn spread(values: &[f64]) -> f64 {
    let r = values[0];
    values.iter().map(|v| (v / r - 1.0).abs()).fold(0.0, f64::max)
}

fn gram_floor(m: &DMatrix<f64>) -> f64 {
    let e = SymmetricEigen::new(m.clone()).eigenvalues;
    let top = e.iter().cloned().fold(0.0, f64::max);
    let low = e.iter().cloned().fold(f64::INFINITY, f64::min);
    if top > 0.0 { low / top } else { low }
}

const GRID5: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

impl<'a> Runner<'a> {
    pub fn new(cfg: &'a ExperimentConfig, threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self { cfg, pool, progress: false })
    }

    /// Run `f` on this runner's worker pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    fn note(&self, msg: &str) {
        if self.progress {
            eprintln!("{msg}");
        }
    }

    pub fn request(&self) -> SampleRequest {
        let sim = &self.cfg.simulation;
        let integration_grid = if self.cfg.weights.is_empty() {
            vec![]
        } else {
            (0..=sim.integration_steps).map(|k| k as f64 / sim.integration_steps as f64).collect()
        };
        SampleRequest {
            times: sim.t_grid.clone(),
            functions: self.cfg.functions.clone(),
            weights: self.cfg.weights.clone(),
            integration_grid,
            probes: sim.probes.clone(),
        }
    }

    pub fn sim_box(&self, params: &SystemParams) -> Result<SimulationBox> {
        let sim = &self.cfg.simulation;
        SimulationBox::enlarged(params, &self.cfg.functions, self.cfg.t_max(params.n), sim.margin, sim.steps, sim.boundary)
    }

    /// All replicates of rung `rung`, in replicate order.
    pub fn batch(&self, rung: usize, doubled: bool) -> Result<Batch> {
        let sim = &self.cfg.simulation;
        let n = sim.n_ladder[rung];
        let params = self.cfg.params.system(n)?;
        let mut bx = self.sim_box(&params)?;
        if doubled {
            bx = bx.doubled();
        }
        let opts = SimOptions { budget: sim.budget, ..SimOptions::default() };
        let load = crate::branching_system::sim::expected_load(&params, &bx)?;
        if load > opts.budget {
            return Err(Error::ResourceBudget { needed: load, budget: opts.budget });
        }
        let req = self.request();
        let seed = mix(self.cfg.seed, rung as u64 + if doubled { 1 << 32 } else { 0 });
        let r = sim.replicates;
        self.note(&format!(
            "n = {n}: {r} replicates, box radius {:?}, {load:.3e} expected particle-seconds each",
            bx.radius()
        ));
        let done = AtomicUsize::new(0);
        let step = (r / 10).max(1);
        let samples = self.pool.install(|| {
            (0..r)
                .into_par_iter()
                .map(|i| {
                    let s = fluctuation_sample(&params, &bx, StreamKey::new(seed, i as u64), &opts, &req);
                    let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                    if k % step == 0 {
                        self.note(&format!("  n = {n}: {k}/{r}"));
                    }
                    s
                })
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(Batch { n, samples })
    }

    /// Every rung of the ladder.
    pub fn ladder(&self) -> Result<Vec<Batch>> {
        (0..self.cfg.simulation.n_ladder.len()).map(|k| self.batch(k, false)).collect()
    }

    /// Run the suites in the given order.
    pub fn run(&self, suites: &[Suite]) -> Result<Vec<ReportRow>> {
        let mut ordered: Vec<Suite> = Vec::new();
        for s in suites {
            if !ordered.contains(s) {
                ordered.push(*s);
            }
        }
        let mut check_cfg = self.cfg.clone();
        check_cfg.suites = ordered.clone();
        check_cfg.validate()?;
        let needs_mc = ordered
            .iter()
            .any(|s| matches!(s, Suite::MeanIdentity | Suite::CovarianceVsLimit | Suite::IntegratedFunctional));
        let batches = if needs_mc { self.ladder()? } else { vec![] };
        let mut rows = Vec::new();
        for s in ordered {
            self.note(&format!("suite {}", s.name()));
            match s {
                Suite::MeanIdentity => rows.extend(self.mean_identity(&batches)?),
                Suite::CovarianceVsLimit => rows.extend(self.covariance_vs_limit(&batches)?),
                Suite::IntegratedFunctional => rows.extend(self.integrated_functional(&batches)?),
                Suite::FieldProperties => rows.extend(self.field_properties()?),
                Suite::KernelIdentities => rows.extend(self.kernel_identities()?),
            }
        }
        Ok(rows)
    }

    fn mean_identity(&self, batches: &[Batch]) -> Result<Vec<ReportRow>> {
        let mut rows = Vec::new();
        for b in batches {
            let params = self.cfg.params.system(b.n)?;
            for (p, s) in self.cfg.simulation.probes.iter().enumerate() {
                for (i, f) in self.cfg.functions.iter().enumerate() {
                    let x: Vec<f64> = b.samples.iter().map(|q| q.probes[p][i]).collect();
                    let (m, se) = mean_se(&x)?;
                    let target = params.mean_factor_f(*s)? * f.integral();
                    let budget = 3.0 * se;
                    rows.push(row(
                        Suite::MeanIdentity,
                        format!("mean phi{i} s={s}"),
                        Some(b.n),
                        m,
                        target,
                        budget,
                        (m - target).abs() <= budget,
                    ));
                }
            }
        }
        Ok(rows)
    }

    fn model(&self) -> Result<LimitModel> {
        let n = *self.cfg.simulation.n_ladder.last().expect("validated ladder");
        LimitModel::new(&self.cfg.params.system(n)?, &self.cfg.functions, &self.cfg.quadrature)
    }

    /// Rows for one family of checks evaluated on every rung: informational
    /// below the top rung, judged at the top, plus a trend row per step.
    fn ladder_rows(&self, suite: Suite, labels: &[String], per_rung: &[Vec<(f64, f64, f64)>], ns: &[f64]) -> Vec<ReportRow> {
        let gap_budget = self.cfg.simulation.gap_budget;
        let mut rows = Vec::new();
        let last = per_rung.len() - 1;
        for (k, checks) in per_rung.iter().enumerate() {
            for (label, (est, se, target)) in labels.iter().zip(checks) {
                if k == last {
                    let budget = (3.0 * se).max(gap_budget * target.abs());
                    rows.push(row(suite, label.clone(), Some(ns[k]), *est, *target, budget, (est - target).abs() <= budget));
                } else {
                    rows.push(row(suite, format!("{label} (ladder)"), Some(ns[k]), *est, *target, f64::INFINITY, true));
                }
            }
        }
        let gaps: Vec<f64> = per_rung.iter().map(|c| median(&c.iter().map(|(e, _, t)| (e - t).abs()).collect::<Vec<_>>())).collect();
        let ses: Vec<f64> = per_rung.iter().map(|c| median(&c.iter().map(|(_, s, _)| *s).collect::<Vec<_>>())).collect();
        for k in 1..per_rung.len() {
            let slack = 3.0 * ses[k];
            rows.push(row(
                suite,
                format!("median gap non-increasing {}->{}", ns[k - 1], ns[k]),
                Some(ns[k]),
                gaps[k],
                gaps[k - 1],
                slack,
                gaps[k] <= gaps[k - 1] + slack,
            ));
        }
        rows
    }

    fn covariance_vs_limit(&self, batches: &[Batch]) -> Result<Vec<ReportRow>> {
        let model = self.model()?;
        let times = &self.cfg.simulation.t_grid;
        let mut labels = Vec::new();
        let mut targets = Vec::new();
        let mut index = Vec::new();
        for i in 0..self.cfg.functions.len() {
            for a in 0..times.len() {
                for b in a..times.len() {
                    labels.push(format!("cov phi{i} r={} t={}", times[a], times[b]));
                    targets.push(model.cov(i, i, times[a], times[b])?.value);
                    index.push((i, a, b));
                }
            }
        }
        let mut per_rung = Vec::new();
        for (k, batch) in batches.iter().enumerate() {
            let key = StreamKey::new(mix(self.cfg.seed, 1 << 40), k as u64);
            let mut checks = Vec::new();
            for (&(i, a, b), target) in index.iter().zip(&targets) {
                let x: Vec<f64> = batch.samples.iter().map(|s| s.values[a][i]).collect();
                let y: Vec<f64> = batch.samples.iter().map(|s| s.values[b][i]).collect();
                let e = estimate_cov(&x, &y, batch.n, key)?;
                checks.push((e.estimate, e.se, *target));
            }
            per_rung.push(checks);
        }
        let ns: Vec<f64> = batches.iter().map(|b| b.n).collect();
        let mut rows = self.ladder_rows(Suite::CovarianceVsLimit, &labels, &per_rung, &ns);
        if self.cfg.simulation.doubling_check {
            let top = batches.len() - 1;
            let doubled = self.batch(top, true)?;
            let key = StreamKey::new(mix(self.cfg.seed, 1 << 41), 0);
            for (&(i, a, b), label) in index.iter().zip(&labels) {
                let x: Vec<f64> = doubled.samples.iter().map(|s| s.values[a][i]).collect();
                let y: Vec<f64> = doubled.samples.iter().map(|s| s.values[b][i]).collect();
                let e = estimate_cov(&x, &y, doubled.n, key)?;
                let (base, se, _) = per_rung[top][labels.iter().position(|l| l == label).unwrap()];
                let budget = 3.0 * (se * se + e.se * e.se).sqrt();
                rows.push(row(
                    Suite::CovarianceVsLimit,
                    format!("{label} doubled box"),
                    Some(doubled.n),
                    e.estimate,
                    base,
                    budget,
                    (e.estimate - base).abs() <= budget,
                ));
            }
        }
        Ok(rows)
    }

    fn integrated_functional(&self, batches: &[Batch]) -> Result<Vec<ReportRow>> {
        let model = self.model()?;
        let mut labels = Vec::new();
        let mut targets = Vec::new();
        let mut index = Vec::new();
        for (h, w) in self.cfg.weights.iter().enumerate() {
            for i in 0..self.cfg.functions.len() {
                labels.push(format!("var phi{i} h{h}"));
                targets.push(model.integrated(i, w, 12)?.value);
                index.push((h, i));
            }
        }
        let mut per_rung = Vec::new();
        for (k, batch) in batches.iter().enumerate() {
            let key = StreamKey::new(mix(self.cfg.seed, 1 << 42), k as u64);
            let mut checks = Vec::new();
            for (&(h, i), target) in index.iter().zip(&targets) {
                let x: Vec<f64> = batch.samples.iter().map(|s| s.integrated[h][i]).collect();
                let e = estimate_cov(&x, &x, batch.n, key)?;
                checks.push((e.estimate, e.se, *target));
            }
            per_rung.push(checks);
        }
        let ns: Vec<f64> = batches.iter().map(|b| b.n).collect();
        Ok(self.ladder_rows(Suite::IntegratedFunctional, &labels, &per_rung, &ns))
    }

    fn field_properties(&self) -> Result<Vec<ReportRow>> {
        let fc = &self.cfg.field;
        let qc = &self.cfg.quadrature;
        let suite = Suite::FieldProperties;
        let mut rows = Vec::new();
        for spec in fc.specs()? {
            let tag = format!("{:?}", spec.which);
            let d = spec.sv.dim();
            let tol = if d == 1 { 1e-5 } else { 1e-4 };
            let ones = vec![1.0; d];
            let pairs = [(ones.clone(), ones.clone()), (vec![0.5; d], vec![1.5; d])];
            for c in &fc.scales {
                for (p, (u, v)) in pairs.iter().enumerate() {
                    let defect = self.pool.install(|| scaling_defect(&spec, *c, u, v, qc))?;
                    rows.push(row(suite, format!("{tag} scaling c={c} pair{p}"), None, defect, 0.0, tol, defect <= tol));
                }
            }
            if d == 1 {
                let h = 0.5 * (1.0 + spec.kernel_power() * spec.sv.alphas()[0]);
                let grid = [0.5, 1.0, 1.5, 2.0, 2.5];
                let pts: Vec<(f64, f64)> = grid.iter().flat_map(|u| grid.iter().map(move |v| (*u, *v))).collect();
                let ratios = self.pool.install(|| {
                    pts.par_iter()
                        .map(|(u, v)| Ok(cov_field(&spec, &[*u], &[*v], qc)?.value / fbm_cov(h, *u, *v)?))
                        .collect::<Result<Vec<f64>>>()
                })?;
                let s = spread(&ratios);
                rows.push(row(suite, format!("{tag} fbm ratio H={h}"), None, s, 0.0, 1e-5, s <= 1e-5));
            } else {
                let (w1, w2) = nonstationarity_witness(&spec, qc)?;
                let scale = cov_field(&spec, &ones, &ones, qc)?.value;
                let budget = 1e-6 * scale;
                rows.push(row(suite, format!("{tag} witness zero"), None, w1, 0.0, budget, w1.abs() <= budget));
                rows.push(row(suite, format!("{tag} witness positive"), None, w2, 0.0, budget, w2 > budget));
            }
            let points = field_points(self.cfg, &spec);
            let m = self.pool.install(|| covariance_matrix(&spec, &points, qc))?;
            let diag = (0..m.nrows()).map(|i| m[(i, i)]).fold(f64::INFINITY, f64::min);
            rows.push(row(suite, format!("{tag} variance nonnegative"), None, diag, 0.0, 0.0, diag >= 0.0));
            let floor = gram_floor(&m);
            rows.push(row(suite, format!("{tag} gram psd"), None, floor, 0.0, -1e-8, floor >= -1e-8));
        }
        Ok(rows)
    }

    fn kernel_identities(&self) -> Result<Vec<ReportRow>> {
        let kc = &self.cfg.kernels;
        let qc = &self.cfg.quadrature;
        let suite = Suite::KernelIdentities;
        let mut rows = Vec::new();

        let probe = [0.5, 1.0, 1.5, 2.0];
        let mut worst: f64 = 0.0;
        for x in probe {
            for u in probe {
                for v in probe {
                    for z in probe {
                        worst = worst.max(decomposition_residual(x, u, v, z)?.abs());
                    }
                }
            }
        }
        rows.push(row(suite, "kernel decomposition residual".into(), None, worst, 0.0, 1e-12, worst <= 1e-12));

        if !kc.critical_alphas.is_empty() {
            let sv = StabilityVector::new(kc.critical_alphas.clone())?;
            let phi0 = capital_phi(0.0, &sv, qc)?;
            let pts: Vec<(f64, f64)> = GRID5.iter().flat_map(|r| GRID5.iter().map(move |t| (*r, *t))).collect();
            for route in [CriticalRoute::Decomposition, CriticalRoute::Direct] {
                let devs = self.pool.install(|| {
                    pts.par_iter()
                        .map(|(r, t)| {
                            let c = critical_c(*r, *t, 0.0, &sv, route, qc)?.value;
                            Ok((c / (phi0 * r.min(*t)) - 1.0).abs())
                        })
                        .collect::<Result<Vec<f64>>>()
                })?;
                let dev = devs.iter().cloned().fold(0.0, f64::max);
                let label = format!("critical theta=0 equals Phi(0) min(r,t) {}", format!("{route:?}").to_lowercase());
                rows.push(row(suite, label, None, dev, 0.0, 1e-6, dev <= 1e-6));
            }
            let a = critical_c(1.0, 1.0, 1.0, &sv, CriticalRoute::Decomposition, qc)?.value;
            let b = critical_c(1.0, 1.0, 1.0, &sv, CriticalRoute::Direct, qc)?.value;
            let budget = 1e-6 * b.abs();
            rows.push(row(suite, "critical routes agree theta=1".into(), None, a, b, budget, (a - b).abs() <= budget));
        }

        for abar in &kc.intermediate_abars {
            let sv = StabilityVector::new(vec![1.0 / abar])?;
            let pts: Vec<(f64, f64)> = GRID5.iter().flat_map(|r| GRID5.iter().map(move |t| (*r, *t))).collect();
            let ratios = self.pool.install(|| {
                pts.par_iter()
                    .map(|(r, t)| Ok(intermediate_c(*r, *t, 0.0, &sv, qc)?.value / subfbm_cov(*r, *t, *abar)))
                    .collect::<Result<Vec<f64>>>()
            })?;
            let s = spread(&ratios);
            rows.push(row(suite, format!("intermediate theta=0 subfbm ratio abar={abar}"), None, s, 0.0, 1e-8, s <= 1e-8));
        }

        let unit = TestFunction::gaussian(vec![0.0], vec![1.0])?;
        for alpha in &kc.oracle_alphas {
            let sv = StabilityVector::new(vec![*alpha])?;
            let got = spectral_integral(&sv, &unit, &unit, 1.0, qc)?.value;
            let want = 2.0 * std::f64::consts::PI * gamma((1.0 - alpha) / 2.0);
            let dev = (got / want - 1.0).abs();
            rows.push(row(suite, format!("gaussian spectral oracle beta={alpha}"), None, got, want, 1e-8 * want, dev <= 1e-8));
        }

        let sv = StabilityVector::new(self.cfg.params.alphas.clone())?;
        let abar = sv.alpha_bar();
        for (q, expect) in [(abar - 0.3, true), (abar, false), (abar + 0.2, false)] {
            let conv = cube_moment_converges(&sv, q, qc);
            rows.push(row(
                suite,
                format!("cube moment q={q:.3} converges={expect}"),
                None,
                conv as u8 as f64,
                expect as u8 as f64,
                0.0,
                conv == expect,
            ));
        }

        if !self.cfg.functions.is_empty() {
            let n = self.cfg.simulation.n_ladder.last().cloned().unwrap_or(16.0).max(2.0);
            let model = LimitModel::new(&self.cfg.params.system(n)?, &self.cfg.functions[..1], qc)?;
            let m = GRID5.len();
            let vals = self.pool.install(|| {
                (0..m * m)
                    .into_par_iter()
                    .map(|k| Ok(model.cov(0, 0, GRID5[k / m], GRID5[k % m])?.value))
                    .collect::<Result<Vec<f64>>>()
            })?;
            let g = DMatrix::from_row_slice(m, m, &vals);
            let asym = (0..m)
                .flat_map(|i| (0..m).map(move |j| (i, j)))
                .map(|(i, j)| (g[(i, j)] - g[(j, i)]).abs() / g[(i, j)].abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            rows.push(row(suite, format!("{} covariance symmetric", model.regime().name()), None, asym, 0.0, 1e-10, asym <= 1e-10));
            let floor = gram_floor(&g);
            rows.push(row(suite, format!("{} covariance gram psd", model.regime().name()), None, floor, 0.0, -1e-8, floor >= -1e-8));
        }
        Ok(rows)
    }

    /// Limit covariances over the configured time grid, one block per test
    /// function.
    pub fn limits(&self) -> Result<Vec<CovRow>> {
        let n = self.cfg.simulation.n_ladder.last().cloned().unwrap_or(16.0).max(2.0);
        let params = self.cfg.params.system(n)?;
        let model = LimitModel::new(&params, &self.cfg.functions, &self.cfg.quadrature)?;
        let times = &self.cfg.simulation.t_grid;
        let mut rows = Vec::new();
        for (i, f) in self.cfg.functions.iter().enumerate() {
            let text = format!(
                "{:?}|{}|{}|{}",
                self.cfg.params.alphas,
                self.cfg.params.gamma,
                self.cfg.params.theta,
                serde_json::to_string(f)?
            );
            let hash = stable_hash(&text);
            let pairs: Vec<(f64, f64)> = times.iter().flat_map(|r| times.iter().map(move |t| (*r, *t))).collect();
            let vals = self.pool.install(|| {
                pairs.par_iter().map(|(r, t)| model.cov(i, i, *r, *t)).collect::<Result<Vec<_>>>()
            })?;
            for ((r, t), e) in pairs.iter().zip(vals) {
                rows.push(CovRow {
                    regime: model.regime().name().into(),
                    r: *r,
                    t: *t,
                    params_hash: hash.clone(),
                    value: e.value,
                    err: e.error,
                });
            }
        }
        Ok(rows)
    }
}

/// Convenience wrapper: run `suites` (or the configured ones if empty).
pub fn run_suite(cfg: &ExperimentConfig, suites: &[Suite], threads: usize) -> Result<Vec<ReportRow>> {
    let runner = Runner::new(cfg, threads)?;
    let list = if suites.is_empty() { cfg.suites.clone() } else { suites.to_vec() };
    runner.run(&list)
}

/// Whether every row passed.
pub fn all_pass(rows: &[ReportRow]) -> bool {
    rows.iter().all(|r| r.pass)
}

/// Default evaluation points: the `3^d` grid on `{0.25, 0.75, 1.25}^d`.
pub fn default_points(d: usize) -> Vec<Vec<f64>> {
    let g = [0.25, 0.75, 1.25];
    let mut pts = vec![vec![]];
    for _ in 0..d {
        pts = pts.into_iter().flat_map(|p: Vec<f64>| g.iter().map(move |x| [p.clone(), vec![*x]].concat())).collect();
    }
    pts
}

/// Configured field points, or the default grid.
pub fn field_points(cfg: &ExperimentConfig, spec: &FieldSpec) -> Vec<Vec<f64>> {
    if cfg.field.points.is_empty() { default_points(spec.sv.dim()) } else { cfg.field.points.clone() }
}
