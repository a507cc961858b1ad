use otfluct::branching_system::sim::{Boundary, SimOptions, SimulationBox};
use otfluct::branching_system::{SystemParams, occupation_functional, simulate};
use otfluct::config::{ExperimentConfig, Suite};
use otfluct::rng::StreamKey;
use otfluct::stable_motion::StabilityVector;
use otfluct::stats::mean_se;
use otfluct::test_function::TestFunction;
use otfluct::verify::{Runner, write_report, write_samples};

const SMALL: &str = r#"
suites = ["mean-identity", "covariance-vs-limit", "integrated-functional"]
seed = 11

[params]
alphas = [0.8]
gamma = 1.0
theta = 1.0

[simulation]
replicates = 300
n_ladder = [4.0, 8.0]
t_grid = [0.5, 1.0]
probes = [1.0, 3.0]
integration_steps = 16
steps = 128

[[functions]]
kind = "gaussian_bump"
center = [0.0]
widths = [1.0]

[[functions]]
kind = "mollified_box"
center = [0.5]
half_widths = [1.0]
smoothing = [0.2]

[[weights]]
kind = "constant"
value = 1.0
"#;

fn small() -> ExperimentConfig {
    ExperimentConfig::from_toml(SMALL).unwrap()
}

fn csv_bytes(cfg: &ExperimentConfig, threads: usize) -> (Vec<u8>, Vec<u8>) {
    let runner = Runner::new(cfg, threads).unwrap();
    let rows = runner.run(&cfg.suites).unwrap();
    let mut report = Vec::new();
    write_report(&rows, &mut report).unwrap();
    let batch = runner.batch(0, false).unwrap();
    let mut samples = Vec::new();
    write_samples(&batch.samples, &cfg.simulation.t_grid, &mut samples).unwrap();
    (report, samples)
}

#[test]
fn output_is_byte_identical_across_thread_counts() {
    let cfg = small();
    let one = csv_bytes(&cfg, 1);
    let three = csv_bytes(&cfg, 3);
    assert_eq!(one, three);
    let mut other = cfg.clone();
    other.seed = 12;
    assert_ne!(csv_bytes(&other, 2).1, one.1);
}

#[test]
fn fluctuations_are_centred() {
    let cfg = small();
    let runner = Runner::new(&cfg, 2).unwrap();
    let batch = runner.batch(1, false).unwrap();
    for t in 0..2 {
        for i in 0..2 {
            let x: Vec<f64> = batch.samples.iter().map(|s| s.values[t][i]).collect();
            let (m, se) = mean_se(&x).unwrap();
            assert!(m.abs() <= 4.0 * se, "t{t} phi{i}: mean {m} se {se}");
        }
    }
}

#[test]
fn occupation_is_linear_in_the_test_function() {
    let mut cfg = small();
    let f = cfg.functions[0].clone();
    let g = cfg.functions[1].clone();
    cfg.functions.push(TestFunction::combination(vec![(2.0, f), (-0.5, g)]).unwrap());
    cfg.simulation.replicates = 20;
    let runner = Runner::new(&cfg, 1).unwrap();
    for s in runner.batch(0, false).unwrap().samples {
        for row in s.values.iter().chain(&s.integrated).chain(&s.probes) {
            let want = 2.0 * row[0] - 0.5 * row[1];
            assert!((row[2] - want).abs() <= 1e-9 * want.abs().max(1.0), "{row:?}");
        }
    }
}

#[test]
fn theta_zero_mean_identity_targets_the_mass() {
    let mut cfg = small();
    cfg.params.theta = 0.0;
    cfg.suites = vec![Suite::MeanIdentity];
    let rows = Runner::new(&cfg, 2).unwrap().run(&cfg.suites).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2);
    for r in &rows {
        let mass = if r.check.starts_with("mean phi0") { cfg.functions[0].integral() } else { cfg.functions[1].integral() };
        assert!((r.target - mass).abs() < 1e-12, "{r:?}");
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn empty_suite_list_gives_empty_report() {
    let cfg = small();
    let rows = Runner::new(&cfg, 1).unwrap().run(&[]).unwrap();
    assert!(rows.is_empty());
}

#[test]
fn failing_rows_carry_deviation_and_budget() {
    let mut cfg = small();
    cfg.suites = vec![Suite::CovarianceVsLimit];
    cfg.simulation.gap_budget = 0.0;
    let rows = Runner::new(&cfg, 1).unwrap().run(&cfg.suites).unwrap();
    for r in rows.iter().filter(|r| !r.pass) {
        assert!(r.estimate.is_finite() && r.target.is_finite() && r.budget.is_finite());
        assert!((r.estimate - r.target).abs() > r.budget);
    }
}

#[test]
fn inconsistent_config_fails_before_simulating() {
    let mut cfg = small();
    cfg.weights.clear();
    let t = std::time::Instant::now();
    assert!(Runner::new(&cfg, 1).unwrap().run(&[Suite::IntegratedFunctional]).is_err());
    assert!(t.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn branching_age_law() {
    // Two children with probability e^{-δ a}/2 at split age a.
    let p = SystemParams::new(StabilityVector::new(vec![0.8]).unwrap(), 2.0, 2.0, 2.0).unwrap();
    let bx = SimulationBox::new(vec![40.0], 6.0, 0.5, Boundary::Periodic).unwrap();
    let mut bins = [(0.0f64, 0.0f64, 0usize); 3];
    for rep in 0..40 {
        let log = simulate(&p, &bx, StreamKey::new(3, rep), &SimOptions::default()).unwrap();
        for r in &log.particles {
            let Some(k) = r.children else { continue };
            let age = r.split_t - r.birth_t;
            let b = ((age / 0.3) as usize).min(2);
            bins[b].0 += (k == 2) as u8 as f64;
            bins[b].1 += 0.5 * (-p.delta() * age).exp();
            bins[b].2 += 1;
        }
    }
    for (got, want, count) in bins {
        assert!(count > 200);
        let sd = (want * (1.0 - want / count as f64)).sqrt();
        assert!((got - want).abs() <= 4.0 * sd, "{got} vs {want} over {count}");
    }
}

#[test]
fn mean_occupation_matches_closed_form() {
    // E⟨L(T), φ⟩ = ∫_0^T f(s) ds ∫φ on the torus.
    let p = SystemParams::new(StabilityVector::new(vec![0.8]).unwrap(), 1.0, 1.0, 4.0).unwrap();
    let f = TestFunction::gaussian(vec![0.0], vec![1.0]).unwrap();
    let bx = SimulationBox::new(vec![15.0], 4.0, 0.05, Boundary::Periodic).unwrap();
    let x: Vec<f64> = (0..400)
        .map(|rep| {
            let log = simulate(&p, &bx, StreamKey::new(5, rep), &SimOptions::default()).unwrap();
            occupation_functional(&log, &f, 4.0).unwrap()
        })
        .collect();
    let (m, se) = mean_se(&x).unwrap();
    let want = p.mean_factor_integral(4.0).unwrap() * f.integral();
    assert!((m - want).abs() <= 4.0 * se, "{m} vs {want} ± {se}");
}
