//! Randomized equivalence checks of the Fourier-domain closed forms against
//! the dense references in [`crate::dense`]. Shared by the `selftest`
//! command and the acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense;
use crate::detector::respond;
use crate::error::Result;
use crate::feature_map::FeatureMap;
use crate::labels::{build_labels, LabelField};
use crate::optimizer::{
    model_step_kernel, model_step_linear, objective, train, z_step, Kernel, ModelMode, SlackState, TrainConfig,
};
use crate::spectral;

/// Largest grid side of a random instance.
pub const MAX_SIDE: usize = 8;
/// Largest channel count of a random instance.
pub const MAX_CHANNELS: usize = 3;
/// Absolute tolerance for the equivalence checks.
pub const ORACLE_TOL: f64 = 1e-6;
/// Slack allowed on objective increases.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub instances: usize,
    /// Largest deviation seen (objective increase for the monotonicity check).
    pub max_error: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            instances: 0,
            max_error: 0.0,
            tolerance,
        }
    }

    fn record(&mut self, error: f64) {
        self.instances += 1;
        // NaN must fail
        self.max_error = if error.is_nan() || self.max_error.is_nan() {
            f64::NAN
        } else {
            self.max_error.max(error)
        };
    }

    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

/// One random problem: training map, candidate map, labels and solver knobs.
pub struct Instance {
    pub features: FeatureMap,
    pub candidate: FeatureMap,
    pub labels: LabelField,
    pub c: f64,
    pub sigma_k: f64,
}

fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, d: usize) -> FeatureMap {
    let data = (0..w * h * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    FeatureMap::from_vec(w, h, d, data).expect("shape")
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let (w, h) = loop {
        let (w, h) = (rng.gen_range(1..=MAX_SIDE), rng.gen_range(1..=MAX_SIDE));
        if w * h >= 2 {
            break (w, h);
        }
    };
    let d = rng.gen_range(1..=MAX_CHANNELS);
    let target = (rng.gen_range(1.0..=w as f64), rng.gen_range(1.0..=h as f64));
    Instance {
        features: random_map(rng, w, h, d),
        candidate: random_map(rng, w, h, d),
        labels: build_labels(w, h, target, rng.gen_range(0.1..1.0)).expect("valid labels"),
        c: rng.gen_range(0.1..100.0),
        sigma_k: rng.gen_range(0.3..2.0),
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn kernels(inst: &Instance) -> [Kernel; 2] {
    [Kernel::Linear, Kernel::Gaussian { sigma: inst.sigma_k }]
}

/// Random slack state: a sparse non-negative `z` and a random plane height.
fn random_state(rng: &mut ChaCha8Rng, labels: &LabelField) -> Result<SlackState> {
    let n = labels.width() * labels.height();
    let z = (0..n)
        .map(|_| {
            if rng.gen_bool(0.5) {
                rng.gen_range(0.0..0.5)
            } else {
                0.0
            }
        })
        .collect();
    SlackState::with_slack(labels, z, rng.gen_range(0.5..1.5))
}

fn check_instance(inst: &Instance, rng: &mut ChaCha8Rng, checks: &mut [Check; 7]) -> Result<()> {
    let [corr, w_step, a_step, z_check, resp_lin, resp_ker, mono] = checks;
    let x = &inst.features;
    let xh = spectral::dft2(x)?;
    let zh = spectral::dft2(&inst.candidate)?;

    // kernel correlation against explicit shifted inner products
    let fast = spectral::idft2_surface(&spectral::linear_kernel_corr(&xh, &zh)?)?;
    corr.record(max_abs_diff(&fast, &dense::cross_correlation(x, &inst.candidate)));

    let state = random_state(rng, &inst.labels)?;

    let linear = model_step_linear(x, &state, inst.c)?;
    let w = linear.spatial_weights().expect("primal model")?;
    let dense_w = dense::primal_solve(x, state.target(), inst.c);
    w_step.record(max_abs_diff(w.as_slice(), dense_w.as_slice()));
    resp_lin.record(max_abs_diff(
        respond(&linear, &inst.candidate)?.values(),
        &dense::primal_response(&w, &inst.candidate),
    ));

    for kernel in kernels(inst) {
        let model = model_step_kernel(x, &state, inst.c, kernel)?;
        let alpha = model.spatial_alpha().expect("dual model")?;
        let dense_alpha = dense::dual_solve(&dense::kernel_matrix(x, kernel), state.target(), inst.c);
        a_step.record(max_abs_diff(&alpha, &dense_alpha));
        resp_ker.record(max_abs_diff(
            respond(&model, &inst.candidate)?.values(),
            &dense::kernel_response(x, &inst.candidate, &alpha, kernel),
        ));
    }

    // z-step from the dense response of the same model
    let next = z_step(&linear, &state, &inst.labels, x)?;
    let (dense_z, dense_u0) = dense::slack_update(&dense::primal_response(&w, x), inst.labels.upsilon());
    z_check.record(max_abs_diff(next.z(), &dense_z).max((next.u0_height() - dense_u0).abs()));

    for mode in [ModelMode::Linear, ModelMode::KernelLinear, ModelMode::KernelGaussian] {
        mono.record(objective_increase(inst, mode)?);
    }
    Ok(())
}

/// Largest objective increase over four sweeps, with `u0` frozen at the
/// value chosen by each sweep's `z`-step.
pub fn objective_increase(inst: &Instance, mode: ModelMode) -> Result<f64> {
    let x = &inst.features;
    let xh = spectral::dft2(x)?;
    let config = TrainConfig {
        mode,
        c: inst.c,
        sigma_k: inst.sigma_k,
        iterations: 1,
    };
    let step = |state: &SlackState| match mode {
        ModelMode::Linear => model_step_linear(x, state, inst.c),
        ModelMode::KernelLinear => model_step_kernel(x, state, inst.c, Kernel::Linear),
        ModelMode::KernelGaussian => model_step_kernel(x, state, inst.c, Kernel::Gaussian { sigma: inst.sigma_k }),
    };
    let (mut model, mut state) = train(x, &inst.labels, &config)?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..4 {
        let next_state = z_step(&model, &state, &inst.labels, x)?;
        let u0 = next_state.u0_height();
        let before = objective(&model, &xh, &inst.labels, state.z(), u0)?;
        let mid = objective(&model, &xh, &inst.labels, next_state.z(), u0)?;
        let next_model = step(&next_state)?;
        let after = objective(&next_model, &xh, &inst.labels, next_state.z(), u0)?;
        worst = worst.max(mid - before).max(after - mid);
        model = next_model;
        state = next_state;
    }
    Ok(worst.max(0.0))
}

pub const CHECK_NAMES: [&str; 7] = [
    "spectral: kernel correlation vs shifted inner products",
    "optimizer: linear w-step vs dense ridge solve",
    "optimizer: kernel alpha-step vs dense kernel solve",
    "optimizer: z-step vs element-wise slack update",
    "detector: linear response vs brute-force shifts",
    "detector: kernel response vs brute-force shifts",
    "optimizer: objective non-increasing per sweep",
];

/// Run every check on `instances` random problems drawn from `seed`.
pub fn run(instances: usize, seed: u64) -> Result<Vec<Check>> {
    let mut checks = [
        Check::new(CHECK_NAMES[0], ORACLE_TOL),
        Check::new(CHECK_NAMES[1], ORACLE_TOL),
        Check::new(CHECK_NAMES[2], ORACLE_TOL),
        Check::new(CHECK_NAMES[3], ORACLE_TOL),
        Check::new(CHECK_NAMES[4], ORACLE_TOL),
        Check::new(CHECK_NAMES[5], ORACLE_TOL),
        Check::new(CHECK_NAMES[6], MONOTONE_SLACK),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..instances {
        let inst = random_instance(&mut rng);
        check_instance(&inst, &mut rng, &mut checks)?;
    }
    Ok(checks.to_vec())
}
