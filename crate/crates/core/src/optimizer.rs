//! Alternating closed-form solver for the large-margin objective over all
//! cyclic shifts of one training patch:
//!
//! ```text
//! min_w  1/2 |w|^2 + C | w'Phi - (u0 - upsilon - z) |^2,   z >= 0
//! ```
//!
//! where column `t` of `Phi` is the training map shifted back by `t`
//! (`x[p + t]`), `u0` is a constant plane and `upsilon` the root-loss field.
//! The `z`-step is an element-wise clamp; the `w`-step (primal) and the
//! `alpha`-step (kernelized dual) are element-wise divisions in the Fourier
//! domain.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::feature_map::FeatureMap;
use crate::labels::LabelField;
use crate::spectral::{self, SpectralMap};

/// Smallest admissible magnitude of a dual-step denominator.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelMode {
    /// Multi-channel primal filter.
    Linear,
    /// Dual coefficients with the linear kernel.
    KernelLinear,
    /// Dual coefficients with the Gaussian kernel.
    KernelGaussian,
}

impl std::str::FromStr for ModelMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Self::Linear),
            "kernel-linear" => Ok(Self::KernelLinear),
            "kernel-gaussian" => Ok(Self::KernelGaussian),
            other => Err(format!(
                "unknown mode `{other}` (expected linear, kernel-linear or kernel-gaussian)"
            )),
        }
    }
}

impl std::fmt::Display for ModelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::KernelLinear => "kernel-linear",
            Self::KernelGaussian => "kernel-gaussian",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    Linear,
    Gaussian { sigma: f64 },
}

impl Kernel {
    /// Kernel correlation spectrum between two feature spectra.
    pub fn correlate(&self, a: &SpectralMap, b: &SpectralMap) -> Result<SpectralMap> {
        match *self {
            Kernel::Linear => spectral::linear_kernel_corr(a, b),
            Kernel::Gaussian { sigma } => spectral::gaussian_kernel_corr(a, b, sigma),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Coefficients {
    /// Filter in correlation form: the detection spectrum of a candidate
    /// `z` is `sum_d filter_d * Z_d`, i.e. `filter = conj(W)`.
    Primal(SpectralMap),
    /// Dual coefficients `alpha` (single channel) with their kernel.
    Dual { alpha: SpectralMap, kernel: Kernel },
}

/// A trained model: Fourier-domain coefficients plus the training template.
#[derive(Clone, Debug, PartialEq)]
pub struct DualModel {
    coefficients: Coefficients,
    template_hat: SpectralMap,
    c: f64,
}

impl DualModel {
    /// The all-zero model of the given shape.
    pub fn zero(mode: ModelMode, width: usize, height: usize, channels: usize, c: f64, sigma_k: f64) -> Self {
        let coefficients = match mode {
            ModelMode::Linear => Coefficients::Primal(SpectralMap::zeros(width, height, channels)),
            ModelMode::KernelLinear => Coefficients::Dual {
                alpha: SpectralMap::zeros(width, height, 1),
                kernel: Kernel::Linear,
            },
            ModelMode::KernelGaussian => Coefficients::Dual {
                alpha: SpectralMap::zeros(width, height, 1),
                kernel: Kernel::Gaussian { sigma: sigma_k },
            },
        };
        Self {
            coefficients,
            template_hat: SpectralMap::zeros(width, height, channels),
            c,
        }
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn template_hat(&self) -> &SpectralMap {
        &self.template_hat
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn width(&self) -> usize {
        self.template_hat.width()
    }

    pub fn height(&self) -> usize {
        self.template_hat.height()
    }

    pub fn channels(&self) -> usize {
        self.template_hat.channels()
    }

    pub fn is_kernel(&self) -> bool {
        matches!(self.coefficients, Coefficients::Dual { .. })
    }

    /// Spectrum of the detection response for a candidate spectrum.
    pub fn response_spectrum(&self, candidate_hat: &SpectralMap) -> Result<SpectralMap> {
        if !candidate_hat.same_shape(&self.template_hat) {
            return invalid(format!(
                "candidate {}x{}x{} does not match model {}x{}x{}",
                candidate_hat.width(),
                candidate_hat.height(),
                candidate_hat.channels(),
                self.width(),
                self.height(),
                self.channels()
            ));
        }
        match &self.coefficients {
            Coefficients::Primal(filter) => {
                let n = filter.plane_len();
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                for d in 0..filter.channels() {
                    for ((o, f), z) in out.iter_mut().zip(filter.channel(d)).zip(candidate_hat.channel(d)) {
                        *o += f * z;
                    }
                }
                SpectralMap::from_vec(filter.width(), filter.height(), 1, out)
            }
            Coefficients::Dual { alpha, kernel } => {
                let mut k = kernel.correlate(&self.template_hat, candidate_hat)?;
                for (v, a) in k.as_mut_slice().iter_mut().zip(alpha.as_slice()) {
                    *v *= a;
                }
                Ok(k)
            }
        }
    }

    /// Spatial response over all cyclic shifts (row-major).
    pub fn respond_spatial(&self, candidate_hat: &SpectralMap) -> Result<Vec<f64>> {
        spectral::idft2_surface(&self.response_spectrum(candidate_hat)?)
    }

    /// Spatial primal weights, available in primal mode only.
    pub fn spatial_weights(&self) -> Option<Result<FeatureMap>> {
        match &self.coefficients {
            Coefficients::Primal(filter) => {
                let mut w = filter.clone();
                for v in w.as_mut_slice() {
                    *v = v.conj();
                }
                Some(spectral::idft2(&w))
            }
            Coefficients::Dual { .. } => None,
        }
    }

    /// Spatial dual coefficients, available in kernel mode only.
    pub fn spatial_alpha(&self) -> Option<Result<Vec<f64>>> {
        match &self.coefficients {
            Coefficients::Dual { alpha, .. } => Some(spectral::idft2_surface(alpha)),
            Coefficients::Primal(_) => None,
        }
    }

    /// `1/2 |w|^2`, computed in whichever representation the model uses.
    pub fn half_squared_norm(&self) -> Result<f64> {
        match &self.coefficients {
            Coefficients::Primal(filter) => Ok(0.5 * filter.spatial_energy()),
            Coefficients::Dual { alpha, .. } => {
                // alpha' K alpha with K built from the stored template
                let k_alpha = self.respond_spatial(&self.template_hat)?;
                let a = spectral::idft2_surface(alpha)?;
                Ok(0.5 * a.iter().zip(&k_alpha).map(|(x, y)| x * y).sum::<f64>())
            }
        }
    }
}

/// Slack variable, plane height and the regression target they induce.
#[derive(Clone, Debug, PartialEq)]
pub struct SlackState {
    width: usize,
    height: usize,
    z: Vec<f64>,
    u0_height: f64,
    u: Vec<f64>,
}

impl SlackState {
    /// `z = 0`, unit plane: the target is `1 - upsilon`.
    pub fn initial(labels: &LabelField) -> Self {
        Self::from_parts(labels, vec![0.0; labels.width() * labels.height()], 1.0)
    }

    fn from_parts(labels: &LabelField, z: Vec<f64>, u0_height: f64) -> Self {
        let u = labels
            .upsilon()
            .iter()
            .zip(&z)
            .map(|(ups, zv)| u0_height - ups - zv)
            .collect();
        Self {
            width: labels.width(),
            height: labels.height(),
            z,
            u0_height,
            u,
        }
    }

    /// A state with an explicit slack and plane height.
    pub fn with_slack(labels: &LabelField, z: Vec<f64>, u0_height: f64) -> Result<Self> {
        if z.len() != labels.width() * labels.height() {
            return invalid("slack length does not match the label grid");
        }
        if z.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("slack must be finite and non-negative");
        }
        Ok(Self::from_parts(labels, z, u0_height))
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn u0_height(&self) -> f64 {
        self.u0_height
    }

    /// Regression target `u = u0 - upsilon - z`.
    pub fn target(&self) -> &[f64] {
        &self.u
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub mode: ModelMode,
    pub c: f64,
    pub sigma_k: f64,
    pub iterations: usize,
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return invalid(format!("regularization C must be positive, got {c}"));
    }
    Ok(())
}

fn target_spectrum(state: &SlackState) -> Result<SpectralMap> {
    if state.u.iter().any(|v| !v.is_finite()) {
        return invalid("regression target contains non-finite values");
    }
    spectral::dft2(&FeatureMap::from_vec(state.width, state.height, 1, state.u.clone())?)
}

fn check_state_shape(features: &SpectralMap, state: &SlackState) -> Result<()> {
    if features.width() != state.width || features.height() != state.height {
        return invalid(format!(
            "features {}x{} do not match slack grid {}x{}",
            features.width(),
            features.height(),
            state.width,
            state.height
        ));
    }
    Ok(())
}

/// Primal closed form from a precomputed feature spectrum.
pub fn model_step_linear_hat(features_hat: &SpectralMap, state: &SlackState, c: f64) -> Result<DualModel> {
    check_c(c)?;
    check_state_shape(features_hat, state)?;
    let u_hat = target_spectrum(state)?;
    let lambda = 1.0 / (2.0 * c);
    let n = features_hat.plane_len();
    let mut denom = vec![lambda; n];
    for d in 0..features_hat.channels() {
        for (acc, x) in denom.iter_mut().zip(features_hat.channel(d)) {
            *acc += x.norm_sqr();
        }
    }
    let mut filter = SpectralMap::zeros(features_hat.width(), features_hat.height(), features_hat.channels());
    for d in 0..features_hat.channels() {
        let x = features_hat.channel(d);
        for (i, f) in filter.channel_mut(d).iter_mut().enumerate() {
            *f = x[i].conj() * u_hat.as_slice()[i] / denom[i];
        }
    }
    Ok(DualModel {
        coefficients: Coefficients::Primal(filter),
        template_hat: features_hat.clone(),
        c,
    })
}

/// Primal `w`-step: per-channel `conj(X_d) * U / (sum_d |X_d|^2 + 1/(2C))`.
pub fn model_step_linear(features: &FeatureMap, state: &SlackState, c: f64) -> Result<DualModel> {
    model_step_linear_hat(&spectral::dft2(features)?, state, c)
}

/// Dual closed form given the kernel autocorrelation spectrum of the
/// template.
pub fn model_step_kernel_hat(
    features_hat: &SpectralMap,
    kernel_auto: &SpectralMap,
    kernel: Kernel,
    state: &SlackState,
    c: f64,
) -> Result<DualModel> {
    check_c(c)?;
    check_state_shape(features_hat, state)?;
    let u_hat = target_spectrum(state)?;
    let lambda = 1.0 / (2.0 * c);
    let mut alpha = Vec::with_capacity(kernel_auto.plane_len());
    for (k, u) in kernel_auto.as_slice().iter().zip(u_hat.as_slice()) {
        let denom = k + lambda;
        if denom.norm() < DENOMINATOR_FLOOR {
            return Err(Error::NumericalDegeneracy(format!(
                "dual denominator magnitude {:.3e} below floor",
                denom.norm()
            )));
        }
        alpha.push(u / denom);
    }
    Ok(DualModel {
        coefficients: Coefficients::Dual {
            alpha: SpectralMap::from_vec(features_hat.width(), features_hat.height(), 1, alpha)?,
            kernel,
        },
        template_hat: features_hat.clone(),
        c,
    })
}

/// Dual `alpha`-step: `U / (K_xx + 1/(2C))`.
pub fn model_step_kernel(features: &FeatureMap, state: &SlackState, c: f64, kernel: Kernel) -> Result<DualModel> {
    if let Kernel::Gaussian { sigma } = kernel {
        if !(sigma > 0.0) {
            return invalid(format!("kernel bandwidth must be positive, got {sigma}"));
        }
    }
    let x_hat = spectral::dft2(features)?;
    let k_auto = kernel.correlate(&x_hat, &x_hat)?;
    model_step_kernel_hat(&x_hat, &k_auto, kernel, state, c)
}

/// `z`-step from a precomputed feature spectrum.
pub fn z_step_hat(model: &DualModel, labels: &LabelField, features_hat: &SpectralMap) -> Result<SlackState> {
    if features_hat.width() != labels.width() || features_hat.height() != labels.height() {
        return invalid("features do not match the label grid");
    }
    let r = model.respond_spatial(features_hat)?;
    let u0 = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = r
        .iter()
        .zip(labels.upsilon())
        .map(|(rv, ups)| (u0 - rv - ups).max(0.0))
        .collect();
    Ok(SlackState::from_parts(labels, z, u0))
}

/// `z = max(u0 - r - upsilon, 0)` with `r` the model's response on the
/// training map and `u0` the highest peak of `r`.
pub fn z_step(model: &DualModel, state: &SlackState, labels: &LabelField, features: &FeatureMap) -> Result<SlackState> {
    if state.width != labels.width() || state.height != labels.height() {
        return invalid("slack state does not match the label grid");
    }
    z_step_hat(model, labels, &spectral::dft2(features)?)
}

fn kernel_for(config: &TrainConfig) -> Result<Option<Kernel>> {
    Ok(match config.mode {
        ModelMode::Linear => None,
        ModelMode::KernelLinear => Some(Kernel::Linear),
        ModelMode::KernelGaussian => {
            if !(config.sigma_k > 0.0) {
                return invalid(format!("kernel bandwidth must be positive, got {}", config.sigma_k));
            }
            Some(Kernel::Gaussian { sigma: config.sigma_k })
        }
    })
}

/// Run the alternating solver from `z = 0` and a unit plane. The first
/// sweep is a model step only; each later sweep is a `z`-step followed by a
/// model step.
pub fn train(features: &FeatureMap, labels: &LabelField, config: &TrainConfig) -> Result<(DualModel, SlackState)> {
    train_from(features, labels, config, None)
}

/// [`train`] starting from a given slack state instead of `z = 0` and a
/// unit plane.
pub fn train_from(
    features: &FeatureMap,
    labels: &LabelField,
    config: &TrainConfig,
    initial: Option<&SlackState>,
) -> Result<(DualModel, SlackState)> {
    if let Some(state) = initial {
        if state.width != labels.width() || state.height != labels.height() {
            return invalid("initial slack state does not match the label grid");
        }
    }
    if config.iterations == 0 {
        return invalid("at least one training iteration is required");
    }
    check_c(config.c)?;
    if features.width() != labels.width() || features.height() != labels.height() {
        return invalid(format!(
            "features {}x{} do not match labels {}x{}",
            features.width(),
            features.height(),
            labels.width(),
            labels.height()
        ));
    }
    let x_hat = spectral::dft2(features)?;
    let kernel = kernel_for(config)?;
    // Every sweep only needs the training response `auto * g`, so the solver
    // runs on single planes and the multi-channel filter is built once.
    let auto: Vec<Complex64> = match kernel {
        Some(k) => k.correlate(&x_hat, &x_hat)?.as_slice().to_vec(),
        None => {
            let mut s = vec![Complex64::new(0.0, 0.0); x_hat.plane_len()];
            for d in 0..x_hat.channels() {
                for (acc, x) in s.iter_mut().zip(x_hat.channel(d)) {
                    acc.re += x.norm_sqr();
                }
            }
            s
        }
    };
    let lambda = 1.0 / (2.0 * config.c);
    if kernel.is_some() {
        if let Some(a) = auto.iter().find(|a| (**a + lambda).norm() < DENOMINATOR_FLOOR) {
            return Err(Error::NumericalDegeneracy(format!(
                "dual denominator magnitude {:.3e} below floor",
                (a + lambda).norm()
            )));
        }
    }
    let (w, h) = (x_hat.width(), x_hat.height());
    let solve = |state: &SlackState| -> Result<Vec<Complex64>> {
        let u_hat = target_spectrum(state)?;
        Ok(u_hat
            .as_slice()
            .iter()
            .zip(&auto)
            .map(|(u, a)| u / (a + lambda))
            .collect())
    };

    let mut state = initial.cloned().unwrap_or_else(|| SlackState::initial(labels));
    let mut g = solve(&state)?;
    for _ in 1..config.iterations {
        let response: Vec<Complex64> = auto.iter().zip(&g).map(|(a, v)| a * v).collect();
        let r = spectral::idft2_surface(&SpectralMap::from_vec(w, h, 1, response)?)?;
        let u0 = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z = r
            .iter()
            .zip(labels.upsilon())
            .map(|(rv, ups)| (u0 - rv - ups).max(0.0))
            .collect();
        state = SlackState::from_parts(labels, z, u0);
        g = solve(&state)?;
    }
    let coefficients = match kernel {
        Some(kernel) => Coefficients::Dual {
            alpha: SpectralMap::from_vec(w, h, 1, g)?,
            kernel,
        },
        None => {
            let mut filter = SpectralMap::zeros(w, h, x_hat.channels());
            for d in 0..x_hat.channels() {
                for ((f, x), gv) in filter.channel_mut(d).iter_mut().zip(x_hat.channel(d)).zip(&g) {
                    *f = x.conj() * gv;
                }
            }
            Coefficients::Primal(filter)
        }
    };
    let model = DualModel {
        coefficients,
        template_hat: x_hat,
        c: config.c,
    };
    Ok((model, state))
}

/// Convex combination of two models' coefficients and templates.
pub fn interpolate_model(old: &DualModel, new: &DualModel, eta: f64) -> Result<DualModel> {
    if !(0.0..=1.0).contains(&eta) {
        return invalid(format!("interpolation rate must lie in [0, 1], got {eta}"));
    }
    let coefficients = match (&old.coefficients, &new.coefficients) {
        (Coefficients::Primal(a), Coefficients::Primal(b)) => Coefficients::Primal(SpectralMap::lerp(a, b, eta)?),
        (Coefficients::Dual { alpha: a, kernel: ka }, Coefficients::Dual { alpha: b, kernel: kb }) if ka == kb => {
            Coefficients::Dual {
                alpha: SpectralMap::lerp(a, b, eta)?,
                kernel: *ka,
            }
        }
        _ => return invalid("cannot interpolate models of different modes"),
    };
    Ok(DualModel {
        coefficients,
        template_hat: SpectralMap::lerp(&old.template_hat, &new.template_hat, eta)?,
        c: new.c,
    })
}

/// Objective value `1/2 |w|^2 + C |r - (u0 - upsilon - z)|^2` for a model
/// evaluated on its training map, with the plane height supplied by the
/// caller (frozen across a sweep).
pub fn objective(
    model: &DualModel,
    features_hat: &SpectralMap,
    labels: &LabelField,
    z: &[f64],
    u0_height: f64,
) -> Result<f64> {
    let r = model.respond_spatial(features_hat)?;
    if r.len() != z.len() {
        return invalid("slack length does not match the response");
    }
    let residual: f64 = r
        .iter()
        .zip(labels.upsilon())
        .zip(z)
        .map(|((rv, ups), zv)| {
            let e = rv - (u0_height - ups - zv);
            e * e
        })
        .sum();
    Ok(model.half_squared_norm()? + model.c * residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use crate::labels::build_labels;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, d: usize) -> FeatureMap {
        let data = (0..w * h * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        FeatureMap::from_vec(w, h, d, data).unwrap()
    }

    fn cfg(mode: ModelMode, c: f64, iterations: usize) -> TrainConfig {
        TrainConfig {
            mode,
            c,
            sigma_k: 0.5,
            iterations,
        }
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
            .0
    }

    #[test]
    fn zero_iterations_rejected() {
        let labels = build_labels(4, 4, (2.0, 2.0), 0.3).unwrap();
        let f = FeatureMap::zeros(4, 4, 1);
        assert!(train(&f, &labels, &cfg(ModelMode::Linear, 1.0, 0)).is_err());
    }

    #[test]
    fn invalid_c_rejected() {
        let labels = build_labels(4, 4, (2.0, 2.0), 0.3).unwrap();
        let state = SlackState::initial(&labels);
        let f = FeatureMap::zeros(4, 4, 1);
        assert!(model_step_linear(&f, &state, 0.0).is_err());
        assert!(model_step_kernel(&f, &state, -1.0, Kernel::Linear).is_err());
    }

    #[test]
    fn zero_target_gives_zero_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let labels = build_labels(5, 4, (2.0, 2.0), 0.3).unwrap();
        // u0 = 0 and z = -upsilon is not admissible, so build u = 0 through
        // z = 1 - upsilon with a unit plane.
        let z: Vec<f64> = labels.upsilon().iter().map(|u| 1.0 - u).collect();
        let state = SlackState::with_slack(&labels, z, 1.0).unwrap();
        assert!(state.target().iter().all(|v| v.abs() < 1e-15));
        let f = random_map(&mut rng, 5, 4, 2);
        let lin = model_step_linear(&f, &state, 10.0).unwrap();
        let Coefficients::Primal(w) = lin.coefficients() else {
            panic!()
        };
        assert!(w.as_slice().iter().all(|c| c.norm() < 1e-12));
        let ker = model_step_kernel(&f, &state, 10.0, Kernel::Gaussian { sigma: 0.5 }).unwrap();
        let Coefficients::Dual { alpha, .. } = ker.coefficients() else {
            panic!()
        };
        assert!(alpha.as_slice().iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn impulse_feature_closed_form() {
        let labels = build_labels(4, 1, (1.0, 1.0), 0.6).unwrap();
        let z = vec![0.0, 0.1, 0.3, 0.0];
        let state = SlackState::with_slack(&labels, z, 1.0).unwrap();
        let mut f = FeatureMap::zeros(4, 1, 1);
        f.set(0, 0, 0, 1.0);
        let c = 2.0;
        let model = model_step_linear(&f, &state, c).unwrap();
        let w = model.spatial_weights().unwrap().unwrap();
        // the impulse sample for shift t sits at -t, so w is the mirrored target
        let u = state.target();
        for p in 0..4 {
            let expect = u[(4 - p) % 4] / (1.0 + 1.0 / (2.0 * c));
            assert!(
                (w.as_slice()[p] - expect).abs() < 1e-12,
                "{p}: {} vs {expect}",
                w.as_slice()[p]
            );
        }
    }

    #[test]
    fn one_iteration_self_response_peaks_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let labels = build_labels(9, 7, (3.0, 3.0), 0.3).unwrap();
        let f = random_map(&mut rng, 9, 7, 3);
        for mode in [ModelMode::Linear, ModelMode::KernelLinear, ModelMode::KernelGaussian] {
            let (model, state) = train(&f, &labels, &cfg(mode, 100.0, 1)).unwrap();
            assert_eq!(state.u0_height(), 1.0);
            assert!(state.z().iter().all(|&v| v == 0.0));
            let r = model.respond_spatial(&spectral::dft2(&f).unwrap()).unwrap();
            assert_eq!(argmax(&r), 0, "{mode}");
        }
    }

    #[test]
    fn large_c_reproduces_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let labels = build_labels(8, 1, (2.0, 1.0), 0.5).unwrap();
        let f = random_map(&mut rng, 8, 1, 1);
        let (model, state) = train(&f, &labels, &cfg(ModelMode::Linear, 1e12, 1)).unwrap();
        let r = model.respond_spatial(&spectral::dft2(&f).unwrap()).unwrap();
        assert!((r[0] - state.target()[0]).abs() < 1e-3);
        let dense_w = dense::primal_solve(&f, state.target(), 1e12);
        let dense_r = dense::primal_response(&dense_w, &f);
        assert!((dense_r[0] - state.target()[0]).abs() < 1e-3);
    }

    #[test]
    fn zero_model_gives_zero_slack() {
        let labels = build_labels(6, 5, (2.0, 2.0), 0.4).unwrap();
        let model = DualModel::zero(ModelMode::Linear, 6, 5, 2, 1.0, 0.5);
        let f = FeatureMap::zeros(6, 5, 2);
        let s = z_step(&model, &SlackState::initial(&labels), &labels, &f).unwrap();
        assert_eq!(s.u0_height(), 0.0);
        assert!(s.z().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn z_step_origin_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let labels = build_labels(6, 4, (2.0, 2.0), 0.4).unwrap();
        let f = random_map(&mut rng, 6, 4, 2);
        let (model, _) = train(&f, &labels, &cfg(ModelMode::KernelLinear, 3.0, 2)).unwrap();
        let s = z_step(&model, &SlackState::initial(&labels), &labels, &f).unwrap();
        let r = model.respond_spatial(&spectral::dft2(&f).unwrap()).unwrap();
        assert!((s.z()[0] - (s.u0_height() - r[0])).abs() < 1e-12);
        assert!(s.z()[0] >= 0.0);
        if r[0] < s.u0_height() {
            assert!((s.target()[0] - r[0]).abs() < 1e-12);
        }
        assert!(s.z().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn interpolation_endpoints_and_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let labels = build_labels(5, 5, (2.0, 2.0), 0.3).unwrap();
        let a = train(
            &random_map(&mut rng, 5, 5, 2),
            &labels,
            &cfg(ModelMode::KernelLinear, 10.0, 2),
        )
        .unwrap()
        .0;
        let b = train(
            &random_map(&mut rng, 5, 5, 2),
            &labels,
            &cfg(ModelMode::KernelLinear, 10.0, 2),
        )
        .unwrap()
        .0;
        assert_eq!(interpolate_model(&a, &b, 0.0).unwrap(), a);
        assert_eq!(interpolate_model(&a, &b, 1.0).unwrap(), b);

        let ones = SpectralMap::from_vec(2, 2, 1, vec![Complex64::new(1.0, 0.0); 4]).unwrap();
        let old = DualModel {
            coefficients: Coefficients::Dual {
                alpha: ones.clone(),
                kernel: Kernel::Linear,
            },
            template_hat: ones.clone(),
            c: 1.0,
        };
        let new = DualModel::zero(ModelMode::KernelLinear, 2, 2, 1, 1.0, 0.5);
        let mixed = interpolate_model(&old, &new, 0.015).unwrap();
        let Coefficients::Dual { alpha, .. } = mixed.coefficients() else {
            panic!()
        };
        for v in alpha.as_slice() {
            assert!((v.re - 0.985).abs() < 1e-15);
        }

        let lin = DualModel::zero(ModelMode::Linear, 5, 5, 2, 1.0, 0.5);
        assert!(interpolate_model(&a, &lin, 0.5).is_err());
        assert!(interpolate_model(&a, &b, 1.5).is_err());
    }

    #[test]
    fn kernel_linear_matches_primal_single_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..20 {
            let (w, h) = (rng.gen_range(2..9), rng.gen_range(1..9));
            let labels = build_labels(w, h, (1.5, 1.0), 0.5).unwrap();
            let f = random_map(&mut rng, w, h, 1);
            let z = random_map(&mut rng, w, h, 1);
            let (lin, _) = train(&f, &labels, &cfg(ModelMode::Linear, 5.0, 3)).unwrap();
            let (ker, _) = train(&f, &labels, &cfg(ModelMode::KernelLinear, 5.0, 3)).unwrap();
            let zh = spectral::dft2(&z).unwrap();
            let a = lin.respond_spatial(&zh).unwrap();
            let b = ker.respond_spatial(&zh).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gaussian_dual_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let labels = build_labels(4, 1, (1.0, 1.0), 0.7).unwrap();
        let f = random_map(&mut rng, 4, 1, 1);
        let state = SlackState::initial(&labels);
        let kernel = Kernel::Gaussian { sigma: 0.8 };
        let model = model_step_kernel(&f, &state, 3.0, kernel).unwrap();
        let alpha = model.spatial_alpha().unwrap().unwrap();
        let dense_alpha = dense::dual_solve(&dense::kernel_matrix(&f, kernel), state.target(), 3.0);
        for (a, b) in alpha.iter().zip(&dense_alpha) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_step_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let labels = build_labels(8, 1, (2.0, 1.0), 0.4).unwrap();
        let f = random_map(&mut rng, 8, 1, 1);
        let state = SlackState::initial(&labels);
        let model = model_step_linear(&f, &state, 7.0).unwrap();
        let w = model.spatial_weights().unwrap().unwrap();
        let dense_w = dense::primal_solve(&f, state.target(), 7.0);
        for (a, b) in w.as_slice().iter().zip(dense_w.as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn train_matches_explicit_sweeps() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for _ in 0..30 {
            let (w, h, d) = (rng.gen_range(2..9), rng.gen_range(1..9), rng.gen_range(1..4));
            let labels = build_labels(w, h, (1.5, 1.0), 0.5).unwrap();
            let f = random_map(&mut rng, w, h, d);
            let z = random_map(&mut rng, w, h, d);
            let zh = spectral::dft2(&z).unwrap();
            let c = rng.gen_range(0.5..20.0);
            let start = SlackState::with_slack(&labels, vec![0.1; w * h], 0.9).unwrap();
            for mode in [ModelMode::Linear, ModelMode::KernelLinear, ModelMode::KernelGaussian] {
                let config = cfg(mode, c, 4);
                let step = |s: &SlackState| match kernel_for(&config).unwrap() {
                    Some(k) => model_step_kernel(&f, s, c, k).unwrap(),
                    None => model_step_linear(&f, s, c).unwrap(),
                };
                for initial in [None, Some(&start)] {
                    let (fast, fast_state) = train_from(&f, &labels, &config, initial).unwrap();
                    let mut state = initial.cloned().unwrap_or_else(|| SlackState::initial(&labels));
                    let mut model = step(&state);
                    for _ in 1..4 {
                        state = z_step(&model, &state, &labels, &f).unwrap();
                        model = step(&state);
                    }
                    let a = fast.respond_spatial(&zh).unwrap();
                    let b = model.respond_spatial(&zh).unwrap();
                    for (x, y) in a.iter().zip(&b) {
                        assert!((x - y).abs() < 1e-8, "{mode}");
                    }
                    for (x, y) in fast_state.z().iter().zip(state.z()) {
                        assert!((x - y).abs() < 1e-8, "{mode}");
                    }
                }
            }
        }
    }

    #[test]
    fn objective_non_increasing_per_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let (w, h, d) = (rng.gen_range(1..9), rng.gen_range(1..9), rng.gen_range(1..4));
            if w * h < 2 {
                continue;
            }
            let labels = build_labels(w, h, (1.0, 1.0), 0.6).unwrap();
            let f = random_map(&mut rng, w, h, d);
            let xh = spectral::dft2(&f).unwrap();
            let c = rng.gen_range(0.1..50.0);
            for mode in [ModelMode::Linear, ModelMode::KernelLinear, ModelMode::KernelGaussian] {
                let config = cfg(mode, c, 1);
                let (mut model, mut state) = train(&f, &labels, &config).unwrap();
                for _ in 0..4 {
                    let next_state = z_step(&model, &state, &labels, &f).unwrap();
                    let u0 = next_state.u0_height();
                    let before = objective(&model, &xh, &labels, state.z(), u0).unwrap();
                    let mid = objective(&model, &xh, &labels, next_state.z(), u0).unwrap();
                    let kernel = kernel_for(&config).unwrap();
                    let next_model = match kernel {
                        Some(k) => model_step_kernel(&f, &next_state, c, k).unwrap(),
                        None => model_step_linear(&f, &next_state, c).unwrap(),
                    };
                    let after = objective(&next_model, &xh, &labels, next_state.z(), u0).unwrap();
                    assert!(mid <= before + 1e-9, "{mode}: z-step {before} -> {mid}");
                    assert!(after <= mid + 1e-9, "{mode}: model step {mid} -> {after}");
                    model = next_model;
                    state = next_state;
                }
            }
        }
    }
}
