//! Fourier-domain plumbing: per-channel 2-D DFTs, element-wise complex
//! arithmetic and the kernel correlation operators used by training and
//! detection.
//!
//! Convention: the forward transform is unnormalized, the inverse carries
//! the `1/(W*H)` factor. Cross-correlation is defined as
//! `corr(a, b)[t] = sum_p a[p] * b[p + t]` (indices wrapped), whose transform
//! is `conj(A) * B`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::feature_map::FeatureMap;

/// Relative tolerance on the imaginary residual of an inverse transform that
/// is expected to be real.
pub const REAL_RESIDUAL_TOL: f64 = 1e-8;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// A `W x H x D` complex grid with the same layout as [`FeatureMap`].
/// Single-channel instances serve as spectral surfaces (kernel vectors,
/// dual coefficients, label spectra).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<Complex64>,
}

impl SpectralMap {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![Complex64::new(0.0, 0.0); width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<Complex64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return invalid("spectral map dimensions must be positive");
        }
        if data.len() != width * height * channels {
            return invalid("spectral buffer length does not match its shape");
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn same_shape(&self, other: &SpectralMap) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn same_plane(&self, other: &SpectralMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, d: usize) -> Complex64 {
        self.data[d * self.plane_len() + y * self.width + x]
    }

    pub fn channel(&self, d: usize) -> &[Complex64] {
        let n = self.plane_len();
        &self.data[d * n..(d + 1) * n]
    }

    pub fn channel_mut(&mut self, d: usize) -> &mut [Complex64] {
        let n = self.plane_len();
        &mut self.data[d * n..(d + 1) * n]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Squared Frobenius norm of the spatial-domain signal (Parseval).
    pub fn spatial_energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.plane_len() as f64
    }

    pub fn scaled(&self, s: f64) -> SpectralMap {
        SpectralMap {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|c| c * s).collect(),
        }
    }

    /// `(1 - eta) * old + eta * new`, element-wise.
    pub fn lerp(old: &SpectralMap, new: &SpectralMap, eta: f64) -> Result<SpectralMap> {
        if !old.same_shape(new) {
            return invalid("interpolated spectra differ in shape");
        }
        let data = old
            .data
            .iter()
            .zip(&new.data)
            .map(|(a, b)| a * (1.0 - eta) + b * eta)
            .collect();
        Ok(SpectralMap {
            width: old.width,
            height: old.height,
            channels: old.channels,
            data,
        })
    }

    /// Largest deviation from conjugate symmetry, relative to the largest
    /// coefficient magnitude.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let (w, h) = (self.width, self.height);
        let scale = self.data.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        let mut worst = 0.0f64;
        for d in 0..self.channels {
            for y in 0..h {
                for x in 0..w {
                    let a = self.get(x, y, d);
                    let b = self.get((w - x) % w, (h - y) % h, d);
                    worst = worst.max((a - b.conj()).norm());
                }
            }
        }
        worst / scale
    }
}

#[derive(Default)]
struct Buffers {
    columns: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

fn run(fft: &dyn Fft<f64>, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
    scratch.resize(fft.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
    fft.process_with_scratch(data, scratch);
}

fn transform_plane(plane: &mut [Complex64], w: usize, h: usize, direction: FftDirection, buf: &mut Buffers) {
    if w > 1 {
        run(plan(w, direction).as_ref(), plane, &mut buf.scratch);
    }
    if h > 1 {
        let fft = plan(h, direction);
        let col_buf = &mut buf.columns;
        col_buf.resize(w * h, Complex64::new(0.0, 0.0));
        for y in 0..h {
            for x in 0..w {
                col_buf[x * h + y] = plane[y * w + x];
            }
        }
        run(fft.as_ref(), col_buf, &mut buf.scratch);
        for y in 0..h {
            for x in 0..w {
                plane[y * w + x] = col_buf[x * h + y];
            }
        }
    }
}

/// Per-channel 2-D DFT of a real map (unnormalized).
pub fn dft2(map: &FeatureMap) -> Result<SpectralMap> {
    if !map.is_finite() {
        return invalid("feature map contains non-finite entries");
    }
    let (w, h, d) = (map.width(), map.height(), map.channels());
    let mut data: Vec<Complex64> = map.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut buf = Buffers::default();
    for plane in data.chunks_mut(w * h) {
        transform_plane(plane, w, h, FftDirection::Forward, &mut buf);
    }
    SpectralMap::from_vec(w, h, d, data)
}

/// Complex inverse transform including the `1/(W*H)` factor.
pub fn idft2_complex(smap: &SpectralMap) -> Vec<Complex64> {
    let (w, h) = (smap.width, smap.height);
    let norm = 1.0 / (w * h) as f64;
    let mut data = smap.data.clone();
    let mut buf = Buffers::default();
    for plane in data.chunks_mut(w * h) {
        transform_plane(plane, w, h, FftDirection::Inverse, &mut buf);
    }
    for v in data.iter_mut() {
        *v *= norm;
    }
    data
}

fn real_part_checked(values: Vec<Complex64>) -> Result<Vec<f64>> {
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for c in &values {
        max_re = max_re.max(c.re.abs());
        max_im = max_im.max(c.im.abs());
    }
    if !(max_im <= REAL_RESIDUAL_TOL * max_re.max(1.0)) {
        return Err(Error::NumericalConsistency(format!(
            "imaginary residual {max_im:.3e} exceeds tolerance (real magnitude {max_re:.3e})"
        )));
    }
    Ok(values.into_iter().map(|c| c.re).collect())
}

/// Inverse transform back to a real map. Fails when the imaginary residual
/// shows the spectrum did not come from real data.
pub fn idft2(smap: &SpectralMap) -> Result<FeatureMap> {
    let re = real_part_checked(idft2_complex(smap))?;
    FeatureMap::from_vec(smap.width, smap.height, smap.channels, re)
}

/// Real spatial values of a single-channel spectrum.
pub fn idft2_surface(surface: &SpectralMap) -> Result<Vec<f64>> {
    if surface.channels != 1 {
        return invalid("expected a single-channel spectral surface");
    }
    real_part_checked(idft2_complex(surface))
}

/// In-place unnormalized 1-D forward transform.
pub fn fft1(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), FftDirection::Forward).process(buf);
    }
}

/// In-place 1-D inverse transform including the `1/N` factor.
pub fn ifft1(buf: &mut [Complex64]) {
    let n = buf.len();
    if n > 1 {
        plan(n, FftDirection::Inverse).process(buf);
    }
    let norm = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= norm;
    }
}

/// Channel-summed cross-correlation spectrum `sum_d conj(a_d) * b_d`.
pub fn linear_kernel_corr(a: &SpectralMap, b: &SpectralMap) -> Result<SpectralMap> {
    if !a.same_shape(b) {
        return invalid(format!(
            "kernel operands differ in shape: {}x{}x{} vs {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        ));
    }
    let n = a.plane_len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for d in 0..a.channels {
        for ((o, x), y) in out.iter_mut().zip(a.channel(d)).zip(b.channel(d)) {
            *o += x.conj() * y;
        }
    }
    SpectralMap::from_vec(a.width, a.height, 1, out)
}

/// Spectrum of the Gaussian kernel vector
/// `k[t] = exp(-(|a|^2 + |b|^2 - 2 corr(a, b)[t]) / (sigma^2 * W * H * D))`.
pub fn gaussian_kernel_corr(a: &SpectralMap, b: &SpectralMap, sigma_k: f64) -> Result<SpectralMap> {
    if !(sigma_k > 0.0) || !sigma_k.is_finite() {
        return invalid(format!("kernel bandwidth must be positive, got {sigma_k}"));
    }
    let corr = idft2_surface(&linear_kernel_corr(a, b)?)?;
    let energy = a.spatial_energy() + b.spatial_energy();
    let denom = sigma_k * sigma_k * (a.plane_len() * a.channels) as f64;
    let k: Vec<f64> = corr
        .iter()
        .map(|c| (-((energy - 2.0 * c).max(0.0)) / denom).exp())
        .collect();
    dft2(&FeatureMap::from_vec(a.width, a.height, 1, k)?)
}
