//! Focal stack spectra.
//!
//! The transform is the unitary 2D DFT (scaled by `1/sqrt(N_C * W)`), stored
//! centered with the zero-frequency bin at `(N_C / 2, W / 2)`. With this
//! layout the bin at `(i, j)` mirrors to `(2 * i0 - i, 2 * j0 - j)`; for even
//! sizes the first row/column has no in-range mirror and is left out of the
//! symmetry residual.

use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{s, Array2, Array3, Array4, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::refocus::FocalStack;

/// Imaginary/real RMS ratio above which an inverse transform is flagged.
pub const IMAG_RESIDUAL_WARN: f64 = 1e-3;

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

pub(crate) fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().expect("fft planner poisoned");
    if forward {
        p.plan_fft_forward(len)
    } else {
        p.plan_fft_inverse(len)
    }
}

/// Metadata carried alongside a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub d_min: f64,
    pub delta_alpha: f64,
    pub n_u: Option<usize>,
    pub baseline_unit: Option<f64>,
}

/// Centered complex spectrum of one focal stack slice, `[omega_f, omega_x, c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fss {
    pub(crate) data: Array3<Complex64>,
    pub(crate) provenance: Provenance,
}

impl Fss {
    pub fn new(data: Array3<Complex64>, provenance: Provenance) -> Result<Self> {
        let (n, w, c) = data.dim();
        if n == 0 || w == 0 || c == 0 {
            return Err(Error::invalid("spectrum dims must be non-zero"));
        }
        Ok(Self { data, provenance })
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<Complex64> {
        &mut self.data
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    pub fn n_layers(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_layers(), self.width())
    }

    pub fn dc_index(&self) -> (usize, usize) {
        (self.n_layers() / 2, self.width() / 2)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `log(1 + |F|)` summed over channels, for display.
    pub fn log_magnitude(&self) -> Array2<f64> {
        self.data
            .map_axis(Axis(2), |z| z.iter().map(|v| v.norm()).sum::<f64>())
            .mapv(f64::ln_1p)
    }
}

fn transform_axis(data: &mut Array2<Complex64>, axis: usize, forward: bool) {
    let len = data.len_of(Axis(axis));
    let fft = plan(len, forward);
    let mut buf = vec![Complex64::default(); len];
    for mut lane in data.lanes_mut(Axis(axis)) {
        buf.iter_mut().zip(lane.iter()).for_each(|(b, v)| *b = *v);
        fft.process(&mut buf);
        lane.iter_mut().zip(&buf).for_each(|(v, b)| *v = *b);
    }
}

/// Move the zero-frequency bin from `(0, 0)` to `(n / 2, w / 2)`.
pub fn fftshift(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (n, w) = a.dim();
    Array2::from_shape_fn((n, w), |(i, j)| a[[(i + n - n / 2) % n, (j + w - w / 2) % w]])
}

/// Inverse of [`fftshift`].
pub fn ifftshift(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (n, w) = a.dim();
    Array2::from_shape_fn((n, w), |(i, j)| a[[(i + n / 2) % n, (j + w / 2) % w]])
}

/// Centered unitary 2D DFT of a real plane.
pub fn fft2_centered(plane: &Array2<f64>) -> Array2<Complex64> {
    let (n, w) = plane.dim();
    let mut c = plane.mapv(|v| Complex64::new(v, 0.0));
    transform_axis(&mut c, 1, true);
    transform_axis(&mut c, 0, true);
    let scale = 1.0 / ((n * w) as f64).sqrt();
    c.mapv_inplace(|z| z * scale);
    fftshift(&c)
}

/// Inverse of [`fft2_centered`], keeping the complex result.
pub fn ifft2_centered(spec: &Array2<Complex64>) -> Array2<Complex64> {
    let (n, w) = spec.dim();
    let mut c = ifftshift(spec);
    transform_axis(&mut c, 0, false);
    transform_axis(&mut c, 1, false);
    let scale = 1.0 / ((n * w) as f64).sqrt();
    c.mapv_inplace(|z| z * scale);
    c
}

/// Spectrum of a single-row focal stack, per channel.
pub fn fss_forward(slice: &FocalStack) -> Result<Fss> {
    if slice.height() != 1 {
        return Err(Error::dims(format!(
            "expected a single-row focal stack slice, got H = {}",
            slice.height()
        )));
    }
    let (n, _, w, c) = slice.data().dim();
    let mut data = Array3::zeros((n, w, c));
    for ch in 0..c {
        let spec = fft2_centered(&slice.plane(0, ch));
        data.slice_mut(s![.., .., ch]).assign(&spec);
    }
    Ok(Fss {
        data,
        provenance: Provenance {
            d_min: slice.d_min(),
            delta_alpha: slice.delta_alpha(),
            n_u: None,
            baseline_unit: None,
        },
    })
}

/// Real part of the inverse transform plus the discarded imaginary part.
#[derive(Debug, Clone)]
pub struct InverseResult {
    pub stack: FocalStack,
    /// RMS of the imaginary part divided by RMS of the real part (0 if both vanish).
    pub imag_residual: f64,
}

impl InverseResult {
    pub fn symmetry_violated(&self) -> bool {
        self.imag_residual > IMAG_RESIDUAL_WARN
    }
}

pub fn fss_inverse(fss: &Fss) -> Result<InverseResult> {
    let (n, w, c) = fss.data.dim();
    let mut data = Array4::zeros((n, 1, w, c));
    let (mut re2, mut im2) = (0.0, 0.0);
    for ch in 0..c {
        let plane = ifft2_centered(&fss.data.slice(s![.., .., ch]).to_owned());
        for ((k, x), z) in plane.indexed_iter() {
            data[[k, 0, x, ch]] = z.re;
            re2 += z.re * z.re;
            im2 += z.im * z.im;
        }
    }
    let imag_residual = if re2 > 0.0 {
        (im2 / re2).sqrt()
    } else if im2 > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    if imag_residual > IMAG_RESIDUAL_WARN {
        log::warn!("inverse spectrum has imaginary residual {imag_residual:.3e}: conjugate symmetry violated");
    }
    let stack = FocalStack::new(data, fss.provenance.d_min, fss.provenance.delta_alpha, None)?;
    Ok(InverseResult {
        stack,
        imag_residual,
    })
}

/// Mirror of centered bin `i` about `center`, if it lies inside `[0, len)`.
#[inline]
pub fn mirror_index(i: usize, center: usize, len: usize) -> Option<usize> {
    (2 * center).checked_sub(i).filter(|&m| m < len)
}

/// `(1 / (N_C W)) * sum |F(w) - conj(F(-w))|`, averaged over channels.
///
/// Bins without an in-range mirror (row 0 / column 0 for even sizes) are skipped.
pub fn conj_symmetry_residual(fss: &Fss) -> f64 {
    let (n, w, c) = fss.data.dim();
    let (i0, j0) = fss.dc_index();
    let mut total = 0.0;
    for ch in 0..c {
        let mut sum = 0.0;
        for i in 0..n {
            let Some(mi) = mirror_index(i, i0, n) else {
                continue;
            };
            for j in 0..w {
                let Some(mj) = mirror_index(j, j0, w) else {
                    continue;
                };
                sum += (fss.data[[i, j, ch]] - fss.data[[mi, mj, ch]].conj()).norm();
            }
        }
        total += sum / (n * w) as f64;
    }
    total / c as f64
}

/// Copy the `patch x patch` block around DC from `input` into `output`.
pub fn dc_patch_replace(output: &Fss, input: &Fss, patch: usize) -> Result<Fss> {
    if output.data.dim() != input.data.dim() {
        return Err(Error::dims(format!(
            "spectra differ: {:?} vs {:?}",
            output.data.dim(),
            input.data.dim()
        )));
    }
    if patch % 2 == 0 {
        return Err(Error::invalid(format!("DC patch size must be odd, got {patch}")));
    }
    let (n, w) = output.dims();
    let (i0, j0) = output.dc_index();
    let r = patch / 2;
    if patch > n || patch > w || i0 < r || j0 < r || i0 + r >= n || j0 + r >= w {
        return Err(Error::invalid(format!(
            "DC patch {patch} does not fit a {n}x{w} spectrum"
        )));
    }
    let mut out = output.clone();
    let block = s![i0 - r..=i0 + r, j0 - r..=j0 + r, ..];
    out.data.slice_mut(block).assign(&input.data.slice(block));
    Ok(out)
}
