//! Closed-form geometry of focal stacks and their spectra.
//!
//! A scene point seen by a view at physical offset `p` traces the line
//! `x = x0 + (d* - f) * p` through the `(f, x)` plane. Measured in layer
//! indices that is a slope of `1 / (delta_alpha * p)` layers per pixel, and the
//! bundle of all views forms a cone of apex angle
//! `2 * atan(delta_alpha * span / 2)` where `span` is the physical distance
//! between the outermost views. None of this depends on `d*`.
//!
//! In the spectrum each view's energy concentrates on the line through DC
//! perpendicular to its spatial line, `omega_f = p * omega_x`, with physical
//! bin spacings `1 / (N_C * delta_alpha)` along `omega_f` and `1 / W` along
//! `omega_x`. In centered bin indices `(k_f, k_x)` that is
//! `k_f = p * N_C * delta_alpha / W * k_x`; the reference view (`p = 0`)
//! maps to the `omega_f = 0` row.

use std::f64::consts::FRAC_PI_2;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::spectrum::Fss;

/// Default DC block excluded from energy measurements.
pub const DC_PATCH: usize = 5;

/// Slope of a spatial line in `(layer index, x)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slope {
    Finite(f64),
    /// The reference view: `x` is constant across layers.
    Vertical,
}

impl Slope {
    pub fn value(self) -> Option<f64> {
        match self {
            Slope::Finite(s) => Some(s),
            Slope::Vertical => None,
        }
    }
}

/// `2 * atan(delta_alpha * (N_u - 1) / 2)` for unit baseline.
pub fn apex_angle(delta_alpha: f64, n_u: usize) -> f64 {
    apex_angle_for_span(delta_alpha, n_u.saturating_sub(1) as f64)
}

/// Apex angle for views spanning `span` physical units.
pub fn apex_angle_for_span(delta_alpha: f64, span: f64) -> f64 {
    2.0 * (0.5 * delta_alpha * span).atan()
}

/// Apex angle of a continuously sampled focal axis.
pub fn apex_angle_continuous(n_u: usize) -> f64 {
    apex_angle(1.0, n_u)
}

/// `1 / (delta_alpha * (u_i - u_ref))`.
pub fn spatial_slope(delta_alpha: f64, u_i: usize, u_ref: usize) -> Slope {
    spatial_slope_for_offset(delta_alpha, u_i as f64 - u_ref as f64)
}

pub fn spatial_slope_for_offset(delta_alpha: f64, offset: f64) -> Slope {
    if offset == 0.0 {
        Slope::Vertical
    } else {
        Slope::Finite(1.0 / (delta_alpha * offset))
    }
}

pub fn spatial_slope_continuous(offset: f64) -> Slope {
    spatial_slope_for_offset(1.0, offset)
}

/// A view's spectral line through DC, `omega_f = view_offset * omega_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub view_offset: f64,
}

impl SpectralLine {
    /// Slope `dk_f / dk_x` in centered bin indices.
    pub fn bin_slope(&self, spacing: BinSpacing) -> f64 {
        self.view_offset * spacing.x / spacing.f
    }
}

/// Physical frequency step per bin along each axis (cycles per unit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpacing {
    pub f: f64,
    pub x: f64,
}

impl BinSpacing {
    pub fn new(n_layers: usize, width: usize, delta_alpha: f64) -> Self {
        Self {
            f: 1.0 / (n_layers as f64 * delta_alpha),
            x: 1.0 / width as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeModel {
    pub delta_alpha: f64,
    pub n_u: usize,
    pub u_ref: usize,
    pub baseline_unit: f64,
    /// `(u_i - u_ref) * baseline_unit`, one per view.
    pub view_offsets: Vec<f64>,
    pub spatial_slopes: Vec<Slope>,
    pub spectral_lines: Vec<SpectralLine>,
    pub apex_angle: f64,
}

impl ConeModel {
    pub fn new(delta_alpha: f64, n_u: usize, u_ref: usize, baseline_unit: f64) -> Result<Self> {
        if n_u == 0 || u_ref >= n_u {
            return Err(Error::invalid(format!("bad view layout: N_u = {n_u}, u_ref = {u_ref}")));
        }
        let offsets = (0..n_u)
            .map(|u| (u as f64 - u_ref as f64) * baseline_unit)
            .collect();
        Self::from_offsets(delta_alpha, offsets, u_ref, baseline_unit)
    }

    /// Model for an arbitrary set of physical view offsets.
    pub fn from_offsets(
        delta_alpha: f64,
        view_offsets: Vec<f64>,
        u_ref: usize,
        baseline_unit: f64,
    ) -> Result<Self> {
        if !(delta_alpha.is_finite() && delta_alpha > 0.0) {
            return Err(Error::invalid("delta_alpha must be > 0"));
        }
        if view_offsets.is_empty() {
            return Err(Error::invalid("need at least one view"));
        }
        let lo = view_offsets.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = view_offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            delta_alpha,
            n_u: view_offsets.len(),
            u_ref,
            baseline_unit,
            spatial_slopes: view_offsets
                .iter()
                .map(|&p| spatial_slope_for_offset(delta_alpha, p))
                .collect(),
            spectral_lines: view_offsets
                .iter()
                .map(|&p| SpectralLine { view_offset: p })
                .collect(),
            apex_angle: apex_angle_for_span(delta_alpha, hi - lo),
            view_offsets,
        })
    }

    /// Model after inserting `m` evenly spaced virtual views in every gap.
    pub fn with_inserted(&self, m: usize) -> Result<Self> {
        let mut offsets = Vec::new();
        let mut sorted = self.view_offsets.clone();
        sorted.sort_by(f64::total_cmp);
        for pair in sorted.windows(2) {
            let step = (pair[1] - pair[0]) / (m + 1) as f64;
            for k in 0..=m {
                offsets.push(pair[0] + k as f64 * step);
            }
        }
        offsets.push(*sorted.last().expect("non-empty"));
        Self::from_offsets(
            self.delta_alpha,
            offsets,
            self.u_ref * (m + 1),
            self.baseline_unit / (m + 1) as f64,
        )
    }

    pub fn max_offset(&self) -> f64 {
        self.view_offsets.iter().fold(0.0, |a, p| a.max(p.abs()))
    }

    pub fn outer_lines(&self) -> (SpectralLine, SpectralLine) {
        let lo = self.view_offsets.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.view_offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (SpectralLine { view_offset: lo }, SpectralLine { view_offset: hi })
    }
}

/// Rasterized spectral line: every bin within half a bin of the ideal line.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterLine {
    pub line: SpectralLine,
    pub bin_slope: f64,
    /// `(row, col)` in the centered layout.
    pub bins: Vec<(usize, usize)>,
}

fn centered(i: usize, center: usize) -> f64 {
    i as f64 - center as f64
}

fn line_distance(kf: f64, kx: f64, slope: f64) -> f64 {
    (kf - slope * kx).abs() / (1.0 + slope * slope).sqrt()
}

pub fn predict_spectral_lines(
    model: &ConeModel,
    dims: (usize, usize),
    spacing: BinSpacing,
) -> Vec<RasterLine> {
    let (n, w) = dims;
    let (i0, j0) = (n / 2, w / 2);
    model
        .spectral_lines
        .iter()
        .map(|line| {
            let m = line.bin_slope(spacing);
            let mut bins = Vec::new();
            for i in 0..n {
                for j in 0..w {
                    if line_distance(centered(i, i0), centered(j, j0), m) <= 0.5 {
                        bins.push((i, j));
                    }
                }
            }
            RasterLine {
                line: *line,
                bin_slope: m,
                bins,
            }
        })
        .collect()
}

/// Chebyshev dilation by `radius` bins.
pub fn dilate(mask: &Array2<bool>, radius: usize) -> Array2<bool> {
    if radius == 0 {
        return mask.clone();
    }
    let (n, w) = mask.dim();
    let mut out = Array2::from_elem((n, w), false);
    for ((i, j), &m) in mask.indexed_iter() {
        if !m {
            continue;
        }
        for a in i.saturating_sub(radius)..=(i + radius).min(n - 1) {
            for b in j.saturating_sub(radius)..=(j + radius).min(w - 1) {
                out[[a, b]] = true;
            }
        }
    }
    out
}

/// Union of the rasterized view lines, dilated.
pub fn line_mask(model: &ConeModel, dims: (usize, usize), spacing: BinSpacing, dilation: usize) -> Array2<bool> {
    let mut mask = Array2::from_elem(dims, false);
    for line in predict_spectral_lines(model, dims, spacing) {
        for (i, j) in line.bins {
            mask[[i, j]] = true;
        }
    }
    dilate(&mask, dilation)
}

/// Double wedge between the outermost view lines, dilated.
pub fn support_mask(model: &ConeModel, dims: (usize, usize), spacing: BinSpacing, dilation: usize) -> Array2<bool> {
    let (n, w) = dims;
    let (i0, j0) = (n / 2, w / 2);
    let (lo, hi) = model.outer_lines();
    let (m_lo, m_hi) = (lo.bin_slope(spacing), hi.bin_slope(spacing));
    let mask = Array2::from_shape_fn(dims, |(i, j)| {
        let (kf, kx) = (centered(i, i0), centered(j, j0));
        let inside = (kf - m_lo * kx) * (kf - m_hi * kx) <= 0.0;
        inside || line_distance(kf, kx, m_lo) <= 0.5 || line_distance(kf, kx, m_hi) <= 0.5
    });
    dilate(&mask, dilation)
}

fn dc_block(dims: (usize, usize), patch: usize) -> impl Fn(usize, usize) -> bool {
    let (i0, j0) = (dims.0 / 2, dims.1 / 2);
    let r = patch / 2;
    move |i, j| i.abs_diff(i0) <= r && j.abs_diff(j0) <= r
}

/// Fraction of non-DC spectral energy that falls inside `mask`.
pub fn energy_concentration(fss: &Fss, mask: &Array2<bool>) -> Result<f64> {
    if mask.dim() != fss.dims() {
        return Err(Error::dims(format!(
            "mask {:?} vs spectrum {:?}",
            mask.dim(),
            fss.dims()
        )));
    }
    let in_dc = dc_block(fss.dims(), DC_PATCH);
    let (mut inside, mut total) = (0.0, 0.0);
    for ((i, j, _), z) in fss.data().indexed_iter() {
        if in_dc(i, j) {
            continue;
        }
        let e = z.norm_sqr();
        total += e;
        if mask[[i, j]] {
            inside += e;
        }
    }
    if total <= 0.0 {
        return Err(Error::Numerical(
            "spectrum has no energy outside the DC block".into(),
        ));
    }
    Ok(inside / total)
}

/// A peak of the angular energy profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectedLine {
    /// Direction angle in centered bin coordinates, `atan(dk_f / dk_x)`.
    pub angle: f64,
    /// Physical view offset the direction corresponds to.
    pub view_offset: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub angle_step: f64,
    /// Radius (bins) around DC left out of each ray sum.
    pub inner_radius: f64,
    /// Peaks below this fraction of the strongest are ignored.
    pub rel_threshold: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            angle_step: 0.05f64.to_radians(),
            inner_radius: 8.0,
            rel_threshold: 0.1,
        }
    }
}

fn bilinear(power: &Array2<f64>, y: f64, x: f64) -> f64 {
    let (n, w) = power.dim();
    if y < 0.0 || x < 0.0 || y > (n - 1) as f64 || x > (w - 1) as f64 {
        return 0.0;
    }
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (ty, tx) = (y - y0 as f64, x - x0 as f64);
    let (y1, x1) = ((y0 + 1).min(n - 1), (x0 + 1).min(w - 1));
    (1.0 - ty) * ((1.0 - tx) * power[[y0, x0]] + tx * power[[y0, x1]])
        + ty * ((1.0 - tx) * power[[y1, x0]] + tx * power[[y1, x1]])
}

/// Energy along each direction through DC, for angles in `(-pi/2, pi/2]`.
pub fn angular_profile(fss: &Fss, opts: &SweepOptions) -> (Array1<f64>, Array1<f64>) {
    let (n, w) = fss.dims();
    let (i0f, j0f) = ((n / 2) as f64, (w / 2) as f64);
    let power = Array2::from_shape_fn((n, w), |(i, j)| {
        (0..fss.channels())
            .map(|c| fss.data()[[i, j, c]].norm_sqr())
            .sum::<f64>()
    });
    let steps = (std::f64::consts::PI / opts.angle_step).round() as usize;
    let reach = ((n * n + w * w) as f64).sqrt() / 2.0;
    let angles = Array1::from_shape_fn(steps, |k| -FRAC_PI_2 + (k + 1) as f64 * opts.angle_step);
    let profile = angles.mapv(|a: f64| {
        let (s, c) = a.sin_cos();
        let mut sum = 0.0;
        let mut t = opts.inner_radius;
        while t <= reach {
            sum += bilinear(&power, i0f + t * s, j0f + t * c);
            sum += bilinear(&power, i0f - t * s, j0f - t * c);
            t += 0.5;
        }
        sum
    });
    (angles, profile)
}

/// Detect spectral lines as peaks of the angular energy profile.
pub fn detect_spectral_lines(fss: &Fss, delta_alpha: f64, opts: &SweepOptions) -> Vec<DetectedLine> {
    let (n, w) = fss.dims();
    let spacing = BinSpacing::new(n, w, delta_alpha);
    let (angles, profile) = angular_profile(fss, opts);
    let len = profile.len();
    let max = profile.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    for k in 0..len {
        let e = profile[k];
        let prev = profile[(k + len - 1) % len];
        let next = profile[(k + 1) % len];
        if e >= opts.rel_threshold * max && e > prev && e >= next {
            let angle = angles[k];
            peaks.push(DetectedLine {
                angle,
                view_offset: angle.tan() * spacing.f / spacing.x,
                energy: e,
            });
        }
    }
    peaks
}
