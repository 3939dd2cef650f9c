//! Shear-and-integrate refocusing.
//!
//! A layer focused at disparity `f` averages `E(u, x + f * offset(u))` over
//! views, sampling fractional positions by linear interpolation. A sample is
//! valid when its source position lies inside `[0, W - 1]`. Layers are
//! normalized by view count so intensities stay in the input range.

use ndarray::{s, Array1, Array2, Array3, Array4, ArrayView3, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lightfield::{Epi, LightField3D, LightField4D};

const EDGE_EPS: f64 = 1e-9;

/// How samples falling outside the frame are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Average over valid samples only.
    #[default]
    Renormalize,
    /// Invalid samples count as zero and the sum is divided by the view count.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefocusConfig {
    pub d_min: f64,
    pub d_max: f64,
    pub delta_alpha: f64,
    #[serde(default)]
    pub boundary_policy: BoundaryPolicy,
}

impl Default for RefocusConfig {
    /// 199 layers over `[-1.00, 0.98]` with step 0.01.
    fn default() -> Self {
        Self {
            d_min: -1.0,
            d_max: 0.98,
            delta_alpha: 0.01,
            boundary_policy: BoundaryPolicy::Renormalize,
        }
    }
}

impl RefocusConfig {
    pub fn new(d_min: f64, d_max: f64, delta_alpha: f64) -> Result<Self> {
        let cfg = Self {
            d_min,
            d_max,
            delta_alpha,
            boundary_policy: BoundaryPolicy::Renormalize,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `n` layers starting at `d_min`.
    pub fn with_layers(d_min: f64, delta_alpha: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("layer count must be >= 1"));
        }
        Self::new(d_min, d_min + (n - 1) as f64 * delta_alpha, delta_alpha)
    }

    pub fn with_policy(mut self, policy: BoundaryPolicy) -> Self {
        self.boundary_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_alpha.is_finite() && self.delta_alpha > 0.0) {
            return Err(Error::invalid(format!(
                "delta_alpha must be > 0, got {}",
                self.delta_alpha
            )));
        }
        if !(self.d_min.is_finite() && self.d_max.is_finite()) || self.d_min > self.d_max {
            return Err(Error::invalid(format!(
                "focal range [{}, {}] is invalid",
                self.d_min, self.d_max
            )));
        }
        Ok(())
    }

    /// `N_C = round((d_max - d_min) / delta_alpha) + 1`.
    pub fn n_layers(&self) -> usize {
        ((self.d_max - self.d_min) / self.delta_alpha).round() as usize + 1
    }

    pub fn focal_axis(&self) -> Vec<f64> {
        (0..self.n_layers())
            .map(|k| self.d_min + k as f64 * self.delta_alpha)
            .collect()
    }
}

/// A focal stack `F(f, y, x, c)`. Per-row slices have `H = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalStack {
    pub(crate) data: Array4<f64>,
    pub(crate) focal_axis: Vec<f64>,
    pub(crate) delta_alpha: f64,
    pub(crate) valid_weight: Array3<f64>,
}

impl FocalStack {
    /// `data` is `[layer, y, x, c]`; `valid_weight` is `[layer, y, x]`.
    pub fn new(
        data: Array4<f64>,
        d_min: f64,
        delta_alpha: f64,
        valid_weight: Option<Array3<f64>>,
    ) -> Result<Self> {
        let (n_c, h, w, _) = data.dim();
        if !(delta_alpha.is_finite() && delta_alpha > 0.0) {
            return Err(Error::invalid("delta_alpha must be > 0"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("focal stack contains non-finite values".into()));
        }
        let valid_weight = valid_weight.unwrap_or_else(|| Array3::zeros((n_c, h, w)));
        if valid_weight.dim() != (n_c, h, w) {
            return Err(Error::dims("valid_weight shape does not match stack"));
        }
        Ok(Self {
            data,
            focal_axis: (0..n_c).map(|k| d_min + k as f64 * delta_alpha).collect(),
            delta_alpha,
            valid_weight,
        })
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array4<f64> {
        self.data
    }

    pub fn focal_axis(&self) -> &[f64] {
        &self.focal_axis
    }

    pub fn delta_alpha(&self) -> f64 {
        self.delta_alpha
    }

    pub fn d_min(&self) -> f64 {
        self.focal_axis[0]
    }

    pub fn valid_weight(&self) -> &Array3<f64> {
        &self.valid_weight
    }

    pub fn n_layers(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn channels(&self) -> usize {
        self.data.dim().3
    }

    /// Layer `k` as an `[y, x, c]` image.
    pub fn layer(&self, k: usize) -> Array3<f64> {
        self.data.index_axis(Axis(0), k).to_owned()
    }

    /// The `(f, x)` slice at row `y` as a single-row stack.
    pub fn row(&self, y: usize) -> Result<FocalStack> {
        if y >= self.height() {
            return Err(Error::OutOfRange {
                what: "row",
                index: y,
                limit: self.height(),
            });
        }
        Ok(FocalStack {
            data: self.data.slice(s![.., y..y + 1, .., ..]).to_owned(),
            focal_axis: self.focal_axis.clone(),
            delta_alpha: self.delta_alpha,
            valid_weight: self.valid_weight.slice(s![.., y..y + 1, ..]).to_owned(),
        })
    }

    /// Channel `c` of row `y` as an `[f, x]` plane.
    pub fn plane(&self, y: usize, c: usize) -> Array2<f64> {
        self.data.slice(s![.., y, .., c]).to_owned()
    }

    /// Stack single-row slices along y.
    pub fn from_rows(rows: &[FocalStack]) -> Result<FocalStack> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("need at least one row"))?;
        let (n_c, _, w, c) = first.data.dim();
        let h: usize = rows.iter().map(|r| r.height()).sum();
        let mut data = Array4::zeros((n_c, h, w, c));
        let mut weight = Array3::zeros((n_c, h, w));
        let mut y = 0;
        for r in rows {
            if r.data.dim().0 != n_c || r.data.dim().2 != w || r.data.dim().3 != c {
                return Err(Error::dims("row slices have different shapes"));
            }
            if r.focal_axis != first.focal_axis {
                return Err(Error::dims("row slices have different focal axes"));
            }
            let rh = r.height();
            data.slice_mut(s![.., y..y + rh, .., ..]).assign(&r.data);
            weight.slice_mut(s![.., y..y + rh, ..]).assign(&r.valid_weight);
            y += rh;
        }
        Ok(FocalStack {
            data,
            focal_axis: first.focal_axis.clone(),
            delta_alpha: first.delta_alpha,
            valid_weight: weight,
        })
    }

    /// Same axis, new samples.
    pub(crate) fn with_data(&self, data: Array4<f64>) -> FocalStack {
        FocalStack {
            data,
            focal_axis: self.focal_axis.clone(),
            delta_alpha: self.delta_alpha,
            valid_weight: self.valid_weight.clone(),
        }
    }

    pub fn clip_unit(&mut self) {
        self.data.mapv_inplace(|v| v.clamp(0.0, 1.0));
    }
}

/// One contribution to a refocused layer: source row `row` of the view stack,
/// treated as a view at physical offset `offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewSample {
    pub row: usize,
    pub offset: f64,
}

/// The real views of an EPI.
pub fn real_views(epi: &Epi) -> Vec<ViewSample> {
    epi.view_offsets()
        .into_iter()
        .enumerate()
        .map(|(row, offset)| ViewSample { row, offset })
        .collect()
}

/// Linear interpolation of `row[.., c]` at `pos`; `None` outside `[0, W - 1]`.
#[inline]
fn sample_linear(src: &ArrayView3<f64>, r: usize, pos: f64, c: usize) -> Option<f64> {
    let w = src.dim().1;
    let max = (w - 1) as f64;
    if pos < -EDGE_EPS || pos > max + EDGE_EPS {
        return None;
    }
    let pos = pos.clamp(0.0, max);
    let i0 = pos.floor() as usize;
    let t = pos - i0 as f64;
    let a = src[[r, i0, c]];
    if t == 0.0 || i0 + 1 >= w {
        Some(a)
    } else {
        Some(a + t * (src[[r, i0 + 1, c]] - a))
    }
}

/// Refocus one layer from arbitrary view samples of `rows` (`[row, x, c]`).
///
/// Returns the `[x, c]` layer and the per-pixel valid-sample count.
pub fn refocus_views(
    rows: ArrayView3<f64>,
    views: &[ViewSample],
    f: f64,
    policy: BoundaryPolicy,
) -> (Array2<f64>, Array1<f64>) {
    let (_, w, c) = rows.dim();
    let mut out = Array2::zeros((w, c));
    let mut weight = Array1::zeros(w);
    let n = views.len() as f64;
    for x in 0..w {
        let mut count = 0usize;
        for ch in 0..c {
            let mut sum = 0.0;
            count = 0;
            for v in views {
                if let Some(val) = sample_linear(&rows, v.row, x as f64 + f * v.offset, ch) {
                    sum += val;
                    count += 1;
                }
            }
            out[[x, ch]] = match policy {
                BoundaryPolicy::Renormalize if count > 0 => sum / count as f64,
                BoundaryPolicy::Renormalize => 0.0,
                BoundaryPolicy::Zero => sum / n,
            };
        }
        weight[x] = count as f64;
    }
    (out, weight)
}

/// Focal stack of `rows` over `cfg`'s focal axis using the given view samples.
/// Layers are computed in parallel; each layer is independent.
pub fn focal_stack_from_views(
    rows: ArrayView3<f64>,
    views: &[ViewSample],
    cfg: &RefocusConfig,
) -> Result<FocalStack> {
    cfg.validate()?;
    if views.is_empty() {
        return Err(Error::invalid("no views to integrate"));
    }
    let (_, w, c) = rows.dim();
    let axis = cfg.focal_axis();
    let layers: Vec<(Array2<f64>, Array1<f64>)> = axis
        .par_iter()
        .map(|&f| refocus_views(rows, views, f, cfg.boundary_policy))
        .collect();
    let mut data = Array4::zeros((axis.len(), 1, w, c));
    let mut weight = Array3::zeros((axis.len(), 1, w));
    for (k, (layer, wt)) in layers.into_iter().enumerate() {
        data.slice_mut(s![k, 0, .., ..]).assign(&layer);
        weight.slice_mut(s![k, 0, ..]).assign(&wt);
    }
    FocalStack::new(data, cfg.d_min, cfg.delta_alpha, Some(weight))
}

/// A sheared EPI with its sample-validity mask (`[u, x]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ShearedEpi {
    pub epi: Epi,
    pub valid: Array2<bool>,
}

/// `E_d(u, x) = E(u, x + d * offset(u))`; out-of-frame samples are zero and invalid.
pub fn shear_epi(epi: &Epi, d: f64) -> Result<ShearedEpi> {
    if !d.is_finite() {
        return Err(Error::invalid("shear must be finite"));
    }
    let (n_u, w, c) = epi.data.dim();
    let src = epi.data.view();
    let mut data = Array3::zeros((n_u, w, c));
    let mut valid = Array2::from_elem((n_u, w), false);
    for u in 0..n_u {
        let off = epi.view_offset(u);
        for x in 0..w {
            for ch in 0..c {
                if let Some(v) = sample_linear(&src, u, x as f64 + d * off, ch) {
                    data[[u, x, ch]] = v;
                    valid[[u, x]] = true;
                }
            }
        }
    }
    Ok(ShearedEpi {
        epi: epi.with_data(data),
        valid,
    })
}

/// One refocused row and its valid-sample counts.
#[derive(Debug, Clone, PartialEq)]
pub struct RefocusedRow {
    /// `[x, c]`
    pub values: Array2<f64>,
    /// `[x]`
    pub weight: Array1<f64>,
}

pub fn refocus_layer(epi: &Epi, f: f64, cfg: &RefocusConfig) -> Result<RefocusedRow> {
    if !f.is_finite() {
        return Err(Error::invalid("focal disparity must be finite"));
    }
    let (values, weight) = refocus_views(epi.data.view(), &real_views(epi), f, cfg.boundary_policy);
    Ok(RefocusedRow { values, weight })
}

/// Focal stack slice `F(f, x)` of one EPI.
pub fn build_focal_stack(epi: &Epi, cfg: &RefocusConfig) -> Result<FocalStack> {
    focal_stack_from_views(epi.data.view(), &real_views(epi), cfg)
}

/// Full focal stack `F(f, y, x)` of a 3D light field, rows in parallel.
pub fn build_focal_stack_lf(lf: &LightField3D, cfg: &RefocusConfig) -> Result<FocalStack> {
    cfg.validate()?;
    let rows: Vec<FocalStack> = (0..lf.height())
        .into_par_iter()
        .map(|y| {
            let epi = crate::lightfield::extract_epi(lf, y)?;
            build_focal_stack(&epi, cfg)
        })
        .collect::<Result<_>>()?;
    FocalStack::from_rows(&rows)
}

/// Direct 4D refocus: mean over all `(u, v)` of bilinearly sheared views.
/// Returns an `[y, x, c]` image.
pub fn refocus_4d_direct(lf: &LightField4D, d: f64, policy: BoundaryPolicy) -> Array3<f64> {
    let (n_v, n_u, h, w, c) = lf.views().dim();
    let views = lf.views();
    let uo = lf.u_offsets();
    let vo = lf.v_offsets();
    let (wmax, hmax) = ((w - 1) as f64, (h - 1) as f64);
    let mut out = Array3::zeros((h, w, c));
    let total = (n_u * n_v) as f64;
    Zip::indexed(&mut out).par_for_each(|(y, x, ch), o| {
        let mut sum = 0.0;
        let mut count = 0usize;
        for v in 0..n_v {
            let sy = y as f64 + d * vo[v];
            if sy < -EDGE_EPS || sy > hmax + EDGE_EPS {
                continue;
            }
            let sy = sy.clamp(0.0, hmax);
            let y0 = sy.floor() as usize;
            let ty = sy - y0 as f64;
            let y1 = (y0 + 1).min(h - 1);
            for u in 0..n_u {
                let sx = x as f64 + d * uo[u];
                if sx < -EDGE_EPS || sx > wmax + EDGE_EPS {
                    continue;
                }
                let sx = sx.clamp(0.0, wmax);
                let x0 = sx.floor() as usize;
                let tx = sx - x0 as f64;
                let x1 = (x0 + 1).min(w - 1);
                let p00 = views[[v, u, y0, x0, ch]];
                let p01 = views[[v, u, y0, x1, ch]];
                let p10 = views[[v, u, y1, x0, ch]];
                let p11 = views[[v, u, y1, x1, ch]];
                sum += (1.0 - ty) * ((1.0 - tx) * p00 + tx * p01)
                    + ty * ((1.0 - tx) * p10 + tx * p11);
                count += 1;
            }
        }
        *o = match policy {
            BoundaryPolicy::Renormalize if count > 0 => sum / count as f64,
            BoundaryPolicy::Renormalize => 0.0,
            BoundaryPolicy::Zero => sum / total,
        };
    });
    out
}

/// Two-stage 4D refocus: average over `u` into `LF_3D(v, x, y)`, then over `v`.
pub fn refocus_4d_two_stage(lf: &LightField4D, d: f64, policy: BoundaryPolicy) -> Array3<f64> {
    let (_, _, h, w, c) = lf.views().dim();
    let horizontal = horizontal_stage(lf, d, policy);
    vertical_stage(&horizontal, &lf.v_offsets(), d, policy, (h, w, c))
}

/// Stage 1: `[v, y, x, c]` horizontally refocused images.
fn horizontal_stage(lf: &LightField4D, d: f64, policy: BoundaryPolicy) -> Array4<f64> {
    let (n_v, _, h, w, c) = lf.views().dim();
    let uo = lf.u_offsets();
    let views: Vec<ViewSample> = uo
        .iter()
        .enumerate()
        .map(|(row, &offset)| ViewSample { row, offset })
        .collect();
    let mut out = Array4::zeros((n_v, h, w, c));
    for v in 0..n_v {
        for y in 0..h {
            // [u, x, c] for this (v, y)
            let rows = lf.views().slice(s![v, .., y, .., ..]);
            let (layer, _) = refocus_views(rows, &views, d, policy);
            out.slice_mut(s![v, y, .., ..]).assign(&layer);
        }
    }
    out
}

/// Stage 2: refocus along y over `v` for each column.
fn vertical_stage(
    lf3: &Array4<f64>,
    v_offsets: &[f64],
    d: f64,
    policy: BoundaryPolicy,
    (h, w, c): (usize, usize, usize),
) -> Array3<f64> {
    let views: Vec<ViewSample> = v_offsets
        .iter()
        .enumerate()
        .map(|(row, &offset)| ViewSample { row, offset })
        .collect();
    let mut out = Array3::zeros((h, w, c));
    for x in 0..w {
        // [v, y, c] for this column
        let rows = lf3.slice(s![.., .., x, ..]);
        let (col, _) = refocus_views(rows, &views, d, policy);
        out.slice_mut(s![.., x, ..]).assign(&col);
    }
    out
}
