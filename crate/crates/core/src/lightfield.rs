//! Light field containers, EPI extraction and synthetic scene rendering.
//!
//! Views are stored as `f64` tensors indexed `[u, y, x, c]` (3D) or
//! `[v, u, y, x, c]` (4D). A scene point with disparity `d` seen in view `u`
//! sits at `x_ref + d * offset(u)`, where `offset(u) = (u - u_ref) * baseline_unit`.
//! Disparities are pixels per unit of physical baseline, so they keep their
//! meaning when views are dropped by [`downsample_views`].

use ndarray::{s, Array2, Array3, Array4, Array5, ArrayView3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed disparity interval `[min, max]` in pixels per baseline unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisparityRange {
    pub min: f64,
    pub max: f64,
}

impl DisparityRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(Error::invalid(format!(
                "disparity range [{min}, {max}] must be finite with min <= max"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.min - 1e-12 && d <= self.max + 1e-12
    }
}

impl Default for DisparityRange {
    fn default() -> Self {
        Self {
            min: -1.0,
            max: 0.98,
        }
    }
}

fn check_finite(data: impl IntoIterator<Item = f64>) -> Result<()> {
    if data.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::invalid("light field contains non-finite intensities"))
    }
}

fn check_baseline(baseline_unit: f64) -> Result<()> {
    if baseline_unit.is_finite() && baseline_unit > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "baseline unit must be positive, got {baseline_unit}"
        )))
    }
}

/// A horizontal-parallax light field `L(u, x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LightField3D {
    views: Array4<f64>,
    u_ref: usize,
    baseline_unit: f64,
    disparity_range: DisparityRange,
}

impl LightField3D {
    /// `views` is indexed `[u, y, x, c]`.
    pub fn new(
        views: Array4<f64>,
        u_ref: usize,
        baseline_unit: f64,
        disparity_range: DisparityRange,
    ) -> Result<Self> {
        let (n_u, h, w, c) = views.dim();
        if n_u == 0 || h == 0 || w == 0 || c == 0 {
            return Err(Error::invalid(format!(
                "light field dims must be non-zero, got {n_u}x{h}x{w}x{c}"
            )));
        }
        if u_ref >= n_u {
            return Err(Error::OutOfRange {
                what: "u_ref",
                index: u_ref,
                limit: n_u,
            });
        }
        check_baseline(baseline_unit)?;
        check_finite(views.iter().copied())?;
        Ok(Self {
            views,
            u_ref,
            baseline_unit,
            disparity_range,
        })
    }

    pub fn views(&self) -> &Array4<f64> {
        &self.views
    }

    pub fn n_u(&self) -> usize {
        self.views.dim().0
    }

    pub fn height(&self) -> usize {
        self.views.dim().1
    }

    pub fn width(&self) -> usize {
        self.views.dim().2
    }

    pub fn channels(&self) -> usize {
        self.views.dim().3
    }

    pub fn u_ref(&self) -> usize {
        self.u_ref
    }

    pub fn baseline_unit(&self) -> f64 {
        self.baseline_unit
    }

    pub fn disparity_range(&self) -> DisparityRange {
        self.disparity_range
    }

    /// Physical offset of view `u` from the reference view.
    pub fn view_offset(&self, u: usize) -> f64 {
        (u as f64 - self.u_ref as f64) * self.baseline_unit
    }

    pub fn view_offsets(&self) -> Vec<f64> {
        (0..self.n_u()).map(|u| self.view_offset(u)).collect()
    }

    /// Rebuild a light field from EPIs, one per row, in row order.
    pub fn from_epis(epis: &[Epi], disparity_range: DisparityRange) -> Result<Self> {
        let first = epis
            .first()
            .ok_or_else(|| Error::invalid("need at least one EPI"))?;
        let (n_u, w, c) = first.data.dim();
        let mut views = Array4::zeros((n_u, epis.len(), w, c));
        for (y, epi) in epis.iter().enumerate() {
            if epi.data.dim() != (n_u, w, c)
                || epi.u_ref != first.u_ref
                || epi.baseline_unit != first.baseline_unit
            {
                return Err(Error::dims(format!("EPI {y} does not match EPI 0")));
            }
            views.slice_mut(s![.., y, .., ..]).assign(&epi.data);
        }
        Self::new(views, first.u_ref, first.baseline_unit, disparity_range)
    }
}

/// A structured two-plane light field `LF(u, v, x, y)` on a rectangular view grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LightField4D {
    views: Array5<f64>,
    u_ref: usize,
    v_ref: usize,
    baseline_unit: f64,
    disparity_range: DisparityRange,
}

impl LightField4D {
    /// `views` is indexed `[v, u, y, x, c]`.
    pub fn new(
        views: Array5<f64>,
        u_ref: usize,
        v_ref: usize,
        baseline_unit: f64,
        disparity_range: DisparityRange,
    ) -> Result<Self> {
        let (n_v, n_u, h, w, c) = views.dim();
        if n_v == 0 || n_u == 0 || h == 0 || w == 0 || c == 0 {
            return Err(Error::invalid("4D light field dims must be non-zero"));
        }
        if u_ref >= n_u {
            return Err(Error::OutOfRange {
                what: "u_ref",
                index: u_ref,
                limit: n_u,
            });
        }
        if v_ref >= n_v {
            return Err(Error::OutOfRange {
                what: "v_ref",
                index: v_ref,
                limit: n_v,
            });
        }
        check_baseline(baseline_unit)?;
        check_finite(views.iter().copied())?;
        Ok(Self {
            views,
            u_ref,
            v_ref,
            baseline_unit,
            disparity_range,
        })
    }

    pub fn views(&self) -> &Array5<f64> {
        &self.views
    }

    pub fn n_v(&self) -> usize {
        self.views.dim().0
    }

    pub fn n_u(&self) -> usize {
        self.views.dim().1
    }

    pub fn height(&self) -> usize {
        self.views.dim().2
    }

    pub fn width(&self) -> usize {
        self.views.dim().3
    }

    pub fn channels(&self) -> usize {
        self.views.dim().4
    }

    pub fn u_ref(&self) -> usize {
        self.u_ref
    }

    pub fn v_ref(&self) -> usize {
        self.v_ref
    }

    pub fn baseline_unit(&self) -> f64 {
        self.baseline_unit
    }

    pub fn disparity_range(&self) -> DisparityRange {
        self.disparity_range
    }

    pub fn u_offsets(&self) -> Vec<f64> {
        (0..self.n_u())
            .map(|u| (u as f64 - self.u_ref as f64) * self.baseline_unit)
            .collect()
    }

    pub fn v_offsets(&self) -> Vec<f64> {
        (0..self.n_v())
            .map(|v| (v as f64 - self.v_ref as f64) * self.baseline_unit)
            .collect()
    }

    /// The horizontal 3D light field of view row `v`.
    pub fn horizontal_slice(&self, v: usize) -> Result<LightField3D> {
        if v >= self.n_v() {
            return Err(Error::OutOfRange {
                what: "v",
                index: v,
                limit: self.n_v(),
            });
        }
        LightField3D::new(
            self.views.index_axis(Axis(0), v).to_owned(),
            self.u_ref,
            self.baseline_unit,
            self.disparity_range,
        )
    }
}

/// Epipolar-plane image `E(u, x)` for one row, indexed `[u, x, c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Epi {
    pub(crate) data: Array3<f64>,
    pub(crate) u_ref: usize,
    pub(crate) baseline_unit: f64,
}

impl Epi {
    pub fn new(data: Array3<f64>, u_ref: usize, baseline_unit: f64) -> Result<Self> {
        let (n_u, w, c) = data.dim();
        if n_u == 0 || w == 0 || c == 0 {
            return Err(Error::invalid("EPI dims must be non-zero"));
        }
        if u_ref >= n_u {
            return Err(Error::OutOfRange {
                what: "u_ref",
                index: u_ref,
                limit: n_u,
            });
        }
        check_baseline(baseline_unit)?;
        check_finite(data.iter().copied())?;
        Ok(Self {
            data,
            u_ref,
            baseline_unit,
        })
    }

    /// Single-channel EPI from a `[u, x]` array.
    pub fn from_gray(data: Array2<f64>, u_ref: usize, baseline_unit: f64) -> Result<Self> {
        let (n_u, w) = data.dim();
        Self::new(
            data.into_shape_with_order((n_u, w, 1))
                .map_err(|e| Error::invalid(e.to_string()))?,
            u_ref,
            baseline_unit,
        )
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView3<'_, f64> {
        self.data.view()
    }

    pub fn n_u(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }

    pub fn u_ref(&self) -> usize {
        self.u_ref
    }

    pub fn baseline_unit(&self) -> f64 {
        self.baseline_unit
    }

    pub fn view_offset(&self, u: usize) -> f64 {
        (u as f64 - self.u_ref as f64) * self.baseline_unit
    }

    pub fn view_offsets(&self) -> Vec<f64> {
        (0..self.n_u()).map(|u| self.view_offset(u)).collect()
    }

    /// Same geometry, different samples.
    pub(crate) fn with_data(&self, data: Array3<f64>) -> Self {
        debug_assert_eq!(data.dim(), self.data.dim());
        Self {
            data,
            u_ref: self.u_ref,
            baseline_unit: self.baseline_unit,
        }
    }
}

/// `E(u, x) = L(u, x, y)` for a fixed row.
pub fn extract_epi(lf: &LightField3D, y: usize) -> Result<Epi> {
    if y >= lf.height() {
        return Err(Error::OutOfRange {
            what: "row",
            index: y,
            limit: lf.height(),
        });
    }
    Ok(Epi {
        data: lf.views.slice(s![.., y, .., ..]).to_owned(),
        u_ref: lf.u_ref,
        baseline_unit: lf.baseline_unit,
    })
}

/// Keep every `factor`-th view.
///
/// `(N_u - 1)` must be divisible by `factor`. The reference view is mapped to
/// the nearest kept view and the baseline unit is multiplied by `factor`;
/// the disparity range is unchanged because disparities are per physical unit.
pub fn downsample_views(lf: &LightField3D, factor: usize) -> Result<LightField3D> {
    if factor == 0 {
        return Err(Error::invalid("downsampling factor must be >= 1"));
    }
    let n_u = lf.n_u();
    if (n_u - 1) % factor != 0 {
        return Err(Error::invalid(format!(
            "(N_u - 1) = {} is not divisible by factor {factor}",
            n_u - 1
        )));
    }
    let views = lf
        .views
        .slice(s![..;factor as isize, .., .., ..])
        .to_owned();
    let kept = views.dim().0;
    let u_ref = ((lf.u_ref as f64 / factor as f64).round() as usize).min(kept - 1);
    LightField3D::new(
        views,
        u_ref,
        lf.baseline_unit * factor as f64,
        lf.disparity_range,
    )
}

/// One scene element for [`render_synthetic`].
///
/// Positions are in reference-view pixel coordinates. Primitives are
/// composited in list order, later entries on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// A point. Without `y` it is a vertical line through every row.
    Point {
        x: f64,
        #[serde(default)]
        y: Option<f64>,
        disparity: f64,
        #[serde(default = "one")]
        intensity: f64,
    },
    /// A fronto-parallel strip covering reference columns `[x_start, x_end)`
    /// and rows `[y_start, y_end)` with a seeded random texture.
    TexturedPlane {
        x_start: usize,
        x_end: usize,
        #[serde(default)]
        y_start: Option<usize>,
        #[serde(default)]
        y_end: Option<usize>,
        disparity: f64,
        #[serde(default)]
        seed: u64,
        /// Box-blur radius applied along x to the random texture.
        #[serde(default)]
        smooth: usize,
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

fn default_baseline() -> f64 {
    1.0
}

fn default_channels() -> usize {
    1
}

fn default_n_v() -> usize {
    1
}

impl Primitive {
    pub fn disparity(&self) -> f64 {
        match self {
            Primitive::Point { disparity, .. } | Primitive::TexturedPlane { disparity, .. } => {
                *disparity
            }
        }
    }
}

/// Description of a synthetic scene. Also the on-disk format for `fss gen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSceneSpec {
    pub width: usize,
    pub height: usize,
    pub n_u: usize,
    pub u_ref: usize,
    #[serde(default = "default_n_v")]
    pub n_v: usize,
    #[serde(default)]
    pub v_ref: usize,
    #[serde(default = "default_baseline")]
    pub baseline_unit: f64,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default)]
    pub disparity_range: DisparityRange,
    #[serde(default)]
    pub primitives: Vec<Primitive>,
}

impl SyntheticSceneSpec {
    /// Empty single-row scene on a 1 x `n_u` view line.
    pub fn new(width: usize, height: usize, n_u: usize, u_ref: usize) -> Self {
        Self {
            width,
            height,
            n_u,
            u_ref,
            n_v: 1,
            v_ref: 0,
            baseline_unit: 1.0,
            channels: 1,
            disparity_range: DisparityRange::default(),
            primitives: Vec::new(),
        }
    }

    pub fn with_primitive(mut self, p: Primitive) -> Self {
        self.primitives.push(p);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.n_u == 0 || self.n_v == 0 {
            return Err(Error::invalid("scene dims and view counts must be non-zero"));
        }
        if self.channels == 0 {
            return Err(Error::invalid("scene needs at least one channel"));
        }
        if self.u_ref >= self.n_u || self.v_ref >= self.n_v {
            return Err(Error::invalid("reference view index out of range"));
        }
        check_baseline(self.baseline_unit)?;
        DisparityRange::new(self.disparity_range.min, self.disparity_range.max)?;
        for (i, p) in self.primitives.iter().enumerate() {
            let d = p.disparity();
            if !d.is_finite() || !self.disparity_range.contains(d) {
                return Err(Error::invalid(format!(
                    "primitive {i}: disparity {d} outside [{}, {}]",
                    self.disparity_range.min, self.disparity_range.max
                )));
            }
            match p {
                Primitive::Point {
                    x, y, intensity, ..
                } => {
                    if !(*x >= 0.0 && *x < self.width as f64) {
                        return Err(Error::invalid(format!(
                            "primitive {i}: x = {x} outside [0, {})",
                            self.width
                        )));
                    }
                    if let Some(y) = y {
                        if !(*y >= 0.0 && *y < self.height as f64) {
                            return Err(Error::invalid(format!(
                                "primitive {i}: y = {y} outside [0, {})",
                                self.height
                            )));
                        }
                    }
                    if !intensity.is_finite() {
                        return Err(Error::invalid(format!(
                            "primitive {i}: non-finite intensity"
                        )));
                    }
                }
                Primitive::TexturedPlane {
                    x_start,
                    x_end,
                    y_start,
                    y_end,
                    lo,
                    hi,
                    ..
                } => {
                    if x_start >= x_end || *x_end > self.width {
                        return Err(Error::invalid(format!(
                            "primitive {i}: columns [{x_start}, {x_end}) invalid for width {}",
                            self.width
                        )));
                    }
                    let ys = y_start.unwrap_or(0);
                    let ye = y_end.unwrap_or(self.height);
                    if ys >= ye || ye > self.height {
                        return Err(Error::invalid(format!(
                            "primitive {i}: rows [{ys}, {ye}) invalid for height {}",
                            self.height
                        )));
                    }
                    let (lo, hi) = (lo.unwrap_or(0.0), hi.unwrap_or(1.0));
                    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                        return Err(Error::invalid(format!(
                            "primitive {i}: texture range [{lo}, {hi}] invalid"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Output of the synthetic renderer.
#[derive(Debug, Clone)]
pub struct Rendered<L> {
    pub lightfield: L,
    /// Indices of primitives that left the frame in at least one view and were clipped.
    pub clipped: Vec<usize>,
}

/// Per-primitive accumulation buffers: sum of value * weight and sum of weight.
struct Splat {
    h: usize,
    w: usize,
    c: usize,
    vw: Vec<f64>,
    wt: Vec<f64>,
    clipped: bool,
}

impl Splat {
    fn new(h: usize, w: usize, c: usize) -> Self {
        Self {
            h,
            w,
            c,
            vw: vec![0.0; h * w * c],
            wt: vec![0.0; h * w],
            clipped: false,
        }
    }

    fn add(&mut self, y: isize, x: isize, weight: f64, value: &[f64]) {
        if weight <= 0.0 {
            return;
        }
        if y < 0 || x < 0 || y as usize >= self.h || x as usize >= self.w {
            self.clipped = true;
            return;
        }
        let p = y as usize * self.w + x as usize;
        self.wt[p] += weight;
        for (ch, v) in value.iter().enumerate() {
            self.vw[p * self.c + ch] += weight * v;
        }
    }

    /// Linear splat along x on row `y`.
    fn splat_x(&mut self, y: isize, xq: f64, weight: f64, value: &[f64]) {
        let x0 = xq.floor();
        let t = xq - x0;
        let x0 = x0 as isize;
        self.add(y, x0, weight * (1.0 - t), value);
        self.add(y, x0 + 1, weight * t, value);
    }

    /// Bilinear splat.
    fn splat_xy(&mut self, yq: f64, xq: f64, value: &[f64]) {
        let y0 = yq.floor();
        let ty = yq - y0;
        let y0 = y0 as isize;
        self.splat_x(y0, xq, 1.0 - ty, value);
        self.splat_x(y0 + 1, xq, ty, value);
    }

    /// Composite over `dst` (`[y, x, c]`).
    fn composite_over(&self, dst: &mut ndarray::ArrayViewMut3<f64>) {
        for y in 0..self.h {
            for x in 0..self.w {
                let p = y * self.w + x;
                let wt = self.wt[p];
                if wt <= 0.0 {
                    continue;
                }
                let cov = wt.min(1.0);
                for ch in 0..self.c {
                    let val = self.vw[p * self.c + ch] / wt;
                    let d = &mut dst[[y, x, ch]];
                    *d = *d * (1.0 - cov) + val * cov;
                }
            }
        }
    }
}

fn texture(
    seed: u64,
    rows: usize,
    cols: usize,
    channels: usize,
    smooth: usize,
    lo: f64,
    hi: f64,
) -> Array3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tex = Array3::from_shape_fn((rows, cols, channels), |_| rng.gen::<f64>());
    if smooth > 0 {
        for mut row in tex.axis_iter_mut(Axis(0)) {
            for ch in 0..channels {
                let src: Vec<f64> = row.slice(s![.., ch]).to_vec();
                for x in 0..cols {
                    let a = x.saturating_sub(smooth);
                    let b = (x + smooth + 1).min(cols);
                    row[[x, ch]] = src[a..b].iter().sum::<f64>() / (b - a) as f64;
                }
            }
        }
    }
    tex.mapv_inplace(|t| lo + (hi - lo) * t);
    tex
}

fn render_view(
    spec: &SyntheticSceneSpec,
    textures: &[Option<Array3<f64>>],
    pu: f64,
    pv: f64,
    mut out: ndarray::ArrayViewMut3<f64>,
    clipped: &mut [bool],
) {
    let (h, w, c) = (spec.height, spec.width, spec.channels);
    for (i, prim) in spec.primitives.iter().enumerate() {
        let mut sp = Splat::new(h, w, c);
        match prim {
            Primitive::Point {
                x,
                y,
                disparity,
                intensity,
            } => {
                let value = vec![*intensity; c];
                let xq = x + disparity * pu;
                match y {
                    Some(y) => sp.splat_xy(y + disparity * pv, xq, &value),
                    None => {
                        for row in 0..h {
                            sp.splat_x(row as isize, xq, 1.0, &value);
                        }
                    }
                }
            }
            Primitive::TexturedPlane {
                x_start,
                x_end,
                y_start,
                y_end,
                disparity,
                ..
            } => {
                let tex = textures[i].as_ref().expect("texture prepared");
                let ys = y_start.unwrap_or(0);
                let ye = y_end.unwrap_or(h);
                let full_height = ys == 0 && ye == h;
                for (r, row) in (ys..ye).enumerate() {
                    for (k, col) in (*x_start..*x_end).enumerate() {
                        let value: Vec<f64> = (0..c).map(|ch| tex[[r, k, ch]]).collect();
                        let xq = col as f64 + disparity * pu;
                        if full_height {
                            sp.splat_x(row as isize, xq, 1.0, &value);
                        } else {
                            sp.splat_xy(row as f64 + disparity * pv, xq, &value);
                        }
                    }
                }
            }
        }
        clipped[i] |= sp.clipped;
        sp.composite_over(&mut out);
    }
}

fn prepare_textures(spec: &SyntheticSceneSpec) -> Vec<Option<Array3<f64>>> {
    spec.primitives
        .iter()
        .map(|p| match p {
            Primitive::TexturedPlane {
                x_start,
                x_end,
                y_start,
                y_end,
                seed,
                smooth,
                lo,
                hi,
                ..
            } => {
                let rows = y_end.unwrap_or(spec.height) - y_start.unwrap_or(0);
                Some(texture(
                    *seed,
                    rows,
                    x_end - x_start,
                    spec.channels,
                    *smooth,
                    lo.unwrap_or(0.0),
                    hi.unwrap_or(1.0),
                ))
            }
            Primitive::Point { .. } => None,
        })
        .collect()
}

/// Render a structured 4D light field of the scene.
pub fn render_synthetic_4d(spec: &SyntheticSceneSpec) -> Result<Rendered<LightField4D>> {
    spec.validate()?;
    let textures = prepare_textures(spec);
    let mut views = Array5::zeros((spec.n_v, spec.n_u, spec.height, spec.width, spec.channels));
    let mut clipped = vec![false; spec.primitives.len()];
    for v in 0..spec.n_v {
        let pv = (v as f64 - spec.v_ref as f64) * spec.baseline_unit;
        for u in 0..spec.n_u {
            let pu = (u as f64 - spec.u_ref as f64) * spec.baseline_unit;
            let out = views.slice_mut(s![v, u, .., .., ..]);
            render_view(spec, &textures, pu, pv, out, &mut clipped);
        }
    }
    let clipped: Vec<usize> = clipped
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| c.then_some(i))
        .collect();
    if !clipped.is_empty() {
        log::warn!("primitives {clipped:?} left the frame in some views and were clipped");
    }
    Ok(Rendered {
        lightfield: LightField4D::new(
            views,
            spec.u_ref,
            spec.v_ref,
            spec.baseline_unit,
            spec.disparity_range,
        )?,
        clipped,
    })
}

/// Render the horizontal view line (`v = v_ref`) of the scene.
///
/// Each primitive at disparity `d` appears in view `u` shifted by
/// `d * (u - u_ref) * baseline_unit` pixels; fractional positions are split
/// linearly between the two nearest pixels.
pub fn render_synthetic(spec: &SyntheticSceneSpec) -> Result<Rendered<LightField3D>> {
    let flat = SyntheticSceneSpec {
        n_v: 1,
        v_ref: 0,
        ..spec.clone()
    };
    let Rendered {
        lightfield,
        clipped,
    } = render_synthetic_4d(&flat)?;
    Ok(Rendered {
        lightfield: lightfield.horizontal_slice(0)?,
        clipped,
    })
}
