//! Browser bindings: a sparse point scene, its focal stack slice, the slice
//! spectrum with predicted lines, and the analytically completed slice.
//!
//! Images are returned as RGBA bytes, `layers()` rows by `width()` columns.

use fss_core::antialias::{antialias_slice, CompletionOperator};
use fss_core::cone::{line_mask, BinSpacing, ConeModel};
use fss_core::lightfield::{extract_epi, render_synthetic, Epi, Primitive, SyntheticSceneSpec};
use fss_core::refocus::{build_focal_stack, RefocusConfig};
use fss_core::spectrum::fss_forward;
use ndarray::Array2;
use wasm_bindgen::prelude::*;

/// A single-row scene seen by `views` cameras `spacing` pixels-per-unit-disparity apart.
#[wasm_bindgen]
pub struct Demo {
    epi: Epi,
    cfg: RefocusConfig,
}

impl Demo {
    /// One point per disparity, spread evenly over the row. With `textured`, a
    /// random background strip sits behind them at the first disparity.
    pub fn build(width: usize, views: usize, spacing: f64, disparities: &[f64], textured: bool) -> fss_core::Result<Self> {
        if views == 0 || !(spacing.is_finite() && spacing > 0.0) {
            return Err(fss_core::Error::InvalidInput("need at least one view and a positive spacing".into()));
        }
        let mut spec = SyntheticSceneSpec::new(width, 1, views, views / 2);
        spec.baseline_unit = spacing;
        if let (true, Some(&d)) = (textured, disparities.first()) {
            spec = spec.with_primitive(Primitive::TexturedPlane {
                x_start: 0,
                x_end: width,
                y_start: None,
                y_end: None,
                disparity: d,
                seed: 5,
                smooth: 2,
                lo: Some(0.0),
                hi: Some(0.5),
            });
        }
        let n = disparities.len() as f64;
        for (i, &d) in disparities.iter().enumerate() {
            spec = spec.with_primitive(Primitive::Point {
                x: ((i as f64 + 1.0) * width as f64 / (n + 1.0)).round(),
                y: None,
                disparity: d,
                intensity: 1.0,
            });
        }
        let lf = render_synthetic(&spec)?.lightfield;
        Ok(Self {
            epi: extract_epi(&lf, 0)?,
            cfg: RefocusConfig::default(),
        })
    }

    pub fn focal_plane(&self) -> fss_core::Result<Array2<f64>> {
        Ok(build_focal_stack(&self.epi, &self.cfg)?.plane(0, 0))
    }

    /// Log-magnitude spectrum scaled to `[0, 1]` and the predicted line mask.
    pub fn spectrum_planes(&self) -> fss_core::Result<(Array2<f64>, Array2<bool>)> {
        let stack = build_focal_stack(&self.epi, &self.cfg)?;
        let fss = fss_forward(&stack)?;
        let dims = fss.dims();
        let model = ConeModel::new(self.cfg.delta_alpha, self.epi.n_u(), self.epi.u_ref(), self.epi.baseline_unit())?;
        let mask = line_mask(&model, dims, BinSpacing::new(dims.0, dims.1, self.cfg.delta_alpha), 0);
        let mut mag = fss.log_magnitude();
        let hi = mag.fold(0.0f64, |m, &v| m.max(v));
        if hi > 0.0 {
            mag /= hi;
        }
        Ok((mag, mask))
    }

    pub fn antialiased_plane(&self, m: usize) -> fss_core::Result<Array2<f64>> {
        let op = CompletionOperator::AnalyticReplicate { inserted: m };
        Ok(antialias_slice(&self.epi, &self.cfg, &op)?.stack.plane(0, 0))
    }
}

/// Grayscale RGBA; values are clipped to `[0, 1]`.
pub fn gray_rgba(plane: &Array2<f64>) -> Vec<u8> {
    plane
        .iter()
        .flat_map(|&v| {
            let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            [g, g, g, 255]
        })
        .collect()
}

/// Like [`gray_rgba`] with masked bins tinted orange.
pub fn overlay_rgba(plane: &Array2<f64>, mask: &Array2<bool>) -> Vec<u8> {
    plane
        .iter()
        .zip(mask.iter())
        .flat_map(|(&v, &on)| {
            let g = v.clamp(0.0, 1.0) * 255.0;
            if on {
                [255, (0.5 * g + 80.0) as u8, (0.3 * g) as u8, 255]
            } else {
                let g = g.round() as u8;
                [g, g, g, 255]
            }
        })
        .collect()
}

fn js(e: fss_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(width: usize, views: usize, spacing: f64, disparities: &[f64], textured: bool) -> Result<Demo, JsError> {
        Self::build(width, views, spacing, disparities, textured).map_err(js)
    }

    pub fn width(&self) -> usize {
        self.epi.width()
    }

    pub fn layers(&self) -> usize {
        self.cfg.n_layers()
    }

    /// Focal stack slice: rows are focus settings, columns are x.
    pub fn focal_slice(&self) -> Result<Vec<u8>, JsError> {
        self.focal_plane().map(|p| gray_rgba(&p)).map_err(js)
    }

    /// Centered log-magnitude spectrum of the slice, optionally with the predicted lines.
    pub fn spectrum(&self, lines: bool) -> Result<Vec<u8>, JsError> {
        let (mag, mask) = self.spectrum_planes().map_err(js)?;
        Ok(if lines { overlay_rgba(&mag, &mask) } else { gray_rgba(&mag) })
    }

    /// Slice after inserting `m` replicated views into every gap.
    pub fn antialiased(&self, m: usize) -> Result<Vec<u8>, JsError> {
        self.antialiased_plane(m).map(|p| gray_rgba(&p)).map_err(js)
    }
}
