//! Anti-aliasing of focal stacks by spectrum completion.
//!
//! A sparse set of views produces a focal stack whose spectrum holds one line
//! per view. Completing the spectrum towards the dense-view cone and
//! transforming back removes the ghosting. Three completion operators are
//! available: analytic view replication, an EPI low-pass baseline and a
//! trained network.

pub mod network;

use std::ops::Range;
use std::sync::Arc;

use ndarray::{s, Array3, Array4};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lightfield::{Epi, LightField3D, LightField4D};
use crate::refocus::{focal_stack_from_views, refocus_views, FocalStack, RefocusConfig, ViewSample};
use crate::spectrum::{self, dc_patch_replace, fss_forward, fss_inverse, Fss, Provenance};

pub use network::{neural_complete, ModelWeights, WeightsMetadata};

#[derive(Debug, Clone)]
pub enum CompletionOperator {
    /// Insert `inserted` virtual views between each pair of neighbouring real
    /// views. Each virtual view replicates its nearest real view.
    AnalyticReplicate { inserted: usize },
    /// Low-pass each view along x before refocusing; `cutoff` is a fraction of Nyquist.
    EpiLowpass { cutoff: f64 },
    Neural(Arc<ModelWeights>),
}

impl CompletionOperator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::AnalyticReplicate { .. } => Ok(()),
            Self::EpiLowpass { cutoff } => {
                if cutoff.is_finite() && *cutoff > 0.0 && *cutoff <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("cutoff must lie in (0, 1], got {cutoff}")))
                }
            }
            Self::Neural(w) => w.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::AnalyticReplicate { .. } => "analytic",
            Self::EpiLowpass { .. } => "lowpass",
            Self::Neural(_) => "neural",
        }
    }
}

/// View samples for real views plus `m` replicated virtual views per gap.
///
/// A virtual view reads the row of its nearest real view; ties go to the
/// real view closer to the reference. With `m == 0` this is just the real
/// views in index order.
pub fn completed_views(offsets: &[f64], m: usize) -> Vec<ViewSample> {
    let real: Vec<ViewSample> = offsets
        .iter()
        .enumerate()
        .map(|(row, &offset)| ViewSample { row, offset })
        .collect();
    if m == 0 || real.len() < 2 {
        return real;
    }
    let mut sorted = real.clone();
    sorted.sort_by(|a, b| a.offset.total_cmp(&b.offset));
    let mut out = Vec::with_capacity(real.len() + (real.len() - 1) * m);
    for pair in sorted.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        out.push(a);
        for j in 1..=m {
            let t = j as f64 / (m + 1) as f64;
            let offset = a.offset + t * (b.offset - a.offset);
            let row = if 2 * j < m + 1 {
                a.row
            } else if 2 * j > m + 1 {
                b.row
            } else if a.offset.abs() <= b.offset.abs() {
                a.row
            } else {
                b.row
            };
            out.push(ViewSample { row, offset });
        }
    }
    out.push(*sorted.last().expect("non-empty"));
    out
}

/// Rows to integrate: one `[view, x, c]` array for all layers, or one per layer.
enum Source {
    Shared(Array3<f64>),
    PerLayer(Vec<Array3<f64>>),
}

impl Source {
    fn map(&self, f: impl Fn(&Array3<f64>) -> Array3<f64> + Sync) -> Source {
        match self {
            Source::Shared(a) => Source::Shared(f(a)),
            Source::PerLayer(v) => Source::PerLayer(v.par_iter().map(&f).collect()),
        }
    }
}

fn stack_from_source(src: &Source, views: &[ViewSample], cfg: &RefocusConfig) -> Result<FocalStack> {
    match src {
        Source::Shared(rows) => focal_stack_from_views(rows.view(), views, cfg),
        Source::PerLayer(layers) => {
            cfg.validate()?;
            let axis = cfg.focal_axis();
            if layers.len() != axis.len() {
                return Err(Error::dims(format!(
                    "{} layer sources for {} focal layers",
                    layers.len(),
                    axis.len()
                )));
            }
            let (_, w, c) = layers[0].dim();
            let refocused: Vec<_> = axis
                .par_iter()
                .zip(layers.par_iter())
                .map(|(&f, rows)| refocus_views(rows.view(), views, f, cfg.boundary_policy))
                .collect();
            let mut data = Array4::zeros((axis.len(), 1, w, c));
            let mut weight = Array3::zeros((axis.len(), 1, w));
            for (k, (layer, wt)) in refocused.into_iter().enumerate() {
                data.slice_mut(s![k, 0, .., ..]).assign(&layer);
                weight.slice_mut(s![k, 0, ..]).assign(&wt);
            }
            FocalStack::new(data, cfg.d_min, cfg.delta_alpha, Some(weight))
        }
    }
}

/// Zero every x-frequency above `cutoff * Nyquist` in each `[view, x, c]` row.
fn lowpass_rows(rows: &Array3<f64>, cutoff: f64) -> Array3<f64> {
    let (n, w, c) = rows.dim();
    let fwd = spectrum::plan(w, true);
    let inv = spectrum::plan(w, false);
    let limit = cutoff * w as f64 / 2.0 + 1e-9;
    let mut out = Array3::zeros((n, w, c));
    let mut buf = vec![Complex64::default(); w];
    for r in 0..n {
        for ch in 0..c {
            for (b, v) in buf.iter_mut().zip(rows.slice(s![r, .., ch])) {
                *b = Complex64::new(*v, 0.0);
            }
            fwd.process(&mut buf);
            for (k, b) in buf.iter_mut().enumerate() {
                let signed = if k <= w / 2 { k as f64 } else { k as f64 - w as f64 };
                if signed.abs() > limit {
                    *b = Complex64::default();
                }
            }
            inv.process(&mut buf);
            for (o, b) in out.slice_mut(s![r, .., ch]).iter_mut().zip(&buf) {
                *o = b.re / w as f64;
            }
        }
    }
    out
}

/// Focal stack slice of the completed light field: real views plus `m`
/// replicated virtual views per gap.
pub fn analytic_complete(epi: &Epi, cfg: &RefocusConfig, m: usize) -> Result<FocalStack> {
    focal_stack_from_views(epi.view(), &completed_views(&epi.view_offsets(), m), cfg)
}

/// Focal stack slice after low-passing every view along x.
pub fn epi_lowpass_refocus(epi: &Epi, cfg: &RefocusConfig, cutoff: f64) -> Result<FocalStack> {
    CompletionOperator::EpiLowpass { cutoff }.validate()?;
    let rows = lowpass_rows(epi.data(), cutoff);
    focal_stack_from_views(rows.view(), &completed_views(&epi.view_offsets(), 0), cfg)
}

/// One anti-aliased `(f, x)` slice.
#[derive(Debug, Clone)]
pub struct AntialiasedSlice {
    /// Clipped to `[0, 1]`.
    pub stack: FocalStack,
    /// Spectrum of the sparse-view focal stack.
    pub aliased: Fss,
    /// Spectrum after completion.
    pub completed: Fss,
    /// Imaginary-to-real RMS ratio of the inverse transform.
    pub imag_residual: f64,
}

fn run(
    src: &Source,
    offsets: &[f64],
    baseline_unit: f64,
    cfg: &RefocusConfig,
    op: &CompletionOperator,
) -> Result<AntialiasedSlice> {
    let provenance = Provenance {
        d_min: cfg.d_min,
        delta_alpha: cfg.delta_alpha,
        n_u: Some(offsets.len()),
        baseline_unit: Some(baseline_unit),
    };
    let real = completed_views(offsets, 0);
    let aliased_stack = stack_from_source(src, &real, cfg)?;
    let aliased = fss_forward(&aliased_stack)?.with_provenance(provenance);
    let completed = match op {
        CompletionOperator::AnalyticReplicate { inserted } => {
            let views = completed_views(offsets, *inserted);
            fss_forward(&stack_from_source(src, &views, cfg)?)?
        }
        CompletionOperator::EpiLowpass { cutoff } => {
            let filtered = src.map(|rows| lowpass_rows(rows, *cutoff));
            fss_forward(&stack_from_source(&filtered, &real, cfg)?)?
        }
        CompletionOperator::Neural(weights) => {
            let raw = neural_complete(&aliased, weights)?;
            dc_patch_replace(&raw, &aliased, weights.metadata.dc_patch)?
        }
    }
    .with_provenance(provenance);
    let inverse = fss_inverse(&completed)?;
    let mut stack = aliased_stack.with_data(inverse.stack.into_data());
    stack.clip_unit();
    Ok(AntialiasedSlice {
        stack,
        aliased,
        completed,
        imag_residual: inverse.imag_residual,
    })
}

pub fn antialias_slice(
    epi: &Epi,
    cfg: &RefocusConfig,
    op: &CompletionOperator,
) -> Result<AntialiasedSlice> {
    op.validate()?;
    run(
        &Source::Shared(epi.data().clone()),
        &epi.view_offsets(),
        epi.baseline_unit(),
        cfg,
        op,
    )
}

/// An anti-aliased focal stack.
#[derive(Debug, Clone)]
pub struct Antialiased {
    pub stack: FocalStack,
    /// Largest imaginary residual over all processed slices.
    pub max_imag_residual: f64,
}

fn collect_rows(slices: Vec<AntialiasedSlice>) -> Result<Antialiased> {
    let max_imag_residual = slices.iter().map(|s| s.imag_residual).fold(0.0, f64::max);
    let rows: Vec<FocalStack> = slices.into_iter().map(|s| s.stack).collect();
    Ok(Antialiased {
        stack: FocalStack::from_rows(&rows)?,
        max_imag_residual,
    })
}

/// Anti-alias every row of a 3D light field.
pub fn antialias_lightfield(
    lf: &LightField3D,
    cfg: &RefocusConfig,
    op: &CompletionOperator,
) -> Result<Antialiased> {
    antialias_rows(lf, cfg, op, 0..lf.height())
}

/// Anti-alias rows `rows` only. A failing row is reported with its index.
pub fn antialias_rows(
    lf: &LightField3D,
    cfg: &RefocusConfig,
    op: &CompletionOperator,
    rows: Range<usize>,
) -> Result<Antialiased> {
    op.validate()?;
    cfg.validate()?;
    if rows.is_empty() || rows.end > lf.height() {
        return Err(Error::invalid(format!(
            "row range {}..{} not inside 0..{}",
            rows.start,
            rows.end,
            lf.height()
        )));
    }
    let slices: Vec<AntialiasedSlice> = rows
        .into_par_iter()
        .map(|y| {
            crate::lightfield::extract_epi(lf, y)
                .and_then(|epi| antialias_slice(&epi, cfg, op))
                .map_err(|e| Error::Row {
                    row: y,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    collect_rows(slices)
}

/// Two-stage anti-aliasing of a 4D light field.
///
/// Stage 1 anti-aliases each horizontal slice. Stage 2 treats every column
/// of the stage-1 stacks as a vertical EPI over `v`, where layer `k` reads
/// the stage-1 layer `k`, and anti-aliases along y.
pub fn antialias_4d(
    lf: &LightField4D,
    cfg: &RefocusConfig,
    op: &CompletionOperator,
) -> Result<Antialiased> {
    op.validate()?;
    cfg.validate()?;
    if lf.n_v() == 1 {
        return antialias_lightfield(&lf.horizontal_slice(0)?, cfg, op);
    }
    let stage1: Vec<Antialiased> = (0..lf.n_v())
        .map(|v| antialias_lightfield(&lf.horizontal_slice(v)?, cfg, op))
        .collect::<Result<_>>()?;
    let (n_c, h, w, c) = stage1[0].stack.data().dim();
    let v_offsets = lf.v_offsets();
    let columns: Vec<AntialiasedSlice> = (0..w)
        .into_par_iter()
        .map(|x| {
            let layers: Vec<Array3<f64>> = (0..n_c)
                .map(|k| {
                    Array3::from_shape_fn((lf.n_v(), h, c), |(v, y, ch)| {
                        stage1[v].stack.data()[[k, y, x, ch]]
                    })
                })
                .collect();
            run(&Source::PerLayer(layers), &v_offsets, lf.baseline_unit(), cfg, op).map_err(|e| {
                Error::Row {
                    row: x,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<_>>()?;
    let mut data = Array4::zeros((n_c, h, w, c));
    let mut weight = Array3::zeros((n_c, h, w));
    let mut max_imag_residual = stage1.iter().map(|s| s.max_imag_residual).fold(0.0, f64::max);
    for (x, col) in columns.into_iter().enumerate() {
        max_imag_residual = max_imag_residual.max(col.imag_residual);
        // column stacks are [k, 1, y, c]
        data.slice_mut(s![.., .., x, ..])
            .assign(&col.stack.data().slice(s![.., 0, .., ..]));
        weight
            .slice_mut(s![.., .., x])
            .assign(&col.stack.valid_weight().slice(s![.., 0, ..]));
    }
    Ok(Antialiased {
        stack: FocalStack::new(data, cfg.d_min, cfg.delta_alpha, Some(weight))?,
        max_imag_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lightfield::{extract_epi, render_synthetic, Primitive, SyntheticSceneSpec};
    use crate::refocus::build_focal_stack;

    fn point_epi(x0: f64, d: f64, n_u: usize, baseline: f64, w: usize) -> Epi {
        let mut spec = SyntheticSceneSpec::new(w, 1, n_u, n_u / 2).with_primitive(Primitive::Point {
            x: x0,
            y: None,
            disparity: d,
            intensity: 1.0,
        });
        spec.baseline_unit = baseline;
        let lf = render_synthetic(&spec).unwrap().lightfield;
        extract_epi(&lf, 0).unwrap()
    }

    #[test]
    fn completed_views_fill_gaps() {
        let v = completed_views(&[-30.0, -15.0, 0.0, 15.0, 30.0], 14);
        assert_eq!(v.len(), 61);
        for (i, s) in v.iter().enumerate() {
            assert!((s.offset - (i as f64 - 30.0)).abs() < 1e-9);
        }
        // offset -22.5 is never produced with m = 14; check nearest-row assignment
        assert_eq!(v[7].row, 0);
        assert_eq!(v[8].row, 1);
        assert_eq!(v[37].row, 2);
        assert_eq!(v[38].row, 3);
    }

    #[test]
    fn tie_goes_towards_reference() {
        let v = completed_views(&[-2.0, 0.0, 2.0], 1);
        let rows: Vec<usize> = v.iter().map(|s| s.row).collect();
        assert_eq!(rows, vec![0, 1, 1, 1, 2]);
    }

    #[test]
    fn analytic_without_insertion_is_plain_stack() {
        let epi = point_epi(30.0, 0.3, 5, 2.0, 64);
        let cfg = RefocusConfig::with_layers(-0.5, 0.05, 21).unwrap();
        assert_eq!(analytic_complete(&epi, &cfg, 0).unwrap(), build_focal_stack(&epi, &cfg).unwrap());
    }

    #[test]
    fn full_band_lowpass_is_identity() {
        let epi = point_epi(30.0, 0.3, 5, 2.0, 64);
        let cfg = RefocusConfig::with_layers(-0.5, 0.05, 21).unwrap();
        let a = epi_lowpass_refocus(&epi, &cfg, 1.0).unwrap();
        let b = build_focal_stack(&epi, &cfg).unwrap();
        let err = (a.data() - b.data()).mapv(f64::abs).fold(0.0, |m: f64, &v| m.max(v));
        assert!(err < 1e-12);
        assert!(epi_lowpass_refocus(&epi, &cfg, 0.0).is_err());
    }

    #[test]
    fn lowpass_removes_high_frequencies() {
        let rows = Array3::from_shape_fn((1, 32, 1), |(_, x, _)| if x % 2 == 0 { 1.0 } else { 0.0 });
        let out = lowpass_rows(&rows, 0.5);
        assert!(out.iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn zero_disparity_analytic_matches_dense() {
        let dense = point_epi(40.0, 0.0, 33, 1.0, 80);
        let sparse = point_epi(40.0, 0.0, 5, 8.0, 80);
        let cfg = RefocusConfig::with_layers(-1.0, 0.1, 21).unwrap();
        let op = CompletionOperator::AnalyticReplicate { inserted: 7 };
        let out = antialias_slice(&sparse, &cfg, &op).unwrap();
        let mut gt = build_focal_stack(&dense, &cfg).unwrap();
        gt.clip_unit();
        let err = (out.stack.data() - gt.data()).mapv(|v| v * v).mean().unwrap().sqrt();
        assert!(err < 1e-9, "rms {err}");
    }

    #[test]
    fn zero_network_keeps_only_dc_patch() {
        let epi = point_epi(20.0, 0.4, 5, 2.0, 48);
        let cfg = RefocusConfig::with_layers(-0.5, 0.05, 21).unwrap();
        let w = Arc::new(ModelWeights::zeros(WeightsMetadata::with_channels(vec![2, 2])));
        let out = antialias_slice(&epi, &cfg, &CompletionOperator::Neural(w)).unwrap();
        let (i0, j0) = out.completed.dc_index();
        for ((i, j, c), z) in out.completed.data().indexed_iter() {
            if i.abs_diff(i0) <= 2 && j.abs_diff(j0) <= 2 {
                assert_eq!(*z, out.aliased.data()[[i, j, c]]);
            } else {
                assert_eq!(*z, Complex64::default());
            }
        }
    }

    #[test]
    fn row_errors_carry_index() {
        let lf = LightField3D::new(Array4::zeros((3, 4, 16, 1)), 1, 1.0, Default::default()).unwrap();
        let cfg = RefocusConfig::with_layers(-0.5, 0.1, 3).unwrap();
        let w = Arc::new(ModelWeights::zeros(WeightsMetadata::with_channels(vec![2])));
        // a 3-layer spectrum cannot hold a 5x5 DC patch
        match antialias_lightfield(&lf, &cfg, &CompletionOperator::Neural(w)) {
            Err(Error::Row { row, .. }) => assert!(row < 4),
            other => panic!("unexpected {other:?}"),
        }
        let ok = antialias_rows(&lf, &cfg, &CompletionOperator::AnalyticReplicate { inserted: 1 }, 1..3)
            .unwrap();
        assert_eq!(ok.stack.height(), 2);
        assert!(antialias_rows(&lf, &cfg, &CompletionOperator::AnalyticReplicate { inserted: 1 }, 2..9).is_err());
    }

    #[test]
    fn constant_4d_stays_constant() {
        let views = ndarray::Array5::from_elem((3, 3, 12, 12, 1), 0.25);
        let lf = LightField4D::new(views, 1, 1, 1.0, Default::default()).unwrap();
        let cfg = RefocusConfig::with_layers(-1.0, 0.25, 9).unwrap();
        let out = antialias_4d(&lf, &cfg, &CompletionOperator::AnalyticReplicate { inserted: 2 }).unwrap();
        assert!(out.stack.data().iter().all(|v| (v - 0.25).abs() < 1e-9));
    }
}
