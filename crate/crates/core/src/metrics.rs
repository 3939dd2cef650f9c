//! Image quality and spectral metrics, and per-layer reports over focal stacks.

use std::fmt;
use std::io::Write;

use ndarray::{s, Array2, ArrayView2, ArrayView3};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::refocus::FocalStack;
use crate::spectrum::{fss_forward, Fss};

/// PSNR in dB. Identical inputs give [`Psnr::Infinite`] rather than a sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn is_infinite(self) -> bool {
        matches!(self, Psnr::Infinite)
    }

    pub fn db(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v:.6}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Finite(v) => s.serialize_f64(*v),
            Psnr::Infinite => s.serialize_str("inf"),
        }
    }
}

fn serialize_signed<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(x) if x.is_finite() => s.serialize_f64(*x),
        Some(x) if *x > 0.0 => s.serialize_str("inf"),
        Some(_) => s.serialize_str("-inf"),
    }
}

fn same_dims(a: &ArrayView3<f64>, b: &ArrayView3<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::dims(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

/// `10 log10(peak^2 / MSE)` over all pixels and channels of `[y, x, c]` images.
pub fn psnr(a: ArrayView3<f64>, b: ArrayView3<f64>, peak: f64) -> Result<Psnr> {
    same_dims(&a, &b)?;
    if a.is_empty() {
        return Err(Error::invalid("empty image"));
    }
    let mse = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    Ok(if mse == 0.0 {
        Psnr::Infinite
    } else {
        Psnr::Finite(10.0 * (peak * peak / mse).log10())
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    pub peak: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 8,
            k1: 0.01,
            k2: 0.03,
            peak: 1.0,
        }
    }
}

/// Summed-area table with a zero border row/column.
fn integral(img: &Array2<f64>) -> Array2<f64> {
    let (h, w) = img.dim();
    let mut t = Array2::zeros((h + 1, w + 1));
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += img[[y, x]];
            t[[y + 1, x + 1]] = t[[y, x + 1]] + row;
        }
    }
    t
}

fn box_sum(t: &Array2<f64>, y: usize, x: usize, wh: usize, ww: usize) -> f64 {
    t[[y + wh, x + ww]] - t[[y, x + ww]] - t[[y + wh, x]] + t[[y, x]]
}

fn ssim_plane(a: ArrayView2<f64>, b: ArrayView2<f64>, wh: usize, ww: usize, p: &SsimParams) -> f64 {
    let (h, w) = a.dim();
    let a = a.to_owned();
    let b = b.to_owned();
    let ta = integral(&a);
    let tb = integral(&b);
    let taa = integral(&(&a * &a));
    let tbb = integral(&(&b * &b));
    let tab = integral(&(&a * &b));
    let c1 = (p.k1 * p.peak).powi(2);
    let c2 = (p.k2 * p.peak).powi(2);
    let n = (wh * ww) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - wh {
        for x in 0..=w - ww {
            let ma = box_sum(&ta, y, x, wh, ww) / n;
            let mb = box_sum(&tb, y, x, wh, ww) / n;
            let va = (box_sum(&taa, y, x, wh, ww) / n - ma * ma).max(0.0);
            let vb = (box_sum(&tbb, y, x, wh, ww) / n - mb * mb).max(0.0);
            let cov = box_sum(&tab, y, x, wh, ww) / n - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

/// Mean SSIM over all `window x window` positions, averaged over channels.
pub fn ssim(a: ArrayView3<f64>, b: ArrayView3<f64>, params: &SsimParams) -> Result<f64> {
    same_dims(&a, &b)?;
    let (h, w, _) = a.dim();
    if params.window == 0 || h < params.window || w < params.window {
        return Err(Error::invalid(format!(
            "image {h}x{w} is smaller than the SSIM window {}",
            params.window
        )));
    }
    Ok(ssim_windowed(a, b, params.window, params.window, params))
}

/// SSIM with the window shrunk to fit images smaller than `params.window`.
pub fn ssim_fitted(a: ArrayView3<f64>, b: ArrayView3<f64>, params: &SsimParams) -> Result<f64> {
    same_dims(&a, &b)?;
    let (h, w, _) = a.dim();
    if h == 0 || w == 0 {
        return Err(Error::invalid("empty image"));
    }
    Ok(ssim_windowed(a, b, params.window.min(h), params.window.min(w), params))
}

fn ssim_windowed(a: ArrayView3<f64>, b: ArrayView3<f64>, wh: usize, ww: usize, p: &SsimParams) -> f64 {
    let c = a.dim().2;
    (0..c)
        .map(|ch| ssim_plane(a.slice(s![.., .., ch]), b.slice(s![.., .., ch]), wh, ww, p))
        .sum::<f64>()
        / c as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerMetrics {
    pub layer: usize,
    pub f: f64,
    pub psnr_db: Psnr,
    pub ssim: f64,
    #[serde(serialize_with = "serialize_signed")]
    pub rel_psnr_db: Option<f64>,
    pub rel_ssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerReport {
    pub layers: Vec<LayerMetrics>,
    pub mean_psnr_db: Psnr,
    pub mean_ssim: f64,
    #[serde(serialize_with = "serialize_signed")]
    pub mean_rel_psnr_db: Option<f64>,
    pub mean_rel_ssim: Option<f64>,
    pub spectral_energy_loss: Option<f64>,
}

fn mean_psnr(values: impl Iterator<Item = Psnr>) -> Psnr {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        match v {
            Psnr::Infinite => return Psnr::Infinite,
            Psnr::Finite(x) => {
                sum += x;
                n += 1;
            }
        }
    }
    Psnr::Finite(if n == 0 { 0.0 } else { sum / n as f64 })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl LayerReport {
    fn from_layers(layers: Vec<LayerMetrics>, spectral_energy_loss: Option<f64>) -> Self {
        let has_rel = layers.iter().all(|l| l.rel_psnr_db.is_some());
        Self {
            mean_psnr_db: mean_psnr(layers.iter().map(|l| l.psnr_db)),
            mean_ssim: mean(layers.iter().map(|l| l.ssim)),
            mean_rel_psnr_db: has_rel
                .then(|| mean(layers.iter().map(|l| l.rel_psnr_db.unwrap_or(0.0)))),
            mean_rel_ssim: has_rel.then(|| mean(layers.iter().map(|l| l.rel_ssim.unwrap_or(0.0)))),
            layers,
            spectral_energy_loss,
        }
    }

    /// One row per layer: `layer,f,psnr_db,ssim,rel_psnr_db,rel_ssim`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "layer,f,psnr_db,ssim,rel_psnr_db,rel_ssim")?;
        for l in &self.layers {
            let rel_p = l.rel_psnr_db.map(fmt_signed).unwrap_or_default();
            let rel_s = l.rel_ssim.map(|v| format!("{v:.6}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.4},{},{:.6},{},{}",
                l.layer, l.f, l.psnr_db, l.ssim, rel_p, rel_s
            )?;
        }
        Ok(())
    }

    /// Aggregates only.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "layers": self.layers.len(),
            "mean_psnr_db": self.mean_psnr_db,
            "mean_ssim": self.mean_ssim,
            "mean_rel_psnr_db": self.mean_rel_psnr_db.map(fmt_json_signed),
            "mean_rel_ssim": self.mean_rel_ssim,
            "spectral_energy_loss": self.spectral_energy_loss,
        })
    }
}

fn fmt_signed(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_json_signed(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!(fmt_signed(v))
    }
}

fn same_axis(a: &FocalStack, b: &FocalStack) -> Result<()> {
    if a.data().dim() != b.data().dim() {
        return Err(Error::dims(format!(
            "stacks differ: {:?} vs {:?}",
            a.data().dim(),
            b.data().dim()
        )));
    }
    if a.focal_axis()
        .iter()
        .zip(b.focal_axis())
        .any(|(x, y)| (x - y).abs() > 1e-9)
    {
        return Err(Error::dims("stacks have different focal axes"));
    }
    Ok(())
}

/// Per-layer PSNR and SSIM of `output` against `gt`, plus the row-averaged
/// spectral energy loss.
pub fn layer_report(output: &FocalStack, gt: &FocalStack) -> Result<LayerReport> {
    same_axis(output, gt)?;
    let params = SsimParams::default();
    let layers = (0..output.n_layers())
        .into_par_iter()
        .map(|k| {
            let o = output.data().slice(s![k, .., .., ..]);
            let g = gt.data().slice(s![k, .., .., ..]);
            Ok(LayerMetrics {
                layer: k,
                f: output.focal_axis()[k],
                psnr_db: psnr(o, g, 1.0)?,
                ssim: ssim_fitted(o, g, &params)?,
                rel_psnr_db: None,
                rel_ssim: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let loss = stack_spectral_energy_loss(gt, output).ok();
    Ok(LayerReport::from_layers(layers, loss))
}

/// `output - input` per layer and metric. Identical infinite PSNRs differ by 0.
pub fn relative_metrics(output: &LayerReport, input: &LayerReport) -> Result<LayerReport> {
    if output.layers.len() != input.layers.len() {
        return Err(Error::dims(format!(
            "layer counts differ: {} vs {}",
            output.layers.len(),
            input.layers.len()
        )));
    }
    let layers = output
        .layers
        .iter()
        .zip(&input.layers)
        .map(|(o, i)| {
            if (o.f - i.f).abs() > 1e-9 {
                return Err(Error::dims(format!("layer {} focal values differ", o.layer)));
            }
            let rel = match (o.psnr_db, i.psnr_db) {
                (Psnr::Infinite, Psnr::Infinite) => 0.0,
                (a, b) => a.db() - b.db(),
            };
            Ok(LayerMetrics {
                rel_psnr_db: Some(rel),
                rel_ssim: Some(o.ssim - i.ssim),
                ..o.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LayerReport::from_layers(layers, output.spectral_energy_loss))
}

/// `|E_gt - E_out| / E_gt` with `E = sum |F|^2`.
pub fn spectral_energy_loss(gt: &Fss, out: &Fss) -> Result<f64> {
    if gt.data().dim() != out.data().dim() {
        return Err(Error::dims("spectra differ in shape"));
    }
    let e_gt = gt.energy();
    if e_gt <= 0.0 {
        return Err(Error::Numerical("ground-truth spectrum has zero energy".into()));
    }
    Ok((e_gt - out.energy()).abs() / e_gt)
}

/// [`spectral_energy_loss`] averaged over rows with non-zero ground-truth energy.
pub fn stack_spectral_energy_loss(gt: &FocalStack, out: &FocalStack) -> Result<f64> {
    same_axis(gt, out)?;
    let losses = (0..gt.height())
        .map(|y| {
            let g = fss_forward(&gt.row(y)?)?;
            let o = fss_forward(&out.row(y)?)?;
            Ok(if g.energy() > 0.0 {
                Some(spectral_energy_loss(&g, &o)?)
            } else {
                None
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let valid: Vec<f64> = losses.into_iter().flatten().collect();
    if valid.is_empty() {
        return Err(Error::Numerical("ground-truth stack has zero energy".into()));
    }
    Ok(mean(valid.into_iter()))
}
