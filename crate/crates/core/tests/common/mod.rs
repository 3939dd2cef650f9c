#![allow(dead_code)]

use fss_core::lightfield::{
    downsample_views, render_synthetic, LightField3D, Primitive, SyntheticSceneSpec,
};
use ndarray::{Array4, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fss_core::refocus::FocalStack;

pub const DENSE_VIEWS: usize = 121;
pub const DENSE_REF: usize = 60;

/// A single point at `x0` seen by 121 views with unit baseline.
pub fn dense_point(x0: f64, d: f64, width: usize) -> LightField3D {
    let spec = SyntheticSceneSpec::new(width, 1, DENSE_VIEWS, DENSE_REF).with_primitive(Primitive::Point {
        x: x0,
        y: None,
        disparity: d,
        intensity: 1.0,
    });
    render_synthetic(&spec).unwrap().lightfield
}

/// Dense field and its view-subsampled versions (factor 1 returns a clone).
pub fn subsample(lf: &LightField3D, factor: usize) -> LightField3D {
    if factor == 1 {
        lf.clone()
    } else {
        downsample_views(lf, factor).unwrap()
    }
}

/// Three textured planes at different disparities, 121 dense views.
pub fn mixed_scene(height: usize) -> LightField3D {
    let plane = |x_start, x_end, disparity, seed, smooth, lo: f64, hi: f64| Primitive::TexturedPlane {
        x_start,
        x_end,
        y_start: None,
        y_end: None,
        disparity,
        seed,
        smooth,
        lo: Some(lo),
        hi: Some(hi),
    };
    let spec = SyntheticSceneSpec::new(512, height, DENSE_VIEWS, DENSE_REF)
        .with_primitive(plane(0, 512, -0.6, 1, 2, 0.1, 0.9))
        .with_primitive(plane(160, 340, 0.5, 2, 2, 0.0, 1.0))
        .with_primitive(plane(380, 450, 0.1, 3, 1, 0.2, 0.8));
    render_synthetic(&spec).unwrap().lightfield
}

/// Textured planes, all at zero disparity.
pub fn flat_scene(height: usize) -> LightField3D {
    let spec = SyntheticSceneSpec::new(512, height, DENSE_VIEWS, DENSE_REF)
        .with_primitive(Primitive::TexturedPlane {
            x_start: 0,
            x_end: 512,
            y_start: None,
            y_end: None,
            disparity: 0.0,
            seed: 11,
            smooth: 1,
            lo: Some(0.0),
            hi: Some(1.0),
        })
        .with_primitive(Primitive::TexturedPlane {
            x_start: 200,
            x_end: 300,
            y_start: None,
            y_end: None,
            disparity: 0.0,
            seed: 12,
            smooth: 0,
            lo: Some(0.3),
            hi: Some(0.6),
        });
    render_synthetic(&spec).unwrap().lightfield
}

/// Single-row focal stack slice of uniform random values.
pub fn random_slice(rng: &mut ChaCha8Rng, n: usize, w: usize) -> FocalStack {
    let data = Array4::from_shape_fn((n, 1, w, 1), |_| rng.gen::<f64>());
    FocalStack::new(data, -1.0, 0.01, None).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mass-weighted mean and variance of a non-negative profile.
pub fn moments(row: ArrayView1<f64>) -> (f64, f64) {
    let total: f64 = row.sum();
    let mean = row.iter().enumerate().map(|(i, v)| i as f64 * v).sum::<f64>() / total;
    let var = row
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 - mean).powi(2) * v)
        .sum::<f64>()
        / total;
    (mean, var)
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn rms(a: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in a {
        s += v * v;
        n += 1;
    }
    (s / n as f64).sqrt()
}
