//! Library results against independent brute-force computations.

mod common;

use std::f64::consts::PI;

use fss_core::cone::{apex_angle, apex_angle_continuous, spatial_slope, ConeModel, Slope};
use fss_core::lightfield::{
    extract_epi, render_synthetic, render_synthetic_4d, Primitive, SyntheticSceneSpec,
};
use fss_core::metrics::{psnr, ssim, Psnr, SsimParams};
use fss_core::refocus::{
    build_focal_stack, refocus_4d_direct, BoundaryPolicy, FocalStack, RefocusConfig,
};
use fss_core::spectrum::{fss_forward, fss_inverse};
use ndarray::{Array3, Array4};
use num_complex::Complex64;
use rand::Rng;

use common::*;

/// Direct O(N^2 W^2) centered unitary DFT.
fn dft_oracle(plane: &ndarray::Array2<f64>) -> ndarray::Array2<Complex64> {
    let (n, w) = plane.dim();
    let (cn, cw) = ((n / 2) as f64, (w / 2) as f64);
    ndarray::Array2::from_shape_fn((n, w), |(i, j)| {
        let (kf, kx) = (i as f64 - cn, j as f64 - cw);
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..w {
                let phase = -2.0 * PI * (kf * a as f64 / n as f64 + kx * b as f64 / w as f64);
                acc += plane[[a, b]] * Complex64::from_polar(1.0, phase);
            }
        }
        acc / ((n * w) as f64).sqrt()
    })
}

#[test]
fn fss_matches_direct_dft() {
    let mut rng = rng(10);
    for &(n, w) in &[(1, 1), (2, 3), (7, 8), (9, 16), (12, 5)] {
        let slice = random_slice(&mut rng, n, w);
        let fss = fss_forward(&slice).unwrap();
        let oracle = dft_oracle(&slice.plane(0, 0));
        for ((i, j), z) in oracle.indexed_iter() {
            assert!((fss.data()[[i, j, 0]] - z).norm() < 1e-10, "{n}x{w} bin ({i},{j})");
        }
        assert_eq!(fss.dc_index(), (n / 2, w / 2));
    }
}

/// Shear-and-average with explicit linear interpolation, per pixel.
fn refocus_oracle(rows: &Array3<f64>, u_ref: usize, baseline: f64, f: f64) -> Vec<f64> {
    let (n_u, w, _) = rows.dim();
    (0..w)
        .map(|x| {
            let mut sum = 0.0;
            let mut count = 0;
            for u in 0..n_u {
                let pos = x as f64 + f * (u as f64 - u_ref as f64) * baseline;
                if pos < 0.0 || pos > (w - 1) as f64 {
                    continue;
                }
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(w - 1);
                let t = pos - lo as f64;
                sum += (1.0 - t) * rows[[u, lo, 0]] + t * rows[[u, hi, 0]];
                count += 1;
            }
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect()
}

#[test]
fn focal_stack_matches_shear_and_average() {
    let mut rng = rng(11);
    let rows = Array3::from_shape_fn((7, 40, 1), |_| rng.gen::<f64>());
    let epi = fss_core::lightfield::Epi::new(rows.clone(), 3, 1.5).unwrap();
    let cfg = RefocusConfig::with_layers(-1.0, 0.13, 16).unwrap();
    let stack = build_focal_stack(&epi, &cfg).unwrap();
    for (k, &f) in stack.focal_axis().iter().enumerate() {
        let oracle = refocus_oracle(&rows, 3, 1.5, f);
        for (x, v) in oracle.iter().enumerate() {
            assert!((stack.data()[[k, 0, x, 0]] - v).abs() < 1e-12, "layer {k} x {x}");
        }
    }
}

#[test]
fn point_epi_line_slope() {
    // least-squares fit over per-view centroids; slope in px per view is d * baseline
    for &(d, baseline) in &[(0.5, 1.0), (-0.3, 2.0), (0.9, 1.0)] {
        let mut spec = SyntheticSceneSpec::new(200, 1, 9, 4).with_primitive(Primitive::Point {
            x: 100.0,
            y: None,
            disparity: d,
            intensity: 1.0,
        });
        spec.baseline_unit = baseline;
        let epi = extract_epi(&render_synthetic(&spec).unwrap().lightfield, 0).unwrap();
        let u: Vec<f64> = (0..9).map(|u| u as f64).collect();
        let x: Vec<f64> = (0..9).map(|r| moments(epi.data().slice(ndarray::s![r, .., 0])).0).collect();
        let slope = fit_slope(&u, &x);
        assert!((slope - d * baseline).abs() < 0.05, "d {d}: slope {slope}");
        assert!((x[4] - 100.0).abs() < 1e-9);
    }
}

#[test]
fn point_render_against_direct_splat() {
    // a point at 30.25 + 0.5 * (u - 2): mass splits linearly between neighbours
    let spec = SyntheticSceneSpec::new(64, 1, 5, 2).with_primitive(Primitive::Point {
        x: 30.25,
        y: None,
        disparity: 0.5,
        intensity: 1.0,
    });
    let lf = render_synthetic(&spec).unwrap().lightfield;
    for u in 0..5 {
        let pos = 30.25 + 0.5 * (u as f64 - 2.0);
        let lo = pos.floor() as usize;
        let t = pos - lo as f64;
        for x in 0..64 {
            let expected = if x == lo {
                1.0 - t
            } else if x == lo + 1 {
                t
            } else {
                0.0
            };
            assert!((lf.views()[[u, 0, x, 0]] - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn four_d_refocus_matches_bilinear_oracle() {
    let mut rng = rng(12);
    let views = ndarray::Array5::from_shape_fn((3, 3, 10, 12, 1), |_| rng.gen::<f64>());
    let lf = fss_core::lightfield::LightField4D::new(views.clone(), 1, 1, 1.0, Default::default()).unwrap();
    let d = 0.37;
    let img = refocus_4d_direct(&lf, d, BoundaryPolicy::Zero);
    for y in 0..10 {
        for x in 0..12 {
            let mut sum = 0.0;
            for v in 0..3 {
                for u in 0..3 {
                    let sy = y as f64 + d * (v as f64 - 1.0);
                    let sx = x as f64 + d * (u as f64 - 1.0);
                    if sy < 0.0 || sy > 9.0 || sx < 0.0 || sx > 11.0 {
                        continue;
                    }
                    let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
                    let (y1, x1) = ((y0 + 1).min(9), (x0 + 1).min(11));
                    let (ty, tx) = (sy - y0 as f64, sx - x0 as f64);
                    let p = |a: usize, b: usize| views[[v, u, a, b, 0]];
                    sum += (1.0 - ty) * ((1.0 - tx) * p(y0, x0) + tx * p(y0, x1))
                        + ty * ((1.0 - tx) * p(y1, x0) + tx * p(y1, x1));
                }
            }
            assert!((img[[y, x, 0]] - sum / 9.0).abs() < 1e-12);
        }
    }
}

#[test]
fn four_d_point_focuses_sharply() {
    let spec = SyntheticSceneSpec {
        n_v: 5,
        v_ref: 2,
        baseline_unit: 2.0,
        ..SyntheticSceneSpec::new(32, 32, 5, 2)
    }
    .with_primitive(Primitive::Point {
        x: 15.0,
        y: Some(17.0),
        disparity: 0.5,
        intensity: 1.0,
    });
    let lf = render_synthetic_4d(&spec).unwrap().lightfield;
    let img = refocus_4d_direct(&lf, 0.5, BoundaryPolicy::Renormalize);
    assert!((img[[17, 15, 0]] - 1.0).abs() < 1e-12);
    assert!((img.sum() - 1.0).abs() < 1e-9);
}

#[test]
fn cone_constants() {
    // 2 atan(0.5 * 0.01 * 120) = 2 atan(0.6)
    assert!((apex_angle(0.01, 121) - 1.080_839_000_541_168).abs() < 1e-12);
    assert!((apex_angle_continuous(121) - 2.0 * 60f64.atan()).abs() < 1e-15);
    assert_eq!(apex_angle(0.01, 1), 0.0);
    assert_eq!(spatial_slope(0.01, 6, 4), Slope::Finite(50.0));
    let cfg = RefocusConfig::default();
    assert_eq!(cfg.n_layers(), 199);
    assert_eq!(cfg.delta_alpha, 0.01);
    let m = ConeModel::new(0.01, 9, 4, 15.0).unwrap();
    assert_eq!(m.spectral_lines.len(), 9);
    assert_eq!(m.max_offset(), 60.0);
}

#[test]
fn inverse_of_direct_dft_recovers_slice() {
    let mut rng = rng(13);
    let data = Array4::from_shape_fn((11, 1, 14, 2), |_| rng.gen::<f64>());
    let slice = FocalStack::new(data.clone(), 0.0, 0.1, None).unwrap();
    let back = fss_inverse(&fss_forward(&slice).unwrap()).unwrap();
    assert!(back.imag_residual < 1e-12);
    let err = (back.stack.data() - &data).mapv(f64::abs).fold(0.0, |m: f64, &v| m.max(v));
    assert!(err < 1e-12);
}

#[test]
fn psnr_and_ssim_reference_values() {
    let a = Array3::from_elem((16, 16, 1), 0.5);
    let b = a.mapv(|v| v + 0.1);
    // MSE 0.01 at peak 1 -> 20 dB
    assert!((psnr(a.view(), b.view(), 1.0).unwrap().db() - 20.0).abs() < 1e-9);
    assert_eq!(psnr(a.view(), a.view(), 1.0).unwrap(), Psnr::Infinite);
    // constant images: SSIM reduces to the luminance term
    let (mu_a, mu_b, c1) = (0.5f64, 0.6f64, (0.01f64).powi(2));
    let expected = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
    let s = ssim(a.view(), b.view(), &SsimParams::default()).unwrap();
    assert!((s - expected).abs() < 1e-12);
}
