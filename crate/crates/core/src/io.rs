//! On-disk formats.
//!
//! * Light field directories: `lightfield.json` plus one image per view,
//!   named `view_{v:03}_{u:03}.png` or `.pfm`.
//! * `FSTK` focal stacks and `FSSP` spectra: a small little-endian header
//!   followed by `f32` samples in `(N_C, H, W, C)` order. A JSON sidecar
//!   (`<file>.json`) carries the view geometry.
//! * `FSSW` network weights.
//! * PNG exports of layers, log-magnitude heatmaps and line masks; masks
//!   also get a run-length JSON sidecar.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};
use ndarray::{Array2, Array3, Array4, Array5};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::antialias::network::{ConvLayer, ModelWeights, WeightsMetadata};
use crate::error::{Error, Result};
use crate::lightfield::{DisparityRange, LightField3D, LightField4D};
use crate::refocus::FocalStack;
use crate::spectrum::{Fss, Provenance};

pub const MANIFEST_NAME: &str = "lightfield.json";
const FORMAT_VERSION: u32 = 1;
const CONV2D_KIND: u32 = 1;

/// `lightfield.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n_u: usize,
    #[serde(default = "one")]
    pub n_v: usize,
    pub u_ref: usize,
    #[serde(default)]
    pub v_ref: usize,
    pub baseline_unit: f64,
    #[serde(default)]
    pub disparity_range: DisparityRange,
}

fn one() -> usize {
    1
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if self.n_u == 0 || self.n_v == 0 {
            return Err(Error::Manifest("n_u and n_v must be >= 1".into()));
        }
        if self.u_ref >= self.n_u || self.v_ref >= self.n_v {
            return Err(Error::Manifest("reference view outside the view grid".into()));
        }
        if !(self.baseline_unit.is_finite() && self.baseline_unit > 0.0) {
            return Err(Error::Manifest("baseline_unit must be positive".into()));
        }
        DisparityRange::new(self.disparity_range.min, self.disparity_range.max)
            .map_err(|e| Error::Manifest(e.to_string()))?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|e| {
            Error::Manifest(format!("cannot read {}: {e}", path.display()))
        })?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormat {
    Png8,
    Png16,
    Pfm,
}

pub fn view_file_name(v: usize, u: usize, ext: &str) -> String {
    format!("view_{v:03}_{u:03}.{ext}")
}

fn find_view(dir: &Path, v: usize, u: usize) -> Result<PathBuf> {
    for ext in ["png", "pfm"] {
        let p = dir.join(view_file_name(v, u, ext));
        if p.exists() {
            return Ok(p);
        }
    }
    Err(Error::MissingView(dir.join(view_file_name(v, u, "png"))))
}

/// Read a PNG or PFM image as `[y, x, c]` in `[0, 1]` (PFM values are kept as is).
pub fn read_image(path: &Path) -> Result<Array3<f64>> {
    if path.extension().and_then(|e| e.to_str()) == Some("pfm") {
        return read_pfm(path);
    }
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let color = img.color();
    if color.has_color() {
        let buf = img.into_rgb32f();
        Ok(Array3::from_shape_fn((h, w, 3), |(y, x, c)| {
            buf.get_pixel(x as u32, y as u32)[c] as f64
        }))
    } else {
        let buf = img.into_luma16();
        Ok(Array3::from_shape_fn((h, w, 1), |(y, x, _)| {
            buf.get_pixel(x as u32, y as u32)[0] as f64 / 65535.0
        }))
    }
}

/// Write `[y, x, c]` (c = 1 or 3) as PNG or PFM. PNG values are clipped to `[0, 1]`.
pub fn write_image(path: &Path, img: &Array3<f64>, format: ImageFormat) -> Result<()> {
    let (h, w, c) = img.dim();
    if c != 1 && c != 3 {
        return Err(Error::invalid(format!("cannot write a {c}-channel image")));
    }
    let q = |v: f64, max: f64| (v.clamp(0.0, 1.0) * max).round();
    match (format, c) {
        (ImageFormat::Pfm, _) => write_pfm(path, img),
        (ImageFormat::Png8, 1) => Ok(ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
            Luma([q(img[[y as usize, x as usize, 0]], 255.0) as u8])
        })
        .save(path)?),
        (ImageFormat::Png8, _) => Ok(ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
            let p = |ch| q(img[[y as usize, x as usize, ch]], 255.0) as u8;
            Rgb([p(0), p(1), p(2)])
        })
        .save(path)?),
        (ImageFormat::Png16, 1) => Ok(ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
            Luma([q(img[[y as usize, x as usize, 0]], 65535.0) as u16])
        })
        .save(path)?),
        (ImageFormat::Png16, _) => Ok(ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
            let p = |ch| q(img[[y as usize, x as usize, ch]], 65535.0) as u16;
            Rgb([p(0), p(1), p(2)])
        })
        .save(path)?),
    }
}

fn read_pfm(path: &Path) -> Result<Array3<f64>> {
    let bytes = fs::read(path)?;
    let bad = |m: &str| Error::Format(format!("{}: {m}", path.display()));
    // header: three whitespace-separated tokens lines: type, "w h", scale
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if tokens.len() < 4 {
        return Err(bad("truncated header"));
    }
    let c = match tokens[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        _ => return Err(bad("not a PFM file")),
    };
    let w: usize = tokens[1].parse().map_err(|_| bad("bad width"))?;
    let h: usize = tokens[2].parse().map_err(|_| bad("bad height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| bad("bad scale"))?;
    let little = scale < 0.0;
    let data = bytes.get(pos..).ok_or_else(|| bad("truncated data"))?;
    if data.len() < w * h * c * 4 {
        return Err(bad("truncated data"));
    }
    let mut out = Array3::zeros((h, w, c));
    for (i, chunk) in data.chunks_exact(4).take(w * h * c).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (row, rest) = (i / (w * c), i % (w * c));
        // PFM rows run bottom to top
        out[[h - 1 - row, rest / c, rest % c]] = v as f64;
    }
    Ok(out)
}

fn write_pfm(path: &Path, img: &Array3<f64>) -> Result<()> {
    let (h, w, c) = img.dim();
    let mut f = BufWriter::new(File::create(path)?);
    write!(f, "{}\n{w} {h}\n-1.0\n", if c == 1 { "Pf" } else { "PF" })?;
    for y in (0..h).rev() {
        for x in 0..w {
            for ch in 0..c {
                f.write_all(&(img[[y, x, ch]] as f32).to_le_bytes())?;
            }
        }
    }
    f.flush()?;
    Ok(())
}

/// Load a light field directory. Returns a 4D field (with `n_v = 1` for 3D data).
pub fn load_lightfield(dir: &Path) -> Result<LightField4D> {
    let m = Manifest::read(dir)?;
    let mut views: Option<Array5<f64>> = None;
    for v in 0..m.n_v {
        for u in 0..m.n_u {
            let img = read_image(&find_view(dir, v, u)?)?;
            let (h, w, c) = img.dim();
            let all = views.get_or_insert_with(|| Array5::zeros((m.n_v, m.n_u, h, w, c)));
            if all.dim().2 != h || all.dim().3 != w || all.dim().4 != c {
                return Err(Error::dims(format!(
                    "view ({v}, {u}) is {h}x{w}x{c}, expected {}x{}x{}",
                    all.dim().2,
                    all.dim().3,
                    all.dim().4
                )));
            }
            all.slice_mut(ndarray::s![v, u, .., .., ..]).assign(&img);
        }
    }
    LightField4D::new(
        views.expect("n_u, n_v >= 1"),
        m.u_ref,
        m.v_ref,
        m.baseline_unit,
        m.disparity_range,
    )
}

/// Load a light field directory that must have a single view row.
pub fn load_lightfield_3d(dir: &Path) -> Result<LightField3D> {
    let lf = load_lightfield(dir)?;
    if lf.n_v() != 1 {
        return Err(Error::invalid(format!("expected n_v = 1, found {}", lf.n_v())));
    }
    lf.horizontal_slice(0)
}

pub fn save_lightfield(dir: &Path, lf: &LightField4D, format: ImageFormat) -> Result<()> {
    fs::create_dir_all(dir)?;
    let m = Manifest {
        n_u: lf.n_u(),
        n_v: lf.n_v(),
        u_ref: lf.u_ref(),
        v_ref: lf.v_ref(),
        baseline_unit: lf.baseline_unit(),
        disparity_range: lf.disparity_range(),
    };
    fs::write(dir.join(MANIFEST_NAME), serde_json::to_string_pretty(&m)?)?;
    let ext = if format == ImageFormat::Pfm { "pfm" } else { "png" };
    for v in 0..lf.n_v() {
        for u in 0..lf.n_u() {
            let img = lf.views().slice(ndarray::s![v, u, .., .., ..]).to_owned();
            write_image(&dir.join(view_file_name(v, u, ext)), &img, format)?;
        }
    }
    Ok(())
}

pub fn save_lightfield_3d(dir: &Path, lf: &LightField3D, format: ImageFormat) -> Result<()> {
    let views = lf.views().clone().insert_axis(ndarray::Axis(0));
    let lf4 = LightField4D::new(views, lf.u_ref(), 0, lf.baseline_unit(), lf.disparity_range())?;
    save_lightfield(dir, &lf4, format)
}

struct Reader<R: Read> {
    inner: R,
    what: &'static str,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {} file", self.what)),
            _ => Error::Io(e),
        })?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let mut raw = vec![0u8; n * 4];
        self.inner.read_exact(&mut raw).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {} file", self.what)),
            _ => Error::Io(e),
        })?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let m: [u8; 4] = self.bytes()?;
        if &m != expected {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {}",
                String::from_utf8_lossy(&m),
                self.what
            )));
        }
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported {} version {v}", self.what)));
        }
        Ok(())
    }

    fn at_end(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b)? {
            0 => Ok(()),
            _ => Err(Error::Format(format!("trailing bytes in {} file", self.what))),
        }
    }
}

fn open(path: &Path, what: &'static str) -> Result<Reader<BufReader<File>>> {
    Ok(Reader {
        inner: BufReader::new(File::open(path)?),
        what,
    })
}

fn write_header(f: &mut impl Write, magic: &[u8; 4], dims: [usize; 4], d_min: f64, da: f64) -> Result<()> {
    f.write_all(magic)?;
    f.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for d in dims {
        let d = u32::try_from(d).map_err(|_| Error::invalid("dimension exceeds u32"))?;
        f.write_all(&d.to_le_bytes())?;
    }
    f.write_all(&d_min.to_le_bytes())?;
    f.write_all(&da.to_le_bytes())?;
    Ok(())
}

fn read_dims<R: Read>(r: &mut Reader<R>) -> Result<([usize; 4], f64, f64)> {
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    if dims.contains(&0) {
        return Err(Error::Format(format!("zero dimension in {} header", r.what)));
    }
    dims.iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
        .filter(|&n| n < (1u64 << 34) && usize::try_from(n).is_ok())
        .ok_or_else(|| Error::Format(format!("{} dimensions too large", r.what)))?;
    let d_min = r.f64()?;
    let da = r.f64()?;
    if !(d_min.is_finite() && da.is_finite() && da > 0.0) {
        return Err(Error::Format(format!("bad focal axis in {} header", r.what)));
    }
    Ok((dims, d_min, da))
}

/// Write a focal stack as `FSTK`.
pub fn write_fstk(path: &Path, stack: &FocalStack) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    let (n, h, w, c) = stack.data().dim();
    write_header(&mut f, b"FSTK", [n, h, w, c], stack.d_min(), stack.delta_alpha())?;
    for v in stack.data().iter() {
        f.write_all(&(*v as f32).to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_fstk(path: &Path) -> Result<FocalStack> {
    let mut r = open(path, "FSTK")?;
    r.magic(b"FSTK")?;
    let ([n, h, w, c], d_min, da) = read_dims(&mut r)?;
    let vals = r.f32s(n * h * w * c)?;
    r.at_end()?;
    let data = Array4::from_shape_vec((n, h, w, c), vals.into_iter().map(f64::from).collect())
        .map_err(|e| Error::Format(e.to_string()))?;
    FocalStack::new(data, d_min, da, None).map_err(|e| Error::Format(e.to_string()))
}

/// Write a spectrum (single row) as `FSSP` with `H = 1` and complex flag set.
pub fn write_fssp(path: &Path, fss: &Fss) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    let (n, w, c) = fss.data().dim();
    let p = fss.provenance();
    write_header(&mut f, b"FSSP", [n, 1, w, c], p.d_min, p.delta_alpha)?;
    f.write_all(&1u32.to_le_bytes())?;
    for z in fss.data().iter() {
        f.write_all(&(z.re as f32).to_le_bytes())?;
        f.write_all(&(z.im as f32).to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Read an `FSSP` file as one spectrum per row.
pub fn read_fssp(path: &Path) -> Result<Vec<Fss>> {
    let mut r = open(path, "FSSP")?;
    r.magic(b"FSSP")?;
    let ([n, h, w, c], d_min, da) = read_dims(&mut r)?;
    let complex = r.u32()?;
    let per = if complex == 1 { 2 } else if complex == 0 { 1 } else {
        return Err(Error::Format(format!("bad complex flag {complex}")));
    };
    let vals = r.f32s(n * h * w * c * per)?;
    r.at_end()?;
    let at = |i: usize| {
        if per == 2 {
            Complex64::new(vals[2 * i] as f64, vals[2 * i + 1] as f64)
        } else {
            Complex64::new(vals[i] as f64, 0.0)
        }
    };
    let provenance = Provenance {
        d_min,
        delta_alpha: da,
        n_u: None,
        baseline_unit: None,
    };
    (0..h)
        .map(|y| {
            let data = Array3::from_shape_fn((n, w, c), |(k, x, ch)| at(((k * h + y) * w + x) * c + ch));
            Fss::new(data, provenance)
        })
        .collect()
}

/// Geometry sidecar written next to `FSTK` / `FSSP` files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackSidecar {
    pub n_u: usize,
    pub u_ref: usize,
    pub baseline_unit: f64,
    pub d_min: f64,
    pub delta_alpha: f64,
    pub n_layers: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_sidecar(path: &Path, sidecar: &StackSidecar) -> Result<()> {
    fs::write(sidecar_path(path), serde_json::to_string_pretty(sidecar)?)?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Option<StackSidecar>> {
    let p = sidecar_path(path);
    if !p.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(p)?)?))
}

/// Write network weights as `FSSW`.
///
/// Layout: magic, version, `u32` metadata length, metadata JSON, `u32`
/// layer count, then per layer `kind, ndims, dims..., weights, bias`.
pub fn write_fssw(path: &Path, weights: &ModelWeights) -> Result<()> {
    weights.validate()?;
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(b"FSSW")?;
    f.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let meta = serde_json::to_vec(&weights.metadata)?;
    f.write_all(&(meta.len() as u32).to_le_bytes())?;
    f.write_all(&meta)?;
    f.write_all(&(weights.layers.len() as u32).to_le_bytes())?;
    for l in &weights.layers {
        f.write_all(&CONV2D_KIND.to_le_bytes())?;
        f.write_all(&4u32.to_le_bytes())?;
        for d in [l.out_channels, l.in_channels, l.kernel, l.kernel] {
            f.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in l.weights.iter().chain(&l.bias) {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn read_fssw(path: &Path) -> Result<ModelWeights> {
    let mut r = open(path, "FSSW")?;
    r.magic(b"FSSW")?;
    let meta_len = r.u32()? as usize;
    if meta_len > 1 << 20 {
        return Err(Error::Format("FSSW metadata block too large".into()));
    }
    let mut meta = vec![0u8; meta_len];
    r.inner
        .read_exact(&mut meta)
        .map_err(|_| Error::Format("truncated FSSW file".into()))?;
    let metadata: WeightsMetadata =
        serde_json::from_slice(&meta).map_err(|e| Error::Format(format!("FSSW metadata: {e}")))?;
    metadata.validate()?;
    let expected = metadata.all_shapes();
    let n_layers = r.u32()? as usize;
    if n_layers != expected.len() {
        return Err(Error::Format(format!(
            "FSSW has {n_layers} layers, architecture needs {}",
            expected.len()
        )));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for (o, i, k) in expected {
        if r.u32()? != CONV2D_KIND {
            return Err(Error::Format("unknown FSSW layer kind".into()));
        }
        let nd = r.u32()? as usize;
        if nd != 4 {
            return Err(Error::Format(format!("conv layer with {nd} dims")));
        }
        let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|d| d as usize);
        if dims != [o, i, k, k] {
            return Err(Error::Format(format!(
                "layer shape {dims:?} does not match architecture {:?}",
                [o, i, k, k]
            )));
        }
        let weights = r.f32s(o * i * k * k)?;
        let bias = r.f32s(o)?;
        layers.push(ConvLayer {
            out_channels: o,
            in_channels: i,
            kernel: k,
            weights,
            bias,
        });
    }
    r.at_end()?;
    ModelWeights::new(metadata, layers)
}

/// Export layers `layers` of a stack as `layer_{k:03}.png`.
pub fn write_layer_pngs(dir: &Path, stack: &FocalStack, layers: &[usize]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    layers
        .iter()
        .map(|&k| {
            if k >= stack.n_layers() {
                return Err(Error::OutOfRange {
                    what: "layer",
                    index: k,
                    limit: stack.n_layers(),
                });
            }
            let p = dir.join(format!("layer_{k:03}.png"));
            write_image(&p, &stack.layer(k), ImageFormat::Png8)?;
            Ok(p)
        })
        .collect()
}

/// Grayscale PNG of a 2D map rescaled to its own `[min, max]`. Rows are `f`, columns `x`.
pub fn write_heatmap_png(path: &Path, map: &Array2<f64>) -> Result<()> {
    let (lo, hi) = map.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (n, w) = map.dim();
    ImageBuffer::from_fn(w as u32, n as u32, |x, y| {
        Luma([(((map[[y as usize, x as usize]] - lo) / span) * 255.0).round() as u8])
    })
    .save(path)?;
    Ok(())
}

/// Run-length encoding of a boolean mask: `[row, start, len]` runs of `true`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRle {
    pub rows: usize,
    pub cols: usize,
    pub runs: Vec<[usize; 3]>,
}

impl MaskRle {
    pub fn encode(mask: &Array2<bool>) -> Self {
        let (rows, cols) = mask.dim();
        let mut runs = Vec::new();
        for r in 0..rows {
            let mut c = 0;
            while c < cols {
                if mask[[r, c]] {
                    let start = c;
                    while c < cols && mask[[r, c]] {
                        c += 1;
                    }
                    runs.push([r, start, c - start]);
                } else {
                    c += 1;
                }
            }
        }
        Self { rows, cols, runs }
    }

    pub fn decode(&self) -> Result<Array2<bool>> {
        let mut m = Array2::from_elem((self.rows, self.cols), false);
        for &[r, s, l] in &self.runs {
            if r >= self.rows || s + l > self.cols {
                return Err(Error::Format("mask run out of bounds".into()));
            }
            for c in s..s + l {
                m[[r, c]] = true;
            }
        }
        Ok(m)
    }
}

/// Write a mask as a black/white PNG plus `<path>.json` run-length sidecar.
pub fn write_mask(path: &Path, mask: &Array2<bool>) -> Result<()> {
    let (n, w) = mask.dim();
    ImageBuffer::from_fn(w as u32, n as u32, |x, y| {
        Luma([if mask[[y as usize, x as usize]] { 255u8 } else { 0 }])
    })
    .save(path)?;
    fs::write(sidecar_path(path), serde_json::to_string(&MaskRle::encode(mask))?)?;
    Ok(())
}
