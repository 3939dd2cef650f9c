use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use fss_core::antialias::{antialias_4d, antialias_rows, CompletionOperator};
use fss_core::cone::{
    detect_spectral_lines, energy_concentration, line_mask, support_mask, BinSpacing, ConeModel,
    SweepOptions,
};
use fss_core::io::{self, ImageFormat, StackSidecar};
use fss_core::lightfield::{extract_epi, render_synthetic_4d, LightField3D, LightField4D, Primitive, SyntheticSceneSpec};
use fss_core::metrics::{layer_report, relative_metrics, LayerReport};
use fss_core::refocus::{build_focal_stack, refocus_4d_two_stage, BoundaryPolicy, FocalStack, RefocusConfig};
use fss_core::spectrum::{conj_symmetry_residual, fss_forward};
use ndarray::{Array4, Axis};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::{Cli, Command, FocalArgs, Format, GeometryArgs, Op, Policy};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] fss_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input or usage, 1 for everything else.
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => core_code(e),
            CliError::Io(e) => io_code(e),
        }
    }
}

fn core_code(e: &fss_core::Error) -> u8 {
    use fss_core::Error as E;
    match e {
        E::Numerical(_) => 1,
        E::Io(e) => io_code(e),
        E::Row { source, .. } => core_code(source),
        _ => 2,
    }
}

fn io_code(e: &std::io::Error) -> u8 {
    match e.kind() {
        std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => 2,
        _ => 1,
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run(cli: &Cli) -> Result<()> {
    let summary = match &cli.command {
        Command::Gen { spec, out, format, seed } => gen(spec, out, *format, *seed)?,
        Command::Refocus { input, out, focal, rows, no_png } => {
            refocus(input, out, &focal_config(focal)?, rows.clone(), !no_png)?
        }
        Command::Fss { stack, out, row, heatmap } => spectrum(stack, out, *row, heatmap.as_deref())?,
        Command::Analyze {
            stack,
            out,
            row,
            geometry,
            line_dilation,
            support_dilation,
        } => analyze(stack, out, *row, geometry, *line_dilation, *support_dilation)?,
        Command::Antialias {
            input,
            out,
            focal,
            op,
            m,
            cutoff,
            weights,
            rows,
            gt,
        } => {
            let op = operator(*op, *m, *cutoff, weights.as_deref())?;
            antialias(input, out, &focal_config(focal)?, &op, rows.clone(), gt.as_deref())?
        }
        Command::Metrics { output, gt, csv } => metrics(output, gt, csv.as_deref(), cli.json)?,
    };
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&summary).expect("json value"));
    } else if let Value::Object(map) = &summary {
        for (k, v) in map {
            if !v.is_array() && !v.is_object() {
                println!("{k}: {v}");
            }
        }
    }
    Ok(())
}

fn focal_config(a: &FocalArgs) -> Result<RefocusConfig> {
    let cfg = match a.layers {
        Some(n) => RefocusConfig::with_layers(a.d_min, a.delta_alpha, n)?,
        None => RefocusConfig::new(a.d_min, a.d_max, a.delta_alpha)?,
    };
    Ok(cfg.with_policy(match a.policy {
        Policy::Renormalize => BoundaryPolicy::Renormalize,
        Policy::Zero => BoundaryPolicy::Zero,
    }))
}

fn operator(op: Op, m: Option<usize>, cutoff: Option<f64>, weights: Option<&Path>) -> Result<CompletionOperator> {
    let op = match op {
        Op::Analytic => CompletionOperator::AnalyticReplicate {
            inserted: m.ok_or_else(|| usage("--op analytic needs --m"))?,
        },
        Op::Lowpass => CompletionOperator::EpiLowpass {
            cutoff: cutoff.ok_or_else(|| usage("--op lowpass needs --cutoff"))?,
        },
        Op::Neural => {
            let path = weights.ok_or_else(|| usage("--op neural needs --weights"))?;
            CompletionOperator::Neural(Arc::new(io::read_fssw(path)?))
        }
    };
    op.validate()?;
    Ok(op)
}

fn gen(spec_path: &Path, out: &Path, format: Format, seed: Option<u64>) -> Result<Value> {
    let text = fs::read_to_string(spec_path)?;
    let mut spec: SyntheticSceneSpec =
        serde_json::from_str(&text).map_err(|e| usage(format!("malformed scene spec: {e}")))?;
    if let Some(base) = seed {
        for (i, p) in spec.primitives.iter_mut().enumerate() {
            if let Primitive::TexturedPlane { seed, .. } = p {
                *seed = base.wrapping_add(i as u64);
            }
        }
    }
    let rendered = render_synthetic_4d(&spec)?;
    let format = match format {
        Format::Png8 => ImageFormat::Png8,
        Format::Png16 => ImageFormat::Png16,
        Format::Pfm => ImageFormat::Pfm,
    };
    io::save_lightfield(out, &rendered.lightfield, format)?;
    Ok(json!({
        "out": out,
        "views": spec.n_u * spec.n_v,
        "width": spec.width,
        "height": spec.height,
        "clipped_primitives": rendered.clipped,
    }))
}

fn check_rows(rows: &Option<Range<usize>>, height: usize) -> Result<Range<usize>> {
    match rows {
        None => Ok(0..height),
        Some(r) if r.end <= height => Ok(r.clone()),
        Some(r) => Err(usage(format!("rows {}..{} outside 0..{height}", r.start, r.end))),
    }
}

fn stack_rows(lf: &LightField3D, cfg: &RefocusConfig, rows: Range<usize>) -> Result<FocalStack> {
    let stacks = rows
        .into_par_iter()
        .map(|y| build_focal_stack(&extract_epi(lf, y)?, cfg))
        .collect::<fss_core::Result<Vec<_>>>()?;
    Ok(FocalStack::from_rows(&stacks)?)
}

fn crop_rows(stack: &FocalStack, rows: Range<usize>) -> Result<FocalStack> {
    let parts = rows.map(|y| stack.row(y)).collect::<fss_core::Result<Vec<_>>>()?;
    Ok(FocalStack::from_rows(&parts)?)
}

fn stack_4d(lf: &LightField4D, cfg: &RefocusConfig) -> Result<FocalStack> {
    let layers: Vec<_> = cfg
        .focal_axis()
        .into_par_iter()
        .map(|f| refocus_4d_two_stage(lf, f, cfg.boundary_policy))
        .collect();
    let views: Vec<_> = layers.iter().map(|l| l.view()).collect();
    let data: Array4<f64> = ndarray::stack(Axis(0), &views).expect("equal layer shapes");
    Ok(FocalStack::new(data, cfg.d_min, cfg.delta_alpha, None)?)
}

fn sidecar(lf: &LightField4D, stack: &FocalStack) -> StackSidecar {
    StackSidecar {
        n_u: lf.n_u(),
        u_ref: lf.u_ref(),
        baseline_unit: lf.baseline_unit(),
        d_min: stack.d_min(),
        delta_alpha: stack.delta_alpha(),
        n_layers: stack.n_layers(),
    }
}

fn save_stack(out: &Path, lf: &LightField4D, stack: &FocalStack) -> Result<std::path::PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join("stack.fstk");
    io::write_fstk(&path, stack)?;
    io::write_sidecar(&path, &sidecar(lf, stack))?;
    Ok(path)
}

fn refocus(input: &Path, out: &Path, cfg: &RefocusConfig, rows: Option<Range<usize>>, png: bool) -> Result<Value> {
    let lf = io::load_lightfield(input)?;
    let rows = check_rows(&rows, lf.height())?;
    let stack = if lf.n_v() == 1 {
        stack_rows(&lf.horizontal_slice(0)?, cfg, rows.clone())?
    } else {
        crop_rows(&stack_4d(&lf, cfg)?, rows.clone())?
    };
    let path = save_stack(out, &lf, &stack)?;
    let pngs = if png {
        let all: Vec<usize> = (0..stack.n_layers()).collect();
        io::write_layer_pngs(&out.join("layers"), &stack, &all)?.len()
    } else {
        0
    };
    Ok(json!({
        "stack": path,
        "layers": stack.n_layers(),
        "rows": [rows.start, rows.end],
        "width": stack.width(),
        "pngs": pngs,
    }))
}

fn read_row(stack_path: &Path, row: usize) -> Result<(FocalStack, FocalStack)> {
    let stack = io::read_fstk(stack_path)?;
    if row >= stack.height() {
        return Err(usage(format!("row {row} outside 0..{}", stack.height())));
    }
    let slice = stack.row(row)?;
    Ok((stack, slice))
}

fn spectrum(stack_path: &Path, out: &Path, row: usize, heatmap: Option<&Path>) -> Result<Value> {
    let (_, slice) = read_row(stack_path, row)?;
    let fss = fss_forward(&slice)?;
    io::write_fssp(out, &fss)?;
    if let Some(h) = heatmap {
        io::write_heatmap_png(h, &fss.log_magnitude())?;
    }
    let (n, w) = fss.dims();
    Ok(json!({
        "spectrum": out,
        "row": row,
        "dims": [n, w],
        "energy": fss.energy(),
        "symmetry_residual": conj_symmetry_residual(&fss),
    }))
}

fn geometry(stack_path: &Path, g: &GeometryArgs) -> Result<(usize, usize, f64)> {
    let side = io::read_sidecar(stack_path)?;
    let n_u = g.n_u.or(side.map(|s| s.n_u));
    let u_ref = g.u_ref.or(side.map(|s| s.u_ref));
    let baseline = g.baseline.or(side.map(|s| s.baseline_unit));
    match (n_u, u_ref, baseline) {
        (Some(n), Some(r), Some(b)) => Ok((n, r, b)),
        _ => Err(usage("view geometry unknown: no sidecar, pass --n-u, --u-ref and --baseline")),
    }
}

fn analyze(
    stack_path: &Path,
    out: &Path,
    row: usize,
    g: &GeometryArgs,
    line_dilation: usize,
    support_dilation: usize,
) -> Result<Value> {
    let (n_u, u_ref, baseline) = geometry(stack_path, g)?;
    let (stack, slice) = read_row(stack_path, row)?;
    let fss = fss_forward(&slice)?;
    let model = ConeModel::new(stack.delta_alpha(), n_u, u_ref, baseline)?;
    let dims = fss.dims();
    let spacing = BinSpacing::new(dims.0, dims.1, stack.delta_alpha());
    let lines = line_mask(&model, dims, spacing, line_dilation);
    let support = support_mask(&model, dims, spacing, support_dilation);

    fs::create_dir_all(out)?;
    io::write_heatmap_png(&out.join("fss.png"), &fss.log_magnitude())?;
    io::write_mask(&out.join("line_mask.png"), &lines)?;
    io::write_mask(&out.join("support_mask.png"), &support)?;
    let detected: Vec<Value> = detect_spectral_lines(&fss, stack.delta_alpha(), &SweepOptions::default())
        .iter()
        .map(|l| json!({"angle_deg": l.angle.to_degrees(), "view_offset": l.view_offset, "energy": l.energy}))
        .collect();
    let report = json!({
        "row": row,
        "dims": [dims.0, dims.1],
        "symmetry_residual": conj_symmetry_residual(&fss),
        "apex_angle": model.apex_angle,
        "line_concentration": energy_concentration(&fss, &lines)?,
        "support_concentration": energy_concentration(&fss, &support)?,
        "predicted_lines": model.n_u,
        "detected_line_count": detected.len(),
        "detected_lines": detected,
    });
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report).expect("json value"))?;
    Ok(report)
}

fn antialias(
    input: &Path,
    out: &Path,
    cfg: &RefocusConfig,
    op: &CompletionOperator,
    rows: Option<Range<usize>>,
    gt: Option<&Path>,
) -> Result<Value> {
    let lf = io::load_lightfield(input)?;
    let rows = check_rows(&rows, lf.height())?;
    let result = if lf.n_v() == 1 {
        antialias_rows(&lf.horizontal_slice(0)?, cfg, op, rows.clone())?
    } else {
        let full = antialias_4d(&lf, cfg, op)?;
        fss_core::antialias::Antialiased {
            stack: crop_rows(&full.stack, rows.clone())?,
            max_imag_residual: full.max_imag_residual,
        }
    };
    let path = save_stack(out, &lf, &result.stack)?;
    let mut summary = json!({
        "stack": path,
        "operator": op.name(),
        "layers": result.stack.n_layers(),
        "rows": [rows.start, rows.end],
        "max_imag_residual": result.max_imag_residual,
    });
    if let Some(gt_dir) = gt {
        let report = compare_with_gt(&lf, gt_dir, cfg, rows, &result.stack)?;
        write_report(out, &report)?;
        merge(&mut summary, report.summary_json());
    }
    Ok(summary)
}

/// Output and plain refocus of the sparse input, both against the dense stack.
fn compare_with_gt(
    lf: &LightField4D,
    gt_dir: &Path,
    cfg: &RefocusConfig,
    rows: Range<usize>,
    output: &FocalStack,
) -> Result<LayerReport> {
    if lf.n_v() != 1 {
        return Err(usage("--gt is only supported for light fields with one view row"));
    }
    let dense = io::load_lightfield_3d(gt_dir)?;
    if dense.height() != lf.height() || dense.width() != lf.width() {
        return Err(usage("ground truth light field has different image size"));
    }
    let mut gt = stack_rows(&dense, cfg, rows.clone())?;
    let mut plain = stack_rows(&lf.horizontal_slice(0)?, cfg, rows)?;
    gt.clip_unit();
    plain.clip_unit();
    let out_report = layer_report(output, &gt)?;
    let in_report = layer_report(&plain, &gt)?;
    Ok(relative_metrics(&out_report, &in_report)?)
}

fn write_report(out: &Path, report: &LayerReport) -> Result<()> {
    let mut csv = fs::File::create(out.join("report.csv"))?;
    report.write_csv(&mut csv)?;
    csv.flush()?;
    fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(report).expect("json value"),
    )?;
    Ok(())
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn metrics(output: &Path, gt: &Path, csv: Option<&Path>, json_out: bool) -> Result<Value> {
    let out = io::read_fstk(output)?;
    let gt = io::read_fstk(gt)?;
    let report = layer_report(&out, &gt)?;
    match csv {
        Some(p) => report.write_csv(fs::File::create(p)?)?,
        None if !json_out => report.write_csv(std::io::stdout().lock())?,
        None => {}
    }
    let mut summary = report.summary_json();
    if json_out {
        merge(&mut summary, json!({ "per_layer": report.layers }));
    }
    Ok(summary)
}
