use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use colorvox::camera::{Camera, Intrinsics};
use colorvox::cvol::{load_grid, load_shape, save_grid, save_shape};
use colorvox::flow::{target_flow, FlowConfig, DEFAULT_DELTA_COLOR};
use colorvox::losses::{
    blend_loss, clr_regress_loss, cross_entropy_loss, grad_check, l2_shape_loss, msfcel,
    total_color_loss, ColorLossInputs, Gradient, LossInstance, LossKind, LossReport,
};
use colorvox::metrics::{
    build_palette, color_complexity, iou, surface_psnr, to_csv, ColorPalette, ColorSpace,
    MetricsRow, DEFAULT_K, DEFAULT_SEED, DEFAULT_T1, DEFAULT_T2,
};
use colorvox::ply::{save_ply, surface_vertices};
use colorvox::pnm::{load_view, save_view};
use colorvox::sampling::{blend, recalc_weights, sample_colors, SampleMode, ViewImage, DEFAULT_ALPHA};
use colorvox::synth::{
    direct_fit_demo, framing_focal, gen_scene, make_azimuth_cameras, presets, render_view,
    DemoConfig, SceneSpec,
};
use colorvox::volumes::{
    extract_surface, threshold_occupancy, ColorVolume, FlowVolume, GridDims, ShapeKind,
    ShapeVolume, SurfaceIndex, VoxelFrame, WeightVolume, DEFAULT_OCCUPANCY_THRESHOLD,
};

#[derive(Parser)]
#[command(name = "colorvox", version, about = "Colorful voxel reconstruction toolkit")]
struct Cli {
    /// Edge length of one voxel in world units.
    #[arg(long, global = true, default_value_t = 1.0)]
    voxel_size: f64,
    /// World position of the grid corner, as x,y,z.
    #[arg(long, global = true, value_parser = parse_vec3, default_value = "0,0,0")]
    origin: [f64; 3],
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize a scene description into shape and color volumes.
    GenScene(GenSceneArgs),
    /// Ray cast a view and its foreground mask.
    Render(RenderArgs),
    /// Write cameras evenly spaced in azimuth around the grid.
    Cameras(CamerasArgs),
    /// Ground-truth appearance flow for one view.
    FlowGen(FlowGenArgs),
    /// Sample surface colors from a view at the given flow.
    Sample(SampleArgs),
    /// Recalculate weights and blend sampled with regressed colors.
    Blend(BlendArgs),
    /// Evaluate a loss and optionally write its gradient.
    Loss(LossArgs),
    /// Compare analytic gradients with central differences.
    GradCheck(GradCheckArgs),
    /// IoU and surface PSNR of a prediction, as CSV.
    Metrics(MetricsArgs),
    /// Dataset palette and per-view color complexity.
    Complexity(ComplexityArgs),
    /// Fit prediction volumes directly to a synthetic scene.
    FitDemo(FitDemoArgs),
    /// Export colored surface voxels as an ASCII PLY point set.
    ExportPly(ExportPlyArgs),
}

#[derive(Args)]
struct GenSceneArgs {
    /// Scene file, or `preset:NAME` for a bundled scene.
    #[arg(long)]
    spec: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out_shape: PathBuf,
    #[arg(long)]
    out_color: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    shape: PathBuf,
    #[arg(long)]
    color: PathBuf,
    #[arg(long)]
    camera: PathBuf,
    #[arg(long)]
    out_view: PathBuf,
    #[arg(long)]
    out_mask: PathBuf,
}

#[derive(Args)]
struct CamerasArgs {
    #[arg(long, default_value_t = 12)]
    n: usize,
    /// Degrees above the horizontal plane.
    #[arg(long, default_value_t = 20.0)]
    elevation: f64,
    /// Distance from the grid center.
    #[arg(long)]
    radius: f64,
    /// Grid dimensions as WxHxD.
    #[arg(long, value_parser = parse_dims, conflicts_with = "shape")]
    dims: Option<GridDims>,
    /// Take the grid dimensions from this volume.
    #[arg(long)]
    shape: Option<PathBuf>,
    /// Square image size in pixels.
    #[arg(long, default_value_t = 128)]
    image_size: usize,
    /// Focal length in pixels; by default the grid fills 90% of the image.
    #[arg(long)]
    focal: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FlowGenArgs {
    #[arg(long)]
    shape: PathBuf,
    #[arg(long)]
    color: PathBuf,
    #[arg(long)]
    camera: PathBuf,
    #[arg(long)]
    view: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DELTA_COLOR)]
    delta_color: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Bilinear,
    NearestFg,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    view: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    flow: PathBuf,
    /// Shape volume whose surface selects the voxels to sample.
    #[arg(long)]
    surface_from: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Bilinear)]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BlendArgs {
    #[arg(long)]
    sampled: PathBuf,
    #[arg(long)]
    regressed: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// 1 keeps the raw weights.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Restrict blending to this shape's surface; all voxels otherwise.
    #[arg(long)]
    surface_from: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Msfcel,
    Ce,
    L2,
    Flow,
    Clr,
    Blend,
    Total,
}

impl From<KindArg> for LossKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Msfcel => LossKind::Msfcel,
            KindArg::Ce => LossKind::CrossEntropy,
            KindArg::L2 => LossKind::L2,
            KindArg::Flow => LossKind::Flow,
            KindArg::Clr => LossKind::ClrRegress,
            KindArg::Blend => LossKind::Blend,
            KindArg::Total => LossKind::Total,
        }
    }
}

#[derive(Args)]
struct LossArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    gt_shape: Option<PathBuf>,
    #[arg(long)]
    pred_shape: Option<PathBuf>,
    #[arg(long)]
    gt_color: Option<PathBuf>,
    #[arg(long)]
    target_flow: Option<PathBuf>,
    #[arg(long)]
    pred_flow: Option<PathBuf>,
    #[arg(long)]
    sampled: Option<PathBuf>,
    #[arg(long)]
    regressed: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Shape volume whose surface the color losses average over.
    #[arg(long)]
    surface_from: Option<PathBuf>,
    /// Gradient output. Losses with several gradients write one file per
    /// argument, suffixed with its name.
    #[arg(long)]
    grad_out: Option<PathBuf>,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Edge length of the random cubic instances.
    #[arg(long, default_value_t = 4)]
    size: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    gt_shape: PathBuf,
    #[arg(long)]
    gt_color: PathBuf,
    #[arg(long)]
    pred_shape: PathBuf,
    #[arg(long)]
    pred_color: PathBuf,
    #[arg(long, default_value_t = DEFAULT_OCCUPANCY_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value = "0")]
    id: String,
    #[arg(long = "view-id", default_value = "0")]
    view_id: String,
    /// Input view and mask for the color complexity column.
    #[arg(long, requires_all = ["mask", "palette"])]
    view: Option<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    palette: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_T2)]
    t2: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ComplexityArgs {
    /// Directory of NAME.ppm views with NAME.pgm masks.
    #[arg(long)]
    views: PathBuf,
    #[arg(long, default_value_t = DEFAULT_T1)]
    t1: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_T2)]
    t2: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    palette_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitDemoArgs {
    /// Scene file, or `preset:NAME`.
    #[arg(long, default_value = "preset:demo")]
    spec: String,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Camera file; by default the second of 12 azimuth cameras.
    #[arg(long)]
    camera: Option<PathBuf>,
    /// Per-iteration loss trajectory as CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct ExportPlyArgs {
    #[arg(long)]
    shape: PathBuf,
    #[arg(long)]
    color: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|_| "expected three comma separated numbers".into())
}

fn parse_dims(s: &str) -> Result<GridDims, String> {
    let v: Vec<usize> = s
        .split(['x', 'X'])
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [w, h, d] => GridDims::new(*w, *h, *d).map_err(|e| e.to_string()),
        _ => Err("expected WxHxD".into()),
    }
}

fn load_spec(spec: &str) -> Result<SceneSpec> {
    match spec.strip_prefix("preset:") {
        Some(name) => Ok(presets::preset(name)?),
        None => Ok(SceneSpec::load(spec)?),
    }
}

fn required<'a>(arg: &'a Option<PathBuf>, flag: &str, kind: &str) -> Result<&'a PathBuf> {
    arg.as_ref()
        .ok_or_else(|| anyhow!("--{flag} is required for --kind {kind}"))
}

fn check_dims(path: &Path, found: GridDims, expected: GridDims) -> Result<()> {
    if found != expected {
        bail!(
            "{}: volume is {found}, expected dims {expected}",
            path.display()
        );
    }
    Ok(())
}

fn gt_shape(path: &Path) -> Result<ShapeVolume> {
    Ok(load_shape(path, ShapeKind::GroundTruth)?)
}

fn color_like(path: &Path, dims: GridDims) -> Result<ColorVolume> {
    let g: ColorVolume = load_grid(path)?;
    check_dims(path, g.dims(), dims)?;
    Ok(g)
}

fn flow_like(path: &Path, dims: GridDims) -> Result<FlowVolume> {
    let g: FlowVolume = load_grid(path)?;
    check_dims(path, g.dims(), dims)?;
    Ok(g)
}

fn weights_like(path: &Path, dims: GridDims) -> Result<WeightVolume> {
    let g: WeightVolume = load_grid(path)?;
    check_dims(path, g.dims(), dims)?;
    Ok(g)
}

fn surface_of(path: &Path, dims: Option<GridDims>) -> Result<SurfaceIndex> {
    let shape = gt_shape(path)?;
    if let Some(d) = dims {
        check_dims(path, shape.dims(), d)?;
    }
    Ok(extract_surface(&shape))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn frame_of(cli: &Cli) -> Result<VoxelFrame> {
    Ok(VoxelFrame::new(cli.origin, cli.voxel_size)?)
}

fn run_gen_scene(a: &GenSceneArgs) -> Result<()> {
    let spec = load_spec(&a.spec)?;
    let (shape, color) = gen_scene(&spec, a.seed)?;
    save_shape(&shape, &a.out_shape)?;
    save_grid(&color, &a.out_color)?;
    println!(
        "dims={}\noccupied={}\nseed={}",
        spec.dims,
        shape.occupied_count(),
        a.seed
    );
    Ok(())
}

fn run_render(a: &RenderArgs, frame: &VoxelFrame) -> Result<()> {
    let shape = gt_shape(&a.shape)?;
    let color = color_like(&a.color, shape.dims())?;
    let cam = Camera::load(&a.camera)?;
    let view = render_view(&cam, &shape, &color, frame)?;
    save_view(&view, &a.out_view, &a.out_mask)?;
    println!("foreground={}\nbackground=1,1,1", view.foreground_count());
    Ok(())
}

fn run_cameras(a: &CamerasArgs, frame: &VoxelFrame) -> Result<()> {
    let dims = match (&a.dims, &a.shape) {
        (Some(d), _) => *d,
        (None, Some(p)) => load_shape(p, ShapeKind::Prediction)?.dims(),
        (None, None) => bail!("either --dims or --shape is required"),
    };
    let focal = match a.focal {
        Some(f) => f,
        None => framing_focal(&dims, frame, a.radius, a.image_size, 0.9)?,
    };
    let cams = make_azimuth_cameras(
        a.n,
        a.elevation,
        a.radius,
        &dims,
        frame,
        Intrinsics::centered(focal, a.image_size),
    )?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (k, cam) in cams.iter().enumerate() {
        cam.save(a.out.join(format!("cam_{k:02}.txt")))?;
    }
    println!("cameras={}\nfocal={focal}", cams.len());
    Ok(())
}

fn run_flow_gen(a: &FlowGenArgs, frame: &VoxelFrame) -> Result<()> {
    let shape = gt_shape(&a.shape)?;
    let color = color_like(&a.color, shape.dims())?;
    let cam = Camera::load(&a.camera)?;
    let view = load_view(&a.view, &a.mask)?;
    let surf = extract_surface(&shape);
    let cfg = FlowConfig {
        delta_color: a.delta_color,
        frame: *frame,
    };
    let flow = target_flow(&cam, &shape, &color, &surf, &view, &cfg)?;
    save_grid(&flow, &a.out)?;
    println!("surface_voxels={}", surf.len());
    Ok(())
}

fn run_sample(a: &SampleArgs) -> Result<()> {
    let view = load_view(&a.view, &a.mask)?;
    let flow: FlowVolume = load_grid(&a.flow)?;
    let surf = surface_of(&a.surface_from, Some(flow.dims()))?;
    let mode = match a.mode {
        ModeArg::Bilinear => SampleMode::Bilinear,
        ModeArg::NearestFg => SampleMode::NearestForeground,
    };
    let sampled = sample_colors(&view, &flow, &surf, mode)?;
    save_grid(&sampled, &a.out)?;
    println!("sampled={}", surf.len());
    Ok(())
}

fn run_blend(a: &BlendArgs) -> Result<()> {
    let sampled: ColorVolume = load_grid(&a.sampled)?;
    let dims = sampled.dims();
    let regressed = color_like(&a.regressed, dims)?;
    let weights = weights_like(&a.weights, dims)?;
    let surf = match &a.surface_from {
        Some(p) => surface_of(p, Some(dims))?,
        None => SurfaceIndex::from_sorted((0..dims.len()).collect())?,
    };
    let weights = recalc_weights(&weights, a.alpha)?;
    let out = blend(&sampled, &regressed, &weights, &surf)?;
    save_grid(&out, &a.out)?;
    println!("alpha={}\nblended={}", a.alpha, surf.len());
    Ok(())
}

fn grad_suffix(g: &Gradient) -> &'static str {
    match g {
        Gradient::Occupancy(_) => "occupancy",
        Gradient::Flow(_) => "flow",
        Gradient::Regressed(_) => "regressed",
        Gradient::Weights(_) => "weights",
    }
}

fn save_gradient(g: &Gradient, path: &Path) -> Result<()> {
    match g {
        Gradient::Occupancy(v) | Gradient::Weights(v) => save_grid(v, path)?,
        Gradient::Flow(v) => save_grid(v, path)?,
        Gradient::Regressed(v) => save_grid(v, path)?,
    }
    Ok(())
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{suffix}"),
    };
    path.with_file_name(name)
}

fn run_loss(a: &LossArgs) -> Result<()> {
    let kind = LossKind::from(a.kind);
    let name = kind.name();
    let report: LossReport = match kind {
        LossKind::Msfcel | LossKind::CrossEntropy | LossKind::L2 => {
            let gt_path = required(&a.gt_shape, "gt-shape", name)?;
            let pred_path = required(&a.pred_shape, "pred-shape", name)?;
            let gt = gt_shape(gt_path)?;
            let pred = load_shape(pred_path, ShapeKind::Prediction)?;
            check_dims(pred_path, pred.dims(), gt.dims())?;
            match kind {
                LossKind::Msfcel => msfcel(&gt, &pred)?,
                LossKind::CrossEntropy => cross_entropy_loss(&gt, &pred)?,
                _ => l2_shape_loss(&gt, &pred)?,
            }
        }
        _ => {
            let surf_path = required(&a.surface_from, "surface-from", name)?;
            let shape = gt_shape(surf_path)?;
            let dims = shape.dims();
            let surf = extract_surface(&shape);
            let color = |flag: &str, p: &Option<PathBuf>| color_like(required(p, flag, name)?, dims);
            let flow = |flag: &str, p: &Option<PathBuf>| flow_like(required(p, flag, name)?, dims);
            match kind {
                LossKind::Flow => {
                    let target = flow("target-flow", &a.target_flow)?;
                    let pred = flow("pred-flow", &a.pred_flow)?;
                    let (loss, grad) = colorvox::flow::flow_loss(&target, &pred, &surf)?;
                    LossReport {
                        loss,
                        terms: vec![(colorvox::losses::LossTerm::Flow, loss)],
                        grads: vec![Gradient::Flow(grad)],
                    }
                }
                LossKind::ClrRegress => clr_regress_loss(
                    &color("gt-color", &a.gt_color)?,
                    &color("regressed", &a.regressed)?,
                    &surf,
                )?,
                LossKind::Blend => blend_loss(
                    &color("gt-color", &a.gt_color)?,
                    &color("sampled", &a.sampled)?,
                    &color("regressed", &a.regressed)?,
                    &weights_like(required(&a.weights, "weights", name)?, dims)?,
                    &surf,
                )?,
                _ => {
                    let gt_color = color("gt-color", &a.gt_color)?;
                    let target = flow("target-flow", &a.target_flow)?;
                    let pred = flow("pred-flow", &a.pred_flow)?;
                    let sampled = color("sampled", &a.sampled)?;
                    let regressed = color("regressed", &a.regressed)?;
                    let weights = weights_like(required(&a.weights, "weights", name)?, dims)?;
                    total_color_loss(&ColorLossInputs {
                        gt_color: &gt_color,
                        target_flow: &target,
                        pred_flow: &pred,
                        sampled: &sampled,
                        regressed: &regressed,
                        weights: &weights,
                        surf: &surf,
                    })?
                }
            }
        }
    };
    let mut written = Vec::new();
    if let Some(out) = &a.grad_out {
        if let [g] = report.grads.as_slice() {
            save_gradient(g, out)?;
            written.push(out.clone());
        } else {
            for g in &report.grads {
                let p = suffixed(out, grad_suffix(g));
                save_gradient(g, &p)?;
                written.push(p);
            }
        }
    }
    let grads = written
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(",");
    print!("{}", report.to_kv((!grads.is_empty()).then_some(grads.as_str())));
    Ok(())
}

fn run_grad_check(a: &GradCheckArgs) -> Result<bool> {
    let kind = LossKind::from(a.kind);
    let dims = GridDims::cube(a.size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut worst: f64 = 0.0;
    for t in 0..a.trials {
        let instance = LossInstance::random(kind, dims, &mut rng);
        let r = grad_check(&instance, a.step)?;
        println!(
            "trial={t} max_rel_err={:e} compared={} excluded={}",
            r.max_rel_err, r.compared, r.excluded
        );
        worst = worst.max(r.max_rel_err);
    }
    let pass = worst < a.tolerance;
    println!(
        "kind={}\nmax_rel_err={worst:e}\nresult={}",
        kind.name(),
        if pass { "pass" } else { "fail" }
    );
    Ok(pass)
}

fn run_metrics(a: &MetricsArgs) -> Result<()> {
    let gt = gt_shape(&a.gt_shape)?;
    let dims = gt.dims();
    let gt_color = color_like(&a.gt_color, dims)?;
    let pred_raw = load_shape(&a.pred_shape, ShapeKind::Prediction)?;
    check_dims(&a.pred_shape, pred_raw.dims(), dims)?;
    let pred = threshold_occupancy(&pred_raw, a.threshold)?;
    let pred_color = color_like(&a.pred_color, dims)?;
    let color_complexity = match (&a.view, &a.mask, &a.palette) {
        (Some(v), Some(m), Some(p)) => {
            let view = load_view(v, m)?;
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let palette = ColorPalette::from_text(&text).with_context(|| p.display().to_string())?;
            Some(color_complexity(&view, &palette, a.t2))
        }
        _ => None,
    };
    let row = MetricsRow {
        id: a.id.clone(),
        view: a.view_id.clone(),
        iou: iou(&gt, &pred)?,
        psnr_rgb: surface_psnr(&gt, &gt_color, &pred, &pred_color, ColorSpace::Rgb)?,
        psnr_ycbcr: surface_psnr(&gt, &gt_color, &pred, &pred_color, ColorSpace::YCbCr)?,
        color_complexity,
    };
    write_text(&a.out, &to_csv(std::slice::from_ref(&row)))?;
    print!("{}", row.to_kv());
    Ok(())
}

fn run_complexity(a: &ComplexityArgs) -> Result<()> {
    let mut names: Vec<String> = fs::read_dir(&a.views)
        .with_context(|| format!("reading {}", a.views.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "ppm"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("{}: no .ppm views found", a.views.display());
    }
    let views: Vec<ViewImage> = names
        .iter()
        .map(|n| load_view(a.views.join(format!("{n}.ppm")), a.views.join(format!("{n}.pgm"))))
        .collect::<Result<_, _>>()?;
    let palette = build_palette(&views, a.t1, a.k, a.seed)?;
    let mut csv = String::from("view,color_complexity\n");
    for (n, v) in names.iter().zip(&views) {
        csv.push_str(&format!("{n},{}\n", color_complexity(v, &palette, a.t2)));
    }
    if let Some(p) = &a.palette_out {
        write_text(p, &palette.to_text())?;
    }
    match &a.out {
        Some(p) => write_text(p, &csv)?,
        None => print!("{csv}"),
    }
    eprintln!("palette_centers={} seed={}", palette.centers.len(), a.seed);
    Ok(())
}

fn run_fit_demo(a: &FitDemoArgs) -> Result<()> {
    let spec = load_spec(&a.spec)?;
    let (shape, color) = gen_scene(&spec, a.seed)?;
    let cam = match &a.camera {
        Some(p) => Camera::load(p)?,
        None => {
            let radius = 3.0 * spec.dims.w.max(spec.dims.h).max(spec.dims.d) as f64 * spec.frame.voxel_size;
            let focal = framing_focal(&spec.dims, &spec.frame, radius, 128, 0.9)?;
            make_azimuth_cameras(12, 20.0, radius, &spec.dims, &spec.frame, Intrinsics::centered(focal, 128))?
                .remove(1)
        }
    };
    let cfg = DemoConfig {
        iters: a.iters,
        lr: a.lr,
        seed: a.seed,
        ..DemoConfig::default()
    };
    let report = direct_fit_demo(&shape, &color, &spec.frame, &cam, &cfg)?;
    if let Some(p) = &a.trajectory {
        let mut csv = String::from("iteration,shape_loss,color_loss,l_flow,l_clr_regress,l_blend\n");
        for (i, (s, (c, t))) in report
            .shape_losses
            .iter()
            .zip(report.color_losses.iter().zip(&report.color_terms))
            .enumerate()
        {
            csv.push_str(&format!("{i},{s},{c},{},{},{}\n", t[0], t[1], t[2]));
        }
        write_text(p, &csv)?;
    }
    print!("{}", report.to_kv());
    Ok(())
}

fn run_export_ply(a: &ExportPlyArgs, frame: &VoxelFrame) -> Result<()> {
    let shape = load_shape(&a.shape, ShapeKind::Prediction)?;
    let shape = threshold_occupancy(&shape, DEFAULT_OCCUPANCY_THRESHOLD)?;
    let color = color_like(&a.color, shape.dims())?;
    let verts = surface_vertices(&shape, &color, frame)?;
    save_ply(&a.out, &verts)?;
    println!("vertices={}", verts.len());
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    let frame = frame_of(cli)?;
    match &cli.command {
        Command::GenScene(a) => run_gen_scene(a)?,
        Command::Render(a) => run_render(a, &frame)?,
        Command::Cameras(a) => run_cameras(a, &frame)?,
        Command::FlowGen(a) => run_flow_gen(a, &frame)?,
        Command::Sample(a) => run_sample(a)?,
        Command::Blend(a) => run_blend(a)?,
        Command::Loss(a) => run_loss(a)?,
        Command::GradCheck(a) => return run_grad_check(a),
        Command::Metrics(a) => run_metrics(a)?,
        Command::Complexity(a) => run_complexity(a)?,
        Command::FitDemo(a) => run_fit_demo(a)?,
        Command::ExportPly(a) => run_export_ply(a, &frame)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
