// `!(x < y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config_args;
mod framedir;
mod rank;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fvv_core::pipeline::{generate_synthetic_scene, reconstruct, sweep, write_sweep_csv, RigSpec, SceneSpec, SweepAxis};
use fvv_core::render::{render_view, OrbitPose, VirtualCamera, FALLBACK_COLOR};
use fvv_core::{load_rig, run_frame, CameraRig, PipelineConfig, SceneBundle, StageTimings};
use log::info;
use nalgebra::Vector3;

use config_args::{ConfigArgs, Triple};

#[derive(Parser)]
#[command(name = "fvv", version, about = "Multi-camera visual-hull reconstruction and free-viewpoint rendering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default pipeline configuration as TOML.
    DefaultConfig {
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic frame directory.
    Synth(SynthArgs),
    /// Reconstruct a frame directory into a scene bundle.
    Reconstruct(ReconstructArgs),
    /// Render a bundle from a virtual viewpoint.
    Render(RenderArgs),
    /// Time the pipeline over a range of voxel sizes on a synthetic scene.
    Sweep(SweepArgs),
    /// Emit camera rankings for an orbit of viewpoints as JSON.
    Rank(RankArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneName {
    TwoSpheres,
    MultiObject,
    UnitSphere,
    Sweep,
}

impl SceneName {
    fn spec(self) -> SceneSpec {
        match self {
            SceneName::TwoSpheres => SceneSpec::two_spheres(),
            SceneName::MultiObject => SceneSpec::multi_object(),
            SceneName::UnitSphere => SceneSpec::unit_sphere(),
            SceneName::Sweep => SceneSpec::sweep_scene(),
        }
    }
}

#[derive(clap::Args)]
struct SynthArgs {
    /// Built-in scene.
    #[arg(long, value_enum, default_value = "two-spheres")]
    scene: SceneName,
    /// Scene description in TOML; replaces --scene.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sensor noise standard deviation in 8-bit levels.
    #[arg(long)]
    noise: Option<f64>,
    /// Output frame directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ReconstructArgs {
    /// Frame directory; defaults to `paths.input` from the config.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Bundle directory; defaults to `paths.output` from the config.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    frame_id: u64,
    /// Use the directory's silhouette masks instead of extracting them.
    #[arg(long)]
    use_silhouettes: bool,
    /// Also write each camera's depth image as 16-bit PNG (near = bright).
    #[arg(long, value_name = "DIR")]
    depth_dir: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(clap::Args)]
struct RenderArgs {
    #[arg(long, short)]
    bundle: PathBuf,
    /// Output image (PNG).
    #[arg(long, short)]
    out: PathBuf,
    /// Also write a false-colour map of the source camera per pixel.
    #[arg(long, value_name = "PNG")]
    source_map: Option<PathBuf>,
    /// Render from this input camera's pose instead of an orbit pose.
    #[arg(long)]
    camera: Option<u32>,
    #[arg(long, value_name = "X,Y,Z", default_value = "0,0,1000", allow_hyphen_values = true)]
    target: Triple<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    azimuth: f64,
    #[arg(long, default_value_t = 15.0, allow_hyphen_values = true)]
    elevation: f64,
    #[arg(long, default_value_t = 7000.0)]
    radius: f64,
    #[arg(long, default_value_t = 960)]
    width: u32,
    #[arg(long, default_value_t = 540)]
    height: u32,
    /// Focal length in pixels.
    #[arg(long, default_value_t = 800.0)]
    focal: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Coarse,
    Fine,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Ascending voxel sizes in mm.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Runs per value; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Scene description in TOML; defaults to the built-in sweep scene.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// CSV output; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(clap::Args)]
struct RankArgs {
    /// Rig manifest, or a bundle / frame directory containing `rig.toml`.
    #[arg(long, conflicts_with = "ring")]
    rig: Option<PathBuf>,
    /// Use a built-in ring of this many cameras instead of a rig file.
    #[arg(long)]
    ring: Option<usize>,
    #[arg(long, default_value_t = 64)]
    poses: usize,
    #[arg(long, value_name = "X,Y,Z", default_value = "0,0,1000", allow_hyphen_values = true)]
    target: Triple<f64>,
    #[arg(long, default_value_t = 7000.0)]
    radius: f64,
    #[arg(long, default_value_t = 15.0, allow_hyphen_values = true)]
    elevation: f64,
    /// JSON output; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::DefaultConfig { out } => write_output(out.as_deref(), PipelineConfig::default().to_toml_string().as_bytes()),
        Command::Synth(a) => synth(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Render(a) => render(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Rank(a) => rank_cmd(a),
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().write_all(bytes)?),
    }
}

fn load_spec(path: &Path) -> Result<SceneSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing scene {}", path.display()))
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => load_spec(p)?,
        None => a.scene.spec(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(n) = a.noise {
        spec.noise_sigma = n;
    }
    let scene = generate_synthetic_scene(&spec)?;
    framedir::write_synthetic(&a.out, &spec, &scene)?;
    info!("wrote {} cameras, {} objects to {}", scene.rig.len(), scene.objects.len(), a.out.display());
    Ok(())
}

fn log_timings(t: &StageTimings) {
    let parts: Vec<String> = StageTimings::LABELS
        .iter()
        .zip(t.stages())
        .map(|(l, ms)| format!("{l} {ms:.1}"))
        .collect();
    info!("silhouettes {:.1} ms; {} ms; total {:.1} ms", t.silhouette_ms, parts.join(", "), t.total_ms());
}

fn reconstruct_cmd(a: ReconstructArgs) -> Result<()> {
    let cfg = a.config.resolve(PipelineConfig::default())?;
    let Some(input) = a.input.clone().or(cfg.paths.input.clone()) else {
        bail!("no input directory: pass --input or set paths.input");
    };
    let Some(out_dir) = a.out.clone().or(cfg.paths.output.clone()) else {
        bail!("no output directory: pass --out or set paths.output");
    };
    let inputs = framedir::read_inputs(&input)?;
    let out = if a.use_silhouettes {
        let sils = framedir::read_silhouettes(&input, &inputs.rig)?;
        let mut out = reconstruct(&cfg, &inputs.rig, a.frame_id, &inputs.frames, sils)?;
        out.bundle.timings = Some(out.timings);
        out
    } else {
        run_frame(&cfg, &inputs.rig, a.frame_id, &inputs.frames, &inputs.proposals, &inputs.backgrounds)?
    };
    out.bundle.write(&out_dir).with_context(|| format!("writing bundle {}", out_dir.display()))?;
    if let Some(dir) = &a.depth_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (cam, depth) in inputs.rig.iter().zip(&out.depths) {
            depth.save_png(&dir.join(format!("depth_cam{:03}.png", cam.id)))?;
        }
    }
    let s = out.bundle.stats;
    info!(
        "{} objects ({} components found), {} triangles, {} fine voxels",
        out.bundle.objects.len(),
        s.components_found,
        s.triangles,
        s.fine_voxels_occupied
    );
    log_timings(&out.timings);
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let bundle = SceneBundle::read(&a.bundle).with_context(|| format!("reading bundle {}", a.bundle.display()))?;
    let v = match a.camera {
        Some(id) => {
            let k = bundle.rig.position_of(id).with_context(|| format!("no camera {id} in the bundle"))?;
            VirtualCamera::from_camera(bundle.rig.get(k))?
        }
        None => {
            let pose = OrbitPose {
                target: a.target.vector(),
                azimuth_deg: a.azimuth,
                elevation_deg: a.elevation,
                radius: a.radius,
            };
            VirtualCamera::from_orbit(&pose, a.width, a.height, a.focal)?
        }
    };
    let mesh = bundle.scene_mesh();
    let img = render_view(&mesh, &bundle.rig, &bundle.textures, &bundle.visibility, &v, FALLBACK_COLOR)?;
    img.color.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.source_map {
        img.source_map_image().save(p).with_context(|| format!("writing {}", p.display()))?;
    }
    let covered = img.triangle.iter().filter(|&&t| t != fvv_core::visibility::NO_TRIANGLE).count();
    info!("{covered} covered pixels, {} with no visible source camera", img.fallback_pixels);
    Ok(())
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let base = PipelineConfig {
        stage: SceneSpec::sweep_stage(),
        ..PipelineConfig::default()
    };
    let cfg = a.config.resolve(base)?;
    let spec = match &a.spec {
        Some(p) => load_spec(p)?,
        None => SceneSpec::sweep_scene(),
    };
    let scene = generate_synthetic_scene(&spec)?;
    let axis = match a.axis {
        AxisArg::Coarse => SweepAxis::Coarse,
        AxisArg::Fine => SweepAxis::Fine,
    };
    let rows = sweep(&cfg, &scene, &scene.silhouettes, axis, &a.values, a.repeats)?;
    match &a.out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_sweep_csv(&rows, BufWriter::new(f))?;
        }
        None => write_sweep_csv(&rows, io::stdout().lock())?,
    }
    for r in &rows {
        info!("{:?} {} mm: total {:.1} ms", r.axis, r.value, r.timings.total_ms());
    }
    Ok(())
}

fn ring_rig(count: usize) -> Result<CameraRig> {
    if count == 0 {
        bail!("--ring needs at least one camera");
    }
    let spec = RigSpec {
        count,
        radius: 6000.0,
        heights: vec![1200.0, 2600.0],
        target: Vector3::new(0.0, 0.0, 1000.0),
        width: 1920,
        height: 1080,
        focal: 1500.0,
    };
    Ok(spec.build()?)
}

fn rank_cmd(a: RankArgs) -> Result<()> {
    let rig = match (&a.rig, a.ring) {
        (Some(p), _) => {
            let path = if p.is_dir() { p.join(framedir::RIG_FILE) } else { p.clone() };
            load_rig(&path).with_context(|| format!("loading {}", path.display()))?
        }
        (None, Some(n)) => ring_rig(n)?,
        (None, None) => bail!("pass --rig or --ring"),
    };
    if a.poses == 0 {
        bail!("--poses must be positive");
    }
    if !(a.radius > 0.0) {
        bail!("--radius must be positive");
    }
    let fixture = rank::orbit_fixture(&rig, a.poses, a.target.vector(), a.radius, a.elevation);
    let mut json = serde_json::to_string_pretty(&fixture)?;
    json.push('\n');
    write_output(a.out.as_deref(), json.as_bytes())
}
