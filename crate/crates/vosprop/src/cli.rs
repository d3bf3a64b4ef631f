//! Command-line interface: `synth`, `saliency`, `segment` and `evaluate`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use vosprop_core::diffusion::diffuse;
use vosprop_core::metrics::{evaluate_sequence, EvalReport};
use vosprop_core::pipeline::layout_of;
use vosprop_core::{MbdMode, NodeVector, PipelineConfig, SaliencyField, SuperpixelSegmentation};

use crate::error::{Error, Result};
use crate::io;
use crate::manifest::RunManifest;
use crate::report;
use crate::run;
use crate::settings;
use crate::synth::{synth_sequence, SynthSpec};

#[derive(Debug, Parser)]
#[command(
    name = "vosprop",
    version,
    about = "Unsupervised video object segmentation by saliency diffusion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic moving-square dataset.
    Synth(SynthArgs),
    /// Compute motion saliency maps and the initial node vector.
    Saliency(SaliencyArgs),
    /// Segment a sequence into per-frame masks.
    Segment(SegmentArgs),
    /// Score predicted masks against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 20)]
    pub frames: usize,
    /// Side of the square in pixels.
    #[arg(long, default_value_t = 16)]
    pub square: usize,
    /// Pixels per frame, as `X,Y`.
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 1,
        default_value = "2,0",
        allow_hyphen_values = true
    )]
    pub velocity: Vec<i32>,
    /// Standard deviation of Gaussian flow noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Two-sweep barrier distance instead of the exact per-seed search.
    #[arg(long)]
    pub mbd_approx: bool,
    /// Write 16-bit superpixel label maps to `<out>/superpixels`.
    #[arg(long)]
    pub dump_superpixels: bool,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    /// Dataset root.
    pub root: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Dataset root.
    pub root: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Drop the inter-frame (flow) factor.
    #[arg(long)]
    pub disable_temporal: bool,
    /// Drop the intra-frame (edge) factor.
    #[arg(long)]
    pub disable_spatial: bool,
    /// Drop the long-range (appearance) factor.
    #[arg(long)]
    pub disable_longrange: bool,
    /// Skip the focused second pass.
    #[arg(long)]
    pub no_focused: bool,
    /// Initialize the first frame from its annotation.
    #[arg(long)]
    pub semi_supervised: bool,
    /// Write every first-pass diffusion iteration as grayscale images to
    /// `<out>/debug`.
    #[arg(long)]
    pub dump_iterations: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of predicted masks.
    pub pred: PathBuf,
    /// Directory of ground-truth masks.
    pub gt: PathBuf,
    /// CSV report path (default: `<pred>/report.csv`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Sequence name in the report (default: the ground-truth directory's parent name).
    #[arg(long)]
    pub name: Option<String>,
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Saliency(a) => cmd_saliency(&a),
        Command::Segment(a) => {
            if let Some(r) = cmd_segment(&a)? {
                print!("{}", report::table(&r));
            }
            Ok(())
        }
        Command::Evaluate(a) => {
            print!("{}", report::table(&cmd_evaluate(&a)?));
            Ok(())
        }
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let [vx, vy] = args.velocity[..] else {
        return Err(Error::Input("--velocity takes two values, X,Y".into()));
    };
    let spec = SynthSpec {
        width: args.width,
        height: args.height,
        frames: args.frames,
        square_size: args.square,
        velocity: [vx, vy],
        noise_level: args.noise,
        seed: args.seed,
    };
    let bundle = synth_sequence(&spec)?;
    io::save_sequence(&bundle, &args.out)
}

impl CommonArgs {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut config = settings::resolve(self.config.as_deref(), &self.set)?;
        if self.mbd_approx {
            config.mbd_mode = MbdMode::Approximate;
        }
        Ok(config)
    }
}

impl SegmentArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut config = self.common.resolve()?;
        if self.disable_temporal {
            config.factors.temporal = false;
        }
        if self.disable_spatial {
            config.factors.spatial = false;
        }
        if self.disable_longrange {
            config.factors.long_range = false;
        }
        if self.no_focused {
            config.focused_diffusion = false;
        }
        if self.semi_supervised {
            config.semi_supervised = true;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Spreads node values over the pixels of each frame.
pub fn render_nodes(
    values: &[f64],
    segs: &[&SuperpixelSegmentation],
) -> Result<Vec<SaliencyField>> {
    let total: usize = segs.iter().map(|s| s.len()).sum();
    if total != values.len() {
        return Err(Error::Internal(format!(
            "{} node values for {total} superpixels",
            values.len()
        )));
    }
    let mut offset = 0;
    let mut out = Vec::with_capacity(segs.len());
    for seg in segs {
        let (w, h) = seg.dims();
        let v = &values[offset..offset + seg.len()];
        out.push(SaliencyField::new(
            w,
            h,
            seg.labels().iter().map(|&l| v[l as usize]).collect(),
        )?);
        offset += seg.len();
    }
    Ok(out)
}

fn write_fields(fields: &[SaliencyField], dir: &Path) -> Result<()> {
    io::create_dir(dir)?;
    for (i, f) in fields.iter().enumerate() {
        io::write_gray(f, &dir.join(io::numbered(i, "png")))?;
    }
    Ok(())
}

fn write_labels(segs: &[&SuperpixelSegmentation], dir: &Path) -> Result<()> {
    io::create_dir(dir)?;
    for (i, s) in segs.iter().enumerate() {
        io::write_labels(s, &dir.join(io::numbered(i, "png")))?;
    }
    Ok(())
}

pub fn cmd_saliency(args: &SaliencyArgs) -> Result<()> {
    let config = args.common.resolve()?;
    config.validate()?;
    let pool = run::thread_pool(args.common.threads)?;
    let bundle = io::load_sequence(&args.root)?;
    pool.install(|| -> Result<()> {
        let analyses = run::analyze(&bundle, &config)?;
        let v0 = vosprop_core::pipeline::initial_saliency(&bundle, &analyses, &config)?;
        let maps: Vec<SaliencyField> = analyses.iter().map(|a| a.saliency.clone()).collect();
        write_fields(&maps, &args.out.join("saliency"))?;
        io::write_node_vector(v0.values(), &args.out.join("v0.txt"))?;
        if args.common.dump_superpixels {
            let segs: Vec<_> = analyses.iter().map(|a| &a.segmentation).collect();
            write_labels(&segs, &args.out.join("superpixels"))?;
        }
        Ok(())
    })
}

/// Segments `args.root` and writes masks, the manifest and, when the
/// dataset has annotations, an evaluation report.
pub fn cmd_segment(args: &SegmentArgs) -> Result<Option<EvalReport>> {
    let config = args.resolve()?;
    let pool = run::thread_pool(args.common.threads)?;
    let bundle = io::load_sequence(&args.root)?;
    if config.semi_supervised && bundle.annotations().is_none() {
        return Err(Error::Input(format!(
            "--semi-supervised needs {}",
            args.root.join(io::ANNOTATIONS_DIR).display()
        )));
    }
    let seg = pool.install(|| run::segment(&bundle, &config))?;
    io::save_masks(&seg.output.masks, &args.out.join("masks"))?;
    io::write_node_vector(seg.output.initial.values(), &args.out.join("v0.txt"))?;
    io::write_node_vector(
        seg.output.diffusion.node_saliency.values(),
        &args.out.join("node_saliency.txt"),
    )?;

    let segs: Vec<_> = seg.analyses.iter().map(|a| &a.segmentation).collect();
    if args.common.dump_superpixels {
        write_labels(&segs, &args.out.join("superpixels"))?;
    }
    if args.dump_iterations {
        let g = seg.factors.stochastic()?;
        let debug = args.out.join("debug");
        let mut v: NodeVector = seg.output.initial.clone();
        for t in 0..=config.diffusion_iters {
            if t > 0 {
                v = diffuse(&g, &v, 1)?;
            }
            write_fields(
                &render_nodes(v.values(), &segs)?,
                &debug.join(format!("iter_{t:03}")),
            )?;
        }
        let last = seg.output.diffusion.node_saliency.values();
        write_fields(&render_nodes(last, &segs)?, &debug.join("final"))?;
    }

    let manifest = RunManifest::new(
        "segment",
        &args.root,
        &args.out,
        &config,
        pool.current_num_threads(),
        bundle.len(),
        layout_of(&seg.analyses).num_nodes(),
        &seg.timings,
    );
    manifest.write(&args.out.join("manifest.json"))?;

    let Some(gt) = bundle.annotations() else {
        return Ok(None);
    };
    let name = sequence_name(&args.root);
    let r = evaluate_sequence(&name, &seg.output.masks, gt)?;
    io::write_text(&args.out.join("report.csv"), &report::csv(&r))?;
    Ok(Some(r))
}

fn sequence_name(root: &Path) -> String {
    root.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "sequence".into())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvalReport> {
    let preds = io::load_masks(&args.pred)?;
    let gts = io::load_masks(&args.gt)?;
    if preds.len() != gts.len() {
        return Err(Error::Input(format!(
            "{} predicted masks but {} ground-truth masks",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Input(format!("no masks in {}", args.gt.display())));
    }
    let name = args.name.clone().unwrap_or_else(|| {
        args.gt
            .parent()
            .map(sequence_name)
            .unwrap_or_else(|| "sequence".into())
    });
    let r = evaluate_sequence(&name, &preds, &gts)?;
    let csv = args
        .csv
        .clone()
        .unwrap_or_else(|| args.pred.join("report.csv"));
    io::write_text(&csv, &report::csv(&r))?;
    Ok(r)
}
