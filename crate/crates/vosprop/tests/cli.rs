use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use vosprop::cli::{
    self, Cli, Command, CommonArgs, EvaluateArgs, SaliencyArgs, SegmentArgs, SynthArgs,
};
use vosprop::io;
use vosprop::manifest::RunManifest;
use vosprop_core::diffusion::binarize;
use vosprop_core::{BinaryMask, MbdMode, NodeVector, PipelineConfig};

fn synth_args(out: &Path) -> SynthArgs {
    SynthArgs {
        out: out.to_path_buf(),
        width: 32,
        height: 32,
        frames: 6,
        square: 8,
        velocity: vec![2, 0],
        noise: 0.0,
        seed: 0,
    }
}

fn segment_args(root: &Path, out: &Path) -> SegmentArgs {
    SegmentArgs {
        root: root.to_path_buf(),
        out: out.to_path_buf(),
        common: CommonArgs {
            threads: Some(2),
            ..CommonArgs::default()
        },
        disable_temporal: false,
        disable_spatial: false,
        disable_longrange: false,
        no_focused: false,
        semi_supervised: false,
        dump_iterations: false,
    }
}

fn count(dir: &Path, ext: &str) -> usize {
    io::numbered_files(dir, ext).unwrap().len()
}

fn tree_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_writes_the_dataset_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("d");
    cli::cmd_synth(&SynthArgs {
        frames: 20,
        width: 64,
        height: 64,
        ..synth_args(&root)
    })
    .unwrap();
    assert_eq!(count(&root.join(io::FRAMES_DIR), "png"), 20);
    assert_eq!(count(&root.join(io::FLOW_FWD_DIR), "flo"), 19);
    assert_eq!(count(&root.join(io::FLOW_BWD_DIR), "flo"), 19);
    assert_eq!(count(&root.join(io::ANNOTATIONS_DIR), "png"), 20);
    let masks = io::load_masks(&root.join(io::ANNOTATIONS_DIR)).unwrap();
    assert!(masks.iter().all(|m| m.count() == 64));
}

#[test]
fn synth_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let noisy = |name: &str, seed| SynthArgs {
        noise: 0.3,
        seed,
        ..synth_args(&tmp.path().join(name))
    };
    cli::cmd_synth(&noisy("a", 5)).unwrap();
    cli::cmd_synth(&noisy("b", 5)).unwrap();
    cli::cmd_synth(&noisy("c", 6)).unwrap();
    let (a, b, c) = (
        tree_bytes(&tmp.path().join("a")),
        tree_bytes(&tmp.path().join("b")),
        tree_bytes(&tmp.path().join("c")),
    );
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn synth_rejects_a_square_that_leaves_the_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("d");
    let err = cli::cmd_synth(&SynthArgs {
        square: 30,
        ..synth_args(&root)
    })
    .unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(!root.exists());
}

#[test]
fn saliency_writes_maps_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("d");
    cli::cmd_synth(&synth_args(&root)).unwrap();
    for (out, threads) in [("s1", 1), ("s2", 3)] {
        let args = SaliencyArgs {
            root: root.clone(),
            out: tmp.path().join(out),
            common: CommonArgs {
                threads: Some(threads),
                dump_superpixels: true,
                ..CommonArgs::default()
            },
        };
        cli::cmd_saliency(&args).unwrap();
    }
    let s1 = tmp.path().join("s1");
    assert_eq!(count(&s1.join("saliency"), "png"), 6);
    assert_eq!(count(&s1.join("superpixels"), "png"), 6);
    assert_eq!(tree_bytes(&s1), tree_bytes(&tmp.path().join("s2")));
}

#[test]
fn segment_without_factors_thresholds_the_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("d");
    let out = tmp.path().join("o");
    cli::cmd_synth(&synth_args(&root)).unwrap();
    let mut args = segment_args(&root, &out);
    args.disable_temporal = true;
    args.disable_spatial = true;
    args.disable_longrange = true;
    args.no_focused = true;
    args.common.dump_superpixels = true;
    cli::cmd_segment(&args).unwrap();

    let v0 = NodeVector::new(io::read_node_vector(&out.join("v0.txt")).unwrap());
    let diffused = io::read_node_vector(&out.join("node_saliency.txt")).unwrap();
    assert_eq!(diffused, v0.values());
    let segs: Vec<_> = io::numbered_files(&out.join("superpixels"), "png")
        .unwrap()
        .iter()
        .map(|p| io::read_labels(p).unwrap())
        .collect();
    let want = binarize(&v0, &segs, PipelineConfig::default().binarize_threshold).unwrap();
    assert_eq!(io::load_masks(&out.join("masks")).unwrap(), want);
}

#[test]
fn segment_writes_outputs_and_scores_the_square() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("d");
    let out = tmp.path().join("o");
    // The square has to span a few dozen superpixels for diffusion to keep it.
    cli::cmd_synth(&SynthArgs {
        width: 64,
        height: 64,
        square: 16,
        ..synth_args(&root)
    })
    .unwrap();
    let mut args = segment_args(&root, &out);
    args.dump_iterations = true;
    let report = cli::cmd_segment(&args)
        .unwrap()
        .expect("annotations present");
    assert!(
        report.j_summary.mean >= 0.9,
        "J = {}",
        report.j_summary.mean
    );
    assert_eq!(count(&out.join("masks"), "png"), 6);
    assert_eq!(count(&out.join("debug").join("iter_000"), "png"), 6);
    assert_eq!(count(&out.join("debug").join("iter_025"), "png"), 6);
    assert_eq!(count(&out.join("debug").join("final"), "png"), 6);
    assert!(fs::read_to_string(out.join("report.csv"))
        .unwrap()
        .starts_with("frame,J,F"));

    let manifest = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.frames, 6);
    assert_eq!(manifest.threads, 2);
    assert_eq!(
        manifest.pipeline_config().unwrap(),
        PipelineConfig::default()
    );
    let stages: Vec<_> = manifest.timings.iter().map(|t| t.stage.as_str()).collect();
    assert_eq!(stages, ["frames", "graph", "initialization", "diffusion"]);
}

#[test]
fn segment_is_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("d");
    cli::cmd_synth(&SynthArgs {
        noise: 0.4,
        seed: 3,
        ..synth_args(&root)
    })
    .unwrap();
    for (name, threads) in [("o1", 1), ("o4", 4)] {
        let mut args = segment_args(&root, &tmp.path().join(name));
        args.common.threads = Some(threads);
        cli::cmd_segment(&args).unwrap();
    }
    for file in ["v0.txt", "node_saliency.txt"] {
        assert_eq!(
            fs::read(tmp.path().join("o1").join(file)).unwrap(),
            fs::read(tmp.path().join("o4").join(file)).unwrap()
        );
    }
    assert_eq!(
        tree_bytes(&tmp.path().join("o1/masks")),
        tree_bytes(&tmp.path().join("o4/masks"))
    );
}

#[test]
fn semi_supervised_needs_annotations() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("d");
    cli::cmd_synth(&synth_args(&root)).unwrap();
    fs::remove_dir_all(root.join(io::ANNOTATIONS_DIR)).unwrap();
    let mut args = segment_args(&root, &tmp.path().join("o"));
    args.semi_supervised = true;
    let err = cli::cmd_segment(&args).unwrap_err();
    assert!(err.to_string().contains(io::ANNOTATIONS_DIR), "{err}");
    args.semi_supervised = false;
    assert!(cli::cmd_segment(&args).unwrap().is_none());
}

#[test]
fn evaluate_scores_and_rejects_mismatches() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("d");
    cli::cmd_synth(&synth_args(&root)).unwrap();
    let gt = root.join(io::ANNOTATIONS_DIR);
    let eval = |pred: PathBuf| EvaluateArgs {
        pred,
        gt: gt.clone(),
        csv: None,
        name: Some("square".into()),
    };

    let r = cli::cmd_evaluate(&eval(gt.clone())).unwrap();
    assert_eq!((r.j_summary.mean, r.f_summary.mean), (1.0, 1.0));
    assert!(gt.join("report.csv").exists());
    fs::remove_file(gt.join("report.csv")).unwrap();

    let empty = tmp.path().join("empty");
    io::save_masks(&vec![BinaryMask::empty(32, 32); 6], &empty).unwrap();
    let r = cli::cmd_evaluate(&eval(empty)).unwrap();
    assert_eq!((r.j_summary.mean, r.f_summary.mean), (0.0, 0.0));

    let short = tmp.path().join("short");
    io::save_masks(&vec![BinaryMask::empty(32, 32); 5], &short).unwrap();
    assert_eq!(cli::cmd_evaluate(&eval(short)).unwrap_err().exit_code(), 1);
}

#[test]
fn configuration_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("run.conf");
    fs::write(
        &file,
        "# tuned\nknn_k = 12\nsigma = 0.2\nfocused_diffusion = true\nmbd_mode = exact\n",
    )
    .unwrap();
    let mut args = segment_args(tmp.path(), tmp.path());
    args.common.config = Some(file.clone());
    args.common.set = vec!["knn_k=14".into()];
    args.common.mbd_approx = true;
    args.no_focused = true;
    let c = args.resolve().unwrap();
    assert_eq!(c.knn_k, 14);
    assert_eq!(c.sigma, 0.2);
    assert_eq!(c.mbd_mode, MbdMode::Approximate);
    assert!(!c.focused_diffusion);

    args.common.set = vec!["knn_k=zero".into()];
    assert!(args.resolve().is_err());
    args.common.set = vec!["focus_gamma=2".into()];
    assert!(args.resolve().is_err());
}

#[test]
fn command_line_parsing() {
    let cli = Cli::try_parse_from([
        "vosprop",
        "segment",
        "data",
        "--out",
        "o",
        "--set",
        "knn_k=8",
        "--set",
        "sigma=0.2",
        "--disable-longrange",
        "--threads",
        "2",
    ])
    .unwrap();
    let Command::Segment(args) = cli.command else {
        panic!("expected segment")
    };
    assert_eq!(args.common.set.len(), 2);
    assert!(args.disable_longrange && !args.disable_temporal);
    assert_eq!(args.resolve().unwrap().knn_k, 8);

    let cli =
        Cli::try_parse_from(["vosprop", "synth", "--out", "x", "--velocity", "-1,2"]).unwrap();
    let Command::Synth(args) = cli.command else {
        panic!("expected synth")
    };
    assert_eq!(args.velocity, [-1, 2]);
    assert!(Cli::try_parse_from(["vosprop", "segment", "data"]).is_err());
    assert!(Cli::try_parse_from(["vosprop", "segment", "data", "--out", "o", "--bogus"]).is_err());
}

#[test]
fn zero_threads_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("d");
    cli::cmd_synth(&synth_args(&root)).unwrap();
    let mut args = segment_args(&root, &tmp.path().join("o"));
    args.common.threads = Some(0);
    assert_eq!(cli::cmd_segment(&args).unwrap_err().exit_code(), 1);
}

#[test]
fn semi_supervised_first_frame_matches_its_annotation() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("d");
    // SLIC snaps to the square's outline here, so superpixels align with it.
    cli::cmd_synth(&SynthArgs {
        width: 64,
        height: 64,
        square: 16,
        ..synth_args(&root)
    })
    .unwrap();
    let mut args = segment_args(&root, &tmp.path().join("o"));
    args.semi_supervised = true;
    args.disable_temporal = true;
    args.disable_spatial = true;
    args.disable_longrange = true;
    args.no_focused = true;
    let report = cli::cmd_segment(&args).unwrap().unwrap();
    assert_eq!(report.j[0], 1.0);
    let manifest = RunManifest::read(&tmp.path().join("o").join("manifest.json")).unwrap();
    assert_eq!(manifest.mode, "semi-supervised");
}
