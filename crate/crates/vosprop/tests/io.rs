use std::path::Path;

use proptest::prelude::*;
use vosprop::io::{self, decode_flo, encode_flo, FLO_SENTINEL};
use vosprop::synth::{synth_sequence, SynthSpec};
use vosprop::Error;
use vosprop_core::{BinaryMask, FlowDirection, FlowField, Frame, SuperpixelSegmentation};

/// Any finite f32 bit pattern, including subnormals and negative zero.
fn finite_f32() -> impl Strategy<Value = f32> {
    any::<u32>()
        .prop_map(f32::from_bits)
        .prop_filter("finite", |x| x.is_finite())
}

fn flow_field() -> impl Strategy<Value = FlowField> {
    (1usize..=24, 1usize..=24).prop_flat_map(|(w, h)| {
        prop::collection::vec([finite_f32(), finite_f32()], w * h)
            .prop_map(move |v| FlowField::new(w, h, FlowDirection::Forward, v).unwrap())
    })
}

fn bits(f: &FlowField) -> Vec<[u32; 2]> {
    f.vectors()
        .iter()
        .map(|[u, v]| [u.to_bits(), v.to_bits()])
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn flo_round_trip_is_bitwise(field in flow_field()) {
        let back = decode_flo(&encode_flo(&field), FlowDirection::Forward, Path::new("x")).unwrap();
        prop_assert_eq!(back.dims(), field.dims());
        prop_assert_eq!(bits(&back), bits(&field));
    }

    #[test]
    fn truncated_flo_is_rejected(field in flow_field(), cut in any::<prop::sample::Index>()) {
        let bytes = encode_flo(&field);
        let keep = cut.index(bytes.len());
        let err = decode_flo(&bytes[..keep], FlowDirection::Forward, Path::new("x"));
        let rejected = matches!(err, Err(Error::Format { .. }));
        prop_assert!(rejected);
    }
}

#[test]
fn flo_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("00000.flo");
    let field = FlowField::new(
        3,
        2,
        FlowDirection::Backward,
        (0..6).map(|i| [i as f32, -0.5]).collect(),
    )
    .unwrap();
    io::write_flo(&field, &path).unwrap();
    assert_eq!(io::read_flo(&path, FlowDirection::Backward).unwrap(), field);
}

#[test]
fn bad_sentinel_is_rejected() {
    let field = FlowField::constant(2, 2, FlowDirection::Forward, [1.0, 2.0]).unwrap();
    for sentinel in [0.0f32, 202_021.0, -FLO_SENTINEL] {
        let mut bytes = encode_flo(&field);
        bytes[..4].copy_from_slice(&sentinel.to_le_bytes());
        let err = decode_flo(&bytes, FlowDirection::Forward, Path::new("bad.flo")).unwrap_err();
        assert!(err.to_string().contains("sentinel"), "{err}");
    }
}

#[test]
fn bad_dimensions_and_trailing_bytes_are_rejected() {
    let field = FlowField::constant(2, 2, FlowDirection::Forward, [1.0, 2.0]).unwrap();
    let mut bytes = encode_flo(&field);
    bytes.push(0);
    assert!(decode_flo(&bytes, FlowDirection::Forward, Path::new("x")).is_err());
    let mut bytes = encode_flo(&field);
    bytes[4..8].copy_from_slice(&(-2i32).to_le_bytes());
    assert!(decode_flo(&bytes, FlowDirection::Forward, Path::new("x")).is_err());
    let mut bytes = encode_flo(&field);
    bytes[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(decode_flo(&bytes, FlowDirection::Forward, Path::new("x")).is_err());
}

#[test]
fn mask_frame_and_label_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mask = BinaryMask::from_fn(7, 5, |x, y| (x + y) % 3 == 0);
    let p = dir.path().join("mask.png");
    io::write_mask(&mask, &p).unwrap();
    assert_eq!(io::read_mask(&p).unwrap(), mask);

    let rgb: Vec<[f32; 3]> = (0..35)
        .map(|i| [i as f32 / 255.0, 0.5 * (i % 2) as f32, 1.0])
        .collect();
    let frame = Frame::new(7, 5, 0, rgb).unwrap();
    let p = dir.path().join("frame.png");
    io::write_frame(&frame, &p).unwrap();
    let back = io::read_frame(&p, 0).unwrap();
    for (a, b) in back.rgb().iter().zip(frame.rgb()) {
        for c in 0..3 {
            assert!((a[c] - b[c]).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    let labels: Vec<u32> = (0..35)
        .map(|p| u32::from(p % 7 >= 3) + 2 * u32::from(p / 7 >= 2))
        .collect();
    let seg = SuperpixelSegmentation::from_labels(7, 5, &labels).unwrap();
    let p = dir.path().join("labels.png");
    io::write_labels(&seg, &p).unwrap();
    assert_eq!(io::read_labels(&p).unwrap().labels(), seg.labels());
}

#[test]
fn node_vector_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.txt");
    let v = vec![0.1 + 0.2, 1e-300, -0.0, 5.0, f64::MIN_POSITIVE];
    io::write_node_vector(&v, &p).unwrap();
    let back = io::read_node_vector(&p).unwrap();
    assert_eq!(
        back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        v.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
}

fn small_sequence(root: &Path) {
    let spec = SynthSpec {
        width: 24,
        height: 24,
        frames: 4,
        square_size: 6,
        ..SynthSpec::default()
    };
    io::save_sequence(&synth_sequence(&spec).unwrap(), root).unwrap();
}

#[test]
fn sequence_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        width: 24,
        height: 24,
        frames: 4,
        square_size: 6,
        ..SynthSpec::default()
    };
    let bundle = synth_sequence(&spec).unwrap();
    io::save_sequence(&bundle, dir.path()).unwrap();
    let back = io::load_sequence(dir.path()).unwrap();
    assert_eq!(back.len(), 4);
    assert_eq!(back.forward_flow(), bundle.forward_flow());
    assert_eq!(back.backward_flow(), bundle.backward_flow());
    assert_eq!(back.annotations(), bundle.annotations());
}

#[test]
fn missing_flow_directory_is_named() {
    let dir = tempfile::tempdir().unwrap();
    small_sequence(dir.path());
    std::fs::remove_dir_all(dir.path().join(io::FLOW_BWD_DIR)).unwrap();
    let err = io::load_sequence(dir.path()).unwrap_err();
    assert!(err.to_string().contains(io::FLOW_BWD_DIR), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn gap_in_numbering_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    small_sequence(dir.path());
    let frames = dir.path().join(io::FRAMES_DIR);
    std::fs::rename(frames.join("00003.png"), frames.join("00004.png")).unwrap();
    assert!(io::load_sequence(dir.path()).is_err());
}

#[test]
fn mismatched_flow_dimensions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    small_sequence(dir.path());
    let small = FlowField::constant(12, 12, FlowDirection::Forward, [0.0, 0.0]).unwrap();
    io::write_flo(&small, &dir.path().join(io::FLOW_FWD_DIR).join("00001.flo")).unwrap();
    assert!(io::load_sequence(dir.path()).is_err());
}

#[test]
fn extra_flow_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    small_sequence(dir.path());
    let zero = FlowField::constant(24, 24, FlowDirection::Forward, [0.0, 0.0]).unwrap();
    io::write_flo(&zero, &dir.path().join(io::FLOW_FWD_DIR).join("00003.flo")).unwrap();
    assert!(io::load_sequence(dir.path()).is_err());
}
