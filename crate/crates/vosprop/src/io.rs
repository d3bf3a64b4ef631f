//! Files on disk: Middlebury `.flo` flow, PNG frames, masks, edge maps and
//! label maps, and the dataset directory layout.
//!
//! ```text
//! root/frames/00000.png       RGB frames
//! root/flow_fwd/00000.flo     flow from frame i to i + 1, stored at index i
//! root/flow_bwd/00000.flo     flow from frame i + 1 to i, stored at index i
//! root/edges/00000.png        optional grayscale edge maps
//! root/annotations/00000.png  optional masks, foreground >= 128
//! ```

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use vosprop_core::{
    BinaryMask, FlowDirection, FlowField, Frame, SaliencyField, SequenceBundle,
    SuperpixelSegmentation,
};

use crate::error::{Error, Result};

pub const FLO_SENTINEL: f32 = 202_021.25;

pub const FRAMES_DIR: &str = "frames";
pub const FLOW_FWD_DIR: &str = "flow_fwd";
pub const FLOW_BWD_DIR: &str = "flow_bwd";
pub const EDGES_DIR: &str = "edges";
pub const ANNOTATIONS_DIR: &str = "annotations";

/// `%05d.<ext>`.
pub fn numbered(index: usize, ext: &str) -> String {
    format!("{index:05}.{ext}")
}

/// Encodes a flow field in `.flo` layout.
pub fn encode_flo(field: &FlowField) -> Vec<u8> {
    let (w, h) = field.dims();
    let mut out = Vec::with_capacity(12 + 8 * w * h);
    out.extend_from_slice(&FLO_SENTINEL.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for [u, v] in field.vectors() {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes `.flo` bytes; `path` is only used in error messages.
pub fn decode_flo(bytes: &[u8], direction: FlowDirection, path: &Path) -> Result<FlowField> {
    let word = |i: usize| -> Option<[u8; 4]> { bytes.get(4 * i..4 * i + 4)?.try_into().ok() };
    let header = |i: usize| word(i).ok_or_else(|| Error::format(path, "truncated .flo header"));
    let sentinel = f32::from_le_bytes(header(0)?);
    if sentinel != FLO_SENTINEL {
        return Err(Error::format(path, format!("bad .flo sentinel {sentinel}")));
    }
    let w = i32::from_le_bytes(header(1)?);
    let h = i32::from_le_bytes(header(2)?);
    if w <= 0 || h <= 0 {
        return Err(Error::format(path, format!("bad .flo dimensions {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(12))
        .ok_or_else(|| Error::format(path, "oversized .flo dimensions"))?;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "expected {expected} bytes for {w}x{h} flow, found {}",
                bytes.len()
            ),
        ));
    }
    let vectors = bytes[12..]
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            ]
        })
        .collect();
    FlowField::new(w, h, direction, vectors).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_flo(path: &Path, direction: FlowDirection) -> Result<FlowField> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_flo(&bytes, direction, path)
}

pub fn write_flo(field: &FlowField, path: &Path) -> Result<()> {
    write_bytes(path, &encode_flo(field))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.into(),
            source,
        },
    })
}

fn save_image<P, C>(img: &ImageBuffer<P, C>, path: &Path) -> Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })
}

/// RGB frame in `[0, 1]`; 8- and 16-bit images are accepted.
pub fn read_frame(path: &Path, index: usize) -> Result<Frame> {
    let img = open_image(path)?.into_rgb32f();
    let (w, h) = img.dimensions();
    let rgb = img
        .pixels()
        .map(|p| p.0.map(|c| c.clamp(0.0, 1.0)))
        .collect();
    Ok(Frame::new(w as usize, h as usize, index, rgb)?)
}

pub fn write_frame(frame: &Frame, path: &Path) -> Result<()> {
    let (w, h) = frame.dims();
    let img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        Rgb(frame.pixel(x as usize, y as usize).map(to_u8))
    });
    save_image(&img, path)
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Grayscale mask; pixels at or above half intensity are foreground.
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let img = open_image(path)?.into_luma16();
    let (w, h) = img.dimensions();
    let values = img.pixels().map(|p| p.0[0] >= 0x8000).collect();
    Ok(BinaryMask::new(w as usize, h as usize, values)?)
}

/// Writes 255 for foreground and 0 elsewhere.
pub fn write_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let (w, h) = mask.dims();
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([if mask.get(x as usize, y as usize) {
            255
        } else {
            0
        }])
    });
    save_image(&img, path)
}

/// Grayscale edge probabilities scaled to `[0, 1]`.
pub fn read_edge_map(path: &Path) -> Result<SaliencyField> {
    let img = open_image(path)?.into_luma16();
    let (w, h) = img.dimensions();
    let values = img.pixels().map(|p| f64::from(p.0[0]) / 65535.0).collect();
    Ok(SaliencyField::new(w as usize, h as usize, values)?)
}

/// 8-bit grayscale rendering of a field; values are clamped to `[0, 1]`.
pub fn write_gray(field: &SaliencyField, path: &Path) -> Result<()> {
    let (w, h) = field.dims();
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([to_u8(field.at(x as usize, y as usize) as f32)])
    });
    save_image(&img, path)
}

/// Superpixel labels as a 16-bit single-channel image.
pub fn write_labels(seg: &SuperpixelSegmentation, path: &Path) -> Result<()> {
    if seg.len() > usize::from(u16::MAX) + 1 {
        return Err(Error::Input(format!(
            "{} superpixels do not fit a 16-bit label image",
            seg.len()
        )));
    }
    let (w, h) = seg.dims();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        Luma([seg.label_at(x as usize, y as usize) as u16])
    });
    save_image(&img, path)
}

pub fn read_labels(path: &Path) -> Result<SuperpixelSegmentation> {
    let img = open_image(path)?.into_luma16();
    let (w, h) = img.dimensions();
    let labels: Vec<u32> = img.pixels().map(|p| u32::from(p.0[0])).collect();
    Ok(SuperpixelSegmentation::from_labels(
        w as usize, h as usize, &labels,
    )?)
}

/// Files named `%05d.<ext>` in `dir`, which must be numbered 0, 1, ...
/// without gaps.
pub fn numbered_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        let index = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<usize>().ok());
        match index {
            Some(i) => found.push((i, path)),
            None => {
                return Err(Error::format(&path, "expected a zero-padded frame number"));
            }
        }
    }
    found.sort();
    for (expected, (i, path)) in found.iter().enumerate() {
        if *i != expected {
            return Err(Error::format(
                path,
                format!("expected frame number {expected}"),
            ));
        }
    }
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn require_dir(root: &Path, name: &str) -> Result<PathBuf> {
    let dir = root.join(name);
    if !dir.is_dir() {
        return Err(Error::Input(format!("missing directory {}", dir.display())));
    }
    Ok(dir)
}

fn optional_dir(root: &Path, name: &str) -> Option<PathBuf> {
    let dir = root.join(name);
    dir.is_dir().then_some(dir)
}

/// Loads a dataset laid out as described in the module docs.
pub fn load_sequence(root: &Path) -> Result<SequenceBundle> {
    let frames = numbered_files(&require_dir(root, FRAMES_DIR)?, "png")?
        .iter()
        .enumerate()
        .map(|(i, p)| read_frame(p, i))
        .collect::<Result<Vec<_>>>()?;
    let flows = |name: &str, direction| -> Result<Vec<FlowField>> {
        numbered_files(&require_dir(root, name)?, "flo")?
            .iter()
            .map(|p| read_flo(p, direction))
            .collect()
    };
    let forward = flows(FLOW_FWD_DIR, FlowDirection::Forward)?;
    let backward = flows(FLOW_BWD_DIR, FlowDirection::Backward)?;
    let edges = optional_dir(root, EDGES_DIR)
        .map(|d| {
            numbered_files(&d, "png")?
                .iter()
                .map(|p| read_edge_map(p))
                .collect()
        })
        .transpose()?;
    let annotations = optional_dir(root, ANNOTATIONS_DIR)
        .map(|d| {
            numbered_files(&d, "png")?
                .iter()
                .map(|p| read_mask(p))
                .collect()
        })
        .transpose()?;
    Ok(SequenceBundle::new(
        frames,
        forward,
        backward,
        edges,
        annotations,
    )?)
}

/// Loads every mask of a directory of numbered PNGs.
pub fn load_masks(dir: &Path) -> Result<Vec<BinaryMask>> {
    numbered_files(dir, "png")?
        .iter()
        .map(|p| read_mask(p))
        .collect()
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn save_masks(masks: &[BinaryMask], dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for (i, m) in masks.iter().enumerate() {
        write_mask(m, &dir.join(numbered(i, "png")))?;
    }
    Ok(())
}

/// Writes the full dataset layout.
pub fn save_sequence(bundle: &SequenceBundle, root: &Path) -> Result<()> {
    let dir = |name: &str| -> Result<PathBuf> {
        let d = root.join(name);
        create_dir(&d)?;
        Ok(d)
    };
    let frames = dir(FRAMES_DIR)?;
    for (i, f) in bundle.frames().iter().enumerate() {
        write_frame(f, &frames.join(numbered(i, "png")))?;
    }
    for (name, fields) in [
        (FLOW_FWD_DIR, bundle.forward_flow()),
        (FLOW_BWD_DIR, bundle.backward_flow()),
    ] {
        let d = dir(name)?;
        for (i, f) in fields.iter().enumerate() {
            write_flo(f, &d.join(numbered(i, "flo")))?;
        }
    }
    if let Some(edges) = bundle.edge_maps() {
        let d = dir(EDGES_DIR)?;
        for (i, e) in edges.iter().enumerate() {
            write_gray(e, &d.join(numbered(i, "png")))?;
        }
    }
    if let Some(masks) = bundle.annotations() {
        save_masks(masks, &root.join(ANNOTATIONS_DIR))?;
    }
    Ok(())
}

/// Node values, one per line, in shortest round-trip decimal form.
pub fn write_node_vector(values: &[f64], path: &Path) -> Result<()> {
    let mut text = String::with_capacity(values.len() * 20);
    for v in values {
        text.push_str(&format!("{v:?}\n"));
    }
    write_bytes(path, text.as_bytes())
}

pub fn read_node_vector(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: not a number", i + 1)))
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}
