//! SLIC superpixels in CIELAB + image-plane space, with connectivity
//! enforcement.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::field::Frame;

/// One superpixel of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Superpixel {
    pub id: usize,
    pub size: usize,
    /// Mean `(x, y)` pixel coordinate of the members.
    pub centroid: (f64, f64),
    /// Raster indices of the members, ascending.
    pub pixels: Vec<usize>,
}

/// A partition of a frame into 4-connected superpixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelSegmentation {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    superpixels: Vec<Superpixel>,
}

impl SuperpixelSegmentation {
    /// Wraps an arbitrary label map. Labels are renumbered `0..M` in
    /// raster order of first appearance; every label must be 4-connected.
    pub fn from_labels(width: usize, height: usize, labels: &[u32]) -> Result<Self> {
        check_len("label map", width * height, labels.len())?;
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("empty label map".into()));
        }
        let max = labels.iter().copied().max().unwrap_or(0) as usize;
        let mut remap = vec![u32::MAX; max + 1];
        let mut next = 0u32;
        let mut compact = Vec::with_capacity(labels.len());
        for &l in labels {
            let slot = &mut remap[l as usize];
            if *slot == u32::MAX {
                *slot = next;
                next += 1;
            }
            compact.push(*slot);
        }
        let seg = Self::build(width, height, compact, next as usize);
        let components = connected_components(width, height, &seg.labels);
        if components.count != seg.superpixels.len() {
            return Err(Error::InvalidInput(format!(
                "label map has {} labels but {} connected components",
                seg.superpixels.len(),
                components.count
            )));
        }
        Ok(seg)
    }

    /// Regular `cols x rows` tiling, useful as a reference partition.
    pub fn grid(width: usize, height: usize, cols: usize, rows: usize) -> Result<Self> {
        if cols == 0 || rows == 0 || cols > width || rows > height {
            return Err(Error::InvalidInput(format!(
                "cannot tile {width}x{height} into {cols}x{rows}"
            )));
        }
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let cx = x * cols / width;
                let cy = y * rows / height;
                labels.push((cy * cols + cx) as u32);
            }
        }
        Self::from_labels(width, height, &labels)
    }

    fn build(width: usize, height: usize, labels: Vec<u32>, count: usize) -> Self {
        let mut pixels = vec![Vec::new(); count];
        for (p, &l) in labels.iter().enumerate() {
            pixels[l as usize].push(p);
        }
        let superpixels = pixels
            .into_iter()
            .enumerate()
            .map(|(id, pixels)| {
                let (sx, sy) = pixels.iter().fold((0.0, 0.0), |(sx, sy), &p| {
                    (sx + (p % width) as f64, sy + (p / width) as f64)
                });
                let n = pixels.len() as f64;
                Superpixel {
                    id,
                    size: pixels.len(),
                    centroid: (sx / n, sy / n),
                    pixels,
                }
            })
            .collect();
        Self {
            width,
            height,
            labels,
            superpixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x] as usize
    }

    pub fn superpixels(&self) -> &[Superpixel] {
        &self.superpixels
    }

    pub fn len(&self) -> usize {
        self.superpixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.superpixels.is_empty()
    }

    /// True when every label forms a single 4-connected region.
    pub fn is_connected(&self) -> bool {
        connected_components(self.width, self.height, &self.labels).count == self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicParams {
    pub target_count: usize,
    pub compactness: f64,
    pub iterations: usize,
}

impl SlicParams {
    pub fn new(target_count: usize) -> Self {
        Self {
            target_count,
            compactness: 10.0,
            iterations: 10,
        }
    }
}

/// Superpixel budget for a frame: 1000 per 854x480 frame scaled by area,
/// with a floor of 256 (or one per 4x4 block on frames smaller than 64x64).
pub fn default_superpixel_count(width: usize, height: usize) -> usize {
    let pixels = width * height;
    let by_area = libm::round(1000.0 * pixels as f64 / (854.0 * 480.0)) as usize;
    by_area.max((pixels / 16).min(256)).clamp(1, pixels.max(1))
}

// sRGB (D65) -> XYZ, IEC 61966-2-1.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];
// D65 reference white, Y normalized to 1.
const WHITE_D65: [f64; 3] = [0.950_47, 1.0, 1.088_83];

/// Converts an sRGB-encoded colour in `[0, 1]` to CIELAB (D65 white).
pub fn srgb_to_lab(rgb: [f32; 3]) -> [f64; 3] {
    let lin = rgb.map(|c| {
        let c = f64::from(c);
        if c <= 0.040_45 {
            c / 12.92
        } else {
            libm::pow((c + 0.055) / 1.055, 2.4)
        }
    });
    let mut xyz = [0.0; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        xyz[i] = (row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2]) / WHITE_D65[i];
    }
    const DELTA: f64 = 6.0 / 29.0;
    let f = |t: f64| {
        if t > DELTA * DELTA * DELTA {
            libm::cbrt(t)
        } else {
            t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
        }
    };
    let (fx, fy, fz) = (f(xyz[0]), f(xyz[1]), f(xyz[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn frame_to_lab(frame: &Frame) -> Vec<[f64; 3]> {
    frame.rgb().iter().map(|&c| srgb_to_lab(c)).collect()
}

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

fn lab_dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2])
}

/// SLIC superpixels.
///
/// Centers start on a regular grid sized to `target_count`, nudged to the
/// lowest-gradient pixel of their 3x3 neighbourhood, then refined by
/// localized k-means under the distance `d_lab^2 + (d_xy / S)^2 * m^2`.
/// Disconnected fragments and undersized regions are merged into the
/// neighbour sharing the longest border. Fully deterministic.
pub fn slic(frame: &Frame, params: &SlicParams) -> Result<SuperpixelSegmentation> {
    let (w, h) = frame.dims();
    let n = w * h;
    if params.target_count == 0 || params.target_count > n {
        return Err(Error::InvalidInput(format!(
            "target_count {} must lie in [1, {n}]",
            params.target_count
        )));
    }
    let lab = frame_to_lab(frame);

    let target = params.target_count as f64;
    let rows = (libm::round(libm::sqrt(target * h as f64 / w as f64)) as usize).clamp(1, h);
    let cols = (libm::round(target / rows as f64) as usize).clamp(1, w);
    let step_x = w as f64 / cols as f64;
    let step_y = h as f64 / rows as f64;
    let step = libm::sqrt(n as f64 / (rows * cols) as f64);

    let gradient = |x: usize, y: usize| -> f64 {
        if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
            return f64::INFINITY;
        }
        lab_dist2(&lab[y * w + x + 1], &lab[y * w + x - 1])
            + lab_dist2(&lab[(y + 1) * w + x], &lab[(y - 1) * w + x])
    };

    let mut centers = Vec::with_capacity(rows * cols);
    for j in 0..rows {
        for i in 0..cols {
            let mut cx = (((i as f64 + 0.5) * step_x) as usize).min(w - 1);
            let mut cy = (((j as f64 + 0.5) * step_y) as usize).min(h - 1);
            let mut best = gradient(cx, cy);
            let (ox, oy) = (cx, cy);
            for ny in oy.saturating_sub(1)..=(oy + 1).min(h - 1) {
                for nx in ox.saturating_sub(1)..=(ox + 1).min(w - 1) {
                    let g = gradient(nx, ny);
                    if g < best {
                        best = g;
                        cx = nx;
                        cy = ny;
                    }
                }
            }
            centers.push(Center {
                lab: lab[cy * w + cx],
                x: cx as f64,
                y: cy as f64,
            });
        }
    }

    let spatial_weight = (params.compactness / step) * (params.compactness / step);
    let reach_x = libm::ceil(step_x) as isize;
    let reach_y = libm::ceil(step_y) as isize;
    let mut labels = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..params.iterations.max(1) {
        labels.iter_mut().for_each(|l| *l = u32::MAX);
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let cx = libm::round(c.x) as isize;
            let cy = libm::round(c.y) as isize;
            let x0 = (cx - reach_x).max(0) as usize;
            let x1 = ((cx + reach_x) as usize).min(w - 1);
            let y0 = (cy - reach_y).max(0) as usize;
            let y1 = ((cy + reach_y) as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = y * w + x;
                    let dx = x as f64 - c.x;
                    let dy = y as f64 - c.y;
                    let d = lab_dist2(&lab[p], &c.lab) + (dx * dx + dy * dy) * spatial_weight;
                    if d < dist[p] {
                        dist[p] = d;
                        labels[p] = k as u32;
                    }
                }
            }
        }
        // Pixels no window reached fall back to the nearest center overall.
        for p in 0..n {
            if labels[p] == u32::MAX {
                let (x, y) = ((p % w) as f64, (p / w) as f64);
                let mut best = f64::INFINITY;
                for (k, c) in centers.iter().enumerate() {
                    let d = lab_dist2(&lab[p], &c.lab)
                        + ((x - c.x) * (x - c.x) + (y - c.y) * (y - c.y)) * spatial_weight;
                    if d < best {
                        best = d;
                        labels[p] = k as u32;
                    }
                }
            }
        }
        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for (p, &l) in labels.iter().enumerate() {
            let s = &mut sums[l as usize];
            s[0] += lab[p][0];
            s[1] += lab[p][1];
            s[2] += lab[p][2];
            s[3] += (p % w) as f64;
            s[4] += (p / w) as f64;
            s[5] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                c.lab = [s[0] / s[5], s[1] / s[5], s[2] / s[5]];
                c.x = s[3] / s[5];
                c.y = s[4] / s[5];
            }
        }
    }

    let min_size = ((step * step / 8.0) as usize).max(1);
    let merged = enforce_connectivity(w, h, &labels, min_size);
    SuperpixelSegmentation::from_labels(w, h, &merged)
}

struct Components {
    /// Component id per pixel.
    ids: Vec<usize>,
    count: usize,
}

fn connected_components(w: usize, h: usize, labels: &[u32]) -> Components {
    let mut ids = vec![usize::MAX; w * h];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if ids[start] != usize::MAX {
            continue;
        }
        ids[start] = count;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            let (x, y) = (p % w, p / w);
            for q in neighbors4(x, y, w, h) {
                if ids[q] == usize::MAX && labels[q] == labels[p] {
                    ids[q] = count;
                    queue.push_back(q);
                }
            }
        }
        count += 1;
    }
    Components { ids, count }
}

pub(crate) fn neighbors4(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let p = y * w + x;
    [
        (x > 0).then(|| p - 1),
        (x + 1 < w).then(|| p + 1),
        (y > 0).then(|| p - w),
        (y + 1 < h).then(|| p + w),
    ]
    .into_iter()
    .flatten()
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// Merges every component that is not the largest piece of its label, or
/// is smaller than `min_size`, into the adjacent region with which it
/// shares the longest border.
fn enforce_connectivity(w: usize, h: usize, labels: &[u32], min_size: usize) -> Vec<u32> {
    let comps = connected_components(w, h, labels);
    if comps.count <= 1 {
        return vec![0; w * h];
    }
    let mut members = vec![Vec::new(); comps.count];
    let mut comp_label = vec![0u32; comps.count];
    for (p, &c) in comps.ids.iter().enumerate() {
        members[c].push(p);
        comp_label[c] = labels[p];
    }
    let max_label = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut largest = vec![usize::MAX; max_label + 1];
    for c in 0..comps.count {
        let l = comp_label[c] as usize;
        if largest[l] == usize::MAX || members[c].len() > members[largest[l]].len() {
            largest[l] = c;
        }
    }
    let mut orphans: Vec<usize> = (0..comps.count)
        .filter(|&c| largest[comp_label[c] as usize] != c || members[c].len() < min_size)
        .collect();
    orphans.sort_by_key(|&c| (members[c].len(), c));

    let mut parent: Vec<usize> = (0..comps.count).collect();
    let mut border = vec![0usize; comps.count];
    let mut touched = Vec::new();
    for c in orphans {
        if find(&mut parent, c) != c {
            continue;
        }
        for &p in &members[c] {
            let (x, y) = (p % w, p / w);
            for q in neighbors4(x, y, w, h) {
                let r = find(&mut parent, comps.ids[q]);
                if r != c {
                    if border[r] == 0 {
                        touched.push(r);
                    }
                    border[r] += 1;
                }
            }
        }
        let target = touched
            .iter()
            .copied()
            .max_by(|&a, &b| border[a].cmp(&border[b]).then(b.cmp(&a)));
        for &r in &touched {
            border[r] = 0;
        }
        touched.clear();
        if let Some(t) = target {
            parent[c] = t;
            let moved = core::mem::take(&mut members[c]);
            members[t].extend(moved);
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for p in 0..w * h {
        out.push(find(&mut parent, comps.ids[p]) as u32);
    }
    out
}
