//! SLIC superpixels: k-means in `(L, a, b, x, y)` with a local search window,
//! followed by a connectivity pass.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::MaskError;
use crate::raster::{rgb_to_lab, ImageRaster};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlicParams {
    pub compactness: f64,
    pub iterations: usize,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            compactness: 10.0,
            iterations: 10,
        }
    }
}

/// A partition of the image into `count` non-empty segments labelled `0..count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: usize,
}

impl Segmentation {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self, MaskError> {
        if labels.len() != width * height || labels.is_empty() {
            return Err(MaskError::Segmentation(format!(
                "{} labels for a {width}x{height} image",
                labels.len()
            )));
        }
        let count = *labels.iter().max().expect("non-empty") as usize + 1;
        let mut seen = vec![false; count];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(MaskError::Segmentation(format!("segment {missing} is empty")));
        }
        Ok(Self {
            width,
            height,
            labels,
            count,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x] as usize
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.count];
        for &l in &self.labels {
            s[l as usize] += 1;
        }
        s
    }

    /// True when every segment is a single 4-connected region.
    pub fn is_four_connected(&self) -> bool {
        let (_, n) = components(&self.labels, self.width, self.height);
        n == self.count
    }
}

/// Connected components under 4-adjacency of equal labels.
fn components(labels: &[u32], width: usize, height: usize) -> (Vec<usize>, usize) {
    const UNSET: usize = usize::MAX;
    let mut comp = vec![UNSET; labels.len()];
    let mut n = 0;
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if comp[start] != UNSET {
            continue;
        }
        comp[start] = n;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % width, i / width);
            let mut visit = |j: usize| {
                if comp[j] == UNSET && labels[j] == labels[i] {
                    comp[j] = n;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
        n += 1;
    }
    (comp, n)
}

struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

/// SLIC segmentation into roughly `k` superpixels.
///
/// Centers start on a regular grid with spacing `S = sqrt(HW / k)`; each
/// iteration assigns pixels within a `2S x 2S` neighbourhood of a center by
/// `D = d_lab + (compactness / S) * d_xy` and moves centers to their means.
/// Components smaller than `(S/4)^2` are merged into their largest neighbour,
/// and the result never has more than `2k` segments.
pub fn slic_segment(img: &ImageRaster, k: usize, compactness: f64, iterations: usize) -> Result<Segmentation, MaskError> {
    let (width, height) = img.dims();
    let n = width * height;
    if k == 0 || k > n {
        return Err(MaskError::SegmentCount { k, max: n });
    }
    let lab = rgb_to_lab(&img.to_rgb())?.data;
    let step = (n as f64 / k as f64).sqrt();

    let ny = ((height as f64 / step).round() as usize).clamp(1, k.min(height));
    let nx = ((k as f64 / ny as f64).round() as usize).clamp(1, width);
    let sx = width as f64 / nx as f64;
    let sy = height as f64 / ny as f64;

    let mut centers: Vec<Center> = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = (i as f64 + 0.5) * sx - 0.5;
            let y = (j as f64 + 0.5) * sy - 0.5;
            let px = (x.round() as usize).min(width - 1);
            let py = (y.round() as usize).min(height - 1);
            centers.push(Center {
                lab: lab[py * width + px],
                x,
                y,
            });
        }
    }

    // grid-cell labels guarantee full coverage before the first iteration
    let mut labels: Vec<u32> = (0..n)
        .map(|p| {
            let (x, y) = (p % width, p / width);
            let ci = ((x as f64 / sx) as usize).min(nx - 1);
            let cj = ((y as f64 / sy) as usize).min(ny - 1);
            (cj * nx + ci) as u32
        })
        .collect();

    let radius = sx.max(sy).ceil() as isize;
    let spatial_weight = compactness / step;
    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..iterations {
        dist.fill(f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let cx = c.x.round() as isize;
            let cy = c.y.round() as isize;
            let x0 = (cx - radius).max(0) as usize;
            let x1 = ((cx + radius) as usize).min(width - 1);
            let y0 = (cy - radius).max(0) as usize;
            let y1 = ((cy + radius) as usize).min(height - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = y * width + x;
                    let l = &lab[p];
                    let dc = ((l[0] - c.lab[0]).powi(2) + (l[1] - c.lab[1]).powi(2) + (l[2] - c.lab[2]).powi(2)).sqrt();
                    let ds = ((x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2)).sqrt();
                    let d = dc + spatial_weight * ds;
                    if d < dist[p] {
                        dist[p] = d;
                        labels[p] = ci as u32;
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
            s[3] += (p % width) as f64;
            s[4] += (p / width) as f64;
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

    let min_size = ((step / 4.0).powi(2)).ceil() as usize;
    let labels = enforce_connectivity(&labels, width, height, min_size.max(1), 2 * k);
    Segmentation::new(width, height, labels)
}

/// Relabel 4-connected components, merging those smaller than `min_size`
/// (smallest first) into their largest neighbour, then keep merging the
/// smallest while more than `max_count` remain. Labels are renumbered in
/// row-major order of first appearance.
fn enforce_connectivity(labels: &[u32], width: usize, height: usize, min_size: usize, max_count: usize) -> Vec<u32> {
    let (comp, n) = components(labels, width, height);
    let mut size = vec![0usize; n];
    for &c in &comp {
        size[c] += 1;
    }
    let mut neighbours: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, &c) in comp.iter().enumerate() {
        let (x, y) = (i % width, i / width);
        if x + 1 < width && comp[i + 1] != c {
            neighbours[c].insert(comp[i + 1]);
            neighbours[comp[i + 1]].insert(c);
        }
        if y + 1 < height && comp[i + width] != c {
            neighbours[c].insert(comp[i + width]);
            neighbours[comp[i + width]].insert(c);
        }
    }

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }

    let mut alive = n;
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|c| Reverse((size[c], c))).collect();
    while let Some(Reverse((s, c))) = heap.pop() {
        if parent[c] != c || size[c] != s {
            continue;
        }
        if alive <= 1 || (s >= min_size && alive <= max_count) {
            break;
        }
        let roots: BTreeSet<usize> = neighbours[c]
            .iter()
            .map(|&o| find(&mut parent, o))
            .filter(|&r| r != c)
            .collect();
        // largest neighbour, lowest id on ties
        let Some(target) = roots.iter().copied().max_by_key(|&r| (size[r], Reverse(r))) else {
            continue;
        };
        parent[c] = target;
        size[target] += size[c];
        let moved = std::mem::take(&mut neighbours[c]);
        let mut merged = std::mem::take(&mut neighbours[target]);
        merged.extend(moved);
        merged.retain(|&o| {
            let r = find(&mut parent, o);
            r != target
        });
        neighbours[target] = merged.into_iter().map(|o| find(&mut parent, o)).collect();
        alive -= 1;
        heap.push(Reverse((size[target], target)));
    }

    let mut remap = vec![u32::MAX; n];
    let mut next = 0u32;
    comp.iter()
        .map(|&c| {
            let r = find(&mut parent, c);
            if remap[r] == u32::MAX {
                remap[r] = next;
                next += 1;
            }
            remap[r]
        })
        .collect()
}
