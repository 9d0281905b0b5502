use std::collections::VecDeque;

use crate::error::{Error, Result};

use super::BinaryMask;

fn disk_offsets(radius: usize) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Dilation by a disk of the given radius.
pub fn dilate(mask: &BinaryMask, radius: usize) -> Result<BinaryMask> {
    if radius == 0 {
        return Err(Error::InvalidArgument("dilation radius must be >= 1".into()));
    }
    let offsets = disk_offsets(radius);
    let (w, h) = (mask.width(), mask.height());
    let mut out = BinaryMask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    out.set(nx as usize, ny as usize, true);
                }
            }
        }
    }
    Ok(out)
}

/// Erosion by a disk; the area outside the frame counts as foreground.
pub fn erode(mask: &BinaryMask, radius: usize) -> Result<BinaryMask> {
    if radius == 0 {
        return Err(Error::InvalidArgument("erosion radius must be >= 1".into()));
    }
    let offsets = disk_offsets(radius);
    let (w, h) = (mask.width(), mask.height());
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        offsets.iter().all(|&(dx, dy)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h || mask.get(nx as usize, ny as usize)
        })
    }))
}

/// Morphological closing (dilate, then erode) with a disk.
pub fn close(mask: &BinaryMask, radius: usize) -> Result<BinaryMask> {
    erode(&dilate(mask, radius)?, radius)
}

/// 4-connected component labels (0 = background) and component sizes
/// indexed by `label - 1`.
pub(crate) fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize| {
                if mask.bits()[q] && labels[q] == 0 {
                    labels[q] = label;
                    queue.push_back(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Keeps the largest 4-connected component (lowest label on ties).
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let (labels, sizes) = label_components(mask);
    let Some((best, _)) = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
    else {
        return BinaryMask::empty(mask.width(), mask.height());
    };
    let keep = best as u32 + 1;
    BinaryMask::from_bits(
        mask.width(),
        mask.height(),
        labels.iter().map(|&l| l == keep).collect(),
    )
}

/// Fills closed contours: everything not 4-reachable from the border through
/// background pixels becomes foreground, then the largest component is kept.
pub fn fill_contour(mask: &BinaryMask) -> Result<BinaryMask> {
    let (w, h) = (mask.width(), mask.height());
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    let seed = |x: usize, y: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        let p = y * w + x;
        if !mask.bits()[p] && !outside[p] {
            outside[p] = true;
            queue.push_back(p);
        }
    };
    for x in 0..w {
        seed(x, 0, &mut outside, &mut queue);
        seed(x, h - 1, &mut outside, &mut queue);
    }
    for y in 0..h {
        seed(0, y, &mut outside, &mut queue);
        seed(w - 1, y, &mut outside, &mut queue);
    }
    while let Some(p) = queue.pop_front() {
        let (x, y) = (p % w, p / w);
        let mut visit = |q: usize| {
            if !mask.bits()[q] && !outside[q] {
                outside[q] = true;
                queue.push_back(q);
            }
        };
        if x > 0 {
            visit(p - 1);
        }
        if x + 1 < w {
            visit(p + 1);
        }
        if y > 0 {
            visit(p - w);
        }
        if y + 1 < h {
            visit(p + w);
        }
    }
    let filled = BinaryMask::from_bits(w, h, outside.iter().map(|&o| !o).collect());
    if filled.is_empty() {
        return Err(Error::Segmentation("no enclosed region found".into()));
    }
    Ok(largest_component(&filled))
}
