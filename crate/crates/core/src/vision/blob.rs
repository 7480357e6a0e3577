use super::RgbImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    /// Centroid in pixel coordinates.
    pub u: f64,
    pub v: f64,
    pub pixel_count: usize,
}

/// Largest 4-connected group of pixels within `tolerance` (per channel) of
/// `target`. Ties go to the group found first in row-major order.
pub fn detect_color_blob(image: &RgbImage, target: [u8; 3], tolerance: [u8; 3]) -> Option<Blob> {
    let (w, h) = (image.width as usize, image.height as usize);
    let matches = |i: usize| {
        let px = &image.data[3 * i..3 * i + 3];
        (0..3).all(|k| px[k].abs_diff(target[k]) <= tolerance[k])
    };
    let mut visited = vec![false; w * h];
    let mut stack = Vec::new();
    let mut best: Option<Blob> = None;
    for start in 0..w * h {
        if visited[start] || !matches(start) {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
        while let Some(i) = stack.pop() {
            let (u, v) = (i % w, i / w);
            su += u as f64;
            sv += v as f64;
            n += 1;
            let mut visit = |j: usize| {
                if !visited[j] && matches(j) {
                    visited[j] = true;
                    stack.push(j);
                }
            };
            if u > 0 {
                visit(i - 1);
            }
            if u + 1 < w {
                visit(i + 1);
            }
            if v > 0 {
                visit(i - w);
            }
            if v + 1 < h {
                visit(i + w);
            }
        }
        if best.is_none_or(|b| n > b.pixel_count) {
            best = Some(Blob {
                u: su / n as f64,
                v: sv / n as f64,
                pixel_count: n,
            });
        }
    }
    best
}
