//! Exact 3D IoU of yaw-oriented boxes.

use crate::state::BoundingBox;

type Vec2 = [f64; 2];

fn cross(o: Vec2, a: Vec2, b: Vec2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn polygon_area(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        twice += a[0] * b[1] - b[0] * a[1];
    }
    twice.abs() / 2.0
}

fn segment_line_intersection(p: Vec2, q: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let d1 = cross(a, b, p);
    let d2 = cross(a, b, q);
    let t = d1 / (d1 - d2);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Sutherland–Hodgman: clips `subject` against every edge of the convex,
/// counter-clockwise `clip` polygon.
pub fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut output: Vec<Vec2> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(segment_line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(segment_line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

/// Area of the bird's-eye-view overlap of two boxes.
pub fn bev_intersection_area(a: &BoundingBox, b: &BoundingBox) -> f64 {
    polygon_area(&clip_convex(&a.bev_corners(), &b.bev_corners()))
}

/// 3D intersection-over-union of two yaw-oriented boxes, in `[0, 1]`.
pub fn box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    // Clipping round-off would otherwise put identical boxes just below 1.
    if a == b {
        return 1.0;
    }
    let (alo, ahi) = a.z_range();
    let (blo, bhi) = b.z_range();
    let dz = ahi.min(bhi) - alo.max(blo);
    if dz <= 0.0 {
        return 0.0;
    }
    let inter = bev_intersection_area(a, b) * dz;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.size.volume() + b.size.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}
