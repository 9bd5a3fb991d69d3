//! Lawnmower sweep planning over a rectangular search region.

use crate::scene::Rect;

/// Serpentine pass waypoints covering `region` with the given sweep width.
///
/// Passes run west-east, half a swath inside the region edges, spaced one
/// swath apart, with a final pass pinned half a swath below the north edge
/// when the spacing leaves a gap. Alternate passes reverse direction so the
/// path is flyable end to end.
pub fn lawnmower_waypoints(region: Rect, swath_m: f64) -> Vec<[f64; 2]> {
    assert!(swath_m > 0.0, "swath must be positive");
    let x_west = region.x;
    let x_east = region.x + region.w;
    let y_min = region.y;
    let y_max = region.y + region.h;
    let half = swath_m / 2.0;

    let mut pass_ys: Vec<f64> = Vec::new();
    if swath_m >= region.h {
        pass_ys.push(y_min + region.h / 2.0);
    } else {
        let mut y = y_min + half;
        while y <= y_max - half + 1e-9 {
            pass_ys.push(y);
            y += swath_m;
        }
        let last = *pass_ys.last().expect("at least one pass");
        if y_max - (last + half) > 1e-9 {
            pass_ys.push(y_max - half);
        }
    }

    let mut waypoints = Vec::with_capacity(pass_ys.len() * 2);
    for (i, y) in pass_ys.iter().enumerate() {
        if i % 2 == 0 {
            waypoints.push([x_west, *y]);
            waypoints.push([x_east, *y]);
        } else {
            waypoints.push([x_east, *y]);
            waypoints.push([x_west, *y]);
        }
    }
    waypoints
}

/// Fraction of `region` covered by circles of `radius` swept along the
/// polyline `path`, estimated on an `n x n` sample grid. Test instrumentation
/// for the coverage guarantee.
pub fn coverage_fraction(region: Rect, path: &[[f64; 2]], radius: f64, n: usize) -> f64 {
    if path.is_empty() || n == 0 {
        return 0.0;
    }
    let mut covered = 0usize;
    let total = n * n;
    for i in 0..n {
        for j in 0..n {
            let p = [
                region.x + region.w * (i as f64 + 0.5) / n as f64,
                region.y + region.h * (j as f64 + 0.5) / n as f64,
            ];
            if point_near_path(p, path, radius) {
                covered += 1;
            }
        }
    }
    covered as f64 / total as f64
}

fn point_near_path(p: [f64; 2], path: &[[f64; 2]], radius: f64) -> bool {
    if path.len() == 1 {
        return dist2(p, path[0]) <= radius * radius;
    }
    path.windows(2)
        .any(|seg| point_segment_dist2(p, seg[0], seg[1]) <= radius * radius)
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn point_segment_dist2(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist2(p, a);
    }
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    dist2(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}
