//! Planar polygon utilities: area moments, simplicity checks, ray casting
//! and the built-in payload cross-sections.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Area moments of a polygon about the coordinate origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaMoments<T> {
    /// Signed area (positive for counter-clockwise vertex order).
    pub area: T,
    /// Area centroid.
    pub centroid: Vector2<T>,
    /// ∫ x² dA
    pub xx: T,
    /// ∫ y² dA
    pub yy: T,
    /// ∫ x·y dA
    pub xy: T,
}

/// Computes area, centroid and second moments with the shoelace formulas.
pub fn area_moments<T: Real>(vertices: &[Vector2<T>]) -> AreaMoments<T> {
    let n = vertices.len();
    let mut a2 = T::zero();
    let mut cx = T::zero();
    let mut cy = T::zero();
    let mut xx = T::zero();
    let mut yy = T::zero();
    let mut xy = T::zero();
    let two = lit::<T>(2.0);
    for i in 0..n {
        let p = vertices[i];
        let q = vertices[(i + 1) % n];
        let cross = p.x * q.y - q.x * p.y;
        a2 += cross;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
        xx += (p.x * p.x + p.x * q.x + q.x * q.x) * cross;
        yy += (p.y * p.y + p.y * q.y + q.y * q.y) * cross;
        xy += (p.x * q.y + two * p.x * p.y + two * q.x * q.y + q.x * p.y) * cross;
    }
    let area = a2 / two;
    let centroid = if area != T::zero() {
        Vector2::new(cx / (lit::<T>(3.0) * a2), cy / (lit::<T>(3.0) * a2))
    } else {
        Vector2::zeros()
    };
    AreaMoments {
        area,
        centroid,
        xx: xx / lit(12.0),
        yy: yy / lit(12.0),
        xy: xy / lit(24.0),
    }
}

fn orient<T: Real>(a: &Vector2<T>, b: &Vector2<T>, c: &Vector2<T>) -> T {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment<T: Real>(a: &Vector2<T>, b: &Vector2<T>, p: &Vector2<T>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect<T: Real>(
    p1: &Vector2<T>,
    p2: &Vector2<T>,
    q1: &Vector2<T>,
    q2: &Vector2<T>,
) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    let z = T::zero();
    if ((d1 > z && d2 < z) || (d1 < z && d2 > z)) && ((d3 > z && d4 < z) || (d3 < z && d4 > z)) {
        return true;
    }
    (d1 == z && on_segment(q1, q2, p1))
        || (d2 == z && on_segment(q1, q2, p2))
        || (d3 == z && on_segment(p1, p2, q1))
        || (d4 == z && on_segment(p1, p2, q2))
}

/// True when no two non-adjacent edges touch and no vertex repeats.
pub fn is_simple<T: Real>(vertices: &[Vector2<T>]) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if vertices[i] == vertices[j] {
                return false;
            }
        }
    }
    for i in 0..n {
        let a1 = vertices[i];
        let a2 = vertices[(i + 1) % n];
        for j in (i + 1)..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let b1 = vertices[j];
            let b2 = vertices[(j + 1) % n];
            if segments_intersect(&a1, &a2, &b1, &b2) {
                return false;
            }
        }
    }
    true
}

/// Largest parameter `t > 0` such that `t·(cos θ, sin θ)` lies on the
/// polygon boundary, i.e. the outermost crossing of a ray from the origin.
pub fn outermost_ray_crossing<T: Real>(vertices: &[Vector2<T>], theta: T) -> Option<T> {
    let dir = Vector2::new(theta.cos(), theta.sin());
    let n = vertices.len();
    let tol = lit::<T>(1e-12);
    let mut best: Option<T> = None;
    for i in 0..n {
        let a = vertices[i];
        let e = vertices[(i + 1) % n] - a;
        let denom = dir.x * e.y - dir.y * e.x;
        if denom.abs() <= T::eps() * e.norm() {
            continue;
        }
        let t = (a.x * e.y - a.y * e.x) / denom;
        let s = (a.x * dir.y - a.y * dir.x) / denom;
        if t > T::zero() && s >= -tol && s <= T::one() + tol {
            best = Some(match best {
                Some(b) if b >= t => b,
                _ => t,
            });
        }
    }
    best
}

/// Re-centers a polygon on its area centroid and orients it counter-clockwise.
pub fn normalize_polygon<T: Real>(vertices: &[Vector2<T>]) -> Result<Vec<Vector2<T>>> {
    if vertices.len() < 3 {
        return Err(Error::InvalidPayload(format!(
            "polygon needs at least 3 vertices, got {}",
            vertices.len()
        )));
    }
    if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) {
        return Err(Error::InvalidPayload("non-finite vertex".into()));
    }
    if !is_simple(vertices) {
        return Err(Error::InvalidPayload("polygon is not simple".into()));
    }
    let m = area_moments(vertices);
    if m.area.abs() <= T::eps() {
        return Err(Error::InvalidPayload(format!(
            "polygon has zero area ({})",
            to_f64(m.area)
        )));
    }
    let mut out: Vec<Vector2<T>> = vertices.iter().map(|v| v - m.centroid).collect();
    if m.area < T::zero() {
        out.reverse();
    }
    // A second pass removes the residual of the first subtraction.
    let c = area_moments(&out).centroid;
    for v in &mut out {
        *v -= c;
    }
    Ok(out)
}

/// Built-in payload cross-sections.
pub mod shapes {
    use super::*;

    /// Axis-aligned square of the given side length, centered at the origin.
    pub fn square<T: Real>(side: f64) -> Vec<Vector2<T>> {
        rectangle(side, side)
    }

    pub fn rectangle<T: Real>(width: f64, height: f64) -> Vec<Vector2<T>> {
        let (w, h) = (width / 2.0, height / 2.0);
        [(-w, -h), (w, -h), (w, h), (-w, h)]
            .iter()
            .map(|&(x, y)| Vector2::new(lit(x), lit(y)))
            .collect()
    }

    /// Square with a rectangular notch cut into the middle of its +x side.
    pub fn notched_square<T: Real>(side: f64, notch_width: f64, notch_depth: f64) -> Vec<Vector2<T>> {
        let h = side / 2.0;
        let nw = notch_width / 2.0;
        let inner = h - notch_depth;
        [
            (-h, -h),
            (h, -h),
            (h, -nw),
            (inner, -nw),
            (inner, nw),
            (h, nw),
            (h, h),
            (-h, h),
        ]
        .iter()
        .map(|&(x, y)| Vector2::new(lit(x), lit(y)))
        .collect()
    }

    /// L-shaped panel: a square with its (+x, +y) corner square removed.
    pub fn l_panel<T: Real>(side: f64, arm_width: f64) -> Vec<Vector2<T>> {
        let s = side;
        let w = arm_width;
        [(0.0, 0.0), (s, 0.0), (s, w), (w, w), (w, s), (0.0, s)]
            .iter()
            .map(|&(x, y)| Vector2::new(lit(x), lit(y)))
            .collect()
    }

    /// Regular polygon approximating a circle; vertex `k` sits at angle `2πk/n`.
    pub fn circle<T: Real>(radius: f64, n: usize) -> Vec<Vector2<T>> {
        (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Vector2::new(lit(radius * a.cos()), lit(radius * a.sin()))
            })
            .collect()
    }

    /// Side length shared by the built-in experimental panels, m.
    pub const PANEL_SIDE: f64 = 0.45;

    /// Resolves a named shape: `square`, `concave_square`, `L_panel`, `circle`.
    pub fn named<T: Real>(name: &str) -> Option<Vec<Vector2<T>>> {
        match name {
            "square" => Some(square(PANEL_SIDE)),
            "concave_square" => Some(notched_square(PANEL_SIDE, 0.15, 0.2)),
            "L_panel" => Some(l_panel(PANEL_SIDE, 0.2)),
            "circle" => Some(circle(PANEL_SIDE / 2.0, 360)),
            _ => None,
        }
    }
}
