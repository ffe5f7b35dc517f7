//! Planar geometry: vectors, angles, oriented boxes and the separating-axis test.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `angle` (radians, counter-clockwise from +x).
    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn lerp(self, other: Vec2, a: f64) -> Self {
        Self::new(
            self.x + (other.x - self.x) * a,
            self.y + (other.y - self.y) * a,
        )
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Signed smallest difference `a - b`, in `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Interpolates between two headings along the shorter arc.
pub fn lerp_angle(a: f64, b: f64, t: f64) -> f64 {
    wrap_angle(a + angle_diff(b, a) * t)
}

/// Oriented rectangle: center, heading of the long axis, half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Vec2,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Obb {
    pub fn new(center: Vec2, heading: f64, half_length: f64, half_width: f64) -> Self {
        Self {
            center,
            heading,
            half_length,
            half_width,
        }
    }

    /// Longitudinal and lateral unit axes.
    pub fn axes(&self) -> [Vec2; 2] {
        let u = Vec2::from_angle(self.heading);
        [u, u.perp()]
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let [u, v] = self.axes();
        let l = u * self.half_length;
        let w = v * self.half_width;
        let c = self.center;
        [c + l + w, c - l + w, c - l - w, c + l - w]
    }

    pub fn inflate(&self, d_length: f64, d_width: f64) -> Self {
        Self {
            half_length: self.half_length + d_length,
            half_width: self.half_width + d_width,
            ..*self
        }
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let [u, v] = self.axes();
        let c = self.center.dot(axis);
        let r = self.half_length * u.dot(axis).abs() + self.half_width * v.dot(axis).abs();
        (c - r, c + r)
    }

    /// Separating-axis test over the four face normals. Touching boxes count as overlapping.
    pub fn overlaps(&self, other: &Obb) -> bool {
        let [a0, a1] = self.axes();
        let [b0, b1] = other.axes();
        for axis in [a0, a1, b0, b1] {
            let (min_a, max_a) = self.project(axis);
            let (min_b, max_b) = other.project(axis);
            if max_a < min_b || max_b < min_a {
                return false;
            }
        }
        true
    }

    /// Point in the box's local frame (longitudinal, lateral).
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        let [u, v] = self.axes();
        let d = p - self.center;
        Vec2::new(d.dot(u), d.dot(v))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let q = self.to_local(p);
        q.x.abs() <= self.half_length && q.y.abs() <= self.half_width
    }

    /// True iff the open segment `a → b` passes through the box interior.
    pub fn blocks_segment(&self, a: Vec2, b: Vec2) -> bool {
        let p = self.to_local(a);
        let q = self.to_local(b);
        let d = q - p;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for (start, delta, half) in [(p.x, d.x, self.half_length), (p.y, d.y, self.half_width)] {
            if delta.abs() < 1e-12 {
                if start <= -half || start >= half {
                    return false;
                }
                continue;
            }
            let mut ta = (-half - start) / delta;
            let mut tb = (half - start) / delta;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 >= t1 {
                return false;
            }
        }
        // Ignore grazes at the endpoints so a target point on a box edge is not self-blocked.
        t1 - t0 > 1e-9 && t0 < 1.0 - 1e-9 && t1 > 1e-9
    }

    /// Points spaced evenly along the perimeter, `per_edge` per edge.
    pub fn boundary_samples(&self, per_edge: usize) -> Vec<Vec2> {
        let c = self.corners();
        let mut out = Vec::with_capacity(per_edge * 4);
        for i in 0..4 {
            let a = c[i];
            let b = c[(i + 1) % 4];
            for k in 0..per_edge {
                out.push(a.lerp(b, k as f64 / per_edge as f64));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_boxes_overlap() {
        let a = Obb::new(Vec2::new(3.0, -1.0), 0.4, 2.0, 1.0);
        assert!(a.overlaps(&a));
    }

    #[test]
    fn distant_boxes_do_not_overlap() {
        let a = Obb::new(Vec2::ZERO, 0.0, 0.5, 0.5);
        let b = Obb::new(Vec2::new(100.0, 0.0), 0.0, 0.5, 0.5);
        assert!(!a.overlaps(&b));
    }

    /// Point-sampling oracle: two convex boxes overlap iff a dense grid of one box's
    /// interior hits the other (approximate but independent of SAT).
    fn sampled_overlap(a: &Obb, b: &Obb) -> bool {
        let n = 80;
        let [u, v] = a.axes();
        for i in 0..=n {
            for j in 0..=n {
                let s = -1.0 + 2.0 * i as f64 / n as f64;
                let t = -1.0 + 2.0 * j as f64 / n as f64;
                let p = a.center + u * (s * a.half_length) + v * (t * a.half_width);
                if b.contains(p) {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn rotated_corner_overlap() {
        // 2x1 box (half 1.0 x 0.5) at the origin, and the same box rotated 45 degrees
        // placed so its lowest corner pokes 0.1 m above the first box's top face.
        let a = Obb::new(Vec2::ZERO, 0.0, 1.0, 0.5);
        let h = std::f64::consts::FRAC_PI_4;
        let b0 = Obb::new(Vec2::ZERO, h, 1.0, 0.5);
        let lowest = b0.corners().iter().map(|c| c.y).fold(f64::INFINITY, f64::min);
        let shift = 0.5 - 0.1 - lowest;
        let b = Obb::new(Vec2::new(0.0, shift), h, 1.0, 0.5);
        assert!(sampled_overlap(&b, &a));
        assert!(a.overlaps(&b));
        // Raising it by 0.2 m clears the overlap.
        let c = Obb::new(Vec2::new(0.0, shift + 0.2), h, 1.0, 0.5);
        assert!(!sampled_overlap(&c, &a));
        assert!(!a.overlaps(&c));
    }

    #[test]
    fn angles_wrap() {
        assert!((wrap_angle(-0.1) - (TAU - 0.1)).abs() < 1e-12);
        assert!((angle_diff(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
        assert!((lerp_angle(TAU - 0.1, 0.1, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn segment_blocking() {
        let wall = Obb::new(Vec2::new(5.0, 0.0), 0.0, 0.5, 3.0);
        assert!(wall.blocks_segment(Vec2::ZERO, Vec2::new(10.0, 0.0)));
        assert!(!wall.blocks_segment(Vec2::ZERO, Vec2::new(10.0, 10.0)));
        assert!(!wall.blocks_segment(Vec2::ZERO, Vec2::new(3.0, 0.0)));
    }

    proptest::proptest! {
        #[test]
        fn sat_agrees_with_sampling_when_clear(
            x in -6.0f64..6.0, y in -6.0f64..6.0, h in 0.0f64..std::f64::consts::TAU,
            hl in 0.3f64..3.0, hw in 0.3f64..2.0,
        ) {
            let a = Obb::new(Vec2::ZERO, 0.3, 2.0, 1.0);
            let b = Obb::new(Vec2::new(x, y), h, hl, hw);
            // Sampling can miss thin overlaps, so only check one direction.
            if sampled_overlap(&a, &b) || sampled_overlap(&b, &a) {
                proptest::prop_assert!(a.overlaps(&b));
            }
            proptest::prop_assert_eq!(a.overlaps(&b), b.overlaps(&a));
        }
    }
}
