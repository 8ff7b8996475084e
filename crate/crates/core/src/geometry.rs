//! Planar points and the rectangular operating region.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Rotation about `pivot` by `angle` radians.
    pub fn rotate_about(self, pivot: Point, angle: f64) -> Point {
        let d = self - pivot;
        let (s, c) = angle.sin_cos();
        pivot + Point::new(c * d.x - s * d.y, s * d.x + c * d.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Axis-aligned closed rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    pub fn is_valid(&self) -> bool {
        self.min.x <= self.max.x && self.min.y <= self.max.y
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Euclidean projection onto the rectangle.
    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_and_clamp() {
        assert_eq!(Point::new(3.0, 4.0).distance(Point::default()), 5.0);
        let r = Rect::new(Point::new(0.0, 0.0), Point::new(10.0, 5.0));
        assert_eq!(r.clamp(Point::new(-1.0, 7.0)), Point::new(0.0, 5.0));
        assert!(r.contains(Point::new(10.0, 0.0)));
        assert!(!r.contains(Point::new(10.0 + 1e-9, 0.0)));
    }

    #[test]
    fn rotation_preserves_distance_to_pivot() {
        let pivot = Point::new(1.0, 2.0);
        let p = Point::new(4.0, -2.0);
        let q = p.rotate_about(pivot, 0.7);
        assert!((q.distance(pivot) - p.distance(pivot)).abs() < 1e-12);
    }
}
