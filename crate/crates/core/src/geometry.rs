//! Points and axis-aligned regions in task space (meters).
//!
//! Regions are closed: a point on a boundary is inside. Obstacles are the
//! exception in the sense that only their *open* interior is excluded from
//! the admissible space, so grazing an obstacle face is allowed.

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2D or 3D position.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    coords: [f64; 3],
    dim: u8,
}

impl Point {
    pub fn xy(x: f64, y: f64) -> Self {
        Point {
            coords: [x, y, 0.0],
            dim: 2,
        }
    }

    pub fn xyz(x: f64, y: f64, z: f64) -> Self {
        Point {
            coords: [x, y, z],
            dim: 3,
        }
    }

    pub fn from_slice(c: &[f64]) -> Result<Self> {
        let p = match c.len() {
            2 => Point::xy(c[0], c[1]),
            3 => Point::xyz(c[0], c[1], c[2]),
            n => {
                return Err(Error::DimensionMismatch {
                    expected: 3,
                    found: n,
                })
            }
        };
        if !p.is_finite() {
            return Err(Error::contract("point coordinates must be finite"));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    pub fn z(&self) -> f64 {
        self.coords[2]
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|c| c.is_finite())
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn translate(&self, offset: &[f64]) -> Point {
        let mut out = *self;
        for (c, o) in out.coords.iter_mut().zip(offset).take(self.dim()) {
            *c += o;
        }
        out
    }

    /// Linear interpolation `self + u (other - self)`.
    pub fn lerp(&self, other: &Point, u: f64) -> Point {
        let mut out = *self;
        for i in 0..self.dim() {
            out.coords[i] = self.coords[i] + u * (other.coords[i] - self.coords[i]);
        }
        out
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::from_slice(&v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.as_slice().to_vec()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.as_slice().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Axis-aligned rectangle, serialized as `[xmin, ymin, xmax, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        let all_finite = [xmin, ymin, xmax, ymax].iter().all(|v| v.is_finite());
        if !all_finite || xmin > xmax || ymin > ymax {
            return Err(Error::InvalidTask(alloc::format!(
                "malformed rectangle [{xmin}, {ymin}, {xmax}, {ymax}]"
            )));
        }
        Ok(Rect {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn center(&self) -> Point {
        Point::xy(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x() >= self.xmin && p.x() <= self.xmax && p.y() >= self.ymin && p.y() <= self.ymax
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.xmin >= self.xmin
            && other.xmax <= self.xmax
            && other.ymin >= self.ymin
            && other.ymax <= self.ymax
    }

    /// True when the open interiors overlap.
    pub fn interiors_overlap(&self, other: &Rect) -> bool {
        self.xmin < other.xmax
            && other.xmin < self.xmax
            && self.ymin < other.ymax
            && other.ymin < self.ymax
    }

    pub fn distance_to(&self, p: &Point) -> f64 {
        let dx = (self.xmin - p.x()).max(0.0).max(p.x() - self.xmax);
        let dy = (self.ymin - p.y()).max(0.0).max(p.y() - self.ymax);
        (dx * dx + dy * dy).sqrt()
    }

    fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        ([self.xmin, self.ymin, 0.0], [self.xmax, self.ymax, 0.0])
    }

    pub fn segment_hits_interior(&self, a: &Point, b: &Point) -> bool {
        let (lo, hi) = self.bounds();
        segment_hits_open_box(&lo[..2], &hi[..2], a.as_slice(), b.as_slice())
    }

    /// Largest depth reached by segment `a`-`b` inside the rectangle's interior.
    pub fn segment_penetration(&self, a: &Point, b: &Point) -> f64 {
        let (lo, hi) = self.bounds();
        segment_penetration(&lo[..2], &hi[..2], a.as_slice(), b.as_slice())
    }
}

impl TryFrom<[f64; 4]> for Rect {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Rect::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.xmin, r.ymin, r.xmax, r.ymax]
    }
}

/// Closed disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn contains(&self, p: &Point) -> bool {
        self.center.distance(p) <= self.radius
    }
}

/// Axis-aligned 3D box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        if min.iter().chain(&max).any(|v| !v.is_finite()) || (0..3).any(|i| min[i] > max[i]) {
            return Err(Error::InvalidTask("malformed box".into()));
        }
        Ok(Aabb { min, max })
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.as_slice()
            .iter()
            .enumerate()
            .all(|(i, c)| *c >= self.min[i] && *c <= self.max[i])
    }

    pub fn distance_outside(&self, p: &Point) -> f64 {
        p.as_slice()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let d = (self.min[i] - c).max(0.0).max(c - self.max[i]);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn diagonal(&self) -> f64 {
        (0..3)
            .map(|i| (self.max[i] - self.min[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Parameter interval `(enter, exit)` of the open box along segment `a + u (b - a)`,
/// before intersecting with `[0, 1]`. `None` when the line misses the open box.
fn open_box_interval(lo: &[f64], hi: &[f64], a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
    let mut enter = f64::NEG_INFINITY;
    let mut exit = f64::INFINITY;
    for i in 0..lo.len() {
        let d = b[i] - a[i];
        if d == 0.0 {
            if !(a[i] > lo[i] && a[i] < hi[i]) {
                return None;
            }
        } else {
            let t0 = (lo[i] - a[i]) / d;
            let t1 = (hi[i] - a[i]) / d;
            let (t0, t1) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
            enter = enter.max(t0);
            exit = exit.min(t1);
        }
    }
    (enter < exit).then_some((enter, exit))
}

/// Does the closed segment meet the open interior of the box?
pub fn segment_hits_open_box(lo: &[f64], hi: &[f64], a: &[f64], b: &[f64]) -> bool {
    match open_box_interval(lo, hi, a, b) {
        Some((enter, exit)) => enter < 1.0 && exit > 0.0,
        None => false,
    }
}

fn interior_depth(lo: &[f64], hi: &[f64], p: &[f64]) -> f64 {
    (0..lo.len())
        .map(|i| (p[i] - lo[i]).min(hi[i] - p[i]))
        .fold(f64::INFINITY, f64::min)
}

/// Maximum depth (distance to the nearest face) reached along the segment
/// while inside the box interior; zero when the segment stays outside.
pub fn segment_penetration(lo: &[f64], hi: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let Some((enter, exit)) = open_box_interval(lo, hi, a, b) else {
        return 0.0;
    };
    let (mut l, mut r) = (enter.max(0.0), exit.min(1.0));
    if l >= r {
        return 0.0;
    }
    let at = |u: f64| -> f64 {
        let mut p = [0.0; 3];
        for i in 0..lo.len() {
            p[i] = a[i] + u * (b[i] - a[i]);
        }
        interior_depth(lo, hi, &p[..lo.len()])
    };
    // depth is concave along the segment, so ternary search finds the max
    for _ in 0..100 {
        let m1 = l + (r - l) / 3.0;
        let m2 = r - (r - l) / 3.0;
        if at(m1) < at(m2) {
            l = m1;
        } else {
            r = m2;
        }
    }
    at(0.5 * (l + r)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_dims_and_distance() {
        let a = Point::xy(0.0, 0.0);
        let b = Point::xy(3.0, 4.0);
        assert_eq!(a.distance(&b), 5.0);
        assert_eq!(
            Point::xyz(1.0, 2.0, 2.0).distance(&Point::xyz(0.0, 0.0, 0.0)),
            3.0
        );
        assert!(Point::from_slice(&[1.0]).is_err());
        assert!(Point::from_slice(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn rect_is_closed() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(r.contains(&Point::xy(1.0, 0.5)));
        assert!(r.contains(&Point::xy(0.0, 0.0)));
        assert!(!r.contains(&Point::xy(1.0 + 1e-12, 0.5)));
        assert!(Rect::new(1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn segment_crossing_and_grazing() {
        let r = Rect::new(0.4, 0.4, 0.6, 0.6).unwrap();
        assert!(r.segment_hits_interior(&Point::xy(0.0, 0.5), &Point::xy(1.0, 0.5)));
        // along the top face: touches the boundary only
        assert!(!r.segment_hits_interior(&Point::xy(0.0, 0.6), &Point::xy(1.0, 0.6)));
        // stops just before the face
        assert!(!r.segment_hits_interior(&Point::xy(0.0, 0.5), &Point::xy(0.4, 0.5)));
        // through a corner point only
        assert!(!r.segment_hits_interior(&Point::xy(0.3, 0.5), &Point::xy(0.5, 0.7)));
        // sparse samples on either side of the obstacle
        assert!(r.segment_hits_interior(&Point::xy(0.3, 0.3), &Point::xy(0.7, 0.7)));
    }

    #[test]
    fn penetration_depth() {
        let r = Rect::new(0.4, 0.4, 0.6, 0.6).unwrap();
        let d = r.segment_penetration(&Point::xy(0.0, 0.5), &Point::xy(1.0, 0.5));
        assert!((d - 0.1).abs() < 1e-9);
        assert_eq!(
            r.segment_penetration(&Point::xy(0.0, 0.0), &Point::xy(1.0, 0.0)),
            0.0
        );
    }

    #[test]
    fn box_segment_3d() {
        let lo = [0.0, 0.0, 0.0];
        let hi = [1.0, 1.0, 1.0];
        assert!(segment_hits_open_box(
            &lo,
            &hi,
            &[-1.0, 0.5, 0.5],
            &[2.0, 0.5, 0.5]
        ));
        assert!(!segment_hits_open_box(
            &lo,
            &hi,
            &[-1.0, 0.5, 1.0],
            &[2.0, 0.5, 1.0]
        ));
    }
}
