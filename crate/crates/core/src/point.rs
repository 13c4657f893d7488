//! Small fixed-capacity vectors in ℝ^d, d ≤ 3.
//!
//! Points are `Copy` so the path engine can step millions of paths without
//! touching the allocator.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    pub fn zeros(dim: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "dimension {dim} outside 1..={MAX_DIM}"
        );
        Point {
            coords: [0.0; MAX_DIM],
            dim: dim as u8,
        }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut p = Point::zeros(xs.len());
        p.coords[..xs.len()].copy_from_slice(xs);
        p
    }

    pub fn scalar(x: f64) -> Self {
        Point::from_slice(&[x])
    }

    /// `r` times the first canonical basis vector.
    pub fn on_axis(dim: usize, r: f64) -> Self {
        let mut p = Point::zeros(dim);
        p.coords[0] = r;
        p
    }

    /// Unit vector at angle `theta` in the (x₁, x₂) plane, scaled by `r`.
    pub fn polar(r: f64, theta: f64) -> Self {
        Point::from_slice(&[r * theta.cos(), r * theta.sin()])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords[..self.dim as usize]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.as_slice().to_vec()
    }

    #[inline]
    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        (*self - *other).norm()
    }

    pub fn scaled(&self, s: f64) -> Point {
        *self * s
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    /// `self / |self|`, or `None` at the origin.
    pub fn normalized(&self) -> Option<Point> {
        let n = self.norm();
        (n > 0.0).then(|| *self * (1.0 / n))
    }
}

impl Default for Point {
    fn default() -> Self {
        Point::zeros(1)
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Index<usize> for Point {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for Point {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

macro_rules! elementwise {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr for Point {
            type Output = Point;
            #[inline]
            fn $f(mut self, rhs: Point) -> Point {
                debug_assert_eq!(self.dim, rhs.dim);
                for i in 0..MAX_DIM {
                    self.coords[i] = self.coords[i] $op rhs.coords[i];
                }
                self
            }
        }
    };
}
elementwise!(Add, add, +);
elementwise!(Sub, sub, -);

impl AddAssign for Point {
    #[inline]
    fn add_assign(&mut self, rhs: Point) {
        *self = *self + rhs;
    }
}

impl SubAssign for Point {
    #[inline]
    fn sub_assign(&mut self, rhs: Point) {
        *self = *self - rhs;
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(mut self, s: f64) -> Point {
        for c in self.coords.iter_mut() {
            *c *= s;
        }
        self
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        self * -1.0
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "point must have 1..={MAX_DIM} coordinates, got {}",
                v.len()
            )));
        }
        Ok(Point::from_slice(&v))
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::scalar(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_respects_dimension() {
        let a = Point::from_slice(&[1.0, 2.0]);
        let b = Point::from_slice(&[0.5, -1.0]);
        assert_eq!((a + b).as_slice(), &[1.5, 1.0]);
        assert_eq!((a - b).as_slice(), &[0.5, 3.0]);
        assert_eq!((a * 2.0).as_slice(), &[2.0, 4.0]);
        assert_eq!(a.dot(&b), -1.5);
        assert_eq!(a.dim(), 2);
    }

    #[test]
    fn serde_roundtrip() {
        let p = Point::from_slice(&[0.25, -3.0, 1.0]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[0.25,-3.0,1.0]");
        let q: Point = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<Point>("[1,2,3,4]").is_err());
    }
}
