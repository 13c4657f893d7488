//! Quadrature on the unit sphere S^{d-1}, d ≤ 3.

use std::f64::consts::PI;

use crate::domain::unit_sphere_area;
use crate::point::Point;
use crate::quadrature::gauss_legendre;

/// Directions with weights summing to |S^{d-1}|.
///
/// d = 1: the two points ±1 (weight 1 each); `n` is ignored.
/// d = 2: `n` equally spaced angles (trapezoid, spectrally accurate for
/// smooth periodic integrands).
/// d = 3: Gauss–Legendre in cos θ with `n/2` nodes times `n` azimuths.
pub fn sphere_rule(d: usize, n: usize) -> Vec<(Point, f64)> {
    match d {
        1 => vec![(Point::scalar(1.0), 1.0), (Point::scalar(-1.0), 1.0)],
        2 => {
            let n = n.max(4);
            let w = 2.0 * PI / n as f64;
            (0..n)
                .map(|i| (Point::polar(1.0, 2.0 * PI * i as f64 / n as f64), w))
                .collect()
        }
        3 => {
            let n = n.max(4);
            let (ct, wt) = gauss_legendre((n / 2).max(2));
            let wp = 2.0 * PI / n as f64;
            let mut out = Vec::with_capacity(ct.len() * n);
            for (c, w) in ct.iter().zip(&wt) {
                let s = (1.0 - c * c).sqrt();
                for j in 0..n {
                    let phi = 2.0 * PI * j as f64 / n as f64;
                    out.push((Point::from_slice(&[s * phi.cos(), s * phi.sin(), *c]), w * wp));
                }
            }
            out
        }
        _ => panic!("sphere rule supports d ≤ 3"),
    }
}

/// `count` unit vectors spread over the sphere, used as probe rays. In d = 1
/// only ±1 exist, so the list alternates between them.
pub fn rays(d: usize, count: usize) -> Vec<Point> {
    match d {
        1 => (0..count.max(1))
            .map(|i| Point::scalar(if i % 2 == 0 { 1.0 } else { -1.0 }))
            .collect(),
        2 => (0..count.max(1))
            .map(|i| Point::polar(1.0, 2.0 * PI * i as f64 / count.max(1) as f64))
            .collect(),
        _ => {
            // Fibonacci lattice
            let n = count.max(1);
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    Point::from_slice(&[r * phi.cos(), r * phi.sin(), z])
                })
                .collect()
        }
    }
}

pub fn sphere_area(d: usize) -> f64 {
    unit_sphere_area(d)
}
