//! Open sets used as exit domains, target sets and observation windows.
//!
//! Membership tests are strict (`<`), so the boundary itself belongs to the
//! complement. Boundary distances are exact for every shape.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::point::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DomainSpec {
    /// `{x : |x - center| < radius}`
    Ball { center: Point, radius: f64 },
    /// `{x : lo < x < hi}` componentwise.
    Box { lo: Point, hi: Point },
    /// `{x : |x - center| > radius}`
    ComplementOfBall { center: Point, radius: f64 },
    /// `{x : r_in < |x - center| < r_out}`
    Annulus {
        center: Point,
        r_in: f64,
        r_out: f64,
    },
    /// Open cone `{x ≠ v : angle(x - v, axis) < half_angle}`; in d = 1 the
    /// open half line `{v + t·axis : t > 0}`.
    Cone {
        vertex: Point,
        axis: Point,
        half_angle: f64,
    },
}

impl DomainSpec {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        let d = DomainSpec::Ball { center, radius };
        d.check()?;
        Ok(d)
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = DomainSpec::Box {
            lo: Point::scalar(a),
            hi: Point::scalar(b),
        };
        d.check()?;
        Ok(d)
    }

    pub fn centered_ball(dim: usize, radius: f64) -> Self {
        DomainSpec::Ball {
            center: Point::zeros(dim),
            radius,
        }
    }

    /// Validates radii, box ordering and dimensional consistency.
    pub fn check(&self) -> Result<()> {
        match self {
            DomainSpec::Ball { center, radius } | DomainSpec::ComplementOfBall { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(invalid(format!("radius must be positive, got {radius}")));
                }
                if !center.is_finite() {
                    return Err(invalid("center must be finite"));
                }
            }
            DomainSpec::Box { lo, hi } => {
                if lo.dim() != hi.dim() {
                    return Err(invalid("box corners have different dimensions"));
                }
                if lo.as_slice().iter().zip(hi.as_slice()).any(|(l, h)| !(l < h)) {
                    return Err(invalid("box requires lo < hi componentwise"));
                }
            }
            DomainSpec::Annulus { r_in, r_out, .. } => {
                if !(*r_in > 0.0 && r_in < r_out && r_out.is_finite()) {
                    return Err(invalid(format!(
                        "annulus requires 0 < r_in < r_out, got ({r_in}, {r_out})"
                    )));
                }
            }
            DomainSpec::Cone {
                vertex,
                axis,
                half_angle,
            } => {
                if vertex.dim() != axis.dim() {
                    return Err(invalid("cone vertex and axis differ in dimension"));
                }
                if axis.norm() == 0.0 {
                    return Err(invalid("cone axis must be nonzero"));
                }
                if axis.dim() > 1 && !(*half_angle > 0.0 && *half_angle < std::f64::consts::PI) {
                    return Err(invalid("cone half angle must lie in (0, π)"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Ball { center, .. }
            | DomainSpec::ComplementOfBall { center, .. }
            | DomainSpec::Annulus { center, .. } => center.dim(),
            DomainSpec::Box { lo, .. } => lo.dim(),
            DomainSpec::Cone { vertex, .. } => vertex.dim(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(
            self,
            DomainSpec::Ball { .. } | DomainSpec::Box { .. } | DomainSpec::Annulus { .. }
        )
    }

    #[inline]
    pub fn contains(&self, x: &Point) -> bool {
        match self {
            DomainSpec::Ball { center, radius } => (*x - *center).norm_sq() < radius * radius,
            DomainSpec::ComplementOfBall { center, radius } => {
                (*x - *center).norm_sq() > radius * radius
            }
            DomainSpec::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let r2 = (*x - *center).norm_sq();
                r2 > r_in * r_in && r2 < r_out * r_out
            }
            DomainSpec::Box { lo, hi } => x
                .as_slice()
                .iter()
                .zip(lo.as_slice().iter().zip(hi.as_slice()))
                .all(|(v, (l, h))| l < v && v < h),
            DomainSpec::Cone {
                vertex,
                axis,
                half_angle,
            } => {
                let y = *x - *vertex;
                let r = y.norm();
                if r == 0.0 {
                    return false;
                }
                let cos_angle = y.dot(axis) / (r * axis.norm());
                if x.dim() == 1 {
                    cos_angle > 0.0
                } else {
                    cos_angle > half_angle.cos()
                }
            }
        }
    }

    /// Euclidean distance from `x` to the boundary of the set.
    pub fn boundary_distance(&self, x: &Point) -> f64 {
        match self {
            DomainSpec::Ball { center, radius } | DomainSpec::ComplementOfBall { center, radius } => {
                ((*x - *center).norm() - radius).abs()
            }
            DomainSpec::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let r = (*x - *center).norm();
                (r - r_in).abs().min((r - r_out).abs())
            }
            DomainSpec::Box { lo, hi } => {
                if self.contains(x) {
                    x.as_slice()
                        .iter()
                        .zip(lo.as_slice().iter().zip(hi.as_slice()))
                        .map(|(v, (l, h))| (v - l).min(h - v))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    let inside_along_all = x
                        .as_slice()
                        .iter()
                        .zip(lo.as_slice().iter().zip(hi.as_slice()))
                        .all(|(v, (l, h))| l <= v && v <= h);
                    if inside_along_all {
                        // on the boundary
                        return 0.0;
                    }
                    x.as_slice()
                        .iter()
                        .zip(lo.as_slice().iter().zip(hi.as_slice()))
                        .map(|(v, (l, h))| {
                            let e = (l - v).max(v - h).max(0.0);
                            e * e
                        })
                        .sum::<f64>()
                        .sqrt()
                }
            }
            DomainSpec::Cone {
                vertex,
                axis,
                half_angle,
            } => {
                let y = *x - *vertex;
                let r = y.norm();
                if r == 0.0 {
                    return 0.0;
                }
                if x.dim() == 1 {
                    return r;
                }
                let phi = (y.dot(axis) / (r * axis.norm())).clamp(-1.0, 1.0).acos();
                let gap = (half_angle - phi).abs();
                if gap >= std::f64::consts::FRAC_PI_2 {
                    r
                } else {
                    r * gap.sin()
                }
            }
        }
    }

    /// A characteristic length used to scale bisection tolerances.
    pub fn length_scale(&self) -> f64 {
        match self {
            DomainSpec::Ball { radius, .. } | DomainSpec::ComplementOfBall { radius, .. } => *radius,
            DomainSpec::Annulus { r_out, .. } => *r_out,
            DomainSpec::Box { lo, hi } => (*hi - *lo).norm(),
            DomainSpec::Cone { .. } => 1.0,
        }
    }

    /// Lebesgue measure for bounded shapes.
    pub fn volume(&self) -> Option<f64> {
        match self {
            DomainSpec::Ball { center, radius } => Some(unit_ball_volume(center.dim()) * radius.powi(center.dim() as i32)),
            DomainSpec::Annulus { center, r_in, r_out } => {
                let d = center.dim() as i32;
                Some(unit_ball_volume(center.dim()) * (r_out.powi(d) - r_in.powi(d)))
            }
            DomainSpec::Box { lo, hi } => Some(
                lo.as_slice()
                    .iter()
                    .zip(hi.as_slice())
                    .map(|(l, h)| h - l)
                    .product(),
            ),
            _ => None,
        }
    }

    /// Euclidean center of bounded shapes (the vertex for cones).
    pub fn center(&self) -> Point {
        match self {
            DomainSpec::Ball { center, .. }
            | DomainSpec::ComplementOfBall { center, .. }
            | DomainSpec::Annulus { center, .. } => *center,
            DomainSpec::Box { lo, hi } => (*lo + *hi) * 0.5,
            DomainSpec::Cone { vertex, .. } => *vertex,
        }
    }

    /// Radius of a ball around `center()` containing the set, if bounded.
    pub fn bounding_radius(&self) -> Option<f64> {
        match self {
            DomainSpec::Ball { radius, .. } => Some(*radius),
            DomainSpec::Annulus { r_out, .. } => Some(*r_out),
            DomainSpec::Box { lo, hi } => Some(0.5 * (*hi - *lo).norm()),
            _ => None,
        }
    }

    /// True when the two sets are provably disjoint (checked via separating
    /// distances for the supported shape pairs; falls back to `false` when
    /// disjointness cannot be certified).
    pub fn is_disjoint_from(&self, other: &DomainSpec) -> bool {
        match (self, other) {
            (DomainSpec::Box { lo: l1, hi: h1 }, DomainSpec::Box { lo: l2, hi: h2 }) => l1
                .as_slice()
                .iter()
                .zip(h1.as_slice())
                .zip(l2.as_slice().iter().zip(h2.as_slice()))
                .any(|((a1, b1), (a2, b2))| b1 <= a2 || b2 <= a1),
            (DomainSpec::Ball { center: c1, radius: r1 }, DomainSpec::Ball { center: c2, radius: r2 }) => {
                c1.dist(c2) >= r1 + r2
            }
            (DomainSpec::Ball { center, radius }, b @ DomainSpec::Box { .. })
            | (b @ DomainSpec::Box { .. }, DomainSpec::Ball { center, radius }) => {
                !b.contains(center) && b.boundary_distance(center) >= *radius
            }
            (DomainSpec::Ball { center: c1, radius: r1 }, DomainSpec::ComplementOfBall { center: c2, radius: r2 })
            | (DomainSpec::ComplementOfBall { center: c2, radius: r2 }, DomainSpec::Ball { center: c1, radius: r1 }) => {
                c1.dist(c2) + r1 <= *r2
            }
            _ => false,
        }
    }
}

impl DomainSpec {
    /// Maximal intervals of {ρ > 0 : x + ρu ∈ set}, sorted; the last upper
    /// end may be infinite. Crossing radii come from the shape's algebraic
    /// boundary and each gap is classified by a membership test at its
    /// midpoint.
    pub fn ray_segments(&self, x: &Point, u: &Point) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = Vec::new();
        let sphere = |c: &Point, r: f64, cuts: &mut Vec<f64>| {
            let y = *x - *c;
            let b = y.dot(u);
            let disc = b * b - y.norm_sq() + r * r;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                cuts.push(-b - sq);
                cuts.push(-b + sq);
            }
        };
        match self {
            DomainSpec::Ball { center, radius } | DomainSpec::ComplementOfBall { center, radius } => {
                sphere(center, *radius, &mut cuts)
            }
            DomainSpec::Annulus { center, r_in, r_out } => {
                sphere(center, *r_in, &mut cuts);
                sphere(center, *r_out, &mut cuts);
            }
            DomainSpec::Box { lo, hi } => {
                for i in 0..x.dim() {
                    if u[i] != 0.0 {
                        cuts.push((lo[i] - x[i]) / u[i]);
                        cuts.push((hi[i] - x[i]) / u[i]);
                    }
                }
            }
            DomainSpec::Cone { vertex, axis, half_angle } => {
                let w = *x - *vertex;
                let a = axis.normalized().unwrap_or(*axis);
                if x.dim() == 1 {
                    cuts.push(-w[0] / u[0]);
                } else {
                    // ((w+ρu)·a)² = cos²θ |w+ρu|²
                    let c2 = half_angle.cos().powi(2);
                    let (wa, ua) = (w.dot(&a), u.dot(&a));
                    let qa = ua * ua - c2;
                    let qb = 2.0 * (wa * ua - c2 * w.dot(u));
                    let qc = wa * wa - c2 * w.norm_sq();
                    if qa.abs() > 1e-300 {
                        let disc = qb * qb - 4.0 * qa * qc;
                        if disc >= 0.0 {
                            let sq = disc.sqrt();
                            cuts.push((-qb - sq) / (2.0 * qa));
                            cuts.push((-qb + sq) / (2.0 * qa));
                        }
                    } else if qb != 0.0 {
                        cuts.push(-qc / qb);
                    }
                }
            }
        }
        cuts.retain(|c| c.is_finite() && *c > 0.0);
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out: Vec<(f64, f64)> = Vec::new();
        for k in 0..cuts.len() {
            let a = cuts[k];
            let b = cuts.get(k + 1).copied().unwrap_or(f64::INFINITY);
            let mid = if b.is_finite() { 0.5 * (a + b) } else { 2.0 * a + 1.0 };
            if self.contains(&(*x + *u * mid)) {
                match out.last_mut() {
                    Some(last) if last.1 == a => last.1 = b,
                    _ => out.push((a, b)),
                }
            }
        }
        out
    }
}

/// Volume of the unit ball in ℝ^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0 + 1.0),
    }
}

/// Surface area of the unit sphere S^{d-1} (2 for d = 1).
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}
