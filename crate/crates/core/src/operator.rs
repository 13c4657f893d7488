//! Deterministic evaluation of the generator
//! 𝓘f(x) = b(x)·∇f(x) + ∫ 𝔡f(x;z) π(x,z) dz,
//! 𝔡f(x;z) = f(x+z) − f(x) − 1_{|z|≤1} z·∇f(x),
//! together with the fractional Laplacian, the barrier integrals A(q), B(q),
//! the Kelvin transform and weighted Hölder-type grid norms.
//!
//! Radial layout along each direction u:
//! - |z| ≤ δ: second-order Taylor term ½ uᵀ∇²f u ρ², integrated exactly in ρ;
//! - δ < |z| ≤ 1: gradient-compensated difference, adaptive GK15 in ln ρ;
//! - 1 < |z| ≤ R_max: plain difference, adaptive GK15 in ln ρ;
//! - |z| > R_max: closure from the locally fitted power law of the integrand.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{invalid, Error, Result};
use crate::fault::{self, Fault};
use crate::grid::{GridFunction1D, GridFunction2D};
use crate::kernel::KernelModel;
use crate::point::Point;
use crate::quadrature::{adaptive, tanh_sinh_unit, AdaptiveOptions, GaussRule};
use crate::sphere::sphere_rule;

pub type ScalarField = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type HessianField = Arc<dyn Fn(&Point) -> [[f64; 3]; 3] + Send + Sync>;
/// Radii ρ > 0 at which ρ ↦ f(x + ρu) fails to be smooth.
pub type KinkFn = Arc<dyn Fn(&Point, &Point) -> Vec<f64> + Send + Sync>;

/// Test function with optional analytic derivatives.
#[derive(Clone)]
pub struct SmoothProbe {
    pub value: ScalarField,
    pub gradient: Option<VectorField>,
    pub hessian: Option<HessianField>,
    pub hessian_bound: Option<f64>,
    pub kinks: Option<KinkFn>,
    pub singular_at_origin: bool,
    pub name: String,
}

impl fmt::Debug for SmoothProbe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothProbe")
            .field("name", &self.name)
            .field("gradient", &self.gradient.is_some())
            .field("hessian", &self.hessian.is_some())
            .field("hessian_bound", &self.hessian_bound)
            .finish()
    }
}

/// Positive ρ with |x + ρu − c| = r.
pub fn ray_sphere_hits(x: &Point, u: &Point, c: &Point, r: f64) -> Vec<f64> {
    let y = *x - *c;
    let b = y.dot(u);
    let disc = b * b - y.norm_sq() + r * r;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    [-b - sq, -b + sq].into_iter().filter(|&t| t > 0.0).collect()
}

impl SmoothProbe {
    pub fn new(name: impl Into<String>, value: ScalarField) -> Self {
        SmoothProbe {
            value,
            gradient: None,
            hessian: None,
            hessian_bound: None,
            kinks: None,
            singular_at_origin: false,
            name: name.into(),
        }
    }

    pub fn from_fn(name: impl Into<String>, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        SmoothProbe::new(name, Arc::new(f))
    }

    pub fn with_gradient(mut self, g: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&Point) -> [[f64; 3]; 3] + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn with_hessian_bound(mut self, m: f64) -> Self {
        self.hessian_bound = Some(m);
        self
    }

    pub fn with_kinks(mut self, k: impl Fn(&Point, &Point) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.kinks = Some(Arc::new(k));
        self
    }

    /// f ≡ c.
    pub fn constant(c: f64) -> Self {
        SmoothProbe::from_fn("constant", move |_| c)
            .with_gradient(|x| Point::zeros(x.dim()))
            .with_hessian(|_| [[0.0; 3]; 3])
            .with_hessian_bound(0.0)
    }

    /// f(x) = a·x + c.
    pub fn linear(a: Point, c: f64) -> Self {
        SmoothProbe::from_fn("linear", move |x| a.dot(x) + c)
            .with_gradient(move |_| a)
            .with_hessian(|_| [[0.0; 3]; 3])
            .with_hessian_bound(0.0)
    }

    /// f(x) = exp(−|x|²).
    pub fn gaussian() -> Self {
        SmoothProbe::from_fn("gaussian", |x| (-x.norm_sq()).exp())
            .with_gradient(|x| x.scaled(-2.0 * (-x.norm_sq()).exp()))
            .with_hessian(|x| {
                let e = (-x.norm_sq()).exp();
                let mut h = [[0.0; 3]; 3];
                for (i, row) in h.iter_mut().enumerate().take(x.dim()) {
                    for (j, v) in row.iter_mut().enumerate().take(x.dim()) {
                        *v = e * (4.0 * x[i] * x[j] - if i == j { 2.0 } else { 0.0 });
                    }
                }
                h
            })
            .with_hessian_bound(2.0)
    }

    /// f(x) = (1 − |x|²)₊^s.
    pub fn getoor(s: f64) -> Self {
        SmoothProbe::from_fn("getoor", move |x| {
            let t = 1.0 - x.norm_sq();
            if t > 0.0 {
                t.powf(s)
            } else {
                0.0
            }
        })
        .with_kinks(|x, u| ray_sphere_hits(x, u, &Point::zeros(x.dim()), 1.0))
    }

    /// ψ_q(x) = [(1 − |x|)₊]^q.
    pub fn barrier(q: f64) -> Self {
        SmoothProbe::from_fn("barrier", move |x| {
            let t = 1.0 - x.norm();
            if t > 0.0 {
                t.powf(q)
            } else {
                0.0
            }
        })
        .with_kinks(|x, u| {
            let o = Point::zeros(x.dim());
            let mut k = ray_sphere_hits(x, u, &o, 1.0);
            // the cusp at the origin lies on the ray only when x ∥ u
            let along = -x.dot(u);
            if along >= 0.0 && (*x + *u * along).norm() <= 1e-12 * (1.0 + x.norm()) {
                k.push(along);
            }
            k
        })
    }

    /// x ↦ f(λx).
    pub fn dilated(&self, lambda: f64) -> Self {
        let f = self.value.clone();
        let mut out = SmoothProbe::from_fn(format!("{}(λ·)", self.name), move |x| f(&x.scaled(lambda)));
        if let Some(g) = self.gradient.clone() {
            out.gradient = Some(Arc::new(move |x| g(&x.scaled(lambda)).scaled(lambda)));
        }
        if let Some(h) = self.hessian.clone() {
            out.hessian = Some(Arc::new(move |x| {
                let mut m = h(&x.scaled(lambda));
                for row in m.iter_mut() {
                    for v in row.iter_mut() {
                        *v *= lambda * lambda;
                    }
                }
                m
            }));
        }
        out.hessian_bound = self.hessian_bound.map(|m| m * lambda * lambda);
        if let Some(k) = self.kinks.clone() {
            out.kinks = Some(Arc::new(move |x, u| {
                k(&x.scaled(lambda), u).into_iter().map(|r| r / lambda).collect()
            }));
        }
        out
    }

    /// x ↦ f(x − h).
    pub fn translated(&self, h: Point) -> Self {
        let f = self.value.clone();
        let mut out = SmoothProbe::from_fn(format!("{}(·−h)", self.name), move |x| f(&(*x - h)));
        if let Some(g) = self.gradient.clone() {
            out.gradient = Some(Arc::new(move |x| g(&(*x - h))));
        }
        if let Some(hs) = self.hessian.clone() {
            out.hessian = Some(Arc::new(move |x| hs(&(*x - h))));
        }
        out.hessian_bound = self.hessian_bound;
        if let Some(k) = self.kinks.clone() {
            out.kinks = Some(Arc::new(move |x, u| k(&(*x - h), u)));
        }
        out
    }

    /// a·f + b·g.
    pub fn combine(a: f64, f: &SmoothProbe, b: f64, g: &SmoothProbe) -> Self {
        let (fv, gv) = (f.value.clone(), g.value.clone());
        let mut out = SmoothProbe::from_fn(format!("{a}*{}+{b}*{}", f.name, g.name), move |x| {
            a * fv(x) + b * gv(x)
        });
        if let (Some(fg), Some(gg)) = (f.gradient.clone(), g.gradient.clone()) {
            out.gradient = Some(Arc::new(move |x| fg(x).scaled(a) + gg(x).scaled(b)));
        }
        if let (Some(fh), Some(gh)) = (f.hessian.clone(), g.hessian.clone()) {
            out.hessian = Some(Arc::new(move |x| {
                let (p, q) = (fh(x), gh(x));
                let mut m = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        m[i][j] = a * p[i][j] + b * q[i][j];
                    }
                }
                m
            }));
        }
        if let (Some(p), Some(q)) = (f.hessian_bound, g.hessian_bound) {
            out.hessian_bound = Some(a.abs() * p + b.abs() * q);
        }
        let (fk, gk) = (f.kinks.clone(), g.kinks.clone());
        if fk.is_some() || gk.is_some() {
            out.kinks = Some(Arc::new(move |x, u| {
                let mut v = fk.as_ref().map(|k| k(x, u)).unwrap_or_default();
                v.extend(gk.as_ref().map(|k| k(x, u)).unwrap_or_default());
                v
            }));
        }
        out.singular_at_origin = f.singular_at_origin || g.singular_at_origin;
        out
    }

    /// f(x), rejecting the origin for transforms that are singular there.
    pub fn eval(&self, x: &Point) -> Result<f64> {
        if self.singular_at_origin && x.norm() == 0.0 {
            return Err(Error::EvaluationAtOrigin);
        }
        Ok((self.value)(x))
    }

    /// ∇f(x), by central differences at h = ε^{1/3}(1+|x|) when no gradient
    /// was supplied.
    pub fn grad(&self, x: &Point) -> Point {
        if let Some(g) = &self.gradient {
            return g(x);
        }
        let h = f64::EPSILON.cbrt() * (1.0 + x.norm());
        let mut g = Point::zeros(x.dim());
        for i in 0..x.dim() {
            let mut p = *x;
            let mut m = *x;
            p[i] += h;
            m[i] -= h;
            g[i] = ((self.value)(&p) - (self.value)(&m)) / (2.0 * h);
        }
        g
    }

    /// ∇²f(x), by central differences at h = ε^{1/4}(1+|x|) when no Hessian
    /// was supplied.
    pub fn hess(&self, x: &Point) -> [[f64; 3]; 3] {
        if let Some(h) = &self.hessian {
            return h(x);
        }
        let d = x.dim();
        let h = f64::EPSILON.powf(0.25) * (1.0 + x.norm());
        let f = |p: &Point| (self.value)(p);
        let f0 = f(x);
        let mut m = [[0.0; 3]; 3];
        for i in 0..d {
            let mut p = *x;
            let mut q = *x;
            p[i] += h;
            q[i] -= h;
            m[i][i] = (f(&p) - 2.0 * f0 + f(&q)) / (h * h);
            for j in 0..i {
                let mut pp = *x;
                let mut pm = *x;
                let mut mp = *x;
                let mut mm = *x;
                pp[i] += h;
                pp[j] += h;
                pm[i] += h;
                pm[j] -= h;
                mp[i] -= h;
                mp[j] += h;
                mm[i] -= h;
                mm[j] -= h;
                let v = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    pub fn kink_radii(&self, x: &Point, u: &Point) -> Vec<f64> {
        self.kinks.as_ref().map(|k| k(x, u)).unwrap_or_default()
    }
}

/// Radial/angular layout of the generator quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureScheme {
    /// δ: radius of the Taylor-compensated core.
    pub core_radius: f64,
    /// R_max: start of the power-law tail closure.
    pub tail_radius: f64,
    /// Initial GK15 panels per decade of ρ.
    pub nodes_per_decade: usize,
    /// d = 2: initial angular panels are half this; d = 3: product-rule order.
    pub angular_order: usize,
    /// Relative tolerance for the δ-halving / node-doubling comparison.
    pub tolerance: f64,
    /// Absolute floor of that tolerance.
    pub absolute_tolerance: f64,
    /// Run the second, refined pass and compare.
    pub refinement_check: bool,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        QuadratureScheme {
            core_radius: 1e-3,
            tail_radius: 1e4,
            nodes_per_decade: 4,
            angular_order: 16,
            tolerance: 1e-6,
            absolute_tolerance: 1e-9,
            refinement_check: true,
        }
    }
}

impl QuadratureScheme {
    pub fn check(&self) -> Result<()> {
        if !(self.core_radius > 0.0 && self.core_radius < 1.0 && self.tail_radius > 1.0) {
            return Err(invalid("quadrature scheme requires 0 < δ < 1 < R_max"));
        }
        if self.nodes_per_decade < 4 || self.angular_order < 4 {
            return Err(invalid("quadrature node counts must be at least 4"));
        }
        if !(self.tolerance > 0.0 && self.absolute_tolerance >= 0.0) {
            return Err(invalid("quadrature tolerance must be positive"));
        }
        Ok(())
    }

    pub fn with_core_radius(mut self, delta: f64) -> Self {
        self.core_radius = delta;
        self
    }

    pub fn without_refinement(mut self) -> Self {
        self.refinement_check = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorValue {
    pub value: f64,
    /// Refinement change plus reported quadrature error.
    pub error: f64,
    /// Bound on the whole core contribution from `hessian_bound`:
    /// ½·M·|S^{d−1}|·scale·k̄·δ^{2−α}/(2−α).
    pub core_bound: Option<f64>,
}

struct Pass<'a> {
    model: &'a KernelModel,
    f: &'a SmoothProbe,
    x: Point,
    fx: f64,
    grad: Point,
    hess: [[f64; 3]; 3],
    delta: f64,
    panels_per_decade: usize,
    angular_order: usize,
    tail: f64,
    rel_tol: f64,
    flip: bool,
}

impl Pass<'_> {
    /// ∫₀^∞ 𝔡f(x; ρu) π(x, ρu) ρ^{d−1} dρ, returning (value, error).
    fn radial(&self, u: &Point) -> Result<(f64, f64)> {
        let m = self.model;
        let alpha = m.alpha;
        let p = 2.0 - alpha;
        let d = self.x.dim();
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += u[i] * self.hess[i][j] * u[j];
            }
        }
        let kbar = GaussRule::new(8).integrate(0.0, 1.0, |v| m.k(&self.x, &(*u * (self.delta * v.powf(1.0 / p)))));
        let core = 0.5 * quad * m.scale * self.delta.powf(p) / p * kbar;

        let ug = u.dot(&self.grad);
        let sign = if self.flip { -1.0 } else { 1.0 };
        let diff = |rho: f64| -> f64 {
            let y = self.x + *u * rho;
            let mut v = (self.f.value)(&y) - self.fx;
            if rho <= 1.0 {
                v -= sign * rho * ug;
            }
            v
        };
        let integrand = |t: f64| -> f64 {
            let rho = t.exp();
            diff(rho) * m.k(&self.x, &(*u * rho)) * m.scale * rho.powf(-alpha)
        };

        let (lo, hi) = (self.delta.ln(), self.tail.ln());
        let step = std::f64::consts::LN_10 / self.panels_per_decade as f64;
        let mut breaks = vec![lo, 0.0, hi];
        let mut t = lo + step;
        while t < hi {
            breaks.push(t);
            t += step;
        }
        for r in self.f.kink_radii(&self.x, u).into_iter().chain(m.kernel_breaks(&self.x, u)) {
            if r > self.delta && r < self.tail {
                breaks.push(r.ln());
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let res = adaptive(
            integrand,
            &breaks,
            AdaptiveOptions {
                abs_tol: 1e-15,
                rel_tol: self.rel_tol,
                max_panels: 4000,
            },
        );

        // tail closure from H(ρ) ≈ C ρ^e on [R/2, R]
        let r = self.tail;
        let h = |rho: f64| diff(rho) * m.k(&self.x, &(*u * rho)) * m.scale * rho.powf(-1.0 - alpha);
        let (h1, h0) = (h(r), h(0.5 * r));
        let closure = if h1 == 0.0 {
            0.0
        } else {
            let e = if h0 != 0.0 && h0.signum() == h1.signum() {
                (h1 / h0).ln() / std::f64::consts::LN_2
            } else {
                -1.0 - alpha
            };
            if !(e < -1.01) {
                return Err(Error::DivergentTail { exponent: e });
            }
            -h1 * r / (e + 1.0)
        };
        if !(res.value.is_finite() && closure.is_finite() && core.is_finite()) {
            return Err(Error::QuadratureNotConverged {
                change: f64::INFINITY,
                tolerance: 0.0,
            });
        }
        Ok((core + res.value + closure, res.error))
    }

    fn jump_part(&self) -> Result<(f64, f64)> {
        let d = self.x.dim();
        match d {
            1 => {
                let (a, ea) = self.radial(&Point::scalar(1.0))?;
                let (b, eb) = self.radial(&Point::scalar(-1.0))?;
                Ok((a + b, ea + eb))
            }
            2 => {
                let failure: RefCell<Option<Error>> = RefCell::new(None);
                let qerr = RefCell::new(0.0);
                let n = (self.angular_order / 2).max(4);
                let breaks: Vec<f64> = (0..=n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
                let res = adaptive(
                    |th: f64| {
                        if failure.borrow().is_some() {
                            return 0.0;
                        }
                        match self.radial(&Point::polar(1.0, th)) {
                            Ok((v, e)) => {
                                *qerr.borrow_mut() += e;
                                v
                            }
                            Err(err) => {
                                *failure.borrow_mut() = Some(err);
                                0.0
                            }
                        }
                    },
                    &breaks,
                    AdaptiveOptions {
                        abs_tol: 1e-13,
                        rel_tol: self.rel_tol,
                        max_panels: 400,
                    },
                );
                if let Some(e) = failure.into_inner() {
                    return Err(e);
                }
                Ok((res.value, res.error))
            }
            _ => {
                let rule = sphere_rule(3, self.angular_order);
                let parts: Vec<Result<(f64, f64)>> = rule
                    .par_iter()
                    .map(|(u, w)| self.radial(u).map(|(v, e)| (w * v, w * e)))
                    .collect();
                let mut s = 0.0;
                let mut e = 0.0;
                for p in parts {
                    let (v, ev) = p?;
                    s += v;
                    e += ev;
                }
                Ok((s, e))
            }
        }
    }
}

fn generator_pass(
    model: &KernelModel,
    f: &SmoothProbe,
    x: &Point,
    q: &QuadratureScheme,
    delta: f64,
    refine: usize,
) -> Result<(f64, f64)> {
    let d = x.dim();
    // keep the Taylor core clear of kinks of f
    let mut delta = delta;
    let mut dirs: Vec<Point> = match d {
        1 => vec![Point::scalar(1.0), Point::scalar(-1.0)],
        _ => crate::sphere::rays(d, 64),
    };
    if d > 1 {
        dirs.extend(crate::sphere::rays(d, 64).into_iter().map(|u| -u));
    }
    let scale = 1.0 + x.norm();
    for u in &dirs {
        for r in f.kink_radii(x, u) {
            if r <= 1e-9 * scale {
                return Err(Error::SingularityNotResolved {
                    detail: format!("probe `{}` is not smooth at the evaluation point", f.name),
                });
            }
            // the Taylor remainder scales like (δ/r)^{3−α}
            delta = delta.min(1e-3 * r);
        }
    }
    let pass = Pass {
        model,
        f,
        x: *x,
        fx: f.eval(x)?,
        grad: f.grad(x),
        hess: f.hess(x),
        delta,
        panels_per_decade: q.nodes_per_decade * refine,
        angular_order: q.angular_order * refine,
        tail: q.tail_radius,
        rel_tol: 1e-3 * q.tolerance / refine as f64,
        flip: fault::active(Fault::GeneratorCompensation),
    };
    let (jump, err) = pass.jump_part()?;
    let drift = if model.drift_is_zero {
        0.0
    } else {
        model.b(x).dot(&pass.grad)
    };
    Ok((drift + jump, err))
}

/// b(x)·∇f(x) + ∫ 𝔡f(x;z) π(x,z) dz.
pub fn apply_generator(model: &KernelModel, f: &SmoothProbe, x: &Point, q: &QuadratureScheme) -> Result<GeneratorValue> {
    q.check()?;
    if x.dim() != model.dim {
        return Err(invalid("evaluation point dimension differs from the model"));
    }
    if !x.is_finite() {
        return Err(invalid("evaluation point must be finite"));
    }
    f.eval(x)?;
    let core_bound = f.hessian_bound.map(|mb| {
        let kbar = model
            .lambda_bound
            .unwrap_or_else(|| model.k(x, &Point::on_axis(x.dim(), q.core_radius)));
        let p = 2.0 - model.alpha;
        0.5 * mb * crate::domain::unit_sphere_area(x.dim()) * model.scale * kbar * q.core_radius.powf(p) / p
    });
    let (v1, e1) = generator_pass(model, f, x, q, q.core_radius, 1)?;
    if !q.refinement_check {
        return Ok(GeneratorValue {
            value: v1,
            error: e1,
            core_bound,
        });
    }
    let (v2, e2) = generator_pass(model, f, x, q, 0.5 * q.core_radius, 2)?;
    let change = (v2 - v1).abs();
    let tolerance = (q.tolerance * v2.abs()).max(q.absolute_tolerance);
    if !(change <= tolerance) {
        return Err(Error::QuadratureNotConverged { change, tolerance });
    }
    Ok(GeneratorValue {
        value: v2,
        error: change + e2,
        core_bound,
    })
}

/// (−Δ)^s f(x) = −c(d,2s) ∫ 𝔡f(x;z) |z|^{−d−2s} dz, normalized so that the
/// Fourier symbol is |ξ|^{2s}.
pub fn frac_laplacian(f: &SmoothProbe, x: &Point, s: f64, q: &QuadratureScheme) -> Result<GeneratorValue> {
    if !(s > 0.5 && s < 1.0) {
        return Err(invalid(format!("fractional order s must lie in (1/2, 1), got {s}")));
    }
    let model = KernelModel::stable(x.dim(), 2.0 * s, 1.0)?;
    let g = apply_generator(&model, f, x, q)?;
    Ok(GeneratorValue {
        value: -g.value,
        ..g
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierIntegrals {
    pub s: f64,
    pub q: f64,
    /// A(q) = ∫_ℝ ([(1−z)₊]^q − 1)|z|^{−1−2s} dz.
    pub a: f64,
    /// B(q) = ∫₀^∞ (z^q − 1)|1−z|^{−1−2s} dz.
    pub b: f64,
    pub error: f64,
}

/// Symmetrized integrand of B on (0,1), given z and w = 1 − z.
fn barrier_integrand(s: f64, q: f64, z: f64, w: f64, flip: bool) -> f64 {
    let lz = if z < 0.5 { z.ln() } else { (-w).ln_1p() };
    let lw = if w < 0.5 { w.ln() } else { (-z).ln_1p() };
    let p = 2.0 * s - 1.0 - q;
    let a = (q * lz).exp_m1();
    let c = -(p * lz).exp_m1();
    let c = if flip { 2.0 - c } else { c };
    a * c * (-(1.0 + 2.0 * s) * lw).exp()
}

/// A(q) and B(q). B is integrated in the symmetrized form
/// ∫₀¹ (z^q − 1)(1 − z^{2s−1−q})(1−z)^{−1−2s} dz, and A = B − 1/(2s) since
/// the negative half-line contributes −∫_{−∞}^0 |1−z|^{−1−2s} dz.
///
/// Before trusting the value, the contributions T(ε) of the excised pieces
/// (1−ε, 1) are checked to shrink geometrically under ε ↦ ε/2.
pub fn barrier_integrals(s: f64, q: f64) -> Result<BarrierIntegrals> {
    if !(s > 0.5 && s < 1.0) {
        return Err(invalid(format!("s must lie in (1/2, 1), got {s}")));
    }
    if !(q > s - 0.5 && q <= s) {
        return Err(invalid(format!("q must lie in (s − 1/2, s], got {q}")));
    }
    let flip = fault::active(Fault::BarrierSymmetrization);
    let excised = |eps: f64| {
        tanh_sinh_unit(
            |t, _| {
                let w = eps * t;
                eps * barrier_integrand(s, q, 1.0 - w, w, flip)
            },
            1e-12,
            12,
        )
    };
    let mut prev = excised(0.1);
    for j in 1..=6 {
        let next = excised(0.1 / (1u32 << j) as f64);
        let ratio = next.value.abs() / prev.value.abs();
        // at q = 2s − 1 the integrand vanishes identically
        let vanishing = next.value == 0.0 && prev.value == 0.0;
        if !(prev.converged && next.converged && (ratio < 1.0 - 1e-3 || vanishing)) {
            return Err(Error::SingularityNotResolved {
                detail: format!("T(ε/2)/T(ε) = {ratio:.4} at ε = {:e}", 0.1 / (1u32 << (j - 1)) as f64),
            });
        }
        prev = next;
    }
    let res = tanh_sinh_unit(|z, w| barrier_integrand(s, q, z, w, flip), 1e-13, 14);
    if !res.converged {
        return Err(Error::SingularityNotResolved {
            detail: format!("tanh-sinh refinement stalled at error {:e}", res.error),
        });
    }
    Ok(BarrierIntegrals {
        s,
        q,
        a: res.value - 0.5 / s,
        b: res.value,
        error: res.error,
    })
}

/// x ↦ |x|^{α−d} f(x/|x|²).
pub fn kelvin_transform(f: &SmoothProbe, alpha: f64, dim: usize) -> Result<SmoothProbe> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("Kelvin exponent must be positive"));
    }
    if !(1..=crate::point::MAX_DIM).contains(&dim) {
        return Err(invalid("dimension must be 1..=3"));
    }
    let g = f.value.clone();
    let e = alpha - dim as f64;
    let mut out = SmoothProbe::from_fn(format!("kelvin({})", f.name), move |x| {
        let r2 = x.norm_sq();
        r2.powf(0.5 * e) * g(&x.scaled(1.0 / r2))
    });
    out.singular_at_origin = true;
    if dim == 1 {
        // kink points of f map to their reciprocals; the origin is singular
        let mut pts: Vec<f64> = Vec::new();
        let o = Point::scalar(0.0);
        for sgn in [1.0, -1.0] {
            for r in f.kink_radii(&o, &Point::scalar(sgn)) {
                if r > 0.0 {
                    pts.push(1.0 / (sgn * r));
                }
            }
        }
        pts.push(0.0);
        out.kinks = Some(Arc::new(move |x, u| {
            pts.iter().map(|p| (p - x[0]) * u[0]).filter(|&r| r > 0.0).collect()
        }));
    }
    Ok(out)
}

/// Nodal data a weighted-norm computation needs from a grid function.
pub trait Gridded {
    fn nodes(&self) -> Vec<Point>;
    /// Finite-difference derivatives of order `k` (0 ≤ k ≤ 2), one array per
    /// multi-index of length k.
    fn derivatives(&self, k: usize) -> Vec<Vec<f64>>;
}

impl Gridded for GridFunction1D {
    fn nodes(&self) -> Vec<Point> {
        GridFunction1D::nodes(self).into_iter().map(Point::scalar).collect()
    }

    fn derivatives(&self, k: usize) -> Vec<Vec<f64>> {
        let h = self.h();
        let u = |i: isize| self.value_at_index(i);
        let n = self.n() as isize;
        let v: Vec<f64> = (0..n)
            .map(|i| match k {
                0 => u(i),
                1 => (u(i + 1) - u(i - 1)) / (2.0 * h),
                _ => (u(i + 1) - 2.0 * u(i) + u(i - 1)) / (h * h),
            })
            .collect();
        vec![v]
    }
}

impl Gridded for GridFunction2D {
    fn nodes(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(self.point(i, j));
            }
        }
        out
    }

    fn derivatives(&self, k: usize) -> Vec<Vec<f64>> {
        let (hx, hy) = self.spacing();
        let u = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
                0.0
            } else {
                self.at(i as usize, j as usize)
            }
        };
        let stencils: Vec<Box<dyn Fn(isize, isize) -> f64 + '_>> = match k {
            0 => vec![Box::new(|i, j| u(i, j))],
            1 => vec![
                Box::new(|i, j| (u(i + 1, j) - u(i - 1, j)) / (2.0 * hx)),
                Box::new(|i, j| (u(i, j + 1) - u(i, j - 1)) / (2.0 * hy)),
            ],
            _ => vec![
                Box::new(|i, j| (u(i + 1, j) - 2.0 * u(i, j) + u(i - 1, j)) / (hx * hx)),
                Box::new(|i, j| {
                    (u(i + 1, j + 1) - u(i + 1, j - 1) - u(i - 1, j + 1) + u(i - 1, j - 1)) / (4.0 * hx * hy)
                }),
                Box::new(|i, j| (u(i, j + 1) - 2.0 * u(i, j) + u(i, j - 1)) / (hy * hy)),
            ],
        };
        stencils
            .iter()
            .map(|s| {
                let mut v = Vec::with_capacity(self.nx * self.ny);
                for j in 0..self.ny as isize {
                    for i in 0..self.nx as isize {
                        v.push(s(i, j));
                    }
                }
                v
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderSeminorm {
    pub order: usize,
    pub exponent: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedNormReport {
    pub r: f64,
    pub gamma: f64,
    pub interior_nodes: usize,
    /// ⟦u⟧^{(r)}_{k;D} for k = 0..⌈γ⌉−1 (only k = 0 when γ = 0).
    pub seminorms: Vec<f64>,
    /// ⟦u⟧^{(r)}_{⌈γ⌉−1, γ+1−⌈γ⌉; D}; absent when γ = 0.
    pub holder: Option<HolderSeminorm>,
    pub composite: f64,
}

/// Grid approximations of the weighted seminorms
/// ⟦u⟧_{k} = sup_{|β|=k} sup_x d_x^{k+r}|D^βu(x)| and
/// ⟦u⟧_{k,δ} = sup_{|β|=k} sup_{x,y} d_{xy}^{k+δ+r}|D^βu(x) − D^βu(y)|/|x−y|^δ,
/// with d_x the distance to ∂D, over grid nodes inside `domain`.
pub fn weighted_norms<G: Gridded>(u: &G, domain: &DomainSpec, r: f64, gamma: f64) -> Result<WeightedNormReport> {
    if !(gamma >= 0.0 && gamma + r >= 0.0) {
        return Err(invalid("weighted norms need γ ≥ 0 and γ + r ≥ 0"));
    }
    if gamma > 3.0 {
        return Err(invalid("weighted norms support γ ≤ 3"));
    }
    let nodes = u.nodes();
    let inside: Vec<usize> = (0..nodes.len()).filter(|&i| domain.contains(&nodes[i])).collect();
    const REQUIRED: usize = 8;
    if inside.len() < REQUIRED {
        return Err(Error::GridTooCoarse {
            interior: inside.len(),
            required: REQUIRED,
        });
    }
    let dist: Vec<f64> = inside.iter().map(|&i| domain.boundary_distance(&nodes[i])).collect();
    let top = if gamma == 0.0 { 0 } else { gamma.ceil() as usize - 1 };
    let mut seminorms = Vec::new();
    let mut top_derivs = Vec::new();
    for k in 0..=top {
        let ders = u.derivatives(k);
        let mut sup = 0.0f64;
        for comp in &ders {
            for (m, &i) in inside.iter().enumerate() {
                sup = sup.max(dist[m].powf(k as f64 + r) * comp[i].abs());
            }
        }
        seminorms.push(sup);
        if k == top {
            top_derivs = ders;
        }
    }
    let holder = if gamma == 0.0 {
        None
    } else {
        let delta = gamma + 1.0 - gamma.ceil();
        let w = top as f64 + delta + r;
        let mut sup = 0.0f64;
        for comp in &top_derivs {
            for a in 0..inside.len() {
                for b in (a + 1)..inside.len() {
                    let (i, j) = (inside[a], inside[b]);
                    let dxy = dist[a].min(dist[b]);
                    let q = dxy.powf(w) * (comp[i] - comp[j]).abs() / nodes[i].dist(&nodes[j]).powf(delta);
                    sup = sup.max(q);
                }
            }
        }
        Some(HolderSeminorm {
            order: top,
            exponent: delta,
            value: sup,
        })
    };
    let composite = if gamma == 0.0 {
        seminorms[0]
    } else {
        seminorms.iter().sum::<f64>() + holder.map_or(0.0, |h| h.value)
    };
    Ok(WeightedNormReport {
        r,
        gamma,
        interior_nodes: inside.len(),
        seminorms,
        holder,
        composite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{frac_laplacian_constant, VariableOrderKernel};
    use proptest::prelude::*;
    use statrs::function::gamma::gamma;

    fn q() -> QuadratureScheme {
        QuadratureScheme::default()
    }

    fn stable(d: usize, alpha: f64) -> KernelModel {
        KernelModel::stable(d, alpha, 1.0).unwrap()
    }

    #[test]
    fn constant_maps_to_zero() {
        let vo = VariableOrderKernel::new(1.2, 1.5, 1.8).unwrap().model(1).unwrap();
        for (m, x) in [
            (stable(1, 1.5), Point::scalar(0.3)),
            (stable(2, 1.3), Point::from_slice(&[0.2, -0.7])),
            (vo.clone(), Point::scalar(0.05)),
            (vo, Point::scalar(3.0)),
        ] {
            let v = apply_generator(&m, &SmoothProbe::constant(2.5), &x, &q()).unwrap();
            assert!(v.value.abs() < 1e-8, "{v:?}");
        }
    }

    #[test]
    fn linear_cancels_for_symmetric_kernels() {
        for d in 1..=2 {
            let a = Point::from_slice(&[0.7, -1.3][..d]);
            let x = Point::from_slice(&[0.4, 0.1][..d]);
            let v = apply_generator(&stable(d, 1.6), &SmoothProbe::linear(a, 1.0), &x, &q()).unwrap();
            assert!(v.value.abs() < 1e-8, "d={d}: {v:?}");
        }
    }

    /// Independent oracle: ∫₀^∞ 2(e^{−z²} − 1) z^{−1−α} dz by a dense
    /// trapezoid rule in t = ln z, with the series e^{−z²} − 1 ≈ −z² + z⁴/2
    /// below z = 1e-3.
    fn gaussian_oracle(alpha: f64) -> f64 {
        let (lo, hi) = ((1e-3f64).ln(), (1e3f64).ln());
        let n = 400_000;
        let h = (hi - lo) / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let t = lo + i as f64 * h;
            let z = t.exp();
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += w * 2.0 * (-z * z).exp_m1() * z.powf(-alpha);
        }
        s *= h;
        let e = 1e-3f64;
        let core = 2.0 * (-e.powf(2.0 - alpha) / (2.0 - alpha) + 0.5 * e.powf(4.0 - alpha) / (4.0 - alpha));
        let tail = -2.0 * (1e3f64).powf(-alpha) / alpha;
        s + core + tail
    }

    #[test]
    fn gaussian_matches_brute_force() {
        let alpha = 1.5;
        let v = apply_generator(&stable(1, alpha), &SmoothProbe::gaussian(), &Point::scalar(0.0), &q()).unwrap();
        let oracle = frac_laplacian_constant(1, alpha) * gaussian_oracle(alpha);
        assert!((v.value - oracle).abs() < 1e-6 * oracle.abs(), "{} vs {oracle}", v.value);
        // closed form c(1,α)·Γ(−α/2)
        let closed = frac_laplacian_constant(1, alpha) * gamma(-alpha / 2.0);
        assert!((v.value - closed).abs() < 1e-6 * closed.abs());
    }

    #[test]
    fn getoor_profile_is_constant_inside() {
        let s = 0.75;
        let exact = 4f64.powf(s) * gamma(1.0 + s) * gamma(0.5 + s) / gamma(0.5);
        let f = SmoothProbe::getoor(s);
        let vals: Vec<f64> = [0.0, 0.3, -0.3, 0.6, -0.6]
            .iter()
            .map(|&x| frac_laplacian(&f, &Point::scalar(x), s, &q()).unwrap().value)
            .collect();
        for v in &vals {
            assert!((v - vals[0]).abs() < 1e-4 * vals[0], "{vals:?}");
            assert!((v - exact).abs() < 1e-4 * exact, "{v} vs {exact}");
        }
    }

    #[test]
    fn barrier_lower_bound_holds() {
        let s = 0.75;
        for qe in [s - 0.4 * 0.5, s - 0.2 * 0.5] {
            let f = SmoothProbe::barrier(qe);
            let mut c1 = f64::INFINITY;
            for x in [-0.95, -0.7, -0.4, -0.1, 0.05, 0.3, 0.6, 0.9, 0.98] {
                let v = frac_laplacian(&f, &Point::scalar(x), s, &q()).unwrap().value;
                c1 = c1.min(v / (1.0f64 - x.abs()).powf(qe - 2.0 * s));
            }
            assert!(c1 > 0.0, "q={qe}: c1={c1}");
        }
    }

    #[test]
    fn barrier_at_cusp_is_rejected() {
        let r = frac_laplacian(&SmoothProbe::barrier(0.5), &Point::scalar(0.0), 0.75, &q());
        assert!(matches!(r, Err(Error::SingularityNotResolved { .. })));
    }

    #[test]
    fn translation_covariance() {
        let m = stable(2, 1.4);
        let h = Point::from_slice(&[0.3, -0.5]);
        let x = Point::from_slice(&[0.2, 0.1]);
        let f = SmoothProbe::gaussian();
        let a = apply_generator(&m, &f, &x, &q()).unwrap().value;
        let b = apply_generator(&m, &f.translated(h), &(x + h), &q()).unwrap().value;
        assert!((a - b).abs() < 1e-7 * a.abs().max(1.0), "{a} {b}");
    }

    #[test]
    fn fractional_laplacian_scaling() {
        let s = 0.7;
        let f = SmoothProbe::gaussian();
        let x = Point::scalar(0.4);
        for lambda in [0.5, 2.0] {
            let lhs = frac_laplacian(&f.dilated(lambda), &x, s, &q()).unwrap().value;
            let rhs = lambda.powf(2.0 * s) * frac_laplacian(&f, &x.scaled(lambda), s, &q()).unwrap().value;
            assert!((lhs - rhs).abs() < 1e-6 * rhs.abs(), "λ={lambda}: {lhs} {rhs}");
        }
    }

    #[test]
    fn core_refinement_order() {
        // differences between successive core radii shrink at least like
        // δ^{2−2s}
        let s = 0.75;
        let m = stable(1, 2.0 * s);
        let f = SmoothProbe::gaussian();
        let x = Point::scalar(0.3);
        let deltas = [0.4, 0.2, 0.1, 0.05, 0.025];
        let vals: Vec<f64> = deltas
            .iter()
            .map(|&d| {
                apply_generator(&m, &f, &x, &q().with_core_radius(d).without_refinement())
                    .unwrap()
                    .value
            })
            .collect();
        let xs: Vec<f64> = deltas[..4].iter().map(|d| d.ln()).collect();
        let ys: Vec<f64> = vals.windows(2).map(|w| (w[0] - w[1]).abs().ln()).collect();
        let fit = crate::stats::linear_fit(&xs, &ys);
        assert!(fit.slope >= 2.0 - 2.0 * s - 0.1, "slope {}", fit.slope);
    }

    #[test]
    fn variable_order_gaussian_is_stable_under_refinement() {
        let m = VariableOrderKernel::new(1.2, 1.5, 1.8).unwrap().model(1).unwrap();
        for x in [0.05, 0.3, 2.0] {
            let v = apply_generator(&m, &SmoothProbe::gaussian(), &Point::scalar(x), &q());
            assert!(v.is_ok(), "{v:?}");
        }
    }

    #[test]
    fn fast_growth_is_a_divergent_tail() {
        let f = SmoothProbe::from_fn("cubic", |x| x[0].powi(3));
        let r = apply_generator(&stable(1, 1.5), &f, &Point::scalar(0.0), &q());
        assert!(matches!(r, Err(Error::DivergentTail { .. })), "{r:?}");
    }

    #[test]
    fn tight_tolerance_reports_non_convergence() {
        // δ = 0.5 leaves a visible Taylor remainder between passes
        let scheme = QuadratureScheme {
            core_radius: 0.5,
            tolerance: 1e-12,
            absolute_tolerance: 0.0,
            ..q()
        };
        let r = apply_generator(&stable(1, 1.5), &SmoothProbe::gaussian(), &Point::scalar(0.2), &scheme);
        assert!(matches!(r, Err(Error::QuadratureNotConverged { .. })), "{r:?}");
    }

    #[test]
    fn scheme_validation() {
        assert!(q().with_core_radius(1.5).check().is_err());
        assert!(QuadratureScheme {
            nodes_per_decade: 2,
            ..q()
        }
        .check()
        .is_err());
    }

    #[test]
    fn supplied_gradient_matches_differences() {
        let f = SmoothProbe::gaussian();
        let mut g = f.clone();
        g.gradient = None;
        g.hessian = None;
        for x in [Point::scalar(0.3), Point::from_slice(&[0.2, -0.9])] {
            assert!((f.grad(&x) - g.grad(&x)).norm() < 1e-9);
            let (a, b) = (f.hess(&x), g.hess(&x));
            for i in 0..x.dim() {
                for j in 0..x.dim() {
                    assert!((a[i][j] - b[i][j]).abs() < 1e-6);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn generator_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64, x in -0.8..0.8f64, c in -1.0..1.0f64) {
            let m = stable(1, 1.5);
            let f = SmoothProbe::gaussian();
            let g = SmoothProbe::gaussian().translated(Point::scalar(c));
            let x = Point::scalar(x);
            let sum = apply_generator(&m, &SmoothProbe::combine(a, &f, b, &g), &x, &q()).unwrap().value;
            let sep = a * apply_generator(&m, &f, &x, &q()).unwrap().value
                + b * apply_generator(&m, &g, &x, &q()).unwrap().value;
            prop_assert!((sum - sep).abs() < 1e-8, "{} vs {}", sum, sep);
        }
    }

    /// Second route to A(q): fold z ↦ −z on (0,1) and split off [1,∞),
    /// A = ∫₀¹[(1+y)^q + (1−y)^q − 2] y^{−1−2s} dy
    ///   + ∫₀¹[(1+t)^q t^{−q} − 2] t^{2s−1} dt  (y = 1/t on [1,∞)).
    fn a_direct(s: f64, q: f64) -> f64 {
        // even binomial series below y = 1e-3 avoids the O(y²) cancellation
        let even = |y: f64| -> f64 {
            if y >= 1e-3 {
                return (1.0 + y).powf(q) + (1.0 - y).powf(q) - 2.0;
            }
            let mut c = 1.0;
            let mut sum = 0.0;
            for k in 1..=8 {
                c *= (q - (k - 1) as f64) / k as f64;
                if k % 2 == 0 {
                    sum += 2.0 * c * y.powi(k);
                }
            }
            sum
        };
        let inner = tanh_sinh_unit(
            |y, _| even(y) * y.powf(-1.0 - 2.0 * s),
            1e-14,
            14,
        );
        let outer = tanh_sinh_unit(
            |t, _| ((1.0 + t).powf(q) * t.powf(-q) - 2.0) * t.powf(2.0 * s - 1.0),
            1e-14,
            14,
        );
        inner.value + outer.value
    }

    #[test]
    fn barrier_a_vanishes_at_s() {
        for s in [0.6, 0.75, 0.9] {
            let r = barrier_integrals(s, s).unwrap();
            assert!(r.a.abs() < 1e-6, "s={s}: A={}", r.a);
            assert!(a_direct(s, s).abs() < 1e-6);
        }
    }

    #[test]
    fn barrier_a_negative_and_b_increasing() {
        for s in [0.6, 0.75, 0.9] {
            let qs: Vec<f64> = (1..=5).map(|i| s - 0.5 + 0.5 * i as f64 / 6.0).collect();
            let vals: Vec<BarrierIntegrals> = qs.iter().map(|&q| barrier_integrals(s, q).unwrap()).collect();
            for v in &vals {
                assert!(v.a < 0.0, "{v:?}");
                assert!((v.a - a_direct(s, v.q)).abs() < 1e-8, "{v:?} vs {}", a_direct(s, v.q));
            }
            for w in vals.windows(2) {
                assert!(w[0].b < w[1].b);
            }
            // dB/dq = ∫₀¹ (z^q − z^{2s−1−q}) ln z (1−z)^{−1−2s} dz > 0
            for &q in &qs {
                let db = tanh_sinh_unit(
                    |z, w| (z.powf(q) - z.powf(2.0 * s - 1.0 - q)) * z.ln() * w.powf(-1.0 - 2.0 * s),
                    1e-12,
                    12,
                );
                assert!(db.value > 0.0, "s={s} q={q}");
            }
        }
    }

    #[test]
    fn barrier_parameter_checks() {
        assert!(barrier_integrals(0.4, 0.3).is_err());
        assert!(barrier_integrals(0.75, 0.2).is_err());
        assert!(barrier_integrals(0.75, 0.8).is_err());
    }

    #[test]
    fn barrier_fault_is_detected() {
        let r = fault::with_fault(Fault::BarrierSymmetrization, || barrier_integrals(0.75, 0.75));
        assert!(matches!(r, Err(Error::SingularityNotResolved { .. })), "{r:?}");
        assert!(barrier_integrals(0.75, 0.75).is_ok());
    }

    #[test]
    fn compensation_fault_is_detected() {
        let m = VariableOrderKernel::new(1.2, 1.5, 1.8).unwrap().model(1).unwrap();
        let f = SmoothProbe::gaussian();
        // γ vanishes for |x| ≤ 1/8, so probe where the kernel is asymmetric
        let x = Point::scalar(0.6);
        let good = apply_generator(&m, &f, &x, &q()).unwrap().value;
        let bad = fault::with_fault(Fault::GeneratorCompensation, || apply_generator(&m, &f, &x, &q()));
        match bad {
            Ok(v) => assert!((v.value - good).abs() > 1e-3),
            Err(e) => assert!(matches!(e, Error::QuadratureNotConverged { .. })),
        }
    }

    #[test]
    fn kelvin_of_one() {
        let k = kelvin_transform(&SmoothProbe::constant(1.0), 1.5, 1).unwrap();
        for x in [0.1, 0.5, -2.0, 7.0] {
            let v = k.eval(&Point::scalar(x)).unwrap();
            assert!((v - x.abs().sqrt()).abs() < 1e-14);
        }
        assert_eq!(k.eval(&Point::scalar(0.0)), Err(Error::EvaluationAtOrigin));
    }

    #[test]
    fn kelvin_is_an_involution() {
        for d in 1..=3 {
            let f = SmoothProbe::gaussian().translated(Point::on_axis(d, 0.3));
            let kk = kelvin_transform(&kelvin_transform(&f, 1.4, d).unwrap(), 1.4, d).unwrap();
            for x in [Point::on_axis(d, 0.7), Point::on_axis(d, -1.9)] {
                let (a, b) = (kk.eval(&x).unwrap(), f.eval(&x).unwrap());
                assert!((a - b).abs() < 1e-13 * (1.0 + b.abs()), "d={d}");
            }
        }
    }

    #[test]
    fn kelvin_barrier_vanishes_like_power_q() {
        let qe = 0.5;
        let k = kelvin_transform(&SmoothProbe::barrier(qe), 1.5, 1).unwrap();
        let ts = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4];
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for t in ts {
            let v = k.eval(&Point::scalar(1.0 + t)).unwrap();
            assert!(v > 0.0);
            xs.push(t.ln());
            ys.push(v.ln());
        }
        let fit = crate::stats::linear_fit(&xs, &ys);
        assert!((fit.slope - qe).abs() < 0.01, "slope {}", fit.slope);
        assert!(k.eval(&Point::scalar(1.5)).unwrap() > 0.0);
    }

    #[test]
    fn kelvin_kinks_map_to_reciprocals() {
        let k = kelvin_transform(&SmoothProbe::barrier(0.5), 1.5, 1).unwrap();
        let mut r = k.kink_radii(&Point::scalar(0.5), &Point::scalar(1.0));
        r.sort_by(f64::total_cmp);
        assert_eq!(r, vec![0.5]);
    }

    #[test]
    fn weighted_norms_of_zero() {
        let u = GridFunction1D::from_fn(-1.0, 1.0, 31, |_| 0.0).unwrap();
        let d = u.domain();
        for gamma in [0.0, 0.5, 1.0, 1.7, 2.5] {
            let r = weighted_norms(&u, &d, 0.3, gamma).unwrap();
            assert_eq!(r.composite, 0.0);
            assert!(r.seminorms.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn weighted_norms_are_homogeneous() {
        let f = |x: f64| (1.0 - x * x).max(0.0).powf(0.75) * (1.0 + x);
        let u = GridFunction1D::from_fn(-1.0, 1.0, 63, f).unwrap();
        let u2 = GridFunction1D::from_fn(-1.0, 1.0, 63, |x| 2.0 * f(x)).unwrap();
        let d = u.domain();
        for gamma in [0.5, 1.5, 2.2] {
            let a = weighted_norms(&u, &d, -0.2, gamma).unwrap();
            let b = weighted_norms(&u2, &d, -0.2, gamma).unwrap();
            for (x, y) in a.seminorms.iter().zip(&b.seminorms) {
                assert_eq!(2.0 * x, *y);
            }
            assert_eq!(2.0 * a.holder.unwrap().value, b.holder.unwrap().value);
            assert_eq!(2.0 * a.composite, b.composite);
            assert_eq!(a.composite, a.seminorms.iter().sum::<f64>() + a.holder.unwrap().value);
        }
    }

    #[test]
    fn weighted_norms_nine_point_table() {
        // nodes −0.8, −0.6, …, 0.8 on (−1, 1); r = 0.5, γ = 0.5
        let vals = [0.1, 0.35, -0.2, 0.6, 0.9, 0.4, -0.5, 0.25, 0.05];
        let u = GridFunction1D::new(-1.0, 1.0, vals.to_vec()).unwrap();
        let rep = weighted_norms(&u, &u.domain(), 0.5, 0.5).unwrap();
        let xs: Vec<f64> = (0..9).map(|i| -0.8 + 0.2 * i as f64).collect();
        let dx: Vec<f64> = xs.iter().map(|x| 1.0 - x.abs()).collect();
        let mut s0 = 0.0f64;
        for i in 0..9 {
            s0 = s0.max(dx[i].sqrt() * vals[i].abs());
        }
        let mut h = 0.0f64;
        for i in 0..9 {
            for j in 0..9 {
                if i != j {
                    let dxy = dx[i].min(dx[j]);
                    h = h.max(dxy * (vals[i] - vals[j]).abs() / (xs[i] - xs[j]).abs().sqrt());
                }
            }
        }
        assert!((rep.seminorms[0] - s0).abs() < 1e-15);
        assert!((rep.holder.unwrap().value - h).abs() < 1e-14);
        assert!((rep.composite - s0 - h).abs() < 1e-14);
    }

    #[test]
    fn weighted_norms_need_eight_nodes() {
        let u = GridFunction1D::new(-1.0, 1.0, vec![1.0; 7]).unwrap();
        assert!(matches!(
            weighted_norms(&u, &u.domain(), 0.0, 0.5),
            Err(Error::GridTooCoarse { interior: 7, .. })
        ));
    }

    #[test]
    fn weighted_norms_two_dimensional() {
        let dom = DomainSpec::centered_ball(2, 1.0);
        let g = GridFunction2D::from_fn([-1.0, -1.0], [1.0, 1.0], 21, 21, |x, y| {
            (1.0 - x * x - y * y).max(0.0)
        });
        let rep = weighted_norms(&g, &dom, 0.0, 1.5).unwrap();
        // sup |u| = 1 at the centre, d = 1 there
        assert!((rep.seminorms[0] - 1.0).abs() < 1e-12);
        assert!(rep.seminorms[1] > 0.5);
        assert!(rep.holder.unwrap().value > 0.0);
    }
}
