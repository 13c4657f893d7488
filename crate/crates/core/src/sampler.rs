//! Stable variates and thinned kernel jumps.
//!
//! Scale convention: a `StableSpec` with scale σ describes the Lévy process
//! with E exp(iξ·L_t) = exp(−t σ^α |ξ|^α). Its generator is
//! σ^α·c(d,α)∫𝔡f(x;z)|z|^{−d−α}dz = −σ^α(−Δ)^{α/2}f, so the stable kernel
//! of [`KernelModel::stable`] with k ≡ c is driven by σ = c^{1/α}.

use std::f64::consts::PI;

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::KernelModel;
use crate::point::Point;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableSpec {
    pub alpha: f64,
    pub dim: usize,
    pub scale: f64,
    pub isotropic: bool,
}

impl StableSpec {
    pub fn new(alpha: f64, dim: usize, scale: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(invalid(format!("alpha must lie in (1,2), got {alpha}")));
        }
        if !(1..=3).contains(&dim) {
            return Err(invalid("dimension must be 1..=3"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("stable scale must be positive"));
        }
        Ok(StableSpec {
            alpha,
            dim,
            scale,
            isotropic: true,
        })
    }

    /// The driver of a constant-numerator model, if it has one.
    pub fn for_model(model: &KernelModel) -> Option<Self> {
        model
            .stable_rate()
            .map(|rate| StableSpec::new(model.alpha, model.dim, rate.powf(1.0 / model.alpha)).unwrap())
    }

    /// Multiplier turning a unit variate into an increment over time `t`.
    #[inline]
    pub fn time_factor(&self, t: f64) -> f64 {
        self.scale * t.powf(1.0 / self.alpha)
    }
}

/// Chambers–Mallows–Stuck variate with E e^{iξX} = exp(−|ξ|^α).
#[inline]
pub fn cms_unit(alpha: f64, rng: &mut RngStream) -> f64 {
    let v = PI * (rng.open01() - 0.5);
    let w = rng.exp1();
    let a = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    a * b
}

/// Kanter's variate A ≥ 0 with E e^{−λA} = exp(−λ^a), a ∈ (0,1).
#[inline]
pub fn positive_stable(a: f64, rng: &mut RngStream) -> f64 {
    let u = PI * rng.open01();
    let w = rng.exp1();
    let num = (a * u).sin() / u.sin().powf(1.0 / a);
    num * (((1.0 - a) * u).sin() / w).powf((1.0 - a) / a)
}

/// One draw of L_t in d = 1.
pub fn sample_stable_1d(spec: &StableSpec, t: f64, rng: &mut RngStream) -> f64 {
    debug_assert!(t > 0.0);
    spec.time_factor(t) * cms_unit(spec.alpha, rng)
}

/// One draw of the rotationally invariant L_t: √(2A)·G with A positive
/// (α/2)-stable and G standard Gaussian. In d = 1 this falls back to CMS.
pub fn sample_stable_isotropic(spec: &StableSpec, t: f64, rng: &mut RngStream) -> Point {
    if spec.dim == 1 {
        return Point::scalar(sample_stable_1d(spec, t, rng));
    }
    let a = positive_stable(0.5 * spec.alpha, rng);
    let s = spec.time_factor(t) * (2.0 * a).sqrt();
    let mut p = Point::zeros(spec.dim);
    for i in 0..spec.dim {
        p[i] = s * rng.normal();
    }
    p
}

/// Uniform direction on S^{d−1}.
#[inline]
pub fn uniform_direction(d: usize, rng: &mut RngStream) -> Point {
    if d == 1 {
        return Point::scalar(if rng.uniform() < 0.5 { -1.0 } else { 1.0 });
    }
    loop {
        let mut p = Point::zeros(d);
        for i in 0..d {
            p[i] = rng.normal();
        }
        if let Some(u) = p.normalized() {
            return u;
        }
    }
}

/// Poisson process of candidate jumps from the dominating envelope of a
/// model restricted to |z| ≥ ε.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeSampler {
    dim: usize,
    eps: f64,
    inner_mass: f64,
    outer_mass: f64,
    alpha_in: f64,
    alpha_out: f64,
}

impl EnvelopeSampler {
    pub fn new(model: &KernelModel, eps: f64) -> Self {
        let (inner_mass, outer_mass) = model.envelope.masses(model.dim, eps);
        EnvelopeSampler {
            dim: model.dim,
            eps,
            inner_mass,
            outer_mass,
            alpha_in: model.envelope.alpha_in,
            alpha_out: model.envelope.alpha_out,
        }
    }

    /// Total candidate rate ∫_{|z|≥ε} envelope.
    pub fn rate(&self) -> f64 {
        self.inner_mass + self.outer_mass
    }

    pub fn count(&self, dt: f64, rng: &mut RngStream) -> usize {
        let lam = self.rate() * dt;
        if lam <= 0.0 {
            return 0;
        }
        Poisson::new(lam).map(|p| p.sample(rng) as usize).unwrap_or(0)
    }

    /// One candidate jump drawn from the normalized envelope.
    pub fn candidate(&self, rng: &mut RngStream) -> Point {
        let u = rng.open01();
        let r = if u * self.rate() < self.inner_mass {
            // P(ρ > r) ∝ r^{−a} − 1 on [ε, 1)
            let a = self.alpha_in;
            let v = rng.open01();
            let lo = 1.0;
            let hi = self.eps.powf(-a);
            (lo + v * (hi - lo)).powf(-1.0 / a)
        } else {
            let a = self.alpha_out;
            self.eps.max(1.0) * rng.open01().powf(-1.0 / a)
        };
        uniform_direction(self.dim, rng) * r
    }
}

/// Jumps of the compound Poisson process with intensity π(x,·) on |z| ≥ ε
/// over a window of length dt, by thinning the envelope process.
pub fn sample_kernel_jumps(
    model: &KernelModel,
    x: &Point,
    epsilon: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<Vec<Point>> {
    if !(epsilon > 0.0 && dt > 0.0) {
        return Err(invalid("epsilon and dt must be positive"));
    }
    let env = EnvelopeSampler::new(model, epsilon);
    let n = env.count(dt, rng);
    let mut out = Vec::new();
    for _ in 0..n {
        let z = env.candidate(rng);
        let ratio = model.check_envelope(x, &z)?;
        if rng.uniform() < ratio {
            out.push(z);
        }
    }
    Ok(out)
}
