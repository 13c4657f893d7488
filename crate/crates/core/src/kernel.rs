//! The data (b, π) of the non-local operator
//!
//! ```text
//! 𝓘f(x) = b(x)·∇f(x) + ∫ 𝔡f(x;z) π(x,z) dz,
//! 𝔡f(x;z) = f(x+z) − f(x) − 1{|z|≤1} ∇f(x)·z,
//! π(x,z)  = scale · k(x,z) / |z|^{d+α},   α ∈ (1,2).
//! ```
//!
//! `scale` is a fixed multiplier kept outside the numerator so that the
//! stable kernel can be written with `k ≡ 1` and `scale = c(d,α)`, the
//! constant for which the operator is exactly −(−Δ)^{α/2}.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::domain::{unit_sphere_area, DomainSpec};
use crate::error::{invalid, Error, Result};
use crate::point::Point;
use crate::quadrature::{adaptive, AdaptiveOptions, GaussRule};
use crate::sphere::{rays, sphere_rule};

pub type DriftFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type NumeratorFn = Arc<dyn Fn(&Point, &Point) -> f64 + Send + Sync>;
/// Radial distances ρ > 0 along the unit direction `u` from `x` at which
/// z ↦ k(x, ρu) fails to be smooth.
pub type BreakFn = Arc<dyn Fn(&Point, &Point) -> Vec<f64> + Send + Sync>;

/// c(d,α) = α 2^{α−1} Γ((d+α)/2) / (π^{d/2} Γ(1−α/2)).
///
/// With this constant, c(d,α)∫𝔡f(x;z)|z|^{−d−α}dz = −(−Δ)^{α/2}f(x), where
/// (−Δ)^{α/2} has Fourier symbol |ξ|^α. For d = 1, α = 1.5 the value is
/// 0.29919...
pub fn frac_laplacian_constant(d: usize, alpha: f64) -> f64 {
    alpha * 2f64.powf(alpha - 1.0) * gamma(0.5 * (d as f64 + alpha))
        / (PI.powf(0.5 * d as f64) * gamma(1.0 - 0.5 * alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassTag {
    SymmetricNumerator,
    WeaklyHoelder,
    GeneralMeasurable,
    VariableOrder,
}

/// Dominating two-piece power envelope for thinning:
/// π(x,z) ≤ m_in |z|^{−d−α_in} on |z| < 1 and m_out |z|^{−d−α_out} on |z| ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub m_in: f64,
    pub alpha_in: f64,
    pub m_out: f64,
    pub alpha_out: f64,
}

impl Envelope {
    pub fn power(m: f64, alpha: f64) -> Self {
        Envelope {
            m_in: m,
            alpha_in: alpha,
            m_out: m,
            alpha_out: alpha,
        }
    }

    #[inline]
    pub fn density(&self, d: usize, r: f64) -> f64 {
        if r < 1.0 {
            self.m_in * r.powf(-(d as f64) - self.alpha_in)
        } else {
            self.m_out * r.powf(-(d as f64) - self.alpha_out)
        }
    }

    /// Mass on ε ≤ |z| < 1 and on |z| ≥ max(ε, 1).
    pub fn masses(&self, d: usize, eps: f64) -> (f64, f64) {
        let s = unit_sphere_area(d);
        let inner = if eps < 1.0 {
            s * self.m_in * (eps.powf(-self.alpha_in) - 1.0) / self.alpha_in
        } else {
            0.0
        };
        let outer = s * self.m_out * eps.max(1.0).powf(-self.alpha_out) / self.alpha_out;
        (inner, outer)
    }
}

/// Drift, kernel and structural flags of one operator.
#[derive(Clone)]
pub struct KernelModel {
    pub dim: usize,
    pub alpha: f64,
    pub drift: DriftFn,
    pub numerator: NumeratorFn,
    pub scale: f64,
    pub class_tag: ClassTag,
    pub lambda_bound: Option<f64>,
    pub envelope: Envelope,
    /// `Some(c)` when k ≡ c; enables exact stable increments and analytic
    /// small-jump moments.
    pub constant_numerator: Option<f64>,
    /// k(x,z) = k(x,−z) for all x, z.
    pub symmetric: bool,
    pub drift_is_zero: bool,
    pub breaks: Option<BreakFn>,
    pub name: String,
}

impl fmt::Debug for KernelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("alpha", &self.alpha)
            .field("scale", &self.scale)
            .field("class_tag", &self.class_tag)
            .field("lambda_bound", &self.lambda_bound)
            .field("constant_numerator", &self.constant_numerator)
            .finish()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(invalid(format!("alpha must lie in (1,2), got {alpha}")));
    }
    Ok(())
}

fn check_dim(dim: usize) -> Result<()> {
    if !(1..=crate::point::MAX_DIM).contains(&dim) {
        return Err(invalid(format!("dimension must be 1..=3, got {dim}")));
    }
    Ok(())
}

impl KernelModel {
    /// General constructor. The caller supplies the envelope used by thinning.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        alpha: f64,
        drift: DriftFn,
        numerator: NumeratorFn,
        scale: f64,
        class_tag: ClassTag,
        envelope: Envelope,
        name: impl Into<String>,
    ) -> Result<Self> {
        check_dim(dim)?;
        check_alpha(alpha)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("kernel scale must be positive"));
        }
        Ok(KernelModel {
            dim,
            alpha,
            drift,
            numerator,
            scale,
            class_tag,
            lambda_bound: None,
            envelope,
            constant_numerator: None,
            symmetric: class_tag == ClassTag::SymmetricNumerator,
            drift_is_zero: false,
            breaks: None,
            name: name.into(),
        })
    }

    /// k ≡ c with scale c(d,α): the operator c·(−(−Δ)^{α/2}) plus drift.
    pub fn stable(dim: usize, alpha: f64, c: f64) -> Result<Self> {
        check_dim(dim)?;
        check_alpha(alpha)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("constant numerator must be positive"));
        }
        let scale = frac_laplacian_constant(dim, alpha);
        Ok(KernelModel {
            dim,
            alpha,
            drift: zero_drift(dim),
            numerator: Arc::new(move |_, _| c),
            scale,
            class_tag: ClassTag::SymmetricNumerator,
            lambda_bound: Some(c.max(1.0 / c)),
            envelope: Envelope::power(c * scale, alpha),
            constant_numerator: Some(c),
            symmetric: true,
            drift_is_zero: true,
            breaks: None,
            name: if c == 1.0 {
                "stable".into()
            } else {
                format!("constant({c})")
            },
        })
    }

    pub fn with_drift(mut self, drift: DriftFn) -> Self {
        self.drift = drift;
        self.drift_is_zero = false;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda_bound = Some(lambda);
        self
    }

    /// Same model with k replaced by c·k.
    pub fn with_numerator_scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        let k = self.numerator.clone();
        m.numerator = Arc::new(move |x, z| c * k(x, z));
        m.constant_numerator = self.constant_numerator.map(|v| v * c);
        m.envelope.m_in *= c;
        m.envelope.m_out *= c;
        m.lambda_bound = self.lambda_bound.map(|l| l * c.max(1.0 / c));
        m.name = format!("{}*{c}", self.name);
        m
    }

    #[inline]
    pub fn b(&self, x: &Point) -> Point {
        (self.drift)(x)
    }

    #[inline]
    pub fn k(&self, x: &Point, z: &Point) -> f64 {
        (self.numerator)(x, z)
    }

    /// π(x,z).
    #[inline]
    pub fn pi(&self, x: &Point, z: &Point) -> f64 {
        let r = z.norm();
        self.scale * self.k(x, z) * r.powf(-(self.dim as f64) - self.alpha)
    }

    /// Rate ρ such that the jump part equals ρ·(−(−Δ)^{α/2}) when k ≡ c.
    pub fn stable_rate(&self) -> Option<f64> {
        self.constant_numerator
            .map(|c| c * self.scale / frac_laplacian_constant(self.dim, self.alpha))
    }

    pub fn kernel_breaks(&self, x: &Point, u: &Point) -> Vec<f64> {
        self.breaks.as_ref().map(|f| f(x, u)).unwrap_or_default()
    }

    /// ∫_{|z|<ε} z zᵀ π(x,z) dz, returned row-major (d×d).
    pub fn small_jump_covariance(&self, x: &Point, eps: f64) -> [[f64; 3]; 3] {
        let d = self.dim;
        let mut cov = [[0.0; 3]; 3];
        let p = 2.0 - self.alpha;
        if let Some(c) = self.constant_numerator {
            let v = c * self.scale * eps.powf(p) / p * unit_sphere_area(d) / d as f64;
            for (i, row) in cov.iter_mut().enumerate().take(d) {
                row[i] = v;
            }
            return cov;
        }
        // ρ = ε v^{1/p} turns ρ^{1−α}dρ into ε^p/p dv.
        let rule = GaussRule::new(6);
        for (u, wu) in sphere_rule(d, 12) {
            let mut radial = 0.0;
            for (v, wv) in rule.mapped(0.0, 1.0) {
                let rho = eps * v.powf(1.0 / p);
                radial += wv * self.k(x, &(u * rho));
            }
            radial *= self.scale * eps.powf(p) / p;
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += wu * radial * u[i] * u[j];
                }
            }
        }
        cov
    }

    /// −∫_{ε≤|z|≤1} z π(x,z) dz; zero for symmetric numerators.
    pub fn compensator_drift(&self, x: &Point, eps: f64) -> Point {
        let d = self.dim;
        let mut out = Point::zeros(d);
        if self.symmetric || eps >= 1.0 {
            return out;
        }
        let rule = GaussRule::new(24);
        let (a, b) = (eps.ln(), 0.0);
        for (u, wu) in sphere_rule(d, 16) {
            let mut radial = 0.0;
            for (t, wt) in rule.mapped(a, b) {
                let rho = t.exp();
                // ρ·ρ^{d−1}·ρ^{−d−α}·dρ = ρ^{1−α} dt
                radial += wt * self.k(x, &(u * rho)) * rho.powf(1.0 - self.alpha);
            }
            out -= u * (wu * self.scale * radial);
        }
        out
    }

    /// Checks π(x,z) ≤ envelope at a candidate, with relative slack 1e-12.
    pub fn check_envelope(&self, x: &Point, z: &Point) -> Result<f64> {
        let r = z.norm();
        let p = self.pi(x, z);
        let e = self.envelope.density(self.dim, r);
        if !(p <= e * (1.0 + 1e-12)) {
            return Err(Error::EnvelopeViolated {
                intensity: p,
                envelope: e,
                radius: r,
            });
        }
        Ok(p / e)
    }
}

pub fn zero_drift(dim: usize) -> DriftFn {
    Arc::new(move |_| Point::zeros(dim))
}

/// The C² cutoff used by the variable-order kernel:
/// φ(r) = 1 on [0, 1/2], 0 on [1, ∞), and 1 − S(2r − 1) in between with the
/// quintic smoothstep S(t) = 10t³ − 15t⁴ + 6t⁵.
#[inline]
pub fn bump(r: f64) -> f64 {
    let r = r.abs();
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        let t = 2.0 * r - 1.0;
        1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// π(x,z) = |z|^{−d−α} + |z|^{−d−β′−γ(x,z)} with
/// γ(x,z) = φ(2|x+z|/(1+|x|))·(1−φ(4|x|))·(α′−β′), 1 < α′ < β′ < α < 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableOrderKernel {
    pub alpha_prime: f64,
    pub beta_prime: f64,
    pub alpha: f64,
}

impl VariableOrderKernel {
    pub fn new(alpha_prime: f64, beta_prime: f64, alpha: f64) -> Result<Self> {
        if !(1.0 < alpha_prime && alpha_prime < beta_prime && beta_prime < alpha && alpha < 2.0) {
            return Err(invalid(format!(
                "variable-order kernel needs 1 < α′ < β′ < α < 2, got ({alpha_prime}, {beta_prime}, {alpha})"
            )));
        }
        Ok(VariableOrderKernel {
            alpha_prime,
            beta_prime,
            alpha,
        })
    }

    #[inline]
    pub fn gamma(&self, x: &Point, z: &Point) -> f64 {
        let nx = x.norm();
        let outer = 1.0 - bump(4.0 * nx);
        if outer == 0.0 {
            return 0.0;
        }
        bump(2.0 * (*x + *z).norm() / (1.0 + nx)) * outer * (self.alpha_prime - self.beta_prime)
    }

    /// Numerator relative to |z|^{−d−α}: 1 + |z|^{α−β′−γ}.
    #[inline]
    pub fn numerator(&self, x: &Point, z: &Point) -> f64 {
        let g = self.gamma(x, z);
        1.0 + z.norm().powf(self.alpha - self.beta_prime - g)
    }

    pub fn model(&self, dim: usize) -> Result<KernelModel> {
        check_dim(dim)?;
        let me = *self;
        let mut m = KernelModel::new(
            dim,
            self.alpha,
            zero_drift(dim),
            Arc::new(move |x, z| me.numerator(x, z)),
            1.0,
            ClassTag::VariableOrder,
            Envelope {
                m_in: 2.0,
                alpha_in: self.alpha,
                m_out: 2.0,
                alpha_out: self.alpha_prime,
            },
            "variable_order",
        )?;
        m.drift_is_zero = true;
        m.symmetric = false;
        if dim == 1 {
            m.breaks = Some(Arc::new(|x: &Point, u: &Point| {
                let nx = x.norm();
                let mut out = Vec::new();
                for c in [0.25 * (1.0 + nx), 0.5 * (1.0 + nx)] {
                    for s in [c, -c] {
                        let rho = (s - x[0]) * u[0];
                        if rho > 0.0 {
                            out.push(rho);
                        }
                    }
                }
                out
            }));
        }
        Ok(m)
    }
}

/// Perturbation family used for weakly Hölder experiments:
/// k(x,z) = 1 + amp·sin(ω x₁)·m(z) + skew·tanh(z₁)·m(z), m(z) = min(|z|,1)^θ.
///
/// k(x,·) − k(x,0) = O(|z|^θ) near the origin and k is smooth in x, so the
/// family is weakly Hölder with two-sided bounds 1 ± (amp + |skew|).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeaklyHoelderKernel {
    pub amp: f64,
    pub omega: f64,
    pub theta: f64,
    pub skew: f64,
}

impl WeaklyHoelderKernel {
    pub fn numerator(&self, x: &Point, z: &Point) -> f64 {
        let m = z.norm().min(1.0).powf(self.theta);
        1.0 + self.amp * (self.omega * x[0]).sin() * m + self.skew * z[0].tanh() * m
    }

    pub fn lambda(&self) -> f64 {
        let s = self.amp.abs() + self.skew.abs();
        (1.0 + s).max(1.0 / (1.0 - s))
    }

    pub fn model(&self, dim: usize, alpha: f64) -> Result<KernelModel> {
        let s = self.amp.abs() + self.skew.abs();
        if s >= 1.0 {
            return Err(invalid("weakly Hölder family needs |amp| + |skew| < 1"));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(invalid("weakly Hölder exponent θ must lie in (0,1]"));
        }
        let me = *self;
        let scale = frac_laplacian_constant(dim, alpha);
        let mut m = KernelModel::new(
            dim,
            alpha,
            zero_drift(dim),
            Arc::new(move |x, z| me.numerator(x, z)),
            scale,
            if self.skew == 0.0 {
                ClassTag::SymmetricNumerator
            } else {
                ClassTag::WeaklyHoelder
            },
            Envelope::power((1.0 + s) * scale, alpha),
            "weakly_hoelder",
        )?;
        m.lambda_bound = Some(self.lambda());
        m.drift_is_zero = true;
        m.symmetric = self.skew == 0.0;
        if self.skew == 0.0 && self.amp == 0.0 {
            m.constant_numerator = Some(1.0);
        }
        Ok(m)
    }
}

/// Serializable description of a model built from the named registries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dim: usize,
    pub alpha: f64,
    pub kernel: String,
    #[serde(default)]
    pub kernel_params: BTreeMap<String, f64>,
    #[serde(default = "default_drift")]
    pub drift: String,
    #[serde(default)]
    pub drift_params: BTreeMap<String, f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
}

fn default_drift() -> String {
    "zero".into()
}

pub const KERNEL_KEYS: [&str; 4] = ["stable", "constant", "weakly_hoelder", "variable_order"];
pub const DRIFT_KEYS: [&str; 4] = ["zero", "constant", "linear", "superlinear"];

fn take_params(
    params: &BTreeMap<String, f64>,
    allowed: &[(&str, f64)],
    what: &str,
) -> Result<Vec<f64>> {
    for k in params.keys() {
        if !allowed.iter().any(|(a, _)| a == k) {
            return Err(invalid(format!("unknown parameter `{k}` for {what}")));
        }
    }
    Ok(allowed
        .iter()
        .map(|(k, d)| params.get(*k).copied().unwrap_or(*d))
        .collect())
}

impl ModelSpec {
    pub fn new(dim: usize, alpha: f64, kernel: &str) -> Self {
        ModelSpec {
            dim,
            alpha,
            kernel: kernel.into(),
            kernel_params: BTreeMap::new(),
            drift: "zero".into(),
            drift_params: BTreeMap::new(),
            lambda: None,
        }
    }

    pub fn kernel_param(mut self, key: &str, v: f64) -> Self {
        self.kernel_params.insert(key.into(), v);
        self
    }

    pub fn with_drift(mut self, key: &str, params: &[(&str, f64)]) -> Self {
        self.drift = key.into();
        self.drift_params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self
    }

    pub fn build(&self) -> Result<KernelModel> {
        check_dim(self.dim)?;
        let d = self.dim;
        let mut model = match self.kernel.as_str() {
            "stable" => {
                take_params(&self.kernel_params, &[], "kernel `stable`")?;
                KernelModel::stable(d, self.alpha, 1.0)?
            }
            "constant" => {
                let p = take_params(&self.kernel_params, &[("c", 1.0)], "kernel `constant`")?;
                KernelModel::stable(d, self.alpha, p[0])?
            }
            "weakly_hoelder" => {
                let p = take_params(
                    &self.kernel_params,
                    &[("amp", 0.2), ("omega", 2.0 * PI), ("theta", 0.5), ("skew", 0.0)],
                    "kernel `weakly_hoelder`",
                )?;
                check_alpha(self.alpha)?;
                WeaklyHoelderKernel {
                    amp: p[0],
                    omega: p[1],
                    theta: p[2],
                    skew: p[3],
                }
                .model(d, self.alpha)?
            }
            "variable_order" => {
                let p = take_params(
                    &self.kernel_params,
                    &[("alpha_prime", 1.2), ("beta_prime", 1.5)],
                    "kernel `variable_order`",
                )?;
                VariableOrderKernel::new(p[0], p[1], self.alpha)?.model(d)?
            }
            other => return Err(Error::UnknownKey(other.to_string())),
        };
        let drift: DriftFn = match self.drift.as_str() {
            "zero" => {
                take_params(&self.drift_params, &[], "drift `zero`")?;
                zero_drift(d)
            }
            "constant" => {
                let p = take_params(
                    &self.drift_params,
                    &[("b1", 0.0), ("b2", 0.0), ("b3", 0.0)],
                    "drift `constant`",
                )?;
                let v = Point::from_slice(&p[..d]);
                Arc::new(move |_| v)
            }
            "linear" => {
                let p = take_params(&self.drift_params, &[("kappa", 1.0)], "drift `linear`")?;
                let kappa = p[0];
                Arc::new(move |x: &Point| *x * (-kappa))
            }
            "superlinear" => {
                let p = take_params(&self.drift_params, &[("c", 1.0)], "drift `superlinear`")?;
                let c = p[0];
                Arc::new(move |x: &Point| *x * (c * x.norm()))
            }
            other => return Err(Error::UnknownKey(other.to_string())),
        };
        if self.drift != "zero" {
            let is_zero = self.drift_params.values().all(|v| *v == 0.0) && self.drift == "constant";
            model = model.with_drift(drift);
            model.drift_is_zero = is_zero;
        }
        if let Some(l) = self.lambda {
            if !(l >= 1.0) {
                return Err(invalid("lambda bound must be ≥ 1"));
            }
            model.lambda_bound = Some(l);
        }
        Ok(model)
    }
}

/// Per-probe validation entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub x: Point,
    /// ∫(|z|²∧1)π(x,z)dz
    pub integrability: f64,
    pub symmetry_residual: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub drift_norm: f64,
    pub lambda_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub model: String,
    pub dim: usize,
    pub alpha: f64,
    pub class_tag: ClassTag,
    pub probes: Vec<ProbeEntry>,
    pub passed: bool,
}

/// Deterministic probe points in a region (Halton points for bounded shapes,
/// rays for unbounded ones).
pub fn probe_points(region: &DomainSpec, n: usize) -> Vec<Point> {
    let d = region.dim();
    let c = region.center();
    let halton = |i: usize, base: usize| {
        let (mut f, mut r, mut k) = (1.0, 0.0, i);
        while k > 0 {
            f /= base as f64;
            r += f * (k % base) as f64;
            k /= base;
        }
        r
    };
    let primes = [2usize, 3, 5];
    let mut out = Vec::with_capacity(n);
    let mut i = 1;
    if let Some(rad) = region.bounding_radius() {
        if region.contains(&c) {
            out.push(c);
        }
        while out.len() < n && i < 100_000 {
            let mut p = c;
            for j in 0..d {
                p[j] += rad * (2.0 * halton(i, primes[j]) - 1.0);
            }
            if region.contains(&p) {
                out.push(p);
            }
            i += 1;
        }
    } else {
        let dirs = rays(d, n.max(1));
        for (j, u) in dirs.iter().enumerate() {
            let p = match region {
                DomainSpec::ComplementOfBall { center, radius } => {
                    *center + *u * (radius * (1.5 + halton(j + 1, 2)))
                }
                DomainSpec::Cone { vertex, axis, .. } => {
                    *vertex + axis.normalized().unwrap() * (1.0 + j as f64)
                }
                _ => unreachable!(),
            };
            out.push(p);
        }
    }
    out.truncate(n);
    out
}

fn radial_truncated_moment(model: &KernelModel, x: &Point, u: &Point, a: f64, b: f64) -> f64 {
    // ∫_a^b (ρ²∧1) k(x,ρu) scale ρ^{−1−α} dρ, integrated in t = ln ρ
    let mut breaks = vec![a.ln()];
    if a < 1.0 && b > 1.0 {
        breaks.push(0.0);
    }
    for r in model.kernel_breaks(x, u) {
        if r > a && r < b {
            breaks.push(r.ln());
        }
    }
    breaks.push(b.ln());
    breaks.sort_by(f64::total_cmp);
    let alpha = model.alpha;
    adaptive(
        |t: f64| {
            let rho = t.exp();
            let m = if rho < 1.0 { rho * rho } else { 1.0 };
            m * model.k(x, &(*u * rho)) * rho.powf(-alpha)
        },
        &breaks,
        AdaptiveOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_panels: 500,
        },
    )
    .value
        * model.scale
}

/// ∫(|z|²∧1)π(x,z)dz with geometric Cauchy tests on the core and the tail.
pub fn integrability_estimate(model: &KernelModel, x: &Point) -> Result<f64> {
    let d = model.dim;
    let dirs = sphere_rule(d, 16);
    let shell = |a: f64, b: f64| -> f64 {
        dirs.iter()
            .map(|(u, w)| w * radial_truncated_moment(model, x, u, a, b))
            .sum()
    };
    let body = shell(1e-2, 1e2);
    if !body.is_finite() {
        return Err(Error::NonIntegrableKernel {
            x: x.to_vec(),
            reason: "kernel integral is not finite on 1e-2 < |z| < 1e2".into(),
        });
    }
    let mut total = body;
    for (label, start, factor) in [("core", 1e-2, 0.5), ("tail", 1e2, 2.0)] {
        let mut prev = f64::NAN;
        let mut r = start;
        let mut extrapolated_prev = f64::NAN;
        let mut acc = 0.0;
        let mut ok = false;
        for _ in 0..60 {
            let next = r * factor;
            let c = if factor < 1.0 { shell(next, r) } else { shell(r, next) };
            acc += c;
            r = next;
            if prev.is_finite() && prev > 0.0 {
                let ratio = c / prev;
                if ratio < 1.0 - 1e-3 {
                    let rem = c * ratio / (1.0 - ratio);
                    let ext = total + acc + rem;
                    if extrapolated_prev.is_finite()
                        && (ext - extrapolated_prev).abs() <= 1e-3 * ext.abs()
                    {
                        total = ext;
                        ok = true;
                        break;
                    }
                    extrapolated_prev = ext;
                } else {
                    extrapolated_prev = f64::NAN;
                }
            }
            if c == 0.0 && prev == 0.0 {
                total += acc;
                ok = true;
                break;
            }
            prev = c;
        }
        if !ok {
            return Err(Error::NonIntegrableKernel {
                x: x.to_vec(),
                reason: format!("{label} contributions fail the ratio-2 Cauchy test"),
            });
        }
    }
    Ok(total)
}

/// Samples z on a log-radial grid times a direction set.
fn z_samples(d: usize, r_min: f64, r_max: f64, n_rad: usize, n_dir: usize) -> Vec<Point> {
    let dirs = rays(d, n_dir);
    let mut out = Vec::with_capacity(n_rad * dirs.len());
    for i in 0..n_rad {
        let t = i as f64 / (n_rad - 1).max(1) as f64;
        let r = r_min * (r_max / r_min).powf(t);
        for u in &dirs {
            out.push(*u * r);
        }
    }
    out
}

/// Checks integrability, positivity, symmetry (for symmetric tags) and the
/// two-sided λ bound at `n_probes` deterministic points of `probe_region`.
pub fn validate(model: &KernelModel, probe_region: &DomainSpec, n_probes: usize) -> Result<ValidationReport> {
    if n_probes == 0 {
        return Err(invalid("n_probes must be at least 1"));
    }
    probe_region.check()?;
    if probe_region.dim() != model.dim {
        return Err(invalid("probe region dimension differs from the model"));
    }
    let zs = z_samples(model.dim, 1e-4, 1e4, 33, 8);
    let mut probes = Vec::new();
    let mut passed = true;
    for x in probe_points(probe_region, n_probes) {
        let (mut kmin, mut kmax, mut res) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for z in &zs {
            let k = model.k(&x, z);
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::NonIntegrableKernel {
                    x: x.to_vec(),
                    reason: format!("numerator k(x,z) = {k} is not strictly positive and finite at z = {z:?}"),
                });
            }
            kmin = kmin.min(k);
            kmax = kmax.max(k);
            let km = model.k(&x, &(-*z));
            res = res.max((k - km).abs());
        }
        if model.class_tag == ClassTag::SymmetricNumerator {
            let tol = 1e-12 * kmax.abs().max(1.0);
            if res > tol {
                return Err(Error::SymmetryViolation {
                    residual: res,
                    tolerance: tol,
                });
            }
        }
        let integrability = integrability_estimate(model, &x)?;
        let bx = model.b(&x).norm();
        let lambda_ok = model
            .lambda_bound
            .map(|l| kmin >= 1.0 / l * (1.0 - 1e-12) && kmax <= l * (1.0 + 1e-12) && bx <= l);
        if lambda_ok == Some(false) {
            passed = false;
        }
        probes.push(ProbeEntry {
            x,
            integrability,
            symmetry_residual: res,
            k_min: kmin,
            k_max: kmax,
            drift_norm: bx,
            lambda_ok,
        });
    }
    Ok(ValidationReport {
        model: model.name.clone(),
        dim: model.dim,
        alpha: model.alpha,
        class_tag: model.class_tag,
        probes,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub radii: Vec<f64>,
    /// sup over sampled |x| = R and z of (x·b(x) ∨ |x|k(x,z)) / (1+|x|²).
    pub margins: Vec<f64>,
    /// Largest margin: the smallest K₀ consistent with the samples.
    pub fitted_k0: f64,
    /// Log-log slope of the margins over the upper half of the radii.
    pub tail_slope: f64,
    /// True when the margins do not grow with R.
    pub uniform: bool,
}

/// Samples the growth condition x·b(x) ∨ |x|k(x,z) ≤ K₀(1+|x|²).
/// `resolution` multiplies the number of sampled directions and radii.
pub fn growth_condition_check_with(model: &KernelModel, radii: &[f64], resolution: usize) -> Result<GrowthReport> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("radii must be positive and sorted"));
    }
    let res = resolution.max(1);
    let xdirs = rays(model.dim, 8 * res);
    let zs = z_samples(model.dim, 1e-3, 1e3, 16 * res + 1, 8 * res);
    let margins: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let mut m = f64::NEG_INFINITY;
            for u in &xdirs {
                let x = *u * r;
                let xb = x.dot(&model.b(&x));
                let mut kx = 0.0f64;
                for z in &zs {
                    kx = kx.max(model.k(&x, z));
                }
                m = m.max(xb.max(r * kx) / (1.0 + r * r));
            }
            m
        })
        .collect();
    let fitted_k0 = margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half = radii.len() / 2;
    let (xs, ys): (Vec<f64>, Vec<f64>) = radii[half..]
        .iter()
        .zip(&margins[half..])
        .filter(|(_, m)| **m > 0.0)
        .map(|(r, m)| (r.ln(), m.ln()))
        .unzip();
    let tail_slope = if xs.len() >= 2 {
        crate::stats::linear_fit(&xs, &ys).slope
    } else {
        0.0
    };
    Ok(GrowthReport {
        radii: radii.to_vec(),
        margins,
        fitted_k0,
        tail_slope,
        uniform: tail_slope <= 0.05,
    })
}

pub fn growth_condition_check(model: &KernelModel, radii: &[f64]) -> Result<GrowthReport> {
    growth_condition_check_with(model, radii, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_matches_reference_value() {
        // Γ-function form 4^s Γ(d/2+s)/(π^{d/2}|Γ(−s)|), s = 3/4
        let s = 0.75;
        let alt = 4f64.powf(s) * gamma(0.5 + s) / (PI.sqrt() * (gamma(1.0 - s) / s));
        let c = frac_laplacian_constant(1, 1.5);
        assert!((c - alt).abs() < 1e-14);
        assert!((c - 0.299_19).abs() < 1e-4);
        // d = 2, α = 1: 1/(2π)
        let c2 = frac_laplacian_constant(2, 1.0);
        assert!((c2 - 1.0 / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn bump_plateaus_and_smoothness() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(0.5), 1.0);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(7.0), 0.0);
        assert!((bump(0.75) - 0.5).abs() < 1e-15);
        // first and second one-sided derivatives vanish at the joins
        let h = 1e-4;
        for r in [0.5, 1.0] {
            let d1 = (bump(r + h) - bump(r - h)) / (2.0 * h);
            let d2 = (bump(r + h) - 2.0 * bump(r) + bump(r - h)) / (h * h);
            assert!(d1.abs() < 1e-6, "φ' at {r}: {d1}");
            assert!(d2.abs() < 1e-2, "φ'' at {r}: {d2}");
        }
    }

    #[test]
    fn constant_kernel_validates() {
        let m = KernelModel::stable(1, 1.5, 1.0).unwrap();
        let rep = validate(&m, &DomainSpec::centered_ball(1, 1.0), 4).unwrap();
        assert!(rep.passed);
        for p in &rep.probes {
            assert_eq!(p.symmetry_residual, 0.0);
            // ∫(|z|²∧1)|z|^{−1−α}dz = 2(1/(2−α) + 1/α)
            let exact = m.scale * 2.0 * (1.0 / 0.5 + 1.0 / 1.5);
            assert!((p.integrability - exact).abs() < 1e-3 * exact, "{} vs {exact}", p.integrability);
        }
    }

    #[test]
    fn negative_numerator_rejected() {
        let m = KernelModel::new(
            1,
            1.5,
            zero_drift(1),
            Arc::new(|_, _| -1.0),
            1.0,
            ClassTag::SymmetricNumerator,
            Envelope::power(1.0, 1.5),
            "negative",
        )
        .unwrap();
        let err = validate(&m, &DomainSpec::centered_ball(1, 1.0), 2).unwrap_err();
        assert_eq!(err.name(), "NonIntegrableKernel");
    }

    #[test]
    fn asymmetric_numerator_with_symmetric_tag() {
        let m = KernelModel::new(
            1,
            1.5,
            zero_drift(1),
            Arc::new(|_, z: &Point| 1.0 + 0.1 * z[0].tanh()),
            1.0,
            ClassTag::SymmetricNumerator,
            Envelope::power(1.1, 1.5),
            "skewed",
        )
        .unwrap();
        let err = validate(&m, &DomainSpec::centered_ball(1, 1.0), 2).unwrap_err();
        assert_eq!(err.name(), "SymmetryViolation");
    }

    #[test]
    fn too_singular_numerator_fails_cauchy_test() {
        // k = |z|^{-0.6} makes π ~ |z|^{-1-2.1}: not integrable against |z|²
        let m = KernelModel::new(
            1,
            1.5,
            zero_drift(1),
            Arc::new(|_, z: &Point| z.norm().powf(-0.6)),
            1.0,
            ClassTag::SymmetricNumerator,
            Envelope::power(1.0, 1.5),
            "too singular",
        )
        .unwrap();
        let err = validate(&m, &DomainSpec::centered_ball(1, 1.0), 1).unwrap_err();
        assert_eq!(err.name(), "NonIntegrableKernel");
    }

    #[test]
    fn variable_order_far_from_origin() {
        let vo = VariableOrderKernel::new(1.2, 1.5, 1.8).unwrap();
        let m = vo.model(1).unwrap();
        let x = Point::scalar(10.0);
        // γ vanishes once |x+z| ≥ (1+|x|)/2
        for zv in [-4.5, -2.0, 0.3, 5.0, 100.0, -30.0] {
            let z = Point::scalar(zv);
            assert_eq!(vo.gamma(&x, &z), 0.0, "z = {zv}");
            let expect = z.norm().powf(-2.8) + z.norm().powf(-2.5);
            assert!((m.pi(&x, &z) - expect).abs() < 1e-14 * expect);
        }
        assert!(vo.gamma(&x, &Point::scalar(-10.0)) < 0.0);
        let rep = validate(&m, &DomainSpec::ball(Point::scalar(10.0), 0.5).unwrap(), 3).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn growth_examples() {
        let ou = ModelSpec::new(1, 1.5, "stable")
            .with_drift("linear", &[("kappa", 1.0)])
            .build()
            .unwrap();
        let radii = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        let g = growth_condition_check(&ou, &radii).unwrap();
        assert!(g.margins.iter().all(|m| *m <= 1.0));
        assert!(g.uniform);
        let sup = ModelSpec::new(1, 1.5, "stable")
            .with_drift("superlinear", &[])
            .build()
            .unwrap();
        let g = growth_condition_check(&sup, &radii).unwrap();
        assert!(!g.uniform);
        assert!(g.margins.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn variable_order_growth_matches_finer_sampling() {
        let m = VariableOrderKernel::new(1.2, 1.5, 1.8).unwrap().model(2).unwrap();
        let radii = [1.0, 2.0, 4.0, 8.0, 16.0];
        let coarse = growth_condition_check_with(&m, &radii, 1).unwrap();
        let fine = growth_condition_check_with(&m, &radii, 2).unwrap();
        assert!(coarse.uniform && fine.uniform);
        for (a, b) in coarse.margins.iter().zip(&fine.margins) {
            assert!(a <= b && (b - a) <= 0.05 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn registry_errors() {
        let e = ModelSpec::new(1, 1.5, "nope").build().unwrap_err();
        assert_eq!(e, Error::UnknownKey("nope".into()));
        let e = ModelSpec::new(1, 2.0, "stable").build().unwrap_err();
        assert_eq!(e.name(), "InvalidParameter");
        let e = ModelSpec::new(1, 1.5, "constant").kernel_param("bogus", 1.0).build().unwrap_err();
        assert_eq!(e.name(), "InvalidParameter");
    }

    #[test]
    fn small_jump_moments_agree_for_constant_kernel() {
        let m = KernelModel::stable(2, 1.6, 1.0).unwrap();
        let mut generic = m.clone();
        generic.constant_numerator = None;
        let x = Point::zeros(2);
        let a = m.small_jump_covariance(&x, 0.05);
        let b = generic.small_jump_covariance(&x, 0.05);
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[i][j]).abs() < 1e-12 * a[0][0]);
            }
        }
    }

    proptest! {
        #[test]
        fn variable_order_gamma_bounds(x in -20.0f64..20.0, z in -40.0f64..40.0) {
            let vo = VariableOrderKernel::new(1.2, 1.5, 1.8).unwrap();
            let g = vo.gamma(&Point::scalar(x), &Point::scalar(z));
            prop_assert!((1.2 - 1.5) - 1e-15 <= g && g <= 0.0);
            if x.abs() <= 0.125 {
                prop_assert_eq!(g, 0.0);
            }
        }

        #[test]
        fn variable_order_envelope_dominates(x in -5.0f64..5.0, y in -5.0f64..5.0, r in 1e-3f64..1e3, th in 0.0f64..6.283) {
            let vo = VariableOrderKernel::new(1.2, 1.5, 1.8).unwrap();
            let m = vo.model(2).unwrap();
            let xp = Point::from_slice(&[x, y]);
            prop_assert!(m.check_envelope(&xp, &Point::polar(r, th)).is_ok());
        }

        #[test]
        fn truncated_integral_monotone_in_cutoffs(c in 0.5f64..2.0, a in 1e-3f64..1e-1) {
            let m = KernelModel::stable(1, 1.5, c).unwrap();
            let x = Point::scalar(0.0);
            let u = Point::scalar(1.0);
            let inner = radial_truncated_moment(&m, &x, &u, a, 10.0);
            let outer = radial_truncated_moment(&m, &x, &u, a * 0.5, 20.0);
            prop_assert!(outer >= inner);
        }
    }
}
