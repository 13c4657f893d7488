//! Dense finite-difference solver for 𝓘u = −f on (a,b), u = g outside, in
//! one dimension.
//!
//! Row i discretizes the generator at node x_i as
//!  - core |z| < h: ½u''(x_i)·∫_{−h}^{h} k|z|^{1−α}dz with u'' the second
//!    difference, corrected by the interpolation error of quadratics so the
//!    row is exact on them;
//!  - interior cells: u(x_i+z) linearly interpolated between nodes (the
//!    endpoints a, b carry g(a), g(b));
//!  - exterior: ∫ g(x_i+z) k|z|^{−1−α} by a fixed log-spaced Gauss rule up to
//!    |z| = truncation·(b−a), then a power-law closure;
//!  - diagonal: minus the sum of every other weight, so constants are exact;
//!  - drift b − ∫_{h≤|z|≤1} zπ by upwind or central differences.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Exterior1D, GridFunction1D};
use crate::kernel::{KernelModel, WeaklyHoelderKernel};
use crate::point::Point;
use crate::quadrature::{adaptive, AdaptiveOptions, GaussRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftScheme {
    Upwind,
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdConfig {
    pub n: usize,
    pub drift: DriftScheme,
    /// Exterior data is integrated out to truncation·(b−a).
    pub truncation: f64,
    pub residual_tolerance: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            n: 512,
            drift: DriftScheme::Upwind,
            truncation: 1e4,
            residual_tolerance: 1e-8,
        }
    }
}

impl FdConfig {
    pub fn with_n(n: usize) -> Self {
        FdConfig {
            n,
            ..FdConfig::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.n < 16 {
            return Err(invalid(format!("grid needs n ≥ 16 interior nodes, got {}", self.n)));
        }
        if !(self.truncation > 1.0) {
            return Err(invalid("exterior truncation factor must exceed 1"));
        }
        if !(self.residual_tolerance > 0.0) {
            return Err(invalid("residual tolerance must be positive"));
        }
        Ok(())
    }
}

/// Panels of the exterior rule, uniform in ln|z|.
const EXTERIOR_PANELS: usize = 96;

/// The assembled discrete operator: (𝓘u)(x_i) ≈ Σ_j M_ij u_j + e_i.
#[derive(Debug, Clone)]
pub struct FdSystem {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub matrix: DMatrix<f64>,
    /// Contribution of the exterior data g to each row.
    pub exterior: DVector<f64>,
}

impl FdSystem {
    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.n + 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.a + (i + 1) as f64 * self.h()
    }

    /// Discrete 𝓘 applied to nodal values (with the assembled exterior data).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let v = &self.matrix * DVector::from_column_slice(u) + &self.exterior;
        v.iter().copied().collect()
    }
}

/// Per-row weights over the extended index j = −1..=n (stored at j+1) and
/// the exterior contribution.
fn assemble_row(model: &KernelModel, a: f64, b: f64, n: usize, i: usize, g: &Exterior1D, cfg: &FdConfig, rule: &GaussRule) -> (Vec<f64>, f64) {
    let h = (b - a) / (n + 1) as f64;
    let x = a + (i + 1) as f64 * h;
    let xp = Point::scalar(x);
    let alpha = model.alpha;
    let scale = model.scale;
    let k = |z: f64| model.k(&xp, &Point::scalar(z));
    let mut w = vec![0.0; n + 2];
    let idx = |j: isize| (j + 1) as usize;
    let ii = i as isize;

    // interior cells: (near weight, far weight, quadratic interpolation error)
    let mut q_total = 0.0;
    let mut cell = |side: f64, m: usize, w: &mut Vec<f64>| {
        let lo = m as f64 * h;
        let (mut w0, mut w1, mut q) = (0.0, 0.0, 0.0);
        for (r, wr) in rule.mapped(lo, lo + h) {
            let dens = k(side * r) * r.powf(-1.0 - alpha) * wr;
            let th = (r - lo) / h;
            w0 += (1.0 - th) * dens;
            w1 += th * dens;
            q += (r - lo) * (lo + h - r) * dens;
        }
        let (j0, j1) = if side > 0.0 {
            (ii + m as isize, ii + m as isize + 1)
        } else {
            (ii - m as isize, ii - m as isize - 1)
        };
        w[idx(j0)] += scale * w0;
        w[idx(j1)] += scale * w1;
        q_total += q;
    };
    for m in 1..n - i {
        cell(1.0, m, &mut w);
    }
    for m in 1..=i {
        cell(-1.0, m, &mut w);
    }

    // core: ∫_0^h k z^{1−α} dz = h^{2−α}/(2−α) ∫_0^1 k(h v^{1/(2−α)}) dv per side
    let p = 2.0 - alpha;
    let mut core = 0.0;
    for (v, wv) in rule.mapped(0.0, 1.0) {
        let r = h * v.powf(1.0 / p);
        core += wv * (k(r) + k(-r));
    }
    core *= h.powf(p) / p;
    let c_core = scale * (core - q_total) / (2.0 * h * h);
    w[idx(ii + 1)] += c_core;
    w[idx(ii - 1)] += c_core;

    // exterior: ∫_{d0}^{L} g(x ± r) k r^{−1−α} dr in t = ln r, plus closure
    let big = cfg.truncation * (b - a);
    let mut ext_mass = 0.0;
    let mut ext_val = 0.0;
    for side in [1.0, -1.0] {
        let d0 = if side > 0.0 { b - x } else { x - a };
        let (t0, t1) = (d0.ln(), big.ln());
        let dt = (t1 - t0) / EXTERIOR_PANELS as f64;
        for p_i in 0..EXTERIOR_PANELS {
            let lo = t0 + p_i as f64 * dt;
            for (t, wt) in rule.mapped(lo, lo + dt) {
                let r = t.exp();
                let dens = scale * k(side * r) * r.powf(-alpha) * wt;
                ext_mass += dens;
                ext_val += dens * g(x + side * r);
            }
        }
        let tail = scale * k(side * big) * big.powf(-alpha) / alpha;
        ext_mass += tail;
        ext_val += tail * g(x + side * big);
    }

    // drift with the compensator beyond the core
    let mut drift = if model.drift_is_zero { 0.0 } else { model.b(&xp)[0] };
    if !model.symmetric && h < 1.0 {
        let opts = AdaptiveOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_panels: 400,
        };
        for side in [1.0, -1.0] {
            let mut br: Vec<f64> = model
                .kernel_breaks(&xp, &Point::scalar(side))
                .into_iter()
                .filter(|r| *r > h && *r < 1.0)
                .map(f64::ln)
                .collect();
            br.push(h.ln());
            br.push(0.0);
            br.sort_by(f64::total_cmp);
            br.dedup();
            let r = adaptive(|t| k(side * t.exp()) * (p * t).exp(), &br, opts);
            drift -= side * scale * r.value;
        }
    }
    if drift != 0.0 {
        match cfg.drift {
            DriftScheme::Upwind => {
                let c = drift / h;
                if drift > 0.0 {
                    w[idx(ii + 1)] += c;
                } else {
                    w[idx(ii - 1)] -= c;
                }
            }
            DriftScheme::Central => {
                let c = drift / (2.0 * h);
                w[idx(ii + 1)] += c;
                w[idx(ii - 1)] -= c;
            }
        }
    }

    // constants are annihilated: the diagonal absorbs every other weight
    let off: f64 = w.iter().enumerate().filter(|(j, _)| *j != idx(ii)).map(|(_, v)| v).sum();
    w[idx(ii)] = -(off + ext_mass);
    let ext = w[0] * g(a) + w[n + 1] * g(b) + ext_val;
    (w, ext)
}

/// Assembles the discrete operator for a one-dimensional model.
pub fn assemble(model: &KernelModel, a: f64, b: f64, g: &Exterior1D, cfg: &FdConfig) -> Result<FdSystem> {
    cfg.check()?;
    if model.dim != 1 {
        return Err(invalid("the grid solver is one-dimensional"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(invalid("interval needs finite a < b"));
    }
    let n = cfg.n;
    let rule = GaussRule::new(8);
    let mut matrix = DMatrix::zeros(n, n);
    let mut exterior = DVector::zeros(n);
    for i in 0..n {
        let (w, e) = assemble_row(model, a, b, n, i, g, cfg, &rule);
        for j in 0..n {
            matrix[(i, j)] = w[j + 1];
        }
        exterior[i] = e;
    }
    if !matrix.iter().all(|v| v.is_finite()) || !exterior.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(FdSystem {
        a,
        b,
        n,
        matrix,
        exterior,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FdSolution {
    pub u: GridFunction1D,
    /// max |M u − rhs| / (‖M‖∞‖u‖∞ + ‖rhs‖∞).
    pub residual: f64,
    pub alpha: f64,
}

impl FdSolution {
    pub fn at(&self, x: f64) -> f64 {
        self.u.eval(x)
    }

    pub fn residual_json(&self) -> String {
        serde_json::json!({
            "n": self.u.n(),
            "h": self.u.h(),
            "relative_residual": self.residual,
        })
        .to_string()
    }
}

/// Solves M u = −f − e for the interior nodal values.
pub fn solve_system(sys: &FdSystem, f: &dyn Fn(f64) -> f64, g: Exterior1D, tol: f64) -> Result<FdSolution> {
    let n = sys.n;
    let rhs = DVector::from_iterator(n, (0..n).map(|i| -f(sys.node(i)) - sys.exterior[i]));
    if !rhs.iter().all(|v| v.is_finite()) {
        return Err(invalid("source term is not finite on the grid"));
    }
    let lu = sys.matrix.clone().lu();
    let u = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    if !u.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let r = &sys.matrix * &u - &rhs;
    let norm_m = sys.matrix.row_iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let denom = norm_m * u.amax() + rhs.amax();
    let residual = if denom > 0.0 { r.amax() / denom } else { r.amax() };
    if residual > tol {
        return Err(Error::ResidualTooLarge { residual });
    }
    let grid = GridFunction1D::new(sys.a, sys.b, u.iter().copied().collect())?.with_exterior(g);
    Ok(FdSolution {
        u: grid,
        residual,
        alpha: 0.0,
    })
}

/// Assembles and solves 𝓘u = −f in (a,b), u = g outside.
pub fn assemble_and_solve(
    model: &KernelModel,
    a: f64,
    b: f64,
    f: &dyn Fn(f64) -> f64,
    g: Option<Exterior1D>,
    cfg: &FdConfig,
) -> Result<FdSolution> {
    let g = g.unwrap_or_else(|| Arc::new(|_| 0.0));
    let sys = assemble(model, a, b, &g, cfg)?;
    let mut sol = solve_system(&sys, f, g, cfg.residual_tolerance)?;
    sol.alpha = model.alpha;
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximumReport {
    /// ‖u‖∞ / sup_D |f| (∞ when f vanishes on the grid and u does not).
    pub ratio: f64,
    pub min_value: f64,
    /// f ≥ 0 at the nodes and g ≥ 0 at the endpoints and on a probe sample.
    pub nonnegative_data: bool,
}

/// Bound ratio ‖u‖∞/sup|f| and the discrete comparison u ≥ 0 for
/// nonnegative data; a negative value beyond 10⁻¹²·max(1,‖u‖∞) is a
/// ComparisonViolated error.
pub fn discrete_maximum_check(sol: &FdSolution, f: &dyn Fn(f64) -> f64) -> Result<MaximumReport> {
    let u = &sol.u;
    let nodes = u.nodes();
    let sup_f = nodes.iter().map(|x| f(*x).abs()).fold(0.0, f64::max);
    let sup_u = u.sup_norm();
    let min_value = u.values.iter().copied().fold(f64::INFINITY, f64::min);
    let len = u.b - u.a;
    let probes = (0..64).flat_map(|k| {
        let r = len * 1e-3 * 1.2f64.powi(k);
        [u.a - r, u.b + r]
    });
    let nonnegative_data = nodes.iter().all(|x| f(*x) >= 0.0)
        && (u.exterior)(u.a) >= 0.0
        && (u.exterior)(u.b) >= 0.0
        && probes.into_iter().all(|x| (u.exterior)(x) >= 0.0);
    if nonnegative_data && min_value < -1e-12 * sup_u.max(1.0) {
        return Err(Error::ComparisonViolated { min_value });
    }
    let ratio = if sup_f > 0.0 {
        sup_u / sup_f
    } else if sup_u == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(MaximumReport {
        ratio,
        min_value,
        nonnegative_data,
    })
}

/// Ĉ = max over sources of ‖u‖∞/sup|f| with g ≡ 0.
pub fn maximum_constant(model: &KernelModel, a: f64, b: f64, sources: &[&dyn Fn(f64) -> f64], cfg: &FdConfig) -> Result<f64> {
    let g: Exterior1D = Arc::new(|_| 0.0);
    let sys = assemble(model, a, b, &g, cfg)?;
    let mut c: f64 = 0.0;
    for f in sources {
        let sol = solve_system(&sys, *f, g.clone(), cfg.residual_tolerance)?;
        c = c.max(discrete_maximum_check(&sol, *f)?.ratio);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRow {
    pub amplitude: f64,
    /// sup over nodes of |u_amp − u_0|.
    pub delta: f64,
    pub delta_over_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTable {
    pub rows: Vec<PerturbationRow>,
    /// max of delta/amplitude over nonzero amplitudes.
    pub lipschitz: f64,
}

/// Solution deltas for k = 1 + amp·sin(ω x)·min(|z|,1)^θ against k ≡ 1 on
/// (a,b) with g ≡ 0.
#[allow(clippy::too_many_arguments)]
pub fn weakly_hoelder_perturbation_study(
    alpha: f64,
    amplitudes: &[f64],
    omega: f64,
    theta: f64,
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    cfg: &FdConfig,
) -> Result<PerturbationTable> {
    let family = |amp: f64| {
        WeaklyHoelderKernel {
            amp,
            omega,
            theta,
            skew: 0.0,
        }
        .model(1, alpha)
    };
    let base = assemble_and_solve(&family(0.0)?, a, b, f, None, cfg)?;
    let mut rows = Vec::new();
    let mut lip: f64 = 0.0;
    for &amp in amplitudes {
        let sol = assemble_and_solve(&family(amp)?, a, b, f, None, cfg)?;
        let delta = sol
            .u
            .values
            .iter()
            .zip(&base.u.values)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        let ratio = if amp != 0.0 { delta / amp.abs() } else { 0.0 };
        lip = lip.max(ratio);
        rows.push(PerturbationRow {
            amplitude: amp,
            delta,
            delta_over_amplitude: ratio,
        });
    }
    Ok(PerturbationTable { rows, lipschitz: lip })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    fn stable(alpha: f64) -> KernelModel {
        KernelModel::stable(1, alpha, 1.0).unwrap()
    }

    /// E_0 τ(−1,1) for the standard symmetric α-stable process.
    fn exit_time_center(alpha: f64) -> f64 {
        gamma(0.5) / (2f64.powf(alpha) * gamma(1.0 + alpha / 2.0) * gamma(0.5 + alpha / 2.0))
    }

    #[test]
    fn zero_data_gives_zero() {
        let sol = assemble_and_solve(&stable(1.5), -1.0, 1.0, &|_| 0.0, None, &FdConfig::with_n(32)).unwrap();
        assert!(sol.u.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constants_are_annihilated() {
        for model in [
            stable(1.3),
            stable(1.8).with_drift(Arc::new(|x: &Point| Point::scalar(0.5 - x[0]))),
            WeaklyHoelderKernel {
                amp: 0.2,
                omega: 3.0,
                theta: 0.5,
                skew: 0.3,
            }
            .model(1, 1.5)
            .unwrap(),
        ] {
            for scheme in [DriftScheme::Upwind, DriftScheme::Central] {
                let cfg = FdConfig {
                    n: 40,
                    drift: scheme,
                    ..FdConfig::default()
                };
                let g: Exterior1D = Arc::new(|_| 2.5);
                let sys = assemble(&model, -1.0, 1.0, &g, &cfg).unwrap();
                let out = sys.apply(&vec![2.5; 40]);
                let scale = sys.matrix.amax();
                assert!(out.iter().all(|v| v.abs() < 1e-12 * scale), "{}", model.name);
            }
        }
    }

    #[test]
    fn constant_exterior_data_round_trips() {
        let g: Exterior1D = Arc::new(|_| 1.7);
        let sol = assemble_and_solve(&stable(1.4), -1.0, 1.0, &|_| 0.0, Some(g), &FdConfig::with_n(64)).unwrap();
        assert!(sol.u.values.iter().all(|v| (v - 1.7).abs() < 1e-12));
    }

    #[test]
    fn quadratic_is_reproduced_away_from_the_boundary() {
        // 𝓘 of u = x² on all of ℝ is infinite, so compare against the
        // generator quadrature on a compactly supported smooth function
        use crate::operator::{apply_generator, QuadratureScheme, SmoothProbe};
        let alpha = 1.5;
        let model = stable(alpha);
        let (a, b) = (-3.0, 3.0);
        let f = SmoothProbe::gaussian();
        let g: Exterior1D = Arc::new(move |x| (-x * x).exp());
        let cfg = FdConfig::with_n(600);
        let sys = assemble(&model, a, b, &g, &cfg).unwrap();
        let vals: Vec<f64> = (0..cfg.n).map(|i| (-sys.node(i).powi(2)).exp()).collect();
        let out = sys.apply(&vals);
        let i0 = cfg.n / 2;
        let x = sys.node(i0);
        let q = apply_generator(&model, &f, &Point::scalar(x), &QuadratureScheme::default()).unwrap();
        assert!((out[i0] - q.value).abs() < 2e-3 * q.value.abs(), "{} vs {}", out[i0], q.value);
    }

    #[test]
    fn symmetric_data_gives_even_solution() {
        let sol = assemble_and_solve(&stable(1.5), -1.0, 1.0, &|x| 1.0 + x * x, None, &FdConfig::with_n(101)).unwrap();
        let v = &sol.u.values;
        let n = v.len();
        for i in 0..n {
            assert!((v[i] - v[n - 1 - i]).abs() < 1e-12 * sol.u.sup_norm());
        }
    }

    #[test]
    fn exit_time_matches_closed_form() {
        for alpha in [1.2, 1.5, 1.8] {
            let sol = assemble_and_solve(&stable(alpha), -1.0, 1.0, &|_| 1.0, None, &FdConfig::with_n(255)).unwrap();
            let exact = exit_time_center(alpha);
            // closed form (1 − x²)^{α/2}·E_0 τ
            let e0 = (sol.at(0.0) - exact).abs();
            let e5 = (sol.at(0.5) - exact * 0.75f64.powf(alpha / 2.0)).abs();
            assert!(e0 < 5e-3 && e5 < 5e-3, "α={alpha}: {e0} {e5}");
        }
    }

    #[test]
    fn self_convergence_has_positive_order() {
        let model = stable(1.5);
        let at0 = |n: usize| {
            assemble_and_solve(&model, -1.0, 1.0, &|_| 1.0, None, &FdConfig::with_n(n))
                .unwrap()
                .at(0.0)
        };
        let (u1, u2, u3) = (at0(63), at0(127), at0(255));
        let order = ((u1 - u2) / (u2 - u3)).abs().log2();
        assert!((0.5..=2.5).contains(&order), "order {order}");
    }

    #[test]
    fn comparison_and_linearity() {
        let model = stable(1.5).with_drift(Arc::new(|x: &Point| Point::scalar(0.8 * x[0].sin())));
        let cfg = FdConfig::with_n(80);
        let f = |x: f64| (3.0 * x).cos().max(0.0);
        let sol = assemble_and_solve(&model, -1.0, 1.0, &f, None, &cfg).unwrap();
        let rep = discrete_maximum_check(&sol, &f).unwrap();
        assert!(rep.nonnegative_data && rep.min_value >= -1e-12);
        let sol2 = assemble_and_solve(&model, -1.0, 1.0, &|x| 2.0 * f(x), None, &cfg).unwrap();
        for (p, q) in sol2.u.values.iter().zip(&sol.u.values) {
            assert!((p - 2.0 * q).abs() <= 1e-13 * q.abs().max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn maximum_constant_is_stable_across_alpha_on_the_wide_interval() {
        let cfg = FdConfig::with_n(128);
        let one = |_: f64| 1.0;
        let bump = |x: f64| (1.0 - x * x / 4.0).max(0.0);
        let sources: [&dyn Fn(f64) -> f64; 2] = [&one, &bump];
        let cs: Vec<f64> = [1.2, 1.5, 1.8]
            .iter()
            .map(|a| maximum_constant(&stable(*a), -2.0, 2.0, &sources, &cfg).unwrap())
            .collect();
        let mid = cs[1];
        assert!(cs.iter().all(|c| (c / mid - 1.0).abs() < 0.1), "{cs:?}");
    }

    #[test]
    fn perturbation_deltas_are_monotone_and_bounded() {
        let t = weakly_hoelder_perturbation_study(1.5, &[0.0, 0.05, 0.1, 0.2], 3.0, 0.5, &|_| 1.0, -1.0, 1.0, &FdConfig::with_n(64)).unwrap();
        assert_eq!(t.rows[0].delta, 0.0);
        assert!(t.rows.windows(2).all(|w| w[0].delta <= w[1].delta));
        let ratios: Vec<f64> = t.rows[1..].iter().map(|r| r.delta_over_amplitude).collect();
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
        assert!(hi < 2.0 * lo, "{ratios:?}");
    }

    #[test]
    fn config_validation() {
        assert!(FdConfig::with_n(8).check().is_err());
        let r = assemble_and_solve(&KernelModel::stable(2, 1.5, 1.0).unwrap(), -1.0, 1.0, &|_| 1.0, None, &FdConfig::default());
        assert!(r.is_err());
    }
}
