//! Monte Carlo estimators built on the stochastic representation
//! u(x) = E_x[∫₀^τ f(X_s)ds + g(X_τ)].
//!
//! Every estimator maps path i to stream `stream_start + i`. Runs that share
//! a seed therefore couple pathwise, so monotonicity and linearity in the
//! data hold exactly on the estimates.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::domain::DomainSpec;
use crate::error::{invalid, Error, Result};
use crate::kernel::KernelModel;
use crate::mc::{map_paths, McEstimate};
use crate::path::{EulerConfig, PathEngine, PathObserver};
use crate::point::Point;
use crate::rng::{derive_seed, StreamRange};
use crate::stats::{mean_stderr, pairwise_sum, weighted_linear_fit};

pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

pub fn constant_fn(c: f64) -> ScalarFn {
    Arc::new(move |_| c)
}

/// Paths in a horizon pilot.
pub const PILOT_PATHS: u64 = 1000;
const PILOT_TAG: u64 = 0x5049_4c4f_5400;

/// Fraction of truncated paths above which an estimate is rejected.
pub const TRUNCATION_LIMIT: f64 = 0.10;

#[derive(Clone)]
pub struct DirichletProblem {
    pub model: KernelModel,
    pub domain: DomainSpec,
    pub f: ScalarFn,
    pub g: ScalarFn,
}

impl std::fmt::Debug for DirichletProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletProblem")
            .field("model", &self.model)
            .field("domain", &self.domain)
            .finish()
    }
}

impl DirichletProblem {
    /// f ≡ 1, g ≡ 0: the solution is the mean exit time.
    pub fn exit_time(model: KernelModel, domain: DomainSpec) -> Self {
        DirichletProblem {
            model,
            domain,
            f: constant_fn(1.0),
            g: constant_fn(0.0),
        }
    }

    pub fn new(model: KernelModel, domain: DomainSpec, f: ScalarFn, g: ScalarFn) -> Self {
        DirichletProblem { model, domain, f, g }
    }

    pub fn check(&self) -> Result<()> {
        if self.domain.dim() != self.model.dim {
            return Err(invalid("domain and model dimensions differ"));
        }
        self.domain.check()
    }
}

/// Monte Carlo budget and time stepping shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub euler: EulerConfig,
    pub n_paths: u64,
    pub seed: u64,
    pub stream_start: u64,
    /// When set, the horizon becomes factor × a pilot mean exit time, with
    /// `euler.t_max` as the pilot's own cap.
    pub adaptive_horizon: Option<f64>,
}

impl McConfig {
    pub fn new(euler: EulerConfig, n_paths: u64, seed: u64) -> Self {
        McConfig {
            euler,
            n_paths,
            seed,
            stream_start: 0,
            adaptive_horizon: Some(50.0),
        }
    }

    pub fn fixed_horizon(mut self) -> Self {
        self.adaptive_horizon = None;
        self
    }

    pub fn with_paths(mut self, n: u64) -> Self {
        self.n_paths = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn streams(&self) -> StreamRange {
        StreamRange::new(self.seed, self.stream_start, self.n_paths)
    }

    pub fn check(&self) -> Result<()> {
        self.euler.check()?;
        if self.n_paths < 2 {
            return Err(invalid("Monte Carlo needs at least two paths"));
        }
        if let Some(f) = self.adaptive_horizon {
            if !(f > 1.0) {
                return Err(invalid("adaptive horizon factor must exceed 1"));
            }
        }
        Ok(())
    }
}

/// What a path contributes.
#[derive(Clone, Copy)]
enum Functional<'a> {
    ExitTime,
    /// ∫₀^τ f ds + g(X_τ) by the left-endpoint rule.
    Integral(&'a ScalarFn, &'a ScalarFn),
    /// g(X_τ) only.
    ExitValue(&'a ScalarFn),
}

struct Running<'a> {
    f: Option<&'a ScalarFn>,
    acc: f64,
}

impl PathObserver for Running<'_> {
    fn on_step(&mut self, _t: f64, x: &Point, held: f64) {
        if let Some(f) = self.f {
            self.acc += f(x) * held;
        }
    }
}

/// Per-path values and the truncated count; paths that reach the horizon
/// contribute their partial functional (g is not applied).
fn run_functional(
    model: &KernelModel,
    domain: &DomainSpec,
    x: &Point,
    euler: &EulerConfig,
    streams: &StreamRange,
    func: Functional<'_>,
) -> Result<(Vec<f64>, usize)> {
    let engine = PathEngine::new(model, *euler)?;
    let res: Vec<Result<(f64, bool)>> = map_paths(streams, |_, rng| {
        let f = match func {
            Functional::Integral(f, _) => Some(f),
            _ => None,
        };
        let mut obs = Running { f, acc: 0.0 };
        let out = engine.run(x, Some(domain), rng, &mut obs)?;
        let v = match (func, out.exit) {
            (Functional::ExitTime, _) => out.time,
            (Functional::Integral(_, g), Some(e)) => obs.acc + g(&e.exit_state),
            (Functional::Integral(..), None) => obs.acc,
            (Functional::ExitValue(g), Some(e)) => g(&e.exit_state),
            (Functional::ExitValue(_), None) => 0.0,
        };
        Ok((v, out.exit.is_none()))
    });
    let mut xs = Vec::with_capacity(res.len());
    let mut truncated = 0;
    for r in res {
        let (v, t) = r?;
        xs.push(v);
        truncated += t as usize;
    }
    Ok((xs, truncated))
}

/// Horizon from a pilot of `PILOT_PATHS` exit times on a seed derived from
/// the run's seed, or the configured t_max.
pub fn resolve_horizon(model: &KernelModel, domain: &DomainSpec, x: &Point, mc: &McConfig) -> Result<f64> {
    let Some(factor) = mc.adaptive_horizon else {
        return Ok(mc.euler.t_max);
    };
    let pilot = StreamRange::new(derive_seed(mc.seed, PILOT_TAG), 0, PILOT_PATHS);
    let (xs, truncated) = run_functional(model, domain, x, &mc.euler, &pilot, Functional::ExitTime)?;
    if truncated as f64 > TRUNCATION_LIMIT * xs.len() as f64 {
        return Ok(mc.euler.t_max);
    }
    let mean = pairwise_sum(&xs) / xs.len() as f64;
    Ok((factor * mean).max(10.0 * mc.euler.dt))
}

fn estimate(
    model: &KernelModel,
    domain: &DomainSpec,
    x: &Point,
    mc: &McConfig,
    func: Functional<'_>,
) -> Result<(McEstimate, Vec<f64>)> {
    mc.check()?;
    let t_max = resolve_horizon(model, domain, x, mc)?;
    let euler = mc.euler.with_t_max(t_max);
    let streams = mc.streams();
    let (xs, truncated) = run_functional(model, domain, x, &euler, &streams, func)?;
    Ok((McEstimate::from_samples(&xs, &streams, truncated), xs))
}

fn reject_truncation(e: &McEstimate) -> Result<()> {
    if e.truncated_fraction > TRUNCATION_LIMIT {
        return Err(Error::TruncationDominant {
            truncated: (e.truncated_fraction * e.n as f64).round() as usize,
            total: e.n,
        });
    }
    Ok(())
}

/// E_x[∫₀^τ f + g(X_τ)]; returns g(x) exactly when x lies outside D.
pub fn dirichlet_solve(p: &DirichletProblem, x: &Point, mc: &McConfig) -> Result<McEstimate> {
    p.check()?;
    if !p.domain.contains(x) {
        return Ok(McEstimate::exact((p.g)(x), &mc.streams()));
    }
    let (e, _) = estimate(&p.model, &p.domain, x, mc, Functional::Integral(&p.f, &p.g))?;
    reject_truncation(&e)?;
    Ok(e)
}

/// E_x[τ(D)] (f ≡ 1, g ≡ 0) with the truncation check.
pub fn mean_exit_time(model: &KernelModel, domain: &DomainSpec, x: &Point, mc: &McConfig) -> Result<McEstimate> {
    if !domain.contains(x) {
        return Ok(McEstimate::exact(0.0, &mc.streams()));
    }
    let (e, _) = estimate(model, domain, x, mc, Functional::ExitTime)?;
    reject_truncation(&e)?;
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionRow {
    pub m: usize,
    /// E[τ^{m+1}].
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// (m+1)·sup E[τ]·E[τ^m].
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub moments: Vec<McEstimate>,
    pub recursion: Vec<RecursionRow>,
}

/// E_x[τ^m] for m = 1..=m_max from one set of paths.
pub fn exit_time_moments(p: &DirichletProblem, x: &Point, m_max: usize, mc: &McConfig) -> Result<MomentReport> {
    p.check()?;
    if !(1..=4).contains(&m_max) {
        return Err(invalid("moment order must lie in 1..=4"));
    }
    if !p.domain.contains(x) {
        return Err(invalid("moments need a start inside the domain"));
    }
    let (first, taus) = estimate(&p.model, &p.domain, x, mc, Functional::ExitTime)?;
    reject_truncation(&first)?;
    let streams = mc.streams();
    let truncated = (first.truncated_fraction * first.n as f64).round() as usize;
    let moments: Vec<McEstimate> = (1..=m_max)
        .map(|m| {
            let xs: Vec<f64> = taus.iter().map(|t| t.powi(m as i32)).collect();
            McEstimate::from_samples(&xs, &streams, truncated)
        })
        .collect();
    let recursion = moment_recursion_check(&moments, moments[0].mean);
    Ok(MomentReport { moments, recursion })
}

/// E[τ^{m+1}] ≤ (m+1)·sup_mean·E[τ^m] for consecutive estimated moments,
/// judged within 3 standard errors.
pub fn moment_recursion_check(moments: &[McEstimate], sup_mean: f64) -> Vec<RecursionRow> {
    moments
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let m = i + 1;
            let rhs = (m + 1) as f64 * sup_mean * w[0].mean;
            RecursionRow {
                m,
                lhs: w[1].mean,
                lhs_stderr: w[1].stderr,
                rhs,
                holds: w[1].mean <= rhs + 3.0 * w[1].stderr,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub distance: f64,
    pub point: Point,
    pub exit_time: McEstimate,
}

/// E_x[τ(D)] at x = (boundary point along `direction` from the domain
/// centre) − distance·direction.
pub fn boundary_decay(p: &DirichletProblem, direction: &Point, distances: &[f64], mc: &McConfig) -> Result<Vec<DecayRow>> {
    p.check()?;
    let u = direction.normalized().ok_or_else(|| invalid("direction must be nonzero"))?;
    let c = p.domain.center();
    let hit = p
        .domain
        .ray_segments(&c, &u)
        .into_iter()
        .find(|(a, _)| *a == 0.0)
        .map(|(_, b)| b)
        .filter(|b| b.is_finite())
        .ok_or_else(|| invalid("the ray from the domain centre must leave the domain"))?;
    let boundary = c + u * hit;
    let mut rows = Vec::new();
    for &d in distances {
        let x = boundary - u * d;
        if !p.domain.contains(&x) {
            return Err(invalid(format!("probe at distance {d} lies outside the domain")));
        }
        let (e, _) = estimate(&p.model, &p.domain, &x, mc, Functional::ExitTime)?;
        rows.push(DecayRow {
            distance: d,
            point: x,
            exit_time: e,
        });
    }
    Ok(rows)
}

/// E_x[h(X_τ(G))] at each grid point, with per-path samples kept for the
/// Harnack delta method.
fn harmonic_samples(model: &KernelModel, domain: &DomainSpec, h: &ScalarFn, grid: &[Point], mc: &McConfig) -> Result<Vec<(McEstimate, Vec<f64>)>> {
    mc.check()?;
    let mut out = Vec::new();
    for x in grid {
        if !domain.contains(x) {
            return Err(invalid("harmonic grid points must lie in the domain"));
        }
        let (e, xs) = estimate(model, domain, x, mc, Functional::ExitValue(h))?;
        reject_truncation(&e)?;
        out.push((e, xs));
    }
    Ok(out)
}

pub fn harmonic_estimate(model: &KernelModel, domain: &DomainSpec, h: &ScalarFn, grid: &[Point], mc: &McConfig) -> Result<Vec<McEstimate>> {
    Ok(harmonic_samples(model, domain, h, grid, mc)?.into_iter().map(|(e, _)| e).collect())
}

/// Evenly spaced points in a ball or box: a line in d = 1, a square lattice
/// clipped to the set in d = 2, 3.
pub fn grid_in(set: &DomainSpec, per_axis: usize) -> Vec<Point> {
    let d = set.dim();
    let c = set.center();
    let r = set.bounding_radius().unwrap_or(1.0);
    let k = per_axis.max(2);
    let coord = |i: usize| -r + 2.0 * r * i as f64 / (k - 1) as f64;
    let mut out = Vec::new();
    let total = k.pow(d as u32);
    for idx in 0..total {
        let mut p = c;
        let mut rem = idx;
        for j in 0..d {
            p[j] += coord(rem % k);
            rem /= k;
        }
        if closed_contains(set, &p) {
            out.push(p);
        }
    }
    out
}

fn closed_contains(set: &DomainSpec, x: &Point) -> bool {
    set.contains(x) || set.boundary_distance(x) <= 1e-12 * set.length_scale()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnackDatum {
    /// max ĥ / min ĥ over the grid.
    pub ratio: f64,
    /// Delta-method standard error of log ratio.
    pub log_stderr: f64,
    /// ratio·exp(z·log_stderr) with the family's union-bound quantile z.
    pub upper: f64,
    pub argmax: Point,
    pub argmin: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnackReport {
    pub data: Vec<HarnackDatum>,
    pub family_max: f64,
    pub family_upper: f64,
    /// Two-sided normal quantile with level 0.05 split across the family.
    pub z: f64,
}

/// Empirical Harnack constants sup_K ĥ / inf_K ĥ for each datum, with
/// ĥ(x) = E_x[h(X_τ(D))] on a grid in K.
pub fn harnack_probe(model: &KernelModel, d: &DomainSpec, k: &DomainSpec, data: &[ScalarFn], per_axis: usize, mc: &McConfig) -> Result<HarnackReport> {
    let grid = grid_in(k, per_axis);
    if grid.len() < 2 {
        return Err(invalid("Harnack grid needs at least two points"));
    }
    if !grid.iter().all(|p| d.contains(p) && d.boundary_distance(p) > 0.0) {
        return Err(invalid("K must lie inside D with a positive gap"));
    }
    let z = Normal::new(0.0, 1.0)
        .unwrap()
        .inverse_cdf(1.0 - 0.025 / data.len().max(1) as f64);
    let z95 = 1.959_963_984_540_054;
    let mut out = Vec::new();
    for h in data {
        let est = harmonic_samples(model, d, h, &grid, mc)?;
        for ((e, _), p) in est.iter().zip(&grid) {
            if e.mean - z95 * e.stderr <= 0.0 {
                return Err(Error::DegenerateHarmonic {
                    point: p.to_vec(),
                    mean: e.mean,
                    stderr: e.stderr,
                });
            }
        }
        let (imax, imin) = est.iter().enumerate().fold((0, 0), |(a, b), (i, (e, _))| {
            (
                if e.mean > est[a].0.mean { i } else { a },
                if e.mean < est[b].0.mean { i } else { b },
            )
        });
        let (hx, sx) = (&est[imax].0, &est[imax].1);
        let (hy, sy) = (&est[imin].0, &est[imin].1);
        // log(h̄x/h̄y) ≈ mean of (hx_i/h̄x − hy_i/h̄y) at first order
        let lin: Vec<f64> = sx.iter().zip(sy).map(|(a, b)| a / hx.mean - b / hy.mean).collect();
        let (_, se) = mean_stderr(&lin);
        let ratio = hx.mean / hy.mean;
        out.push(HarnackDatum {
            ratio,
            log_stderr: se,
            upper: ratio * (z * se).exp(),
            argmax: grid[imax],
            argmin: grid[imin],
        });
    }
    let family_max = out.iter().map(|d| d.ratio).fold(0.0, f64::max);
    let family_upper = out.iter().map(|d| d.upper).fold(0.0, f64::max);
    Ok(HarnackReport {
        data: out,
        family_max,
        family_upper,
        z,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentProbe {
    pub p: f64,
    /// E[min(η,T)^p] on the first quarter, half and all of the paths.
    pub quarter: f64,
    pub half: f64,
    pub full: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub t_grid: Vec<f64>,
    pub survival: Vec<McEstimate>,
    /// p̂ in P(η > t) ≈ C t^{−p̂}.
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub r_squared: f64,
    /// Censored moments at p̂/2 and 2p̂.
    pub moments: Vec<MomentProbe>,
}

/// Survival P_x0(η(G) > t) of the pure stable process (k ≡ 1, b ≡ 0) in a
/// cone G, and a weighted log-log power-law fit.
pub fn cone_exit_exponent(alpha: f64, cone: &DomainSpec, x0: &Point, t_grid: &[f64], mc: &McConfig) -> Result<ConeReport> {
    let DomainSpec::Cone { vertex, .. } = cone else {
        return Err(invalid("cone exit needs a cone domain"));
    };
    let d = cone.dim();
    if d > 2 {
        return Err(invalid("cone exit is available for d ∈ {1, 2}"));
    }
    if (*x0 - *vertex).norm() < 1e-6 || !cone.contains(x0) {
        return Err(invalid("start must lie in the cone, away from the vertex"));
    }
    if t_grid.len() < 3 || !t_grid.windows(2).all(|w| w[0] < w[1]) || t_grid[0] <= 0.0 {
        return Err(invalid("time grid must be positive, increasing, with ≥ 3 points"));
    }
    mc.check()?;
    let model = KernelModel::stable(d, alpha, 1.0)?;
    let t_max = *t_grid.last().unwrap();
    let euler = mc.euler.with_t_max(t_max);
    let streams = mc.streams();
    let (taus, _) = run_functional(&model, cone, x0, &euler, &streams, Functional::ExitTime)?;
    let mut survival = Vec::new();
    let (mut lx, mut ly, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for &t in t_grid {
        // a path truncated at t_max has τ = t_max and survives every t < t_max
        let xs: Vec<f64> = taus.iter().map(|tau| if *tau > t || (*tau >= t_max && t >= t_max) { 1.0 } else { 0.0 }).collect();
        let e = McEstimate::from_samples(&xs, &streams, 0);
        if e.mean > 0.0 && e.stderr > 0.0 {
            lx.push(t.ln());
            ly.push(e.mean.ln());
            w.push((e.mean / e.stderr).powi(2));
        }
        survival.push(e);
    }
    if lx.len() < 3 {
        return Err(Error::FitRejected { r_squared: 0.0 });
    }
    let fit = weighted_linear_fit(&lx, &ly, &w);
    if !(fit.r_squared >= 0.95) {
        return Err(Error::FitRejected { r_squared: fit.r_squared });
    }
    let p_hat = -fit.slope;
    let n = taus.len();
    let moment = |p: f64, m: usize| pairwise_sum(&taus[..m].iter().map(|t| t.powf(p)).collect::<Vec<_>>()) / m as f64;
    let moments = [0.5 * p_hat, 2.0 * p_hat]
        .iter()
        .map(|&p| MomentProbe {
            p,
            quarter: moment(p, n / 4),
            half: moment(p, n / 2),
            full: moment(p, n),
        })
        .collect();
    Ok(ConeReport {
        t_grid: t_grid.to_vec(),
        survival,
        exponent: p_hat,
        exponent_stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        moments,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorReport {
    pub outer_radii: Vec<f64>,
    pub estimates: Vec<McEstimate>,
    pub monotone: bool,
    pub last_relative_change: f64,
}

/// u_n(x) = E_x[τ(B_n ∩ B̄₁^c)] for n = 2, 4, … ≤ n_outer at matched seeds.
/// The horizon is the configured t_max for every n, so pathwise
/// τ_n ≤ τ_{2n} and the sequence is monotone exactly. The boolean is false
/// when the last doubling moved the estimate by more than 5%.
pub fn exterior_hitting_table(model: &KernelModel, n_outer: f64, x: &Point, mc: &McConfig) -> Result<(ExteriorReport, bool)> {
    mc.check()?;
    let r = x.norm();
    if !(r > 1.0) {
        return Err(invalid("start must satisfy |x| > 1"));
    }
    let mut radii = Vec::new();
    let mut n = 2.0;
    while n <= n_outer {
        if n > r {
            radii.push(n);
        }
        n *= 2.0;
    }
    if radii.len() < 2 {
        return Err(invalid("need at least two outer radii beyond |x| up to n_outer"));
    }
    let streams = mc.streams();
    let mut estimates = Vec::new();
    for &n in &radii {
        let dom = DomainSpec::Annulus {
            center: Point::zeros(model.dim),
            r_in: 1.0,
            r_out: n,
        };
        let (xs, truncated) = run_functional(model, &dom, x, &mc.euler, &streams, Functional::ExitTime)?;
        estimates.push(McEstimate::from_samples(&xs, &streams, truncated));
    }
    let k = estimates.len();
    let change = (estimates[k - 1].mean - estimates[k - 2].mean).abs() / estimates[k - 2].mean.abs().max(f64::MIN_POSITIVE);
    let report = ExteriorReport {
        monotone: estimates.windows(2).all(|w| w[0].mean <= w[1].mean),
        outer_radii: radii,
        estimates,
        last_relative_change: change,
    };
    Ok((report, change <= 0.05))
}

/// The table of `exterior_hitting_table`, or NoStabilization.
pub fn exterior_hitting_time(model: &KernelModel, n_outer: f64, x: &Point, mc: &McConfig) -> Result<ExteriorReport> {
    let (rep, stable) = exterior_hitting_table(model, n_outer, x, mc)?;
    if !stable {
        return Err(Error::NoStabilization {
            relative_change: rep.last_relative_change,
        });
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    fn stable1(alpha: f64) -> KernelModel {
        KernelModel::stable(1, alpha, 1.0).unwrap()
    }

    fn unit() -> DomainSpec {
        DomainSpec::interval(-1.0, 1.0).unwrap()
    }

    fn mc(n: u64, dt: f64) -> McConfig {
        McConfig::new(EulerConfig::new(dt, 100.0, 1.5), n, 7)
    }

    #[test]
    fn exterior_clause_is_exact() {
        let p = DirichletProblem::new(stable1(1.5), unit(), constant_fn(1.0), Arc::new(|x: &Point| x[0] * 3.0));
        let e = dirichlet_solve(&p, &Point::scalar(2.0), &mc(100, 1e-2)).unwrap();
        assert_eq!(e.mean, 6.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn zero_data_gives_zero_and_unit_exit_data_gives_one() {
        let m = mc(2000, 1e-2);
        let p0 = DirichletProblem::new(stable1(1.5), unit(), constant_fn(0.0), constant_fn(0.0));
        assert_eq!(dirichlet_solve(&p0, &Point::scalar(0.3), &m).unwrap().mean, 0.0);
        let p1 = DirichletProblem::new(stable1(1.5), unit(), constant_fn(0.0), constant_fn(1.0));
        let e = dirichlet_solve(&p1, &Point::scalar(0.3), &m).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.truncated_fraction, 0.0);
    }

    #[test]
    fn linearity_and_monotonicity_at_matched_seeds() {
        let m = mc(2000, 1e-2);
        let f1: ScalarFn = Arc::new(|x: &Point| x[0] * x[0]);
        let f2: ScalarFn = Arc::new(|x: &Point| x[0] * x[0] + 0.1);
        let g: ScalarFn = Arc::new(|x: &Point| x[0].abs().min(3.0));
        let p1 = DirichletProblem::new(stable1(1.5), unit(), f1.clone(), g.clone());
        let p2 = DirichletProblem::new(stable1(1.5), unit(), f2, g.clone());
        let x = Point::scalar(0.2);
        let (a, b) = (dirichlet_solve(&p1, &x, &m).unwrap(), dirichlet_solve(&p2, &x, &m).unwrap());
        assert!(a.mean <= b.mean);
        let f1c = f1.clone();
        let gc = g.clone();
        let p3 = DirichletProblem::new(stable1(1.5), unit(), Arc::new(move |x: &Point| 2.0 * f1c(x)), Arc::new(move |x: &Point| 2.0 * gc(x)));
        assert_eq!(dirichlet_solve(&p3, &x, &m).unwrap().mean, 2.0 * a.mean);
    }

    #[test]
    fn scaling_of_mean_exit_time() {
        let alpha = 1.5;
        let m = McConfig::new(EulerConfig::new(1e-3, 100.0, alpha), 4000, 3);
        let exact = gamma(0.5) / (2f64.powf(alpha) * gamma(1.0 + alpha / 2.0) * gamma(0.5 + alpha / 2.0));
        for r in [0.5, 1.0] {
            let dom = DomainSpec::interval(-r, r).unwrap();
            let mut mm = m;
            mm.euler.dt = 1e-3 * r.powf(alpha);
            let e = mean_exit_time(&stable1(alpha), &dom, &Point::scalar(0.0), &mm).unwrap();
            let v = e.mean / r.powf(alpha);
            assert!((v - exact).abs() < 4.0 * e.stderr / r.powf(alpha) + 0.02, "r={r}: {v} vs {exact}");
        }
    }

    #[test]
    fn moments_and_recursion() {
        let p = DirichletProblem::exit_time(stable1(1.5), unit());
        let rep = exit_time_moments(&p, &Point::scalar(0.0), 3, &mc(3000, 2e-3)).unwrap();
        assert_eq!(rep.moments.len(), 3);
        assert!(rep.recursion.iter().all(|r| r.holds));
        assert!(exit_time_moments(&p, &Point::scalar(0.0), 5, &mc(10, 1e-2)).is_err());
    }

    #[test]
    fn truncation_is_reported() {
        let p = DirichletProblem::exit_time(stable1(1.5), unit());
        let m = McConfig::new(EulerConfig::new(1e-2, 0.05, 1.5), 500, 1).fixed_horizon();
        assert!(matches!(dirichlet_solve(&p, &Point::scalar(0.0), &m), Err(Error::TruncationDominant { .. })));
    }

    #[test]
    fn boundary_decay_decreases() {
        let p = DirichletProblem::exit_time(stable1(1.5), unit());
        let rows = boundary_decay(&p, &Point::scalar(1.0), &[0.4, 0.1, 0.025], &mc(4000, 2e-4)).unwrap();
        assert!(rows.windows(2).all(|w| w[0].exit_time.mean > w[1].exit_time.mean));
        assert!((rows[0].point[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn harmonic_of_constant_is_constant() {
        let est = harmonic_estimate(&stable1(1.5), &unit(), &constant_fn(1.0), &[Point::scalar(0.0), Point::scalar(0.7)], &mc(500, 1e-2)).unwrap();
        assert!(est.iter().all(|e| e.mean == 1.0));
        let h = harnack_probe(&stable1(1.5), &unit(), &DomainSpec::interval(-0.5, 0.5).unwrap(), &[constant_fn(2.0)], 3, &mc(200, 1e-2)).unwrap();
        assert_eq!(h.family_max, 1.0);
    }

    #[test]
    fn degenerate_datum_is_rejected() {
        let far: ScalarFn = Arc::new(|x: &Point| if x[0] > 1e9 { 1.0 } else { 0.0 });
        let r = harnack_probe(&stable1(1.5), &unit(), &DomainSpec::interval(-0.5, 0.5).unwrap(), &[far], 3, &mc(200, 1e-2));
        assert!(matches!(r, Err(Error::DegenerateHarmonic { .. })));
    }

    #[test]
    fn grid_in_ball_and_interval() {
        let g = grid_in(&DomainSpec::interval(-0.5, 0.5).unwrap(), 5);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0][0], -0.5);
        let g2 = grid_in(&DomainSpec::centered_ball(2, 1.0), 5);
        assert!(g2.iter().all(|p| p.norm() <= 1.0 + 1e-12));
        assert_eq!(g2.len(), 13);
    }

    #[test]
    fn half_line_survival_exponent_is_one_half() {
        // Sparre Andersen: P(η > t) ~ C t^{−1/2} for any symmetric process on ℝ
        let cone = DomainSpec::Cone {
            vertex: Point::scalar(0.0),
            axis: Point::scalar(1.0),
            half_angle: 0.0,
        };
        let m = McConfig::new(EulerConfig::new(1e-2, 1.0, 1.5), 20_000, 5);
        let t_grid: Vec<f64> = (0..6).map(|k| 2.0 * 2f64.powi(k)).collect();
        let rep = cone_exit_exponent(1.5, &cone, &Point::scalar(0.1), &t_grid, &m).unwrap();
        assert!((rep.exponent - 0.5).abs() < 0.05 + 3.0 * rep.exponent_stderr, "{}", rep.exponent);
    }

    #[test]
    fn exterior_estimates_are_monotone() {
        let m = McConfig::new(EulerConfig::new(1e-2, 200.0, 1.5), 300, 2).fixed_horizon();
        let (rep, _) = exterior_hitting_table(&stable1(1.5), 16.0, &Point::scalar(1.5), &m).unwrap();
        assert!(rep.monotone);
        assert_eq!(rep.outer_radii, vec![2.0, 4.0, 8.0, 16.0]);
    }
}
