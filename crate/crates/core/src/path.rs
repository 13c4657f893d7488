//! Euler time stepping of X with exit detection.
//!
//! Constant-numerator models are driven by exact stable increments; every
//! other kernel by thinned jumps on |z| ≥ ε, the compensating drift
//! −∫_{ε≤|z|≤1} z π(x,z) dz and, optionally, a Gaussian matching the second
//! moment of the jumps below ε.

use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{invalid, Error, Result};
use crate::kernel::KernelModel;
use crate::mc::{map_paths, McEstimate};
use crate::point::Point;
use crate::quadrature::{adaptive, AdaptiveOptions};
use crate::rng::{RngStream, StreamRange};
use crate::sampler::{sample_stable_isotropic, EnvelopeSampler, StableSpec};
use crate::sphere::sphere_rule;
use crate::stats::{mean_stderr, paired_difference};

const OVERFLOW: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallJumpMode {
    Drop,
    GaussianMatch,
}

impl SmallJumpMode {
    /// Drop for α ≤ 1.5, Gaussian matching above.
    pub fn default_for(alpha: f64) -> Self {
        if alpha <= 1.5 {
            SmallJumpMode::Drop
        } else {
            SmallJumpMode::GaussianMatch
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerConfig {
    pub dt: f64,
    pub t_max: f64,
    pub epsilon: f64,
    pub small_jump_mode: SmallJumpMode,
    /// Jump exits land at the jump target; otherwise the exit state is
    /// pulled back to the boundary along the jump.
    pub overshoot_exact: bool,
    /// Store every step's state in `Trajectory::states`.
    pub record_states: bool,
    /// Use exact stable increments when k is constant.
    pub exact_stable: bool,
}

impl EulerConfig {
    pub fn new(dt: f64, t_max: f64, alpha: f64) -> Self {
        EulerConfig {
            dt,
            t_max,
            epsilon: 1e-2,
            small_jump_mode: SmallJumpMode::default_for(alpha),
            overshoot_exact: true,
            record_states: false,
            exact_stable: true,
        }
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_max > 0.0 && self.dt <= self.t_max) {
            return Err(invalid("Euler config needs 0 < dt ≤ t_max"));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("small-jump cutoff must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub t: f64,
    pub pre: Point,
    pub jump: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub time: f64,
    pub pre_exit: Point,
    pub exit_state: Point,
    pub by_jump: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    pub jumps: Vec<JumpEvent>,
    pub exit: Option<ExitRecord>,
}

/// Callbacks fired while a path is advanced.
pub trait PathObserver {
    /// The state `x` is held on [t, t + held).
    fn on_step(&mut self, _t: f64, _x: &Point, _held: f64) {}
    /// A jump (or an increment of norm ≥ ε in stable mode) at time t.
    fn on_jump(&mut self, _t: f64, _pre: &Point, _post: &Point) {}
    /// State after a completed step.
    fn on_state(&mut self, _t: f64, _x: &Point) {}
}

impl PathObserver for () {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub exit: Option<ExitRecord>,
    /// Exit time, or the horizon.
    pub time: f64,
    pub final_state: Point,
    pub steps: u64,
}

impl PathOutcome {
    pub fn truncated(&self) -> bool {
        self.exit.is_none()
    }
}

#[derive(Debug, Clone, Copy)]
enum Driver {
    Stable(StableSpec),
    Thinned { env: EnvelopeSampler, gaussian: bool },
}

/// Lower-triangular L with L Lᵀ = c (d ≤ 3), clamping tiny negative pivots.
fn cholesky(c: &[[f64; 3]; 3], d: usize) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    for i in 0..d {
        for j in 0..=i {
            let mut s = c[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                l[i][i] = s.max(0.0).sqrt();
            } else {
                l[i][j] = if l[j][j] > 0.0 { s / l[j][j] } else { 0.0 };
            }
        }
    }
    l
}

/// Time stepper bound to one model and configuration.
#[derive(Debug, Clone)]
pub struct PathEngine<'a> {
    pub model: &'a KernelModel,
    pub cfg: EulerConfig,
    driver: Driver,
}

impl<'a> PathEngine<'a> {
    pub fn new(model: &'a KernelModel, cfg: EulerConfig) -> Result<Self> {
        cfg.check()?;
        let driver = match StableSpec::for_model(model) {
            Some(spec) if cfg.exact_stable => Driver::Stable(spec),
            _ => Driver::Thinned {
                env: EnvelopeSampler::new(model, cfg.epsilon),
                gaussian: cfg.small_jump_mode == SmallJumpMode::GaussianMatch,
            },
        };
        Ok(PathEngine { model, cfg, driver })
    }

    pub fn uses_exact_increments(&self) -> bool {
        matches!(self.driver, Driver::Stable(_))
    }

    /// First parameter s ∈ (0,1] with a + s(b−a) ∉ D, to 10⁻¹⁰·length
    /// scale; returns (last inside, first outside) parameters.
    fn bisect(a: &Point, b: &Point, dom: &DomainSpec) -> (f64, f64) {
        let len = (*b - *a).norm();
        let tol = 1e-10 * dom.length_scale();
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while (hi - lo) * len > tol {
            let m = 0.5 * (lo + hi);
            if dom.contains(&(*a + (*b - *a) * m)) {
                lo = m;
            } else {
                hi = m;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        (lo, hi)
    }

    fn jump_exit(&self, t: f64, pre: Point, post: Point, dom: &DomainSpec) -> ExitRecord {
        let exit_state = if self.cfg.overshoot_exact {
            post
        } else {
            let (_, hi) = Self::bisect(&pre, &post, dom);
            pre + (post - pre) * hi
        };
        ExitRecord {
            time: t,
            pre_exit: pre,
            exit_state,
            by_jump: true,
        }
    }

    /// Advances x over [t, t+h]; returns the exit record if the path left
    /// `stop` during the step.
    pub fn advance<O: PathObserver>(
        &self,
        t: f64,
        x: &mut Point,
        h: f64,
        stop: Option<&DomainSpec>,
        rng: &mut RngStream,
        obs: &mut O,
    ) -> Result<Option<ExitRecord>> {
        let m = self.model;
        let x0 = *x;
        let mut drift = if m.drift_is_zero { Point::zeros(m.dim) } else { m.b(&x0) };
        let mut y = x0;
        let mut gauss = false;
        if let Driver::Thinned { gaussian, .. } = self.driver {
            if !m.symmetric {
                drift += m.compensator_drift(&x0, self.cfg.epsilon);
            }
            if gaussian {
                let l = cholesky(&m.small_jump_covariance(&x0, self.cfg.epsilon), m.dim);
                let mut n = [0.0; 3];
                for v in n.iter_mut().take(m.dim) {
                    *v = rng.normal();
                }
                let sh = h.sqrt();
                for i in 0..m.dim {
                    let mut s = 0.0;
                    for (k, nk) in n.iter().enumerate().take(i + 1) {
                        s += l[i][k] * nk;
                    }
                    y[i] += s * sh;
                }
                gauss = true;
            }
        }
        let moved = gauss || !m.drift_is_zero || !matches!(self.driver, Driver::Stable(_));
        y += drift * h;
        if moved {
            if let Some(dom) = stop {
                if !dom.contains(&y) {
                    let (lo, hi) = Self::bisect(&x0, &y, dom);
                    obs.on_step(t, &x0, hi * h);
                    return Ok(Some(ExitRecord {
                        time: t + hi * h,
                        pre_exit: x0 + (y - x0) * lo,
                        exit_state: x0 + (y - x0) * hi,
                        by_jump: false,
                    }));
                }
            }
        }
        match self.driver {
            Driver::Stable(spec) => {
                let inc = sample_stable_isotropic(&spec, h, rng);
                let pre = y;
                y += inc;
                if inc.norm() >= self.cfg.epsilon {
                    obs.on_jump(t + h, &pre, &y);
                }
                obs.on_step(t, &x0, h);
                if let Some(dom) = stop {
                    if !dom.contains(&y) {
                        return Ok(Some(self.jump_exit(t + h, pre, y, dom)));
                    }
                }
            }
            Driver::Thinned { env, .. } => {
                let n = env.count(h, rng);
                let mut exit = None;
                for _ in 0..n {
                    let z = env.candidate(rng);
                    let ratio = m.check_envelope(&x0, &z)?;
                    if rng.uniform() < ratio {
                        let pre = y;
                        y += z;
                        obs.on_jump(t + h, &pre, &y);
                        if let Some(dom) = stop {
                            if !dom.contains(&y) {
                                exit = Some(self.jump_exit(t + h, pre, y, dom));
                                break;
                            }
                        }
                    }
                }
                obs.on_step(t, &x0, h);
                if exit.is_some() {
                    return Ok(exit);
                }
            }
        }
        let norm = y.norm();
        if !(norm <= OVERFLOW) {
            return Err(Error::StateOverflow { norm, time: t + h });
        }
        *x = y;
        obs.on_state(t + h, x);
        Ok(None)
    }

    /// Runs from x0 until exit from `stop` or the horizon.
    pub fn run<O: PathObserver>(
        &self,
        x0: &Point,
        stop: Option<&DomainSpec>,
        rng: &mut RngStream,
        obs: &mut O,
    ) -> Result<PathOutcome> {
        let (dt, t_max) = (self.cfg.dt, self.cfg.t_max);
        let mut x = *x0;
        let mut k: u64 = 0;
        loop {
            let t = k as f64 * dt;
            if t >= t_max {
                break;
            }
            let h = dt.min(t_max - t);
            if let Some(e) = self.advance(t, &mut x, h, stop, rng, obs)? {
                return Ok(PathOutcome {
                    exit: Some(e),
                    time: e.time,
                    final_state: e.exit_state,
                    steps: k + 1,
                });
            }
            k += 1;
        }
        Ok(PathOutcome {
            exit: None,
            time: t_max,
            final_state: x,
            steps: k,
        })
    }
}

struct Recorder {
    record_states: bool,
    times: Vec<f64>,
    states: Vec<Point>,
    jumps: Vec<JumpEvent>,
}

impl PathObserver for Recorder {
    fn on_jump(&mut self, t: f64, pre: &Point, post: &Point) {
        self.jumps.push(JumpEvent {
            t,
            pre: *pre,
            jump: *post - *pre,
        });
    }

    fn on_state(&mut self, t: f64, x: &Point) {
        if self.record_states {
            self.times.push(t);
            self.states.push(*x);
        }
    }
}

/// One path from x0; halts at the first exit from `stop` when given.
pub fn simulate(
    model: &KernelModel,
    x0: &Point,
    cfg: &EulerConfig,
    stop: Option<&DomainSpec>,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    if x0.dim() != model.dim {
        return Err(invalid("initial state dimension differs from the model"));
    }
    if let Some(d) = stop {
        if !d.contains(x0) {
            return Err(invalid("initial state lies outside the stopping domain"));
        }
    }
    let engine = PathEngine::new(model, *cfg)?;
    let mut rec = Recorder {
        record_states: cfg.record_states,
        times: vec![0.0],
        states: vec![*x0],
        jumps: Vec::new(),
    };
    let out = engine.run(x0, stop, rng, &mut rec)?;
    if rec.times.last() != Some(&out.time) && out.time > 0.0 {
        rec.times.push(out.time);
        rec.states.push(out.final_state);
    }
    Ok(Trajectory {
        times: rec.times,
        states: rec.states,
        jumps: rec.jumps,
        exit: out.exit,
    })
}

/// CSV with columns path_id, t, x_1..x_d, is_jump.
pub fn trajectories_to_csv(paths: &[Trajectory]) -> String {
    let d = paths.first().and_then(|p| p.states.first()).map_or(1, |s| s.dim());
    let mut s = String::from("path_id,t");
    for i in 1..=d {
        s.push_str(&format!(",x_{i}"));
    }
    s.push_str(",is_jump\n");
    for (id, p) in paths.iter().enumerate() {
        let mut rows: Vec<(f64, Point, u8)> = p.times.iter().zip(&p.states).map(|(t, x)| (*t, *x, 0)).collect();
        rows.extend(p.jumps.iter().map(|j| (j.t, j.pre + j.jump, 1)));
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        for (t, x, j) in rows {
            s.push_str(&format!("{id},{t}"));
            for v in x.as_slice() {
                s.push_str(&format!(",{v}"));
            }
            s.push_str(&format!(",{j}\n"));
        }
    }
    s
}

/// ∫_B π(x, y − x) dy, the rate of jumps from x into B.
pub fn set_intensity(model: &KernelModel, x: &Point, set: &DomainSpec) -> f64 {
    let d = model.dim;
    let rule = match d {
        1 => sphere_rule(1, 2),
        2 => sphere_rule(2, 256),
        _ => sphere_rule(3, 32),
    };
    let alpha = model.alpha;
    let mut total = 0.0;
    for (u, w) in rule {
        for (a, b) in set.ray_segments(x, &u) {
            if a <= 0.0 {
                return f64::INFINITY;
            }
            let b_fin = if b.is_finite() { b } else { a.max(1.0) * 1e6 };
            let f = |t: f64| {
                let rho = t.exp();
                model.scale * model.k(x, &(u * rho)) * rho.powf(-alpha)
            };
            let r = adaptive(
                f,
                &[a.ln(), b_fin.ln()],
                AdaptiveOptions {
                    abs_tol: 1e-14,
                    rel_tol: 1e-10,
                    max_panels: 500,
                },
            );
            let mut v = r.value;
            if !b.is_finite() {
                v += model.scale * model.k(x, &(u * b_fin)) * b_fin.powf(-alpha) / alpha;
            }
            total += w * v;
        }
    }
    total
}

/// Cached x ↦ ∫_B π(x, y−x) dy on a bounded 1-d set A (linear interpolation
/// on 4001 nodes); direct quadrature otherwise.
struct IntensityLookup<'a> {
    model: &'a KernelModel,
    set: &'a DomainSpec,
    table: Option<(f64, f64, Vec<f64>)>,
}

impl<'a> IntensityLookup<'a> {
    fn new(model: &'a KernelModel, a: &DomainSpec, set: &'a DomainSpec) -> Self {
        let table = if model.dim == 1 {
            let range = match a {
                DomainSpec::Box { lo, hi } => Some((lo[0], hi[0])),
                DomainSpec::Ball { center, radius } => Some((center[0] - radius, center[0] + radius)),
                _ => None,
            };
            range.map(|(lo, hi)| {
                let n = 4000;
                let v = (0..=n)
                    .map(|i| set_intensity(model, &Point::scalar(lo + (hi - lo) * i as f64 / n as f64), set))
                    .collect();
                (lo, hi, v)
            })
        } else {
            None
        };
        IntensityLookup { model, set, table }
    }

    fn at(&self, x: &Point) -> f64 {
        match &self.table {
            Some((lo, hi, v)) => {
                let n = v.len() - 1;
                let s = ((x[0] - lo) / (hi - lo) * n as f64).clamp(0.0, n as f64);
                let i = (s.floor() as usize).min(n - 1);
                let f = s - i as f64;
                v[i] * (1.0 - f) + v[i + 1] * f
            }
            None => set_intensity(self.model, x, self.set),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevySystemReport {
    pub jump_count_mean: f64,
    pub jump_count_stderr: f64,
    pub compensator_mean: f64,
    pub compensator_stderr: f64,
    pub z_score: f64,
    pub n: usize,
}

/// Compares E Σ_{s≤t} 1{X_{s−}∈A, X_s∈B} with E ∫₀^t 1{X_s∈A} ∫_B π(X_s, y−X_s) dy ds
/// over `streams.len` paths from x0. Jumps are always simulated individually
/// (thinning), so this needs dist(A, B) ≥ ε.
#[allow(clippy::too_many_arguments)]
pub fn levy_system_check(
    model: &KernelModel,
    set_a: &DomainSpec,
    set_b: &DomainSpec,
    x0: &Point,
    t: f64,
    cfg: &EulerConfig,
    streams: &StreamRange,
) -> Result<LevySystemReport> {
    if !set_a.is_disjoint_from(set_b) {
        return Err(Error::DisjointnessViolated);
    }
    let mut cfg = cfg.with_t_max(t);
    cfg.exact_stable = false;
    cfg.check()?;
    let engine = PathEngine::new(model, cfg)?;
    let lookup = IntensityLookup::new(model, set_a, set_b);

    struct Counter<'b> {
        a: &'b DomainSpec,
        b: &'b DomainSpec,
        lookup: &'b IntensityLookup<'b>,
        count: f64,
        comp: f64,
    }
    impl PathObserver for Counter<'_> {
        fn on_step(&mut self, _t: f64, x: &Point, held: f64) {
            if self.a.contains(x) {
                self.comp += held * self.lookup.at(x);
            }
        }
        fn on_jump(&mut self, _t: f64, pre: &Point, post: &Point) {
            if self.a.contains(pre) && self.b.contains(post) {
                self.count += 1.0;
            }
        }
    }

    let res: Vec<Result<(f64, f64)>> = map_paths(streams, |_, rng| {
        let mut c = Counter {
            a: set_a,
            b: set_b,
            lookup: &lookup,
            count: 0.0,
            comp: 0.0,
        };
        engine.run(x0, None, rng, &mut c)?;
        Ok((c.count, c.comp))
    });
    let mut counts = Vec::with_capacity(res.len());
    let mut comps = Vec::with_capacity(res.len());
    for r in res {
        let (a, b) = r?;
        counts.push(a);
        comps.push(b);
    }
    let (cm, cs) = mean_stderr(&counts);
    let (pm, ps) = mean_stderr(&comps);
    let (dm, ds) = paired_difference(&counts, &comps);
    // N_t − A_t is a martingale with E[(N_t − A_t)²] = E A_t; this floors the
    // empirical error when jumps into B are rare.
    let ds = ds.max((pm / counts.len() as f64).sqrt());
    let z = if ds > 0.0 {
        dm / ds
    } else if dm == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(LevySystemReport {
        jump_count_mean: cm,
        jump_count_stderr: cs,
        compensator_mean: pm,
        compensator_stderr: ps,
        z_score: z,
        n: counts.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBallReport {
    pub t: f64,
    pub radii: Vec<f64>,
    pub probabilities: Vec<McEstimate>,
    /// κ̂ in P(sup_{s≤t}|X_s − x| > r) ≈ κ̂ t r^{−α}, fitted in log space.
    pub kappa: f64,
    /// |log p̂ − log(κ̂ t r^{−α})| per radius.
    pub log_residuals: Vec<f64>,
}

/// Escape probabilities from balls B_r(x) by time t, with a single fitted
/// constant κ̂ for the shape κ t r^{−α}. All radii reuse the same streams.
pub fn small_ball_probabilities(
    model: &KernelModel,
    x: &Point,
    radii: &[f64],
    t: f64,
    cfg: &EulerConfig,
    streams: &StreamRange,
) -> Result<SmallBallReport> {
    let cfg = cfg.with_t_max(t);
    let engine = PathEngine::new(model, cfg)?;
    let mut probs = Vec::new();
    for &r in radii {
        let dom = DomainSpec::ball(*x, r)?;
        let res: Vec<Result<f64>> = map_paths(streams, |_, rng| {
            let o = engine.run(x, Some(&dom), rng, &mut ())?;
            Ok(if o.exit.is_some() { 1.0 } else { 0.0 })
        });
        let xs = res.into_iter().collect::<Result<Vec<f64>>>()?;
        probs.push(McEstimate::from_samples(&xs, streams, 0));
    }
    let alpha = model.alpha;
    let logs: Vec<f64> = probs
        .iter()
        .zip(radii)
        .map(|(p, r)| p.mean.ln() - t.ln() + alpha * r.ln())
        .collect();
    let log_kappa = logs.iter().sum::<f64>() / logs.len() as f64;
    let residuals = logs.iter().map(|l| (l - log_kappa).abs()).collect();
    Ok(SmallBallReport {
        t,
        radii: radii.to_vec(),
        probabilities: probs,
        kappa: log_kappa.exp(),
        log_residuals: residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{frac_laplacian_constant, ClassTag, Envelope, VariableOrderKernel};
    use std::sync::Arc;

    fn stable1(alpha: f64) -> KernelModel {
        KernelModel::stable(1, alpha, 1.0).unwrap()
    }

    #[test]
    fn zero_intensity_gives_constant_path() {
        let m = KernelModel::new(
            1,
            1.5,
            crate::kernel::zero_drift(1),
            Arc::new(|_, _| 0.0),
            1.0,
            ClassTag::SymmetricNumerator,
            Envelope::power(0.0, 1.5),
            "null",
        )
        .unwrap();
        let mut cfg = EulerConfig::new(0.01, 1.0, 1.5);
        cfg.record_states = true;
        let tr = simulate(&m, &Point::scalar(0.3), &cfg, None, &mut RngStream::new(1, 0)).unwrap();
        assert!(tr.states.iter().all(|s| s[0] == 0.3));
        assert!(tr.jumps.is_empty());
        assert_eq!(tr.times.len(), 101);
    }

    #[test]
    fn pure_drift_decays_exponentially() {
        let m = KernelModel::new(
            1,
            1.5,
            Arc::new(|x: &Point| -*x),
            Arc::new(|_, _| 0.0),
            1.0,
            ClassTag::SymmetricNumerator,
            Envelope::power(0.0, 1.5),
            "drift only",
        )
        .unwrap();
        let dt = 1e-3;
        let mut cfg = EulerConfig::new(dt, 2.0, 1.5);
        cfg.record_states = true;
        let tr = simulate(&m, &Point::scalar(1.0), &cfg, None, &mut RngStream::new(1, 0)).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.states) {
            assert!((x[0] - (-t).exp()).abs() < dt, "t={t}");
        }
    }

    #[test]
    fn drift_exit_is_located_on_the_boundary() {
        let m = KernelModel::new(
            1,
            1.5,
            Arc::new(|x: &Point| Point::scalar(1.0 + 0.0 * x[0])),
            Arc::new(|_, _| 0.0),
            1.0,
            ClassTag::SymmetricNumerator,
            Envelope::power(0.0, 1.5),
            "drift only",
        )
        .unwrap();
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let cfg = EulerConfig::new(0.3, 10.0, 1.5);
        let tr = simulate(&m, &Point::scalar(0.0), &cfg, Some(&dom), &mut RngStream::new(1, 0)).unwrap();
        let e = tr.exit.unwrap();
        assert!(!e.by_jump);
        assert!((e.time - 1.0).abs() < 1e-9);
        assert!((e.exit_state[0] - 1.0).abs() < 1e-9);
        assert!(dom.contains(&e.pre_exit));
    }

    #[test]
    fn trajectory_invariants() {
        let vo = VariableOrderKernel::new(1.2, 1.5, 1.8).unwrap().model(1).unwrap();
        let dom = DomainSpec::interval(-2.0, 2.0).unwrap();
        for (i, m) in [stable1(1.5), vo].iter().enumerate() {
            let mut cfg = EulerConfig::new(1e-3, 50.0, m.alpha);
            cfg.record_states = true;
            for s in 0..20 {
                let tr = simulate(m, &Point::scalar(0.1), &cfg, Some(&dom), &mut RngStream::new(9, s)).unwrap();
                assert!(tr.times.windows(2).all(|w| w[0] < w[1]), "model {i}");
                assert_eq!(tr.states[0][0], 0.1);
                let e = tr.exit.expect("exits");
                assert!(!dom.contains(&e.exit_state));
                for (t, x) in tr.times.iter().zip(&tr.states) {
                    if *t < e.time {
                        assert!(dom.contains(x));
                    }
                }
                for j in &tr.jumps {
                    assert!(j.jump.norm() >= cfg.epsilon);
                }
            }
        }
    }

    #[test]
    fn replay_is_bit_exact() {
        let m = stable1(1.3);
        let cfg = EulerConfig::new(1e-3, 5.0, 1.3);
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let a = simulate(&m, &Point::scalar(0.2), &cfg, Some(&dom), &mut RngStream::new(3, 7)).unwrap();
        let b = simulate(&m, &Point::scalar(0.2), &cfg, Some(&dom), &mut RngStream::new(3, 7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mean_exit_time_matches_closed_form() {
        // E_0 τ(−1,1) = Γ(1/2)/(2^α Γ(1+α/2) Γ(1/2+α/2)) for σ = 1
        use statrs::function::gamma::gamma;
        let alpha = 1.5;
        let exact = gamma(0.5) / (2f64.powf(alpha) * gamma(1.0 + alpha / 2.0) * gamma(0.5 + alpha / 2.0));
        let m = stable1(alpha);
        let cfg = EulerConfig::new(1e-3, 50.0, alpha);
        let engine = PathEngine::new(&m, cfg).unwrap();
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let s = StreamRange::new(11, 0, 20_000);
        let xs: Vec<f64> = map_paths(&s, |_, r| engine.run(&Point::scalar(0.0), Some(&dom), r, &mut ()).unwrap().time);
        let e = McEstimate::from_samples(&xs, &s, 0);
        assert!((e.mean - exact).abs() < 3.0 * e.stderr + 0.01, "{} vs {exact}", e.mean);
    }

    #[test]
    fn thinned_and_exact_drivers_agree() {
        let alpha = 1.5;
        let m = stable1(alpha);
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let s = StreamRange::new(12, 0, 10_000);
        let mut cfg = EulerConfig::new(1e-3, 50.0, alpha);
        cfg.small_jump_mode = SmallJumpMode::GaussianMatch;
        let exact = PathEngine::new(&m, cfg).unwrap();
        cfg.exact_stable = false;
        let thin = PathEngine::new(&m, cfg).unwrap();
        assert!(!thin.uses_exact_increments());
        let run = |e: &PathEngine| {
            let xs: Vec<f64> = map_paths(&s, |_, r| e.run(&Point::scalar(0.0), Some(&dom), r, &mut ()).unwrap().time);
            McEstimate::from_samples(&xs, &s, 0)
        };
        let (a, b) = (run(&exact), run(&thin));
        let z = (a.mean - b.mean).abs() / (a.stderr.hypot(b.stderr));
        assert!(z < 3.5 || (a.mean - b.mean).abs() < 0.02, "{a:?} {b:?}");
    }

    #[test]
    fn levy_system_far_sets_vanish() {
        let m = stable1(1.5);
        let a = DomainSpec::interval(-0.1, 0.1).unwrap();
        let b = DomainSpec::interval(1e6, 2e6).unwrap();
        let cfg = EulerConfig::new(1e-2, 0.1, 1.5);
        let r = levy_system_check(&m, &a, &b, &Point::scalar(0.0), 0.1, &cfg, &StreamRange::new(1, 0, 500)).unwrap();
        assert_eq!(r.jump_count_mean, 0.0);
        assert!(r.compensator_mean < 1e-8);
        assert!(r.z_score.abs() < 3.0);
    }

    #[test]
    fn levy_system_rejects_overlap() {
        let m = stable1(1.5);
        let a = DomainSpec::interval(-0.1, 0.1).unwrap();
        let b = DomainSpec::interval(0.0, 2.0).unwrap();
        let cfg = EulerConfig::new(1e-2, 0.1, 1.5);
        let r = levy_system_check(&m, &a, &b, &Point::scalar(0.0), 0.1, &cfg, &StreamRange::new(1, 0, 10));
        assert_eq!(r, Err(Error::DisjointnessViolated));
    }

    #[test]
    fn set_intensity_matches_closed_form() {
        // c ∫_1^2 y^{−1−α} dy from x = 0
        let alpha = 1.5;
        let m = stable1(alpha);
        let b = DomainSpec::interval(1.0, 2.0).unwrap();
        let v = set_intensity(&m, &Point::scalar(0.0), &b);
        let exact = frac_laplacian_constant(1, alpha) * (1.0 - 2f64.powf(-alpha)) / alpha;
        assert!((v - exact).abs() < 1e-10 * exact);
        // complement of the unit ball in d = 2 seen from the centre:
        // c·2π·∫_1^∞ ρ^{−1−α} dρ
        let m2 = KernelModel::stable(2, alpha, 1.0).unwrap();
        let c = DomainSpec::ComplementOfBall {
            center: Point::zeros(2),
            radius: 1.0,
        };
        let v2 = set_intensity(&m2, &Point::zeros(2), &c);
        let exact2 = frac_laplacian_constant(2, alpha) * 2.0 * std::f64::consts::PI / alpha;
        assert!((v2 - exact2).abs() < 1e-6 * exact2, "{v2} {exact2}");
    }

    #[test]
    fn overflow_is_reported() {
        let m = stable1(1.5).with_drift(Arc::new(|x: &Point| *x * (x.norm() * 1e3)));
        let cfg = EulerConfig::new(0.1, 100.0, 1.5);
        let r = simulate(&m, &Point::scalar(5.0), &cfg, None, &mut RngStream::new(1, 0));
        assert!(matches!(r, Err(Error::StateOverflow { .. })), "{r:?}");
    }
}
