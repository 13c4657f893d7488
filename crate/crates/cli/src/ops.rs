//! One function per subcommand: typed parameters in, a JSON record and an
//! optional CSV table out.

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use stablekit::ergodic::{
    hitting_time_table, invariant_measure_estimate, lyapunov_verify, power_lyapunov, InvariantConfig, LyapunovCandidate,
};
use stablekit::fd_oracle::{assemble_and_solve, discrete_maximum_check, FdConfig};
use stablekit::feynman_kac::{
    boundary_decay, cone_exit_exponent, constant_fn, dirichlet_solve, exit_time_moments, harnack_probe, moment_recursion_check, DirichletProblem,
    ScalarFn,
};
use stablekit::kernel::{validate, KernelModel};
use stablekit::operator::{apply_generator, barrier_integrals, QuadratureScheme, SmoothProbe};
use stablekit::{DomainSpec, Error, Point};

use crate::config::ExperimentConfig;

#[derive(Debug)]
pub enum OpError {
    /// Bad or missing input: exit code 2.
    Validation(String),
    /// The estimator or solver refused: exit code 3.
    Estimator(Error),
}

impl OpError {
    pub fn name(&self) -> &str {
        match self {
            OpError::Validation(_) => "ValidationError",
            OpError::Estimator(e) => e.name(),
        }
    }

    pub fn message(&self) -> String {
        match self {
            OpError::Validation(m) => m.clone(),
            OpError::Estimator(e) => e.to_string(),
        }
    }
}

impl From<Error> for OpError {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            OpError::Validation(e.to_string())
        } else {
            OpError::Estimator(e)
        }
    }
}

/// Rows share the header; every cell is a number.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

pub struct OpOutput {
    pub record: Value,
    pub table: Option<Table>,
}

pub const OPERATIONS: [&str; 12] = [
    "validate",
    "generator",
    "dirichlet",
    "exit-moments",
    "boundary-decay",
    "harnack",
    "cone",
    "hitting",
    "lyapunov",
    "invariant",
    "fd-solve",
    "barrier",
];

fn params<T: DeserializeOwned>(cfg: &ExperimentConfig) -> Result<T, OpError> {
    cfg.params
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| OpError::Validation(format!("params: {}", e.message())))
}

fn model(cfg: &ExperimentConfig) -> Result<KernelModel, OpError> {
    let spec = cfg.model.as_ref().ok_or_else(|| OpError::Validation("missing [model] table".into()))?;
    Ok(spec.build()?)
}

fn domain(cfg: &ExperimentConfig) -> Result<DomainSpec, OpError> {
    let d = cfg.domain.clone().ok_or_else(|| OpError::Validation("missing [domain] table".into()))?;
    d.check()?;
    Ok(d)
}

fn interval(d: &DomainSpec) -> Result<(f64, f64), OpError> {
    match d {
        DomainSpec::Box { lo, hi } if lo.dim() == 1 => Ok((lo[0], hi[0])),
        DomainSpec::Ball { center, radius } if center.dim() == 1 => Ok((center[0] - radius, center[0] + radius)),
        _ => Err(OpError::Validation("this operation needs a one-dimensional interval domain".into())),
    }
}

fn point_cols(dim: usize) -> Vec<String> {
    ["x", "y", "z"][..dim].iter().map(|s| s.to_string()).collect()
}

fn estimate_row(x: &Point, e: &stablekit::mc::McEstimate) -> Vec<f64> {
    let mut r = x.to_vec();
    r.extend([e.mean, e.stderr, e.n as f64, e.truncated_fraction]);
    r
}

fn estimate_table(dim: usize) -> Table {
    let mut t = Table {
        header: point_cols(dim),
        rows: Vec::new(),
    };
    t.header.extend(["mean", "stderr", "n", "truncated_fraction"].map(String::from));
    t
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("records serialize")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ValidateParams {
    #[serde(default = "default_probes")]
    probes: usize,
}

fn default_probes() -> usize {
    32
}

fn op_validate(cfg: &ExperimentConfig) -> Result<OpOutput, OpError> {
    let p: ValidateParams = params(cfg)?;
    let m = model(cfg)?;
    let region = match &cfg.domain {
        Some(d) => d.clone(),
        None => DomainSpec::centered_ball(m.dim, 1.0),
    };
    let rep = validate(&m, &region, p.probes)?;
    Ok(OpOutput {
        record: to_value(&rep),
        table: None,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorParams {
    points: Vec<Point>,
    #[serde(default = "default_probe")]
    probe: String,
    /// Exponent of the `getoor` and `barrier` probes.
    #[serde(default)]
    probe_param: Option<f64>,
    #[serde(default)]
    quadrature: Option<QuadratureScheme>,
}

fn default_probe() -> String {
    "gaussian".into()
}

fn probe(name: &str, param: Option<f64>) -> Result<SmoothProbe, OpError> {
    let need = |what: &str| param.ok_or_else(|| OpError::Validation(format!("probe `{what}` needs probe_param")));
    Ok(match name {
        "gaussian" => SmoothProbe::gaussian(),
        "constant" => SmoothProbe::constant(param.unwrap_or(1.0)),
        "getoor" => SmoothProbe::getoor(need("getoor")?),
        "barrier" => SmoothProbe::barrier(need("barrier")?),
        "power_lyapunov" => power_lyapunov(need("power_lyapunov")?),
        other => return Err(OpError::Validation(format!("unknown probe key `{other}`"))),
    })
}

fn op_generator(cfg: &ExperimentConfig) -> Result<OpOutput, OpError> {
    let p: GeneratorParams = params(cfg)?;
    let m = model(cfg)?;
    let f = probe(&p.probe, p.probe_param)?;
    let q = p.quadrature.unwrap_or_default();
    q.check()?;
    let mut t = Table {
        header: point_cols(m.dim),
        rows: Vec::new(),
    };
    t.header.extend(["value", "error"].map(String::from));
    let mut recs = Vec::new();
    for x in &p.points {
        if x.dim() != m.dim {
            return Err(OpError::Validation("point and model dimensions differ".into()));
        }
        let g = apply_generator(&m, &f, x, &q)?;
        let mut r = x.to_vec();
        r.extend([g.value, g.error]);
        t.rows.push(r);
        recs.push(json!({"x": x, "value": g.value, "error": g.error, "core_bound": g.core_bound}));
    }
    Ok(OpOutput {
        record: json!({"probe": p.probe, "points": recs}),
        table: Some(t),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DirichletParams {
    points: Vec<Point>,
    /// Constant source f.
    #[serde(default = "one")]
    f: f64,
    /// Constant exterior datum g.
    #[serde(default)]
    g: f64,
}

fn one() -> f64 {
    1.0
}

fn op_dirichlet(cfg: &ExperimentConfig, seed: u64) -> Result<OpOutput, OpError> {
    let p: DirichletParams = params(cfg)?;
    let m = model(cfg)?;
    let mc = cfg.mc.mc(m.alpha, seed);
    let problem = DirichletProblem::new(m.clone(), domain(cfg)?, constant_fn(p.f), constant_fn(p.g));
    let mut t = estimate_table(m.dim);
    let mut recs = Vec::new();
    for x in &p.points {
        let e = dirichlet_solve(&problem, x, &mc)?;
        t.rows.push(estimate_row(x, &e));
        recs.push(json!({"x": x, "estimate": e}));
    }
    Ok(OpOutput {
        record: json!({"points": recs}),
        table: Some(t),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentParams {
    point: Point,
    #[serde(default = "two")]
    m_max: usize,
    /// sup_x E_x τ for the recursion check; the estimate at `point` if absent.
    #[serde(default)]
    sup_mean: Option<f64>,
}

fn two() -> usize {
    2
}

fn op_exit_moments(cfg: &ExperimentConfig, seed: u64) -> Result<OpOutput, OpError> {
    let p: MomentParams = params(cfg)?;
    let m = model(cfg)?;
    let mc = cfg.mc.mc(m.alpha, seed);
    let problem = DirichletProblem::exit_time(m, domain(cfg)?);
    let rep = exit_time_moments(&problem, &p.point, p.m_max, &mc)?;
    let sup = p.sup_mean.unwrap_or(rep.moments[0].mean);
    let rows = moment_recursion_check(&rep.moments, sup);
    let mut t = Table::new(&["m", "moment", "stderr"]);
    for (i, e) in rep.moments.iter().enumerate() {
        t.rows.push(vec![(i + 1) as f64, e.mean, e.stderr]);
    }
    Ok(OpOutput {
        record: json!({"moments": rep.moments, "recursion": rows}),
        table: Some(t),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecayParams {
    direction: Point,
    distances: Vec<f64>,
}

fn op_boundary_decay(cfg: &ExperimentConfig, seed: u64) -> Result<OpOutput, OpError> {
    let p: DecayParams = params(cfg)?;
    let m = model(cfg)?;
    let mc = cfg.mc.mc(m.alpha, seed);
    let problem = DirichletProblem::exit_time(m, domain(cfg)?);
    let rows = boundary_decay(&problem, &p.direction, &p.distances, &mc)?;
    let mut t = Table::new(&["distance", "mean", "stderr"]);
    for r in &rows {
        t.rows.push(vec![r.distance, r.exit_time.mean, r.exit_time.stderr]);
    }
    Ok(OpOutput {
        record: json!({"rows": rows}),
        table: Some(t),
    })
}

/// Indicator of an axis-aligned box, used as exterior datum.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IndicatorBox {
    lo: Point,
    hi: Point,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HarnackParams {
    k: DomainSpec,
    #[serde(default = "five")]
    per_axis: usize,
    data: Vec<IndicatorBox>,
}

fn five() -> usize {
    5
}

fn op_harnack(cfg: &ExperimentConfig, seed: u64) -> Result<OpOutput, OpError> {
    let p: HarnackParams = params(cfg)?;
    let m = model(cfg)?;
    let mc = cfg.mc.mc(m.alpha, seed);
    let data: Vec<ScalarFn> = p
        .data
        .iter()
        .map(|b| {
            let (lo, hi) = (b.lo, b.hi);
            let f: ScalarFn = Arc::new(move |x: &Point| if (0..x.dim()).all(|i| lo[i] < x[i] && x[i] < hi[i]) { 1.0 } else { 0.0 });
            f
        })
        .collect();
    p.k.check()?;
    let rep = harnack_probe(&m, &domain(cfg)?, &p.k, &data, p.per_axis, &mc)?;
    let mut t = Table::new(&["datum", "ratio", "log_stderr", "upper"]);
    for (i, d) in rep.data.iter().enumerate() {
        t.rows.push(vec![i as f64, d.ratio, d.log_stderr, d.upper]);
    }
    Ok(OpOutput {
        record: to_value(&rep),
        table: Some(t),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConeParams {
    x0: Point,
    t_grid: Vec<f64>,
}

fn op_cone(cfg: &ExperimentConfig, seed: u64) -> Result<OpOutput, OpError> {
    let p: ConeParams = params(cfg)?;
    let m = model(cfg)?;
    if m.name != "stable" || !m.drift_is_zero {
        return Err(OpError::Validation("cone exit uses the pure stable kernel (`stable`, zero drift)".into()));
    }
    let mc = cfg.mc.mc(m.alpha, seed);
    let rep = cone_exit_exponent(m.alpha, &domain(cfg)?, &p.x0, &p.t_grid, &mc)?;
    let mut t = Table::new(&["t", "survival", "stderr"]);
    for (tt, s) in rep.t_grid.iter().zip(&rep.survival) {
        t.rows.push(vec![*tt, s.mean, s.stderr]);
    }
    Ok(OpOutput {
        record: to_value(&rep),
        table: Some(t),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HittingParams {
    target_radius: f64,
    starts: Vec<Point>,
}

fn op_hitting(cfg: &ExperimentConfig, seed: u64) -> Result<OpOutput, OpError> {
    let p: HittingParams = params(cfg)?;
    let m = model(cfg)?;
    let mc = cfg.mc.mc(m.alpha, seed);
    let target = DomainSpec::ball(Point::zeros(m.dim), p.target_radius)?;
    let est = hitting_time_table(&m, &target, &p.starts, &mc)?;
    let mut t = estimate_table(m.dim);
    for (x, e) in p.starts.iter().zip(&est) {
        t.rows.push(estimate_row(x, e));
    }
    Ok(OpOutput {
        record: json!({"target_radius": p.target_radius, "starts": p.starts, "estimates": est}),
        table: Some(t),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LyapunovParams {
    gamma: f64,
    compact_radius: f64,
    #[serde(default)]
    epsilon_margin: f64,
    #[serde(default = "eight")]
    rays: usize,
    radii: Vec<f64>,
    #[serde(default)]
    quadrature: Option<QuadratureScheme>,
}

fn eight() -> usize {
    8
}

fn op_lyapunov(cfg: &ExperimentConfig) -> Result<OpOutput, OpError> {
    let p: LyapunovParams = params(cfg)?;
    let m = model(cfg)?;
    let cand = LyapunovCandidate {
        v: power_lyapunov(p.gamma),
        compact_radius: p.compact_radius,
        epsilon_margin: p.epsilon_margin,
    };
    let q = p.quadrature.unwrap_or(QuadratureScheme {
        tolerance: 1e-5,
        ..QuadratureScheme::default()
    });
    q.check()?;
    let rep = lyapunov_verify(&m, &cand, p.rays, &p.radii, &q)?;
    let mut t = Table {
        header: point_cols(m.dim),
        rows: Vec::new(),
    };
    t.header.extend(["value", "error"].map(String::from));
    for pt in &rep.points {
        let mut r = pt.point.to_vec();
        r.extend([pt.value, pt.error]);
        t.rows.push(r);
    }
    Ok(OpOutput {
        record: to_value(&rep),
        table: Some(t),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InvariantParams {
    #[serde(default)]
    run: Option<InvariantConfig>,
    /// Verify this power Lyapunov exponent first; the run is marked
    /// exploratory when absent or failing.
    #[serde(default)]
    lyapunov_gamma: Option<f64>,
}

fn op_invariant(cfg: &ExperimentConfig, seed: u64) -> Result<OpOutput, OpError> {
    let p: InvariantParams = params(cfg)?;
    let m = model(cfg)?;
    let run = p.run.unwrap_or_default();
    let lyap = match p.lyapunov_gamma {
        Some(g) => {
            let cand = LyapunovCandidate {
                v: power_lyapunov(g),
                compact_radius: run.compact_radius,
                epsilon_margin: 0.0,
            };
            let q = QuadratureScheme {
                tolerance: 1e-5,
                ..QuadratureScheme::default()
            };
            Some(lyapunov_verify(&m, &cand, 8, &[10.0, 30.0, 100.0], &q)?)
        }
        None => None,
    };
    let rep = invariant_measure_estimate(&m, &domain(cfg)?, &cfg.mc.euler(m.alpha), &run, seed, lyap.as_ref())?;
    let mut t = Table::new(&["bin_lo", "bin_hi", "occupation", "regeneration"]);
    let e = rep.occupation.edges();
    let (a, _) = rep.occupation.normalized();
    let (b, _) = rep.hasminskii.normalized();
    for i in 0..a.len() {
        t.rows.push(vec![e[i], e[i + 1], a[i], b[i]]);
    }
    Ok(OpOutput {
        record: json!({
            "tv": rep.tv,
            "cycles": rep.cycles,
            "exploratory": rep.exploratory,
            "out_of_window": [rep.occupation.normalized().1, rep.hasminskii.normalized().1],
            "simulated_time": [rep.occupation.simulated_time, rep.hasminskii.simulated_time],
        }),
        table: Some(t),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FdParams {
    #[serde(default = "one")]
    f: f64,
    #[serde(default)]
    g: f64,
    #[serde(default)]
    grid: Option<FdConfig>,
}

fn op_fd_solve(cfg: &ExperimentConfig) -> Result<OpOutput, OpError> {
    let p: FdParams = params(cfg)?;
    let m = model(cfg)?;
    let (a, b) = interval(&domain(cfg)?)?;
    let grid = p.grid.unwrap_or_default();
    grid.check()?;
    let (fv, gv) = (p.f, p.g);
    let f = move |_: f64| fv;
    let sol = assemble_and_solve(&m, a, b, &f, Some(Arc::new(move |_| gv)), &grid)?;
    let max = discrete_maximum_check(&sol, &f)?;
    let mut t = Table::new(&["x", "u"]);
    for (i, v) in sol.u.values.iter().enumerate() {
        t.rows.push(vec![sol.u.node(i), *v]);
    }
    Ok(OpOutput {
        record: json!({"residual": sol.residual, "n": grid.n, "maximum": max, "sup": sol.u.sup_norm()}),
        table: Some(t),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BarrierParams {
    s: Vec<f64>,
    /// Exponents q per s; A(s) alone when absent.
    #[serde(default)]
    q: Option<Vec<f64>>,
}

fn op_barrier(cfg: &ExperimentConfig) -> Result<OpOutput, OpError> {
    let p: BarrierParams = params(cfg)?;
    let mut t = Table::new(&["s", "q", "A", "B", "error"]);
    let mut recs = Vec::new();
    for &s in &p.s {
        let qs = p.q.clone().unwrap_or_else(|| vec![s]);
        for q in qs {
            let r = barrier_integrals(s, q)?;
            t.rows.push(vec![r.s, r.q, r.a, r.b, r.error]);
            recs.push(r);
        }
    }
    Ok(OpOutput {
        record: json!({"integrals": recs}),
        table: Some(t),
    })
}

/// Dispatches one (non-sweep) configuration.
pub fn run_operation(op: &str, cfg: &ExperimentConfig, seed: u64) -> Result<OpOutput, OpError> {
    match op {
        "validate" => op_validate(cfg),
        "generator" => op_generator(cfg),
        "dirichlet" => op_dirichlet(cfg, seed),
        "exit-moments" => op_exit_moments(cfg, seed),
        "boundary-decay" => op_boundary_decay(cfg, seed),
        "harnack" => op_harnack(cfg, seed),
        "cone" => op_cone(cfg, seed),
        "hitting" => op_hitting(cfg, seed),
        "lyapunov" => op_lyapunov(cfg),
        "invariant" => op_invariant(cfg, seed),
        "fd-solve" => op_fd_solve(cfg),
        "barrier" => op_barrier(cfg),
        other => Err(OpError::Validation(format!("unknown operation `{other}`"))),
    }
}
