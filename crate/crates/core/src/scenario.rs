//! Scenario files and the end-to-end pipeline: reference construction,
//! scheduling, device response, filtering, scoring, and output files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fleet::{
    respond, rules_of_thumb, schedule, two_stage_target, DerType, Event, EventKind, Fleet,
    Schedule, SchedulePlan, SolverPlan,
};
use crate::graph::CommGraph;
use crate::market::{estimate_revenue, Credits, MarketInputs, RevenueEstimate};
use crate::measure::{moving_average, FilterSpec};
use crate::metrics::{
    pjm_score, rmse, shift_align, tracking_delay, MseAccumulator, PjmOptions, PjmScore,
};
use crate::problem::CostFunction;
use crate::signal::{compose_target, fmt_num, interpolate_2x, normalize_inf, SignalTrace};
use crate::solvers::{Algorithm, Execution, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StageMode {
    #[default]
    Single,
    Two,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_beta")]
    beta: f64,
    #[serde(default)]
    stage: StageMode,
    output: Option<PathBuf>,
    signal: RawSignal,
    fleet: RawFleet,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    costs: BTreeMap<DerType, RawCost>,
    #[serde(default)]
    filters: BTreeMap<DerType, FilterSpec>,
    #[serde(default)]
    metrics: RawMetrics,
    market: Option<RawMarket>,
}

fn default_beta() -> f64 {
    0.75
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSignal {
    regd: PathBuf,
    pv: Option<PathBuf>,
    building: Option<PathBuf>,
    #[serde(default = "one")]
    pv_weight: f64,
    #[serde(default = "one")]
    building_weight: f64,
    #[serde(default = "twenty")]
    passive_window: usize,
}

fn one() -> f64 {
    1.0
}

fn twenty() -> usize {
    20
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFleet {
    file: PathBuf,
    #[serde(default = "nine")]
    nodes: usize,
    /// Explicit edge list of 1-based node numbers; a ring when absent.
    edges: Option<Vec<[usize; 2]>>,
    #[serde(default = "one")]
    upscale_factor: f64,
    #[serde(default = "default_fast")]
    fast_types: Vec<DerType>,
    #[serde(default = "default_stage1")]
    stage1_types: Vec<DerType>,
}

fn nine() -> usize {
    9
}

fn default_fast() -> Vec<DerType> {
    vec![DerType::V2g, DerType::Bess]
}

fn default_stage1() -> Vec<DerType> {
    vec![DerType::Ahu]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    algorithm: String,
    budget: usize,
    pd_step: f64,
    dana_step: f64,
    dana_depth: usize,
    informed: Vec<String>,
    parallel: bool,
    residual_instants: Vec<usize>,
}

impl Default for RawSolver {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            algorithm: "all".into(),
            budget: d.budget,
            pd_step: d.pd_step,
            dana_step: d.dana_step,
            dana_depth: d.dana_depth,
            informed: Vec::new(),
            parallel: false,
            residual_instants: Vec::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCost {
    a: f64,
    #[serde(default)]
    b: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawMetrics {
    max_shift: usize,
    clip_delay: bool,
}

impl Default for RawMetrics {
    fn default() -> Self {
        let d = PjmOptions::default();
        Self {
            max_shift: d.max_shift,
            clip_delay: d.clip_delay,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum MarketMode {
    Direct,
    Prices,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarket {
    mode: MarketMode,
    capability: f64,
    performance: f64,
    capacity_kw: Option<f64>,
}

/// Validated scenario. Fields are public so callers can override them
/// before running.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub path: PathBuf,
    pub seed: u64,
    pub beta: f64,
    pub stage: StageMode,
    pub output: Option<PathBuf>,
    pub regd: PathBuf,
    pub pv: Option<PathBuf>,
    pub building: Option<PathBuf>,
    pub pv_weight: f64,
    pub building_weight: f64,
    pub passive_window: usize,
    pub fleet: Fleet,
    pub graph: CommGraph,
    pub upscale_factor: f64,
    pub fast_types: Vec<DerType>,
    pub stage1_types: Vec<DerType>,
    pub solver_plan: SolverPlan,
    pub solver: SolverConfig,
    pub residual_instants: Vec<usize>,
    pub costs: BTreeMap<DerType, CostFunction>,
    pub filters: BTreeMap<DerType, FilterSpec>,
    pub pjm: PjmOptions,
    pub market: Option<MarketInputs>,
}

/// Parses `all` or an algorithm name.
pub fn parse_solver_plan(s: &str) -> Result<SolverPlan> {
    if s.eq_ignore_ascii_case("all") {
        Ok(SolverPlan::Thirds)
    } else {
        Ok(SolverPlan::Single(s.parse::<Algorithm>()?))
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// First line whose key is `key`, for diagnostics raised after parsing.
fn line_of_key(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('=') || rest.starts_with(']'))
                || t.trim_start_matches('[').starts_with(key)
        })
        .map_or(0, |i| i + 1)
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses scenario text; relative paths resolve against `path`'s
    /// directory.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg_err = |line: usize, message: String| Error::Config {
            path: path.to_path_buf(),
            line,
            message,
        };
        let raw: RawScenario = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of_offset(text, s.start));
            cfg_err(line, e.message().to_string())
        })?;
        let at = |key: &str, e: Error| cfg_err(line_of_key(text, key), e.to_string());
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };

        if !(raw.beta > 0.0 && raw.beta < 1.0) {
            return Err(cfg_err(
                line_of_key(text, "beta"),
                format!("beta must lie in (0, 1), got {}", raw.beta),
            ));
        }
        if raw.signal.passive_window == 0 {
            return Err(cfg_err(
                line_of_key(text, "passive_window"),
                "passive_window must be at least 1".into(),
            ));
        }
        let n = raw.fleet.nodes;
        let graph = match &raw.fleet.edges {
            None => CommGraph::ring(n),
            Some(edges) => {
                let mut zero_based = Vec::with_capacity(edges.len());
                for &[a, b] in edges {
                    if a == 0 || b == 0 {
                        return Err(cfg_err(
                            line_of_key(text, "edges"),
                            "edge endpoints are 1-based".into(),
                        ));
                    }
                    zero_based.push((a - 1, b - 1));
                }
                CommGraph::from_edges(n, &zero_based)
            }
        }
        .map_err(|e| at("nodes", e))?;
        let fleet_path = resolve(&raw.fleet.file);
        let fleet = Fleet::read_csv(&fleet_path, n)?;
        if !(raw.fleet.upscale_factor >= 1.0 && raw.fleet.upscale_factor.is_finite()) {
            return Err(cfg_err(
                line_of_key(text, "upscale_factor"),
                format!(
                    "upscale_factor must be at least 1, got {}",
                    raw.fleet.upscale_factor
                ),
            ));
        }

        let solver_plan =
            parse_solver_plan(&raw.solver.algorithm).map_err(|e| at("algorithm", e))?;
        let mut informed = Vec::new();
        for label in &raw.solver.informed {
            let t = label.trim();
            let k = t
                .strip_prefix('C')
                .unwrap_or(t)
                .parse::<usize>()
                .ok()
                .filter(|&k| k >= 1 && k <= n)
                .ok_or_else(|| {
                    cfg_err(
                        line_of_key(text, "informed"),
                        format!("bad informed node `{label}`"),
                    )
                })?;
            informed.push(k - 1);
        }
        let solver = SolverConfig {
            budget: raw.solver.budget,
            pd_step: raw.solver.pd_step,
            dana_step: raw.solver.dana_step,
            dana_depth: raw.solver.dana_depth,
            informed: if informed.is_empty() {
                None
            } else {
                Some(informed)
            },
            execution: if raw.solver.parallel {
                Execution::Parallel
            } else {
                Execution::Sequential
            },
        };
        let key = if solver.budget == 0 {
            "budget"
        } else {
            "solver"
        };
        solver.validate().map_err(|e| at(key, e))?;

        let mut costs = BTreeMap::new();
        for (t, c) in &raw.costs {
            let f = CostFunction::quadratic(c.a, c.b).map_err(|e| at(t.name(), e))?;
            costs.insert(*t, f);
        }
        for (t, f) in &raw.filters {
            f.validate()
                .map_err(|e| at(&format!("filters.{}", t.name()), e))?;
        }
        let market = match raw.market {
            None => None,
            Some(m) => {
                let credits = match m.mode {
                    MarketMode::Direct => Credits::Direct {
                        capability: m.capability,
                        performance: m.performance,
                    },
                    MarketMode::Prices => Credits::Prices {
                        capability: m.capability,
                        performance: m.performance,
                    },
                };
                if m.capability < 0.0 || m.performance < 0.0 {
                    return Err(cfg_err(
                        line_of_key(text, "capability"),
                        "market values must be nonnegative".into(),
                    ));
                }
                Some(MarketInputs {
                    capacity_kw: m.capacity_kw.unwrap_or_else(|| fleet.total_rating()),
                    score: 0.0,
                    credits,
                })
            }
        };
        Ok(Self {
            name: raw.name,
            path: path.to_path_buf(),
            seed: raw.seed,
            beta: raw.beta,
            stage: raw.stage,
            output: raw.output.as_deref().map(resolve),
            regd: resolve(&raw.signal.regd),
            pv: raw.signal.pv.as_deref().map(resolve),
            building: raw.signal.building.as_deref().map(resolve),
            pv_weight: raw.signal.pv_weight,
            building_weight: raw.signal.building_weight,
            passive_window: raw.signal.passive_window,
            fleet,
            graph,
            upscale_factor: raw.fleet.upscale_factor,
            fast_types: raw.fleet.fast_types,
            stage1_types: raw.fleet.stage1_types,
            solver_plan,
            solver,
            residual_instants: raw.solver.residual_instants,
            costs,
            filters: raw.filters,
            pjm: PjmOptions {
                max_shift: raw.metrics.max_shift,
                clip_delay: raw.metrics.clip_delay,
            },
            market,
        })
    }

    fn node_costs(&self) -> Vec<CostFunction> {
        let unit = CostFunction::quadratic(1.0, 0.0).expect("positive curvature");
        self.fleet
            .node_types()
            .into_iter()
            .map(|t| t.and_then(|t| self.costs.get(&t).copied()).unwrap_or(unit))
            .collect()
    }

    /// The 1 Hz reference: RegD plus normalized passive traces, scaled to
    /// `beta` times the fleet capacity.
    pub fn reference(&self) -> Result<SignalTrace> {
        let regd = SignalTrace::read_csv(&self.regd)?;
        let regd = if (regd.period() - 2.0).abs() < 1e-9 {
            interpolate_2x(&regd)?
        } else if (regd.period() - 1.0).abs() < 1e-9 {
            regd
        } else {
            return Err(Error::Csv {
                path: self.regd.clone(),
                message: format!(
                    "RegD must be sampled at 0.5 Hz or 1 Hz, found period {} s",
                    regd.period()
                ),
            });
        };
        let passive = |path: &Option<PathBuf>, weight: f64| -> Result<SignalTrace> {
            let Some(path) = path else {
                return Ok(SignalTrace::zeros(regd.len()));
            };
            let t = SignalTrace::read_csv(path)?;
            if t.len() != regd.len() || (t.period() - 1.0).abs() > 1e-9 {
                return Err(Error::Csv {
                    path: path.clone(),
                    message: format!(
                        "expected {} samples at 1 Hz, found {} at period {} s",
                        regd.len(),
                        t.len(),
                        t.period()
                    ),
                });
            }
            let t = normalize_inf(&t, weight)?;
            t.with_values(moving_average(t.values(), self.passive_window)?)
        };
        let pv = passive(&self.pv, self.pv_weight)?;
        let building = passive(&self.building, self.building_weight)?;
        compose_target(
            &regd,
            &pv,
            &building,
            self.fleet.total_capacity(),
            self.beta,
        )
    }

    fn device_seed(&self, device: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(device as u64 + 1);
        rng.next_u64()
    }
}

/// Tracking of one DER group (or the total).
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingRow {
    pub label: String,
    pub rmse: f64,
    /// RMSE after advancing the measurement by `delay_s`.
    pub rmse_shifted: f64,
    pub delay_s: usize,
}

/// Everything produced by one scenario run.
#[derive(Debug, Clone)]
pub struct Run {
    pub name: String,
    pub stage: StageMode,
    pub target: Vec<f64>,
    pub device_ids: Vec<String>,
    pub commanded: Vec<Vec<f64>>,
    pub measured: Vec<Vec<f64>>,
    pub group_types: Vec<DerType>,
    pub group_commanded: Vec<Vec<f64>>,
    pub group_measured: Vec<Vec<f64>>,
    pub total_measured: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    /// Normalized MSE per algorithm and group; `None` for groups with no
    /// energy in the true solution.
    pub cyber: BTreeMap<Algorithm, Vec<(String, Option<f64>)>>,
    pub tracking: Vec<TrackingRow>,
    pub total_rmse: f64,
    pub score: PjmScore,
    pub revenue: Option<RevenueEstimate>,
    pub events: Vec<Event>,
    pub warnings: Vec<String>,
    pub dispatches: usize,
    pub residuals: Vec<(usize, Algorithm, Vec<f64>)>,
}

fn sum_rows<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    out
}

fn group_row(
    label: &str,
    measured: &[f64],
    commanded: &[f64],
    max_shift: usize,
) -> Result<TrackingRow> {
    let rmse_raw = rmse(measured, commanded)?;
    let delay_s = tracking_delay(measured, commanded, max_shift)?;
    let (m, c) = shift_align(measured, commanded, delay_s)?;
    Ok(TrackingRow {
        label: label.to_string(),
        rmse: rmse_raw,
        rmse_shifted: rmse(&m, &c)?,
        delay_s,
    })
}

/// Runs the full pipeline in memory.
pub fn simulate(sc: &Scenario) -> Result<Run> {
    let reference = sc.reference()?;
    let target = reference.values().to_vec();
    let horizon = target.len();
    let fleet = &sc.fleet;
    let devices = fleet.devices();
    let mut plan = SchedulePlan {
        graph: &sc.graph,
        solver: sc.solver_plan,
        config: sc.solver.clone(),
        node_costs: sc.node_costs(),
        upscale_factor: sc.upscale_factor,
        fast_types: sc.fast_types.clone(),
        active: None,
        keep_residuals: sc.residual_instants.clone(),
    };
    let first = schedule(fleet, &target, &plan)?;
    let seeds: Vec<u64> = (0..devices.len()).map(|d| sc.device_seed(d)).collect();
    let simulate_devices = |commanded: &[Vec<f64>]| -> Vec<Vec<f64>> {
        commanded
            .par_iter()
            .zip(devices.par_iter())
            .zip(seeds.par_iter())
            .map(|((c, d), &s)| respond(c, &d.response, s))
            .collect()
    };
    let mut commanded = first.commanded.clone();
    let mut measured = simulate_devices(&commanded);
    let group_types = fleet.types();
    let filtered_group = |t: DerType, measured: &[Vec<f64>]| -> Result<Vec<f64>> {
        let raw = sum_rows(
            measured
                .iter()
                .zip(devices)
                .filter(|(_, d)| d.der_type == t)
                .map(|(m, _)| m),
            horizon,
        );
        sc.filters.get(&t).cloned().unwrap_or_default().apply(&raw)
    };

    let mut events = first.events.clone();
    let mut warnings = Vec::new();
    let mut residuals = first.residuals.clone();
    let mut dispatches = first.dispatches.len();
    // Node-level cyber records: which pass each node's records come from.
    let mut second: Option<Schedule> = None;
    let stage1_node: Vec<bool> = fleet
        .node_types()
        .iter()
        .map(|t| t.is_some_and(|t| sc.stage1_types.contains(&t)))
        .collect();

    if sc.stage == StageMode::Two {
        let is_stage1: Vec<bool> = devices
            .iter()
            .map(|d| sc.stage1_types.contains(&d.der_type))
            .collect();
        if !is_stage1.iter().any(|&b| b) || is_stage1.iter().all(|&b| b) {
            return Err(Error::invalid(
                "two-stage mode needs devices in both stages",
            ));
        }
        let mut stage1_measured = vec![0.0; horizon];
        for t in &sc.stage1_types {
            if fleet.count(*t) > 0 {
                for (a, v) in stage1_measured
                    .iter_mut()
                    .zip(filtered_group(*t, &measured)?)
                {
                    *a += v;
                }
            }
        }
        let (lo, hi) = devices
            .iter()
            .zip(&is_stage1)
            .filter(|(_, &s1)| !s1)
            .fold((0.0, 0.0), |(l, h), (d, _)| {
                (l + d.bounds().0, h + d.bounds().1)
            });
        let stage2 = two_stage_target(&target, &stage1_measured, lo, hi)?;
        for &k in &stage2.clamped {
            events.push(Event {
                t_s: k,
                kind: EventKind::StageClamp,
                detail: "stage-2 target exceeds stage-2 range".into(),
            });
        }
        plan.active = Some(is_stage1.iter().map(|&s| !s).collect());
        let pass = schedule(fleet, &stage2.target, &plan)?;
        for d in 0..devices.len() {
            if !is_stage1[d] {
                commanded[d] = pass.commanded[d].clone();
            }
        }
        measured = simulate_devices(&commanded);
        events.extend(pass.events.iter().cloned());
        residuals.extend(pass.residuals.iter().cloned());
        dispatches += pass.dispatches.len();

        let cap1: f64 = sc.stage1_types.iter().map(|&t| fleet.capacity_of(t)).sum();
        let cap2 = fleet.total_capacity() - cap1;
        let s1_cmd = sum_rows(
            commanded
                .iter()
                .zip(&is_stage1)
                .filter(|(_, &s)| s)
                .map(|(c, _)| c),
            horizon,
        );
        let s1_rmse = group_row("stage1", &stage1_measured, &s1_cmd, sc.pjm.max_shift)
            .map(|r| r.rmse_shifted)
            .unwrap_or(f64::INFINITY);
        warnings.extend(rules_of_thumb(cap1, cap2, s1_rmse));
        second = Some(pass);
    }

    let mut group_commanded = Vec::new();
    let mut group_measured = Vec::new();
    let mut tracking = Vec::new();
    for &t in &group_types {
        let c = sum_rows(
            commanded
                .iter()
                .zip(devices)
                .filter(|(_, d)| d.der_type == t)
                .map(|(c, _)| c),
            horizon,
        );
        let m = filtered_group(t, &measured)?;
        match group_row(t.name(), &m, &c, sc.pjm.max_shift) {
            Ok(row) => tracking.push(row),
            Err(e) => warnings.push(format!("{t}: tracking metrics unavailable ({e})")),
        }
        group_commanded.push(c);
        group_measured.push(m);
    }
    let total_measured = sum_rows(group_measured.iter(), horizon);
    let total_rmse = rmse(&total_measured, &target)?;
    tracking.push(TrackingRow {
        label: "Total".into(),
        rmse: total_rmse,
        rmse_shifted: total_rmse,
        delay_s: 0,
    });
    let score = pjm_score(&total_measured, &target, sc.pjm)?;

    // Cyber layer: node allocations grouped by DER type and algorithm.
    let node_types = fleet.node_types();
    let mut acc: BTreeMap<Algorithm, BTreeMap<Option<DerType>, MseAccumulator>> = BTreeMap::new();
    for k in 0..horizon {
        for (node, t) in node_types.iter().enumerate() {
            let src = match &second {
                Some(pass) if !stage1_node[node] => pass,
                _ => &first,
            };
            let alg = src.algorithms[k];
            let e = acc.entry(alg).or_default();
            for key in [*t, None] {
                e.entry(key)
                    .or_default()
                    .add(src.node_distributed[k][node], src.node_true[k][node]);
            }
        }
    }
    let cyber = acc
        .into_iter()
        .map(|(alg, groups)| {
            let mut rows: Vec<(String, Option<f64>)> = group_types
                .iter()
                .map(|t| {
                    (
                        t.name().to_string(),
                        groups.get(&Some(*t)).and_then(|a| a.value().ok()),
                    )
                })
                .collect();
            rows.push((
                "Total".into(),
                groups.get(&None).and_then(|a| a.value().ok()),
            ));
            (alg, rows)
        })
        .collect();

    let revenue = match sc.market {
        Some(m) => {
            let est = estimate_revenue(&MarketInputs {
                score: score.score.clamp(0.0, 1.0),
                ..m
            })?;
            if let Some(w) = &est.warning {
                warnings.push(w.clone());
            }
            Some(est)
        }
        None => None,
    };
    for w in &warnings {
        events.push(Event {
            t_s: 0,
            kind: EventKind::Warning,
            detail: w.clone(),
        });
    }
    events.sort_by_key(|e| (e.t_s, e.kind));

    Ok(Run {
        name: sc.name.clone(),
        stage: sc.stage,
        target,
        device_ids: devices.iter().map(|d| d.id.clone()).collect(),
        commanded,
        measured,
        group_types,
        group_commanded,
        group_measured,
        total_measured,
        algorithms: first.algorithms.clone(),
        cyber,
        tracking,
        total_rmse,
        score,
        revenue,
        events,
        warnings,
        dispatches,
        residuals,
    })
}

fn write_trace(path: &Path, values: &[f64]) -> Result<()> {
    SignalTrace::from_values(values.to_vec())?.write_csv(path)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:e}"))
}

impl Run {
    pub fn tracking_of(&self, label: &str) -> Option<&TrackingRow> {
        self.tracking.iter().find(|r| r.label == label)
    }

    /// Writes every output file under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        mkdir(dir)?;
        mkdir(&dir.join("devices"))?;
        mkdir(&dir.join("groups"))?;
        write_trace(&dir.join("target.csv"), &self.target)?;
        for (i, id) in self.device_ids.iter().enumerate() {
            write_trace(
                &dir.join("devices").join(format!("{id}_commanded.csv")),
                &self.commanded[i],
            )?;
            write_trace(
                &dir.join("devices").join(format!("{id}_measured.csv")),
                &self.measured[i],
            )?;
        }
        for (i, t) in self.group_types.iter().enumerate() {
            write_trace(
                &dir.join("groups").join(format!("{t}_commanded.csv")),
                &self.group_commanded[i],
            )?;
            write_trace(
                &dir.join("groups").join(format!("{t}_measured.csv")),
                &self.group_measured[i],
            )?;
        }
        write_trace(&dir.join("total_measured.csv"), &self.total_measured)?;

        let algs: Vec<Algorithm> = self.cyber.keys().copied().collect();
        let mut s = String::from("der_type");
        for a in &algs {
            let _ = write!(s, ",{a}");
        }
        s.push('\n');
        let labels: Vec<String> = self.cyber.values().next().map_or_else(Vec::new, |rows| {
            rows.iter().map(|(l, _)| l.clone()).collect()
        });
        for (i, label) in labels.iter().enumerate() {
            s.push_str(label);
            for a in &algs {
                let _ = write!(s, ",{}", fmt_opt(self.cyber[a][i].1));
            }
            s.push('\n');
        }
        write_text(&dir.join("cyber_mse.csv"), &s)?;

        let mut s = String::from("der_type,rmse,rmse_shifted,delay_s\n");
        for r in &self.tracking {
            let delay = if r.label == "Total" {
                "NA".to_string()
            } else {
                r.delay_s.to_string()
            };
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.label,
                fmt_num(r.rmse),
                fmt_num(r.rmse_shifted),
                delay
            );
        }
        write_text(&dir.join("tracking.csv"), &s)?;

        let mut s = String::from("metric,value\n");
        let sc = &self.score;
        for (k, v) in [
            ("correlation_score", fmt_num(sc.correlation)),
            ("delay_score", fmt_num(sc.delay)),
            ("precision_score", fmt_num(sc.precision)),
            ("performance_score", fmt_num(sc.score)),
            ("correlation_delay_s", sc.delay_s.to_string()),
            ("eligible", sc.eligible.to_string()),
            ("total_rmse", fmt_num(self.total_rmse)),
        ] {
            let _ = writeln!(s, "{k},{v}");
        }
        if let Some(r) = &self.revenue {
            let _ = writeln!(s, "daily_capability_credit,{}", fmt_num(r.daily.capability));
            let _ = writeln!(
                s,
                "daily_performance_credit,{}",
                fmt_num(r.daily.performance)
            );
            let _ = writeln!(s, "annual_revenue,{}", fmt_num(r.annual));
        }
        write_text(&dir.join("score.csv"), &s)?;

        let mut s = String::from("t_s,kind,detail\n");
        for e in &self.events {
            let _ = writeln!(s, "{},{},\"{}\"", e.t_s, e.kind, e.detail.replace('"', "'"));
        }
        write_text(&dir.join("events.csv"), &s)?;

        emit_plot_data(self, &dir.join("plot"))?;

        if !self.residuals.is_empty() {
            let rdir = dir.join("residuals");
            mkdir(&rdir)?;
            for (k, alg, r) in &self.residuals {
                let mut s = String::from("round,residual\n");
                for (i, v) in r.iter().enumerate() {
                    let _ = writeln!(s, "{},{v:e}", i + 1);
                }
                write_text(&rdir.join(format!("t{k}_{alg}.csv")), &s)?;
            }
        }
        write_text(&dir.join("report.txt"), &self.report())
    }

    /// Human-readable summary.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.name);
        let _ = writeln!(
            s,
            "stage: {}",
            match self.stage {
                StageMode::Single => "single",
                StageMode::Two => "two",
            }
        );
        let _ = writeln!(
            s,
            "instants: {}   dispatch batches: {}",
            self.target.len(),
            self.dispatches
        );
        let _ = writeln!(s, "\ncyber layer (normalized MSE vs centralized)");
        let algs: Vec<&Algorithm> = self.cyber.keys().collect();
        let _ = write!(s, "  {:<8}", "group");
        for a in &algs {
            let _ = write!(s, "{:>12}", a.name().to_uppercase());
        }
        s.push('\n');
        if let Some(rows) = self.cyber.values().next() {
            for (i, (label, _)) in rows.iter().enumerate() {
                let _ = write!(s, "  {label:<8}");
                for a in &algs {
                    let v = self.cyber[a][i].1;
                    let _ = write!(s, "{:>12}", v.map_or("NA".into(), |x| format!("{x:.2e}")));
                }
                s.push('\n');
            }
        }
        let _ = writeln!(s, "\nphysical layer");
        let _ = writeln!(
            s,
            "  {:<8}{:>10}{:>14}{:>10}",
            "group", "RMSE", "RMSE shifted", "delay s"
        );
        for r in &self.tracking {
            let delay = if r.label == "Total" {
                "NA".to_string()
            } else {
                r.delay_s.to_string()
            };
            let _ = writeln!(
                s,
                "  {:<8}{:>10.4}{:>14.4}{:>10}",
                r.label, r.rmse, r.rmse_shifted, delay
            );
        }
        let sc = &self.score;
        let _ = writeln!(
            s,
            "\nperformance score: S = {:.4} (S_c {:.4}, S_d {:.4}, S_p {:.4}, delay {} s) {}",
            sc.score,
            sc.correlation,
            sc.delay,
            sc.precision,
            sc.delay_s,
            if sc.eligible {
                "eligible"
            } else {
                "not eligible"
            }
        );
        if let Some(r) = &self.revenue {
            let _ = writeln!(
                s,
                "daily credits: capability {:.2}, performance {:.2}; annual revenue {:.2}",
                r.daily.capability, r.daily.performance, r.annual
            );
        }
        let clamps = self
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Clamp)
            .count();
        let stage_clamps = self
            .events
            .iter()
            .filter(|e| e.kind == EventKind::StageClamp)
            .count();
        let _ = writeln!(
            s,
            "\nclamped instants: {clamps}   stage-2 clamps: {stage_clamps}"
        );
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Per-group and total target-vs-measured series, with the measurement
/// advanced by the group's estimated delay. Shifted cells past the end of
/// the record are left empty.
pub fn emit_plot_data(run: &Run, dir: &Path) -> Result<()> {
    if run.target.is_empty() {
        return Err(Error::invalid("empty run"));
    }
    mkdir(dir)?;
    let mut series: Vec<(String, &[f64], &[f64], usize)> = run
        .group_types
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let delay = run.tracking_of(t.name()).map_or(0, |r| r.delay_s);
            (
                t.name().to_string(),
                &run.group_commanded[i][..],
                &run.group_measured[i][..],
                delay,
            )
        })
        .collect();
    series.push(("total".into(), &run.target[..], &run.total_measured[..], 0));
    for (label, target, measured, delay) in series {
        let mut s = String::from("t_s,target,measured,measured_shifted\n");
        for k in 0..target.len() {
            let shifted = measured
                .get(k + delay)
                .map_or(String::new(), |v| fmt_num(*v));
            let _ = writeln!(
                s,
                "{k},{},{},{shifted}",
                fmt_num(target[k]),
                fmt_num(measured[k])
            );
        }
        write_text(&dir.join(format!("{label}.csv")), &s)?;
    }
    Ok(())
}

/// Simulates and writes outputs to `out`.
pub fn run_scenario(sc: &Scenario, out: &Path) -> Result<Run> {
    let run = simulate(sc)?;
    run.write(out)?;
    Ok(run)
}
