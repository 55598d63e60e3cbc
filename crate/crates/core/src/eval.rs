//! Unlearning metrics, the experiment driver and the alignment-bias sweep.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{validate_config, RunConfig};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg;
use crate::objective::{closed_form_optimum, global_grad, global_loss, loss_local, ObjectiveKind};
use crate::protocols::{
    rrdu_sigma, run_ddp_netdp, run_finetune, run_net_sgd, run_retrain_certifier, run_rrdu_with_sigma, RrduKernel,
};
use crate::rng::SeedTree;
use crate::tasks::{build_task, Task};
use crate::types::{ClientId, FeasibleRegion, Mode, ModelState, Subset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// Held-out accuracy; `None` for the quadratic task.
    pub clean_accuracy: Option<f64>,
    /// Agreement with the poisoned labels on `D_f`; `None` without labels
    /// or without a forget set.
    pub forget_accuracy: Option<f64>,
    pub retained_loss: f64,
    pub forget_loss: Option<f64>,
    pub param_distance_to_certifier: f64,
    /// `L_{∖f}(θ) − L_{∖f}(θ*_{∖f})`; quadratic task only.
    pub excess_risk: Option<f64>,
}

/// Metrics of `model` on `task`, relative to the certifier endpoint.
pub fn evaluate(model: &ModelState, task: &Task, u: ClientId, certifier: &ModelState) -> Result<Metrics> {
    if task.test.is_empty() {
        return Err(Error::EmptySubset("test set is empty"));
    }
    let obj = &task.objective;
    let theta = model.params();
    let data_u = &task.datasets[u.index()];
    let classify = obj.kind == ObjectiveKind::Logistic;
    let accuracy = |examples: &mut dyn Iterator<Item = &crate::types::Example>| -> f64 {
        let (mut hit, mut total) = (0usize, 0usize);
        for e in examples {
            total += 1;
            if obj.predict(theta, &e.features) == e.label {
                hit += 1;
            }
        }
        hit as f64 / total as f64
    };
    let clean_accuracy = classify.then(|| accuracy(&mut task.test.iter()));
    let forget_accuracy = (classify && data_u.forget_len() > 0)
        .then(|| accuracy(&mut data_u.forget_indices().iter().map(|&i| data_u.example(i))));
    let forget_loss = if data_u.forget_len() > 0 {
        Some(loss_local(obj, data_u, model, Subset::Forget)?)
    } else {
        None
    };
    let retained_loss = global_loss(obj, &task.datasets, model, true)?;
    let excess_risk = if obj.kind == ObjectiveKind::Quadratic {
        let star = closed_form_optimum(obj, &task.datasets, true, &task.region)?;
        Some(retained_loss - global_loss(obj, &task.datasets, &star, true)?)
    } else {
        None
    };
    Ok(Metrics {
        clean_accuracy,
        forget_accuracy,
        retained_loss,
        forget_loss,
        param_distance_to_certifier: linalg::dist(theta, certifier.params()),
        excess_risk,
    })
}

/// Post-training procedure compared against the certifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rrdu,
    Finetune,
    Ddp,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rrdu" => Ok(Method::Rrdu),
            "finetune" => Ok(Method::Finetune),
            "ddp" => Ok(Method::Ddp),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Rrdu => "rrdu",
            Method::Finetune => "finetune",
            Method::Ddp => "ddp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pre,
    Post,
    Certifier,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
            Phase::Certifier => "certifier",
        })
    }
}

/// Base config, sweep axes and seeds. Axis keys are config keys or
/// `method`; every combination of axis values is one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: RunConfig,
    pub axes: Vec<(String, Vec<String>)>,
    pub seeds: Vec<u64>,
}

/// One concrete `(axis values, seed)` combination.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SweepPoint {
    /// Position of each axis value in its axis, for ordering.
    pub order: Vec<usize>,
    pub values: Vec<(String, String)>,
    pub seed: u64,
}

impl SweepPoint {
    /// File-name-safe identifier.
    pub fn id(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            let _ = write!(s, "{k}={v}_");
        }
        let _ = write!(s, "seed={}", self.seed);
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || "=._-".contains(c) { c } else { '-' })
            .collect()
    }
}

impl ExperimentSpec {
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut combos: Vec<(Vec<usize>, Vec<(String, String)>)> = vec![(Vec::new(), Vec::new())];
        for (key, values) in &self.axes {
            let mut next = Vec::with_capacity(combos.len() * values.len());
            for (order, vals) in &combos {
                for (i, v) in values.iter().enumerate() {
                    let mut o = order.clone();
                    o.push(i);
                    let mut vs = vals.clone();
                    vs.push((key.clone(), v.clone()));
                    next.push((o, vs));
                }
            }
            combos = next;
        }
        let mut points = Vec::new();
        for (order, values) in combos {
            for &seed in &self.seeds {
                points.push(SweepPoint { order: order.clone(), values: values.clone(), seed });
            }
        }
        points
    }

    /// Config and method for one point, validated.
    pub fn resolve(&self, point: &SweepPoint) -> Result<(RunConfig, Method)> {
        let mut cfg = self.base.clone();
        let mut method = Method::Rrdu;
        for (k, v) in &point.values {
            if k == "method" {
                method = v.parse()?;
            } else {
                cfg.set(k, v).map_err(|msg| Error::InvalidArgument(format!("axis {k}: {msg}")))?;
            }
        }
        cfg.seed = point.seed;
        Ok((validate_config(cfg)?, method))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub phase: Phase,
    pub metrics: Metrics,
    pub epsilon_achieved: Option<f64>,
    pub sigma_used: Option<f64>,
}

/// Rows for `pre`, `post` and `certifier` at one config.
pub fn run_point(cfg: &RunConfig, method: Method) -> Result<Vec<ExperimentRow>> {
    let task = build_task(cfg)?;
    let u = cfg.unlearning_client;
    let trained = run_net_sgd(cfg, &task, false)?;
    let theta0 = &trained.model;
    let (post, cert_cfg, cert_sigma) = match method {
        Method::Rrdu => {
            let sigma = rrdu_sigma(cfg, task.objective.lipschitz)?;
            (run_rrdu_with_sigma(cfg, &task, theta0, theta0, sigma, false)?, cfg.clone(), sigma)
        }
        Method::Finetune => {
            let r = run_finetune(cfg, &task, theta0, false)?;
            (r, RunConfig { p: 0.0, ..cfg.clone() }, 0.0)
        }
        Method::Ddp => {
            let sigma = rrdu_sigma(cfg, task.objective.lipschitz)?;
            (run_ddp_netdp(cfg, &task, cfg.rounds + cfg.unlearn_rounds, false)?, cfg.clone(), sigma)
        }
    };
    let cert = run_retrain_certifier(&cert_cfg, &task, cert_sigma, false)?;
    let reference = &cert.unlearned.model;
    let eps = |r: &crate::protocols::RunResult| r.report.as_ref().map(|x| x.guarantee.epsilon);
    Ok(vec![
        ExperimentRow {
            phase: Phase::Pre,
            metrics: evaluate(theta0, &task, u, reference)?,
            epsilon_achieved: None,
            sigma_used: None,
        },
        ExperimentRow {
            phase: Phase::Post,
            metrics: evaluate(&post.model, &task, u, reference)?,
            epsilon_achieved: eps(&post),
            sigma_used: Some(post.sigma),
        },
        ExperimentRow {
            phase: Phase::Certifier,
            metrics: evaluate(reference, &task, u, reference)?,
            epsilon_achieved: eps(&cert.unlearned),
            sigma_used: Some(cert.unlearned.sigma),
        },
    ])
}

pub const METRIC_COLUMNS: &str =
    "seed,phase,clean_acc,forget_acc,retained_loss,forget_loss,param_dist,excess_risk,epsilon_achieved,sigma_used";

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn csv_header(spec: &ExperimentSpec) -> String {
    let mut h = String::new();
    for (k, _) in &spec.axes {
        h.push_str(k);
        h.push(',');
    }
    h.push_str(METRIC_COLUMNS);
    h
}

pub fn csv_lines(point: &SweepPoint, rows: &[ExperimentRow]) -> Vec<String> {
    rows.iter()
        .map(|r| {
            let mut line = String::new();
            for (_, v) in &point.values {
                line.push_str(v);
                line.push(',');
            }
            let m = &r.metrics;
            let _ = write!(
                line,
                "{},{},{},{},{},{},{},{},{},{}",
                point.seed,
                r.phase,
                opt(m.clean_accuracy),
                opt(m.forget_accuracy),
                fmt_f64(m.retained_loss),
                opt(m.forget_loss),
                fmt_f64(m.param_distance_to_certifier),
                opt(m.excess_risk),
                opt(r.epsilon_achieved),
                opt(r.sigma_used)
            );
            line
        })
        .collect()
}

/// Runs every point of `spec` and returns the CSV text (header included),
/// ordered by axis values, then seed, then phase.
///
/// With `resume_dir`, each finished point is stored as `<id>.csv` there and
/// points whose file already exists are read back instead of recomputed.
pub fn run_unlearning_experiment(spec: &ExperimentSpec, jobs: usize, resume_dir: Option<&Path>) -> Result<String> {
    let points = spec.points();
    // Validate everything before spending compute.
    for p in &points {
        spec.resolve(p)?;
    }
    let work = |point: &SweepPoint| -> Result<(SweepPoint, Vec<String>)> {
        if let Some(dir) = resume_dir {
            let path = dir.join(format!("{}.csv", point.id()));
            if path.exists() {
                let text = std::fs::read_to_string(&path)?;
                return Ok((point.clone(), text.lines().map(str::to_string).collect()));
            }
        }
        let (cfg, method) = spec.resolve(point)?;
        let lines = csv_lines(point, &run_point(&cfg, method)?);
        if let Some(dir) = resume_dir {
            let path = dir.join(format!("{}.csv", point.id()));
            let tmp = dir.join(format!("{}.csv.partial", point.id()));
            std::fs::write(&tmp, lines.join("\n") + "\n")?;
            std::fs::rename(tmp, path)?;
        }
        Ok((point.clone(), lines))
    };
    let results: Vec<Result<(SweepPoint, Vec<String>)>> = if jobs <= 1 {
        points.iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| points.par_iter().map(work).collect())
    };
    let mut done = results.into_iter().collect::<Result<Vec<_>>>()?;
    done.sort_by(|a, b| (&a.0.order, a.0.seed).cmp(&(&b.0.order, b.0.seed)));
    let mut out = csv_header(spec);
    out.push('\n');
    for (_, lines) in done {
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
    }
    Ok(out)
}

/// One row of the alignment-bias sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasRow {
    pub m: usize,
    /// Largest `‖E[Δθ]/η + ∇L_{∖f}(θ)‖` over the sampled `θ`.
    pub max_bias: f64,
    pub mean_bias: f64,
    /// `2·L·m/n_u`
    pub bound: f64,
}

/// Exact single-hop expected update, by enumeration of the routing law.
pub fn expected_update(kernel: &RrduKernel<'_>, theta: &ModelState, t: usize) -> Result<Vec<f64>> {
    let n = kernel.task.datasets.len();
    let eta = kernel.schedule.eta(t);
    let mut mean = vec![0.0; theta.dim()];
    for v in 1..=n {
        let v = ClientId(v);
        let w = if v == kernel.u { kernel.p } else { (1.0 - kernel.p) / (n - 1) as f64 };
        if w == 0.0 {
            continue;
        }
        let next = kernel.hop(theta, v, t)?;
        linalg::axpy(w / eta, &linalg::sub(next.params(), theta.params()), &mut mean);
    }
    Ok(mean)
}

/// Lightweight-mode alignment bias at `p = 1/N`, `σ = 0`, full batches and
/// no projection, for each forget-set size in `m_values` (`m = 0` uses the
/// EXACT path). `points` parameters are drawn uniformly from `Θ`.
pub fn alignment_bias_sweep(cfg: &RunConfig, task: &Task, m_values: &[usize], points: usize) -> Result<Vec<BiasRow>> {
    let u = cfg.unlearning_client;
    let n_u = task.datasets[u.index()].len();
    let radius = match &task.region {
        FeasibleRegion::Ball(b) => b.radius,
        _ => 1.0,
    };
    let l = task.objective.lipschitz;
    let mut rng = SeedTree::new(cfg.seed).stream("bias/theta", 0);
    let thetas: Vec<ModelState> = (0..points)
        .map(|_| {
            let mut x = rng.gaussian_vec(cfg.dim, 1.0);
            let r = radius * rng.unit().powf(1.0 / cfg.dim as f64) / linalg::norm(&x);
            linalg::scale(r, &mut x);
            ModelState::new(x)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(m_values.len());
    for &m in m_values {
        if m >= n_u {
            return Err(Error::InvalidArgument(format!("m = {m} must be below n_u = {n_u}")));
        }
        let mut datasets = task.datasets.clone();
        datasets[u.index()] = datasets[u.index()].reassign_forget((0..m).collect())?;
        let probe = Task { datasets, region: FeasibleRegion::FullSpace, ..task.clone() };
        let probe_cfg = RunConfig {
            p: 1.0 / cfg.num_clients as f64,
            sigma: Some(0.0),
            mode: if m == 0 { Mode::Exact } else { Mode::Lightweight },
            batch_size: None,
            forget_batch: None,
            trust_radius: None,
            radius: None,
            s: 1,
            ..cfg.clone()
        };
        let (mut max_bias, mut sum) = (0.0f64, 0.0);
        for theta in &thetas {
            let kernel = RrduKernel::new(&probe_cfg, &probe, theta, 0.0)?;
            let mut gap = expected_update(&kernel, theta, 1)?;
            linalg::axpy(1.0, &global_grad(&probe.objective, &probe.datasets, theta, true)?, &mut gap);
            let b = linalg::norm(&gap);
            max_bias = max_bias.max(b);
            sum += b;
        }
        rows.push(BiasRow {
            m,
            max_bias,
            mean_bias: sum / thetas.len() as f64,
            bound: 2.0 * l * m as f64 / n_u as f64,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Per-phase medians of each metric across seeds.
pub fn phase_medians(rows: &[(u64, ExperimentRow)]) -> BTreeMap<Phase, Metrics> {
    let mut by_phase: BTreeMap<Phase, Vec<Metrics>> = BTreeMap::new();
    for (_, r) in rows {
        by_phase.entry(r.phase).or_default().push(r.metrics);
    }
    by_phase
        .into_iter()
        .map(|(phase, ms)| {
            let med = |f: &dyn Fn(&Metrics) -> Option<f64>| -> Option<f64> {
                let v: Vec<f64> = ms.iter().filter_map(f).collect();
                (!v.is_empty()).then(|| median(&v))
            };
            let metrics = Metrics {
                clean_accuracy: med(&|m| m.clean_accuracy),
                forget_accuracy: med(&|m| m.forget_accuracy),
                retained_loss: med(&|m| Some(m.retained_loss)).unwrap_or(f64::NAN),
                forget_loss: med(&|m| m.forget_loss),
                param_distance_to_certifier: med(&|m| Some(m.param_distance_to_certifier)).unwrap_or(f64::NAN),
                excess_risk: med(&|m| m.excess_risk),
            };
            (phase, metrics)
        })
        .collect()
}
